#include "plab/config.hpp"

#include <cctype>
#include <cmath>
#include <type_traits>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace plab {
namespace config {

namespace {

[[noreturn]] void parse_fail(int line, const std::string& msg) {
    raise(ErrorCode::Parse, "line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Cuts a trailing comment, honoring double-quoted strings with \" escapes.
std::string strip_comment(const std::string& s, int line) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return s.substr(0, i);
        }
    }
    if (in_string) parse_fail(line, "unterminated string");
    return s;
}

std::string parse_string_token(const std::string& raw, std::size_t& pos, int line) {
    if (pos >= raw.size() || raw[pos] != '"') parse_fail(line, "expected string");
    ++pos;
    std::string out;
    while (pos < raw.size()) {
        const char c = raw[pos++];
        if (c == '\\') {
            if (pos >= raw.size()) parse_fail(line, "dangling escape in string");
            const char e = raw[pos++];
            switch (e) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: parse_fail(line, std::string("unsupported escape '\\") + e + "'");
            }
        } else if (c == '"') {
            return out;
        } else {
            out += c;
        }
    }
    parse_fail(line, "unterminated string");
}

double parse_number_token(const std::string& raw, int line) {
    if (raw.empty()) parse_fail(line, "missing value");
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (end != raw.c_str() + raw.size())
        parse_fail(line, "cannot parse value '" + raw + "'");
    if (std::isnan(v)) parse_fail(line, "NaN is not a valid config value");
    return v;
}

TomlValue parse_scalar(const std::string& raw, int line) {
    TomlValue v;
    v.line = line;
    if (!raw.empty() && raw[0] == '"') {
        std::size_t pos = 0;
        v.kind = TomlValue::Kind::String;
        v.str = parse_string_token(raw, pos, line);
        if (trim(raw.substr(pos)) != "")
            parse_fail(line, "trailing characters after string");
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = TomlValue::Kind::Boolean;
        v.boolean = (raw == "true");
        return v;
    }
    v.kind = TomlValue::Kind::Number;
    v.num = parse_number_token(raw, line);
    return v;
}

// Splits a single-line array body on commas outside strings.
std::vector<std::string> split_array_items(const std::string& body, int line) {
    std::vector<std::string> items;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (in_string) {
            cur += c;
            if (c == '\\' && i + 1 < body.size()) cur += body[++i];
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            cur += c;
            in_string = true;
        } else if (c == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string last = trim(cur);
    if (!last.empty()) items.push_back(last);
    for (const auto& it : items)
        if (it.empty()) parse_fail(line, "empty array element");
    return items;
}

TomlValue parse_value(const std::string& raw, int line) {
    if (raw.empty()) parse_fail(line, "missing value");
    if (raw[0] != '[') return parse_scalar(raw, line);

    if (raw.back() != ']') parse_fail(line, "array must close on the same line");
    TomlValue v;
    v.line = line;
    const auto items = split_array_items(raw.substr(1, raw.size() - 2), line);
    if (items.empty()) {
        v.kind = TomlValue::Kind::NumberArray; // empty array: shape decided by the key
        return v;
    }
    const bool strings = items[0][0] == '"';
    v.kind = strings ? TomlValue::Kind::StringArray : TomlValue::Kind::NumberArray;
    for (const auto& item : items) {
        const TomlValue el = parse_scalar(item, line);
        if (strings) {
            if (el.kind != TomlValue::Kind::String)
                parse_fail(line, "mixed array element '" + item + "'");
            v.strs.push_back(el.str);
        } else {
            if (el.kind != TomlValue::Kind::Number)
                parse_fail(line, "mixed array element '" + item + "'");
            v.nums.push_back(el.num);
        }
    }
    return v;
}

} // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::istringstream in(text);
    std::string raw_line;
    int line = 0;
    while (std::getline(in, raw_line)) {
        ++line;
        if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
        const std::string stripped = trim(strip_comment(raw_line, line));
        if (stripped.empty()) continue;

        std::size_t pos = 0;
        while (pos < stripped.size() && is_bare_key_char(stripped[pos])) ++pos;
        if (pos == 0) parse_fail(line, "expected a key");
        const std::string key = stripped.substr(0, pos);
        while (pos < stripped.size() && std::isspace(static_cast<unsigned char>(stripped[pos])))
            ++pos;
        if (pos >= stripped.size() || stripped[pos] != '=')
            parse_fail(line, "expected '=' after key '" + key + "'");
        const std::string value = trim(stripped.substr(pos + 1));
        if (out.count(key)) parse_fail(line, "duplicate key '" + key + "'");
        out[key] = parse_value(value, line);
    }
    return out;
}

// --- ExperimentConfig -------------------------------------------------------

namespace {

// Pulls typed values out of the parsed map; whatever is left over at the end
// is an unknown key.
class Reader {
public:
    explicit Reader(std::map<std::string, TomlValue> kv) : kv_(std::move(kv)) {}

    void get(const std::string& key, std::string& target) {
        if (const TomlValue* v = take(key)) {
            if (v->kind != TomlValue::Kind::String)
                parse_fail(v->line, "key '" + key + "' must be a string");
            target = v->str;
        }
    }

    void get(const std::string& key, bool& target) {
        if (const TomlValue* v = take(key)) {
            if (v->kind != TomlValue::Kind::Boolean)
                parse_fail(v->line, "key '" + key + "' must be true or false");
            target = v->boolean;
        }
    }

    void get(const std::string& key, double& target) {
        if (const TomlValue* v = take(key)) {
            if (v->kind != TomlValue::Kind::Number)
                parse_fail(v->line, "key '" + key + "' must be a number");
            target = v->num;
        }
    }

    void get(const std::string& key, std::size_t& target) {
        if (const TomlValue* v = take(key)) {
            if (v->kind != TomlValue::Kind::Number)
                parse_fail(v->line, "key '" + key + "' must be a number");
            target = to_count(v->num, key, v->line);
        }
    }

    void get(const std::string& key, std::vector<double>& target) {
        if (const TomlValue* v = take(key)) {
            require_number_array(*v, key);
            target = v->nums;
        }
    }

    template <class T>
        requires std::is_unsigned_v<T>
    void get(const std::string& key, std::vector<T>& target) {
        if (const TomlValue* v = take(key)) {
            require_number_array(*v, key);
            target.clear();
            for (double n : v->nums)
                target.push_back(static_cast<T>(to_count(n, key, v->line)));
        }
    }

    void get(const std::string& key, std::vector<std::string>& target) {
        if (const TomlValue* v = take(key)) {
            if (v->kind == TomlValue::Kind::NumberArray && v->nums.empty()) {
                target.clear(); // empty array
                return;
            }
            if (v->kind != TomlValue::Kind::StringArray)
                parse_fail(v->line, "key '" + key + "' must be an array of strings");
            target = v->strs;
        }
    }

    void finish() const {
        if (kv_.empty()) return;
        const TomlValue* first = nullptr;
        std::string name;
        for (const auto& [key, value] : kv_)
            if (!first || value.line < first->line) {
                first = &value;
                name = key;
            }
        parse_fail(first->line, "unknown key '" + name + "'");
    }

private:
    const TomlValue* take(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return nullptr;
        taken_.push_back(it->second);
        kv_.erase(it);
        return &taken_.back();
    }

    static void require_number_array(const TomlValue& v, const std::string& key) {
        if (v.kind != TomlValue::Kind::NumberArray)
            parse_fail(v.line, "key '" + key + "' must be an array of numbers");
    }

    static std::size_t to_count(double n, const std::string& key, int line) {
        if (n < 0.0 || n != std::floor(n) || n > 9007199254740992.0)
            parse_fail(line, "key '" + key + "' must be a non-negative integer");
        return static_cast<std::size_t>(n);
    }

    std::map<std::string, TomlValue> kv_;
    std::vector<TomlValue> taken_;
};

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    out += "\"";
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <class T, class Fmt>
std::string fmt_array(const std::vector<T>& xs, Fmt fmt) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += fmt(xs[i]);
    }
    out += "]";
    return out;
}

} // namespace

ExperimentConfig ExperimentConfig::from_toml_text(const std::string& text) {
    Reader r(parse_toml(text));
    ExperimentConfig c;
    r.get("protocol", c.protocol);
    r.get("seeds", c.seeds);
    r.get("dataset", c.dataset);
    r.get("train_images", c.train_images);
    r.get("train_labels", c.train_labels);
    r.get("test_images", c.test_images);
    r.get("test_labels", c.test_labels);
    r.get("cifar_train", c.cifar_train);
    r.get("cifar_test", c.cifar_test);
    r.get("out_dir", c.out_dir);
    r.get("subset_size", c.subset_size);
    r.get("test_subset_size", c.test_subset_size);
    r.get("input_dim", c.input_dim);
    r.get("hidden_dims", c.hidden_dims);
    r.get("num_classes", c.num_classes);
    r.get("learning_rate", c.learning_rate);
    r.get("momentum", c.momentum);
    r.get("batch_size", c.batch_size);
    r.get("task_count", c.task_count);
    r.get("first_task_epochs", c.first_task_epochs);
    r.get("epochs_per_task", c.epochs_per_task);
    r.get("e0_grid", c.e0_grid);
    r.get("nc1_thresholds", c.nc1_thresholds);
    r.get("threshold_epoch_cap", c.threshold_epoch_cap);
    r.get("warmup_epochs", c.warmup_epochs);
    r.get("convergence_train_acc", c.convergence_train_acc);
    r.get("phase2_max_epochs", c.phase2_max_epochs);
    r.get("shrink_perturb", c.shrink_perturb);
    r.get("sp_lambda", c.sp_lambda);
    r.get("sp_b", c.sp_b);
    r.get("nc1_reg", c.nc1_reg);
    r.get("nc1_reg_weight", c.nc1_reg_weight);
    r.get("identity_task0", c.identity_task0);
    r.get("identity_all_tasks", c.identity_all_tasks);
    r.get("permute_test", c.permute_test);
    r.get("record_wall_time", c.record_wall_time);
    r.get("rank_tol", c.rank_tol);
    r.finish();
    return c;
}

ExperimentConfig ExperimentConfig::from_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, "cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return from_toml_text(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void ExperimentConfig::validate() const {
    if (protocol != "continual" && protocol != "first-task-sweep" &&
        protocol != "nc-threshold" && protocol != "warmstart")
        raise(ErrorCode::InvalidArgument, "unknown protocol '" + protocol + "'");
    if (seeds.empty()) raise(ErrorCode::InvalidArgument, "seeds list is empty");
    if (dataset != "mnist-idx" && dataset != "cifar10")
        raise(ErrorCode::InvalidArgument, "unknown dataset '" + dataset + "'");
    if (input_dim < 1) raise(ErrorCode::InvalidArgument, "input_dim must be >= 1");
    if (num_classes < 2) raise(ErrorCode::InvalidArgument, "num_classes must be >= 2");
    for (std::size_t h : hidden_dims)
        if (h < 1) raise(ErrorCode::InvalidArgument, "hidden layer width must be >= 1");
    if (!(learning_rate > 0.0))
        raise(ErrorCode::InvalidArgument, "learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        raise(ErrorCode::InvalidArgument, "momentum must be in [0, 1)");
    if (batch_size < 1) raise(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    if (task_count < 1) raise(ErrorCode::InvalidArgument, "task_count must be >= 1");
    if (epochs_per_task < 1)
        raise(ErrorCode::InvalidArgument, "epochs_per_task must be >= 1");
    if (nc1_thresholds.empty())
        raise(ErrorCode::InvalidArgument, "nc1_thresholds list is empty");
    for (std::size_t i = 0; i < nc1_thresholds.size(); ++i) {
        if (!(nc1_thresholds[i] > 0.0))
            raise(ErrorCode::InvalidArgument, "nc1 thresholds must be positive");
        if (i > 0 && !(nc1_thresholds[i] < nc1_thresholds[i - 1]))
            raise(ErrorCode::InvalidArgument, "nc1 thresholds must be strictly descending");
    }
    if (threshold_epoch_cap < 1)
        raise(ErrorCode::InvalidArgument, "threshold_epoch_cap must be >= 1");
    if (e0_grid.empty()) raise(ErrorCode::InvalidArgument, "e0_grid is empty");
    for (std::size_t i = 1; i < e0_grid.size(); ++i)
        if (e0_grid[i] <= e0_grid[i - 1])
            raise(ErrorCode::InvalidArgument, "e0_grid must be strictly ascending");
    if (!(convergence_train_acc > 0.0) || convergence_train_acc > 1.0)
        raise(ErrorCode::InvalidArgument, "convergence_train_acc must be in (0, 1]");
    if (phase2_max_epochs < 1)
        raise(ErrorCode::InvalidArgument, "phase2_max_epochs must be >= 1");
    if (sp_lambda < 0.0 || sp_lambda > 1.0)
        raise(ErrorCode::InvalidArgument, "sp_lambda must be in [0, 1]");
    if (sp_b < 0.0) raise(ErrorCode::InvalidArgument, "sp_b must be >= 0");
    if (!(nc1_reg_weight >= 0.0) || !std::isfinite(nc1_reg_weight))
        raise(ErrorCode::InvalidArgument, "nc1_reg_weight must be finite and >= 0");
    if (!(rank_tol > 0.0)) raise(ErrorCode::InvalidArgument, "rank_tol must be positive");
}

std::string ExperimentConfig::to_toml() const {
    const auto num = [](std::size_t n) { return std::to_string(n); };
    const auto u64 = [](std::uint64_t n) { return std::to_string(n); };
    const auto str = [](const std::string& s) { return quote(s); };
    const auto boolean = [](bool b) { return b ? "true" : "false"; };

    std::string out;
    out += "protocol = " + quote(protocol) + "\n";
    out += "seeds = " + fmt_array(seeds, u64) + "\n";
    out += "dataset = " + quote(dataset) + "\n";
    out += "train_images = " + quote(train_images) + "\n";
    out += "train_labels = " + quote(train_labels) + "\n";
    out += "test_images = " + quote(test_images) + "\n";
    out += "test_labels = " + quote(test_labels) + "\n";
    out += "cifar_train = " + fmt_array(cifar_train, str) + "\n";
    out += "cifar_test = " + fmt_array(cifar_test, str) + "\n";
    out += "out_dir = " + quote(out_dir) + "\n";
    out += "subset_size = " + num(subset_size) + "\n";
    out += "test_subset_size = " + num(test_subset_size) + "\n";
    out += "input_dim = " + num(input_dim) + "\n";
    out += "hidden_dims = " + fmt_array(hidden_dims, num) + "\n";
    out += "num_classes = " + num(num_classes) + "\n";
    out += "learning_rate = " + fmt_double(learning_rate) + "\n";
    out += "momentum = " + fmt_double(momentum) + "\n";
    out += "batch_size = " + num(batch_size) + "\n";
    out += "task_count = " + num(task_count) + "\n";
    out += "first_task_epochs = " + num(first_task_epochs) + "\n";
    out += "epochs_per_task = " + num(epochs_per_task) + "\n";
    out += "e0_grid = " + fmt_array(e0_grid, num) + "\n";
    out += "nc1_thresholds = " + fmt_array(nc1_thresholds, fmt_double) + "\n";
    out += "threshold_epoch_cap = " + num(threshold_epoch_cap) + "\n";
    out += "warmup_epochs = " + num(warmup_epochs) + "\n";
    out += "convergence_train_acc = " + fmt_double(convergence_train_acc) + "\n";
    out += "phase2_max_epochs = " + num(phase2_max_epochs) + "\n";
    out += std::string("shrink_perturb = ") + boolean(shrink_perturb) + "\n";
    out += "sp_lambda = " + fmt_double(sp_lambda) + "\n";
    out += "sp_b = " + fmt_double(sp_b) + "\n";
    out += std::string("nc1_reg = ") + boolean(nc1_reg) + "\n";
    out += "nc1_reg_weight = " + fmt_double(nc1_reg_weight) + "\n";
    out += std::string("identity_task0 = ") + boolean(identity_task0) + "\n";
    out += std::string("identity_all_tasks = ") + boolean(identity_all_tasks) + "\n";
    out += std::string("permute_test = ") + boolean(permute_test) + "\n";
    out += std::string("record_wall_time = ") + boolean(record_wall_time) + "\n";
    out += "rank_tol = " + fmt_double(rank_tol) + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const {
    const std::string snapshot = to_toml();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : snapshot) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace config
} // namespace plab
