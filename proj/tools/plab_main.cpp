// plab command-line front end. Talks to the core exclusively through the C
// API in plab.h, the same surface other language bindings would use.
#include "CLI11.hpp"
#include "plab.h"

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

namespace {

const char* status_name(plab_status s) {
    switch (s) {
        case PLAB_OK: return "PLAB_OK";
        case PLAB_EINVAL: return "PLAB_EINVAL";
        case PLAB_EDIM: return "PLAB_EDIM";
        case PLAB_ENUMERIC: return "PLAB_ENUMERIC";
        case PLAB_EIO: return "PLAB_EIO";
        case PLAB_EPARSE: return "PLAB_EPARSE";
        case PLAB_ESTATE: return "PLAB_ESTATE";
        case PLAB_EUNSUPPORTED: return "PLAB_EUNSUPPORTED";
        case PLAB_EINTERNAL: return "PLAB_EINTERNAL";
    }
    return "PLAB_EINTERNAL";
}

// One line on stderr, fixed shape: error: [<status>] <message>
int fail(plab_status s) {
    std::fprintf(stderr, "error: [%s] %s\n", status_name(s), plab_last_error());
    return 1;
}

struct ConfigHandle {
    plab_config* p = nullptr;
    ~ConfigHandle() { plab_config_free(p); }
};

struct StringHandle {
    char* p = nullptr;
    ~StringHandle() { plab_string_free(p); }
};

// Options shared by the four protocol subcommands.
struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    CLI::App* cmd = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_run_subcommand(CLI::App& app, RunOptions& opts, const std::string& name,
                        const std::string& blurb) {
    opts.cmd = app.add_subcommand(name, blurb);
    opts.cmd->add_option("-c,--config", opts.config_path, "experiment config (TOML)")
        ->required();
    opts.seed_opt = opts.cmd->add_option("-s,--seed", opts.seed,
                                         "run a single seed, replacing the config's list");
    opts.out_opt = opts.cmd->add_option("-o,--out-dir", opts.out_dir,
                                        "override the config's output directory");
}

int run_protocol_command(const RunOptions& opts, const char* protocol) {
    ConfigHandle cfg;
    plab_status s = plab_config_load(opts.config_path.c_str(), &cfg.p);
    if (s != PLAB_OK) return fail(s);
    s = plab_config_set_protocol(cfg.p, protocol);
    if (s != PLAB_OK) return fail(s);
    if (opts.seed_opt->count() > 0) {
        s = plab_config_set_seed(cfg.p, opts.seed);
        if (s != PLAB_OK) return fail(s);
    }
    if (opts.out_opt->count() > 0) {
        s = plab_config_set_out_dir(cfg.p, opts.out_dir.c_str());
        if (s != PLAB_OK) return fail(s);
    }
    StringHandle paths;
    s = plab_run(cfg.p, &paths.p);
    if (s != PLAB_OK) return fail(s);
    std::printf("%s\n", paths.p);
    return 0;
}

std::string swap_suffix(const std::string& path, const std::string& suffix) {
    const std::string csv = ".csv";
    if (path.size() > csv.size() && path.compare(path.size() - csv.size(), csv.size(), csv) == 0)
        return path.substr(0, path.size() - csv.size()) + suffix;
    return path + suffix;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"plab: a desk-scale continual-learning laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", plab_version());

    RunOptions continual, sweep, threshold, warmstart;
    add_run_subcommand(app, continual, "continual",
                       "permuted-task sequence with per-task collapse metrics");
    add_run_subcommand(app, sweep, "first-task-sweep",
                       "vary first-task epochs, probe plasticity on the next task");
    add_run_subcommand(app, threshold, "nc-threshold",
                       "train task 0 until NC1 crosses each threshold, then probe");
    add_run_subcommand(app, warmstart, "warmstart",
                       "half-data warm-up, then the full dataset (optionally shrink-perturb)");

    auto* analyze = app.add_subcommand("analyze", "sliding-window correlation over a run log");
    std::string log_path, x_column = "nc1", y_column = "test_acc", out_csv, out_svg;
    int task_filter = -1;
    std::size_t window = 100, stride = 1;
    bool no_svg = false;
    analyze->add_option("-l,--log", log_path, "run-log CSV to analyze")->required();
    analyze->add_option("-x,--x-column", x_column, "first column (default nc1)");
    analyze->add_option("-y,--y-column", y_column, "second column (default test_acc)");
    analyze->add_option("-t,--task", task_filter, "restrict to one task index (-1 = all)");
    analyze->add_option("-w,--window", window, "window length in records (default 100)");
    analyze->add_option("--stride", stride, "window step (default 1)");
    analyze->add_option("--out-csv", out_csv, "output CSV (default <log>_corr.csv)");
    analyze->add_option("--svg", out_svg, "output plot (default <log>_corr.svg)");
    analyze->add_flag("--no-svg", no_svg, "skip the plot");

    auto* ncm = app.add_subcommand("nc-metrics", "collapse report from a saved feature dump");
    std::string dump_path;
    ncm->add_option("dump", dump_path, "feature dump file")->required();

    auto* fixtures = app.add_subcommand("fixtures", "write synthetic datasets in real formats");
    std::string fix_dir, fix_kind = "mnist";
    plab_synth_spec spec{};
    spec.seed = 1;
    spec.n_train = 512;
    spec.n_test = 128;
    spec.dim = 784;
    spec.num_classes = 10;
    spec.modes_per_class = 2;
    spec.class_sep = 0.25;
    spec.amplitude_jitter = 0.15;
    spec.noise = 0.15;
    fixtures->add_option("-d,--dir", fix_dir, "output directory")->required();
    fixtures->add_option("-k,--kind", fix_kind, "mnist | cifar10 | features");
    fixtures->add_option("--seed", spec.seed, "generator seed");
    fixtures->add_option("--n-train", spec.n_train, "training samples");
    fixtures->add_option("--n-test", spec.n_test, "test samples");
    fixtures->add_option("--dim", spec.dim, "pixels per image");
    fixtures->add_option("--classes", spec.num_classes, "number of classes");
    fixtures->add_option("--modes", spec.modes_per_class, "templates per class");
    fixtures->add_option("--class-sep", spec.class_sep, "template separation");
    fixtures->add_option("--jitter", spec.amplitude_jitter, "amplitude jitter");
    fixtures->add_option("--noise", spec.noise, "pixel noise");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        std::fprintf(stderr, "error: [PLAB_EINVAL] %s\n", e.what());
        std::fputs(app.help().c_str(), stderr);
        return 2;
    }

    if (continual.cmd->parsed()) return run_protocol_command(continual, "continual");
    if (sweep.cmd->parsed()) return run_protocol_command(sweep, "first-task-sweep");
    if (threshold.cmd->parsed()) return run_protocol_command(threshold, "nc-threshold");
    if (warmstart.cmd->parsed()) return run_protocol_command(warmstart, "warmstart");

    if (analyze->parsed()) {
        if (out_csv.empty()) out_csv = swap_suffix(log_path, "_corr.csv");
        if (out_svg.empty()) out_svg = swap_suffix(log_path, "_corr.svg");
        const plab_status s =
            plab_analyze(log_path.c_str(), x_column.c_str(), y_column.c_str(), task_filter,
                         window, stride, out_csv.c_str(), no_svg ? nullptr : out_svg.c_str());
        if (s != PLAB_OK) return fail(s);
        std::printf("%s\n", out_csv.c_str());
        if (!no_svg) std::printf("%s\n", out_svg.c_str());
        return 0;
    }

    if (ncm->parsed()) {
        StringHandle text;
        const plab_status s = plab_nc_metrics(dump_path.c_str(), &text.p);
        if (s != PLAB_OK) return fail(s);
        std::fputs(text.p, stdout);
        return 0;
    }

    if (fixtures->parsed()) {
        StringHandle paths;
        const plab_status s =
            plab_write_fixture(fix_dir.c_str(), fix_kind.c_str(), &spec, &paths.p);
        if (s != PLAB_OK) return fail(s);
        std::printf("%s\n", paths.p);
        return 0;
    }

    std::fputs(app.help().c_str(), stderr);
    return 2;
}
