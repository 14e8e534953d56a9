// C API shim: translates exceptions from the core into status codes and keeps
// per-thread error text. No logic of its own beyond argument plumbing.
#include "plab.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "plab/analysis.hpp"
#include "plab/collapse.hpp"
#include "plab/config.hpp"
#include "plab/data.hpp"
#include "plab/error.hpp"
#include "plab/experiments.hpp"
#include "plab/feature_dump.hpp"
#include "plab/runlog.hpp"

struct plab_config {
    plab::config::ExperimentConfig cfg;
};

namespace {

using plab::Error;
using plab::ErrorCode;
using plab::raise;

thread_local std::string t_last_error;

template <class F>
plab_status guarded(F&& body) {
    try {
        body();
        t_last_error.clear();
        return PLAB_OK;
    } catch (const Error& e) {
        t_last_error = e.what();
        return static_cast<plab_status>(static_cast<int>(e.code()));
    } catch (const std::bad_alloc&) {
        t_last_error = "out of memory";
        return PLAB_EINTERNAL;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return PLAB_EINTERNAL;
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) raise(ErrorCode::InvalidArgument, message);
}

char* dup_cstring(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One seed's (x, y) pulls from a run log, epoch labels as the index.
struct SeedPulls {
    std::uint64_t seed = 0;
    plab::analysis::Series x;
    plab::analysis::Series y;
};

std::vector<SeedPulls> pull_columns(const plab::runlog::RunLog& log, const std::string& x_column,
                                    const std::string& y_column, int task_filter) {
    std::vector<SeedPulls> out;
    for (const auto& rec : log.records) {
        if (task_filter >= 0 && rec.task != task_filter) continue;
        const double xv = plab::runlog::numeric_field(rec, x_column);
        const double yv = plab::runlog::numeric_field(rec, y_column);
        if (xv != xv || yv != yv) continue; // missing cell in either column
        if (out.empty() || out.back().seed != rec.seed) {
            SeedPulls p;
            p.seed = rec.seed;
            p.x.name = x_column + " (seed " + std::to_string(rec.seed) + ")";
            p.y.name = y_column + " (seed " + std::to_string(rec.seed) + ")";
            out.push_back(std::move(p));
        }
        SeedPulls& p = out.back();
        p.x.values.push_back(xv);
        p.x.index.push_back(static_cast<double>(rec.epoch));
        p.y.values.push_back(yv);
        p.y.index.push_back(static_cast<double>(rec.epoch));
    }
    return out;
}

} // namespace

extern "C" {

const char* plab_version(void) { return "0.1.0"; }

const char* plab_last_error(void) { return t_last_error.c_str(); }

void plab_string_free(char* s) { std::free(s); }

plab_status plab_config_load(const char* path, plab_config** out) {
    return guarded([&] {
        require(path != nullptr, "plab_config_load: path is null");
        require(out != nullptr, "plab_config_load: out is null");
        *out = nullptr;
        auto cfg = plab::config::ExperimentConfig::from_toml_file(path);
        cfg.validate();
        *out = new plab_config{std::move(cfg)};
    });
}

plab_status plab_config_parse(const char* text, plab_config** out) {
    return guarded([&] {
        require(text != nullptr, "plab_config_parse: text is null");
        require(out != nullptr, "plab_config_parse: out is null");
        *out = nullptr;
        auto cfg = plab::config::ExperimentConfig::from_toml_text(text);
        cfg.validate();
        *out = new plab_config{std::move(cfg)};
    });
}

void plab_config_free(plab_config* cfg) { delete cfg; }

plab_status plab_config_set_seed(plab_config* cfg, uint64_t seed) {
    return guarded([&] {
        require(cfg != nullptr, "plab_config_set_seed: cfg is null");
        cfg->cfg.seeds = {seed};
    });
}

plab_status plab_config_set_out_dir(plab_config* cfg, const char* out_dir) {
    return guarded([&] {
        require(cfg != nullptr, "plab_config_set_out_dir: cfg is null");
        require(out_dir != nullptr, "plab_config_set_out_dir: out_dir is null");
        require(out_dir[0] != '\0', "plab_config_set_out_dir: out_dir is empty");
        cfg->cfg.out_dir = out_dir;
    });
}

plab_status plab_config_set_protocol(plab_config* cfg, const char* protocol) {
    return guarded([&] {
        require(cfg != nullptr, "plab_config_set_protocol: cfg is null");
        require(protocol != nullptr, "plab_config_set_protocol: protocol is null");
        plab::config::ExperimentConfig probe = cfg->cfg;
        probe.protocol = protocol;
        probe.validate(); // rejects unknown protocol names
        cfg->cfg.protocol = protocol;
    });
}

plab_status plab_config_snapshot(const plab_config* cfg, char** out_toml) {
    return guarded([&] {
        require(cfg != nullptr, "plab_config_snapshot: cfg is null");
        require(out_toml != nullptr, "plab_config_snapshot: out is null");
        *out_toml = dup_cstring(cfg->cfg.to_toml());
    });
}

plab_status plab_run(const plab_config* cfg, char** out_paths) {
    return guarded([&] {
        require(cfg != nullptr, "plab_run: cfg is null");
        require(out_paths != nullptr, "plab_run: out_paths is null");
        *out_paths = nullptr;
        cfg->cfg.validate();

        const auto logs = plab::experiments::run_protocol(cfg->cfg);

        const std::filesystem::path dir(cfg->cfg.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec)
            raise(ErrorCode::Io,
                  "cannot create output directory " + dir.string() + ": " + ec.message());

        std::string joined;
        for (const auto& named : logs) {
            const std::string path = (dir / (named.name + ".csv")).string();
            plab::runlog::write_csv(named.log, path);
            if (!joined.empty()) joined += '\n';
            joined += path;
        }
        *out_paths = dup_cstring(joined);
    });
}

plab_status plab_analyze(const char* runlog_csv, const char* x_column, const char* y_column,
                         int task_filter, size_t window, size_t stride, const char* out_csv,
                         const char* out_svg) {
    return guarded([&] {
        require(runlog_csv != nullptr, "plab_analyze: runlog_csv is null");
        require(x_column != nullptr && x_column[0] != '\0', "plab_analyze: x_column is empty");
        require(y_column != nullptr && y_column[0] != '\0', "plab_analyze: y_column is empty");
        require(out_csv != nullptr, "plab_analyze: out_csv is null");

        const auto log = plab::runlog::read_csv(runlog_csv);
        const auto pulls = pull_columns(log, x_column, y_column, task_filter);
        if (pulls.empty())
            raise(ErrorCode::InvalidArgument, "analyze: no usable rows for columns '" +
                                                  std::string(x_column) + "' vs '" + y_column +
                                                  "'" +
                                                  (task_filter >= 0
                                                       ? " with task filter " +
                                                             std::to_string(task_filter)
                                                       : ""));

        std::vector<plab::analysis::WindowedCorrelation> corr;
        corr.reserve(pulls.size());
        for (const auto& p : pulls) {
            try {
                corr.push_back(plab::analysis::sliding_window_corr(p.x, p.y, window, stride));
            } catch (const Error& e) {
                raise(e.code(), "analyze: seed " + std::to_string(p.seed) + ": " + e.what());
            }
        }

        std::ofstream csv(out_csv, std::ios::binary);
        if (!csv) raise(ErrorCode::Io, "analyze: cannot open " + std::string(out_csv) +
                                           " for writing");
        csv << "seed,start_epoch,r,valid\n";
        for (std::size_t s = 0; s < pulls.size(); ++s) {
            const auto& w = corr[s];
            for (std::size_t i = 0; i < w.r.size(); ++i) {
                csv << pulls[s].seed << ',' << fmt_g17(w.start_index[i]) << ',';
                if (w.valid[i]) csv << fmt_g17(w.r[i]);
                csv << ',' << int(w.valid[i]) << '\n';
            }
        }
        if (!csv) raise(ErrorCode::Io, "analyze: write failed for " + std::string(out_csv));

        if (out_svg == nullptr || out_svg[0] == '\0') return;

        // Band the across-seed mean when every seed yields the same gap-free
        // window grid; otherwise draw one line per seed.
        bool bandable = pulls.size() >= 2;
        for (const auto& w : corr) {
            if (w.start_index != corr.front().start_index) bandable = false;
            for (std::uint8_t v : w.valid)
                if (!v) bandable = false;
        }
        std::vector<plab::analysis::PlotSeries> plot;
        if (bandable) {
            std::vector<plab::analysis::Series> runs;
            for (std::size_t s = 0; s < pulls.size(); ++s)
                runs.push_back({"seed " + std::to_string(pulls[s].seed), corr[s].r,
                                corr[s].start_index});
            const auto band = plab::analysis::aggregate(runs);
            plot.push_back({"mean r (" + std::to_string(pulls.size()) + " seeds)",
                            corr.front().start_index, band.mean.values, band.stddev});
        } else {
            for (std::size_t s = 0; s < pulls.size(); ++s) {
                plab::analysis::PlotSeries ps;
                ps.label = "seed " + std::to_string(pulls[s].seed);
                for (std::size_t i = 0; i < corr[s].r.size(); ++i) {
                    if (!corr[s].valid[i]) continue;
                    ps.x.push_back(corr[s].start_index[i]);
                    ps.y.push_back(corr[s].r[i]);
                }
                if (!ps.x.empty()) plot.push_back(std::move(ps));
            }
            if (plot.empty())
                raise(ErrorCode::Numeric, "analyze: no valid windows to plot");
        }
        plab::analysis::emit_plot(plot, out_svg,
                                  std::string(y_column) + " vs " + x_column + " (window " +
                                      std::to_string(window) + ")",
                                  "epoch", "pearson r");
    });
}

plab_status plab_nc_metrics(const char* dump_path, char** out_text) {
    return guarded([&] {
        require(dump_path != nullptr, "plab_nc_metrics: dump_path is null");
        require(out_text != nullptr, "plab_nc_metrics: out_text is null");
        *out_text = nullptr;
        const auto dump = plab::featdump::read_feature_dump(dump_path);
        const auto rep = plab::collapse::report(dump.batch, dump.logits, dump.classifier);
        std::string text;
        text += "nc1 " + fmt_g17(rep.nc1) + "\n";
        text += "nc2_norm_cv " + fmt_g17(rep.nc2_norm_cv) + "\n";
        text += "nc2_angle_dev " + fmt_g17(rep.nc2_angle_dev) + "\n";
        text += "nc3 " + fmt_g17(rep.nc3) + "\n";
        text += "nc4_mismatch " + fmt_g17(rep.nc4_mismatch) + "\n";
        *out_text = dup_cstring(text);
    });
}

plab_status plab_write_fixture(const char* dir, const char* kind, const plab_synth_spec* spec,
                               char** out_paths) {
    return guarded([&] {
        require(dir != nullptr && dir[0] != '\0', "plab_write_fixture: dir is empty");
        require(kind != nullptr, "plab_write_fixture: kind is null");
        require(spec != nullptr, "plab_write_fixture: spec is null");
        require(out_paths != nullptr, "plab_write_fixture: out_paths is null");
        *out_paths = nullptr;
        require(spec->n_train >= 1, "plab_write_fixture: n_train must be >= 1");

        const std::string kind_s(kind);
        plab::data::SynthConfig synth;
        synth.n = spec->n_train + spec->n_test;
        synth.dim = spec->dim;
        synth.num_classes = spec->num_classes;
        synth.modes_per_class = spec->modes_per_class;
        synth.class_sep = spec->class_sep;
        synth.amplitude_jitter = spec->amplitude_jitter;
        synth.noise = spec->noise;
        synth.seed = spec->seed;

        // One draw split head/tail so train and test share class templates.
        const auto all = plab::data::synthesize_dataset(synth);
        const auto train = plab::data::head(all, spec->n_train);
        std::vector<std::size_t> tail_idx;
        for (std::size_t i = spec->n_train; i < all.size(); ++i) tail_idx.push_back(i);
        const auto test = plab::data::take(all, tail_idx);

        const std::filesystem::path base(dir);
        std::error_code ec;
        std::filesystem::create_directories(base, ec);
        if (ec)
            raise(ErrorCode::Io,
                  "cannot create fixture directory " + base.string() + ": " + ec.message());

        std::vector<std::string> written;
        if (kind_s == "mnist") {
            require(spec->n_test >= 1, "plab_write_fixture: mnist kind needs n_test >= 1");
            const std::string ti = (base / "train-images.idx").string();
            const std::string tl = (base / "train-labels.idx").string();
            const std::string si = (base / "test-images.idx").string();
            const std::string sl = (base / "test-labels.idx").string();
            plab::data::write_mnist_idx(train, ti, tl);
            plab::data::write_mnist_idx(test, si, sl);
            written = {ti, tl, si, sl};
        } else if (kind_s == "cifar10") {
            require(spec->n_test >= 1, "plab_write_fixture: cifar10 kind needs n_test >= 1");
            require(spec->dim == 3072, "plab_write_fixture: cifar10 kind needs dim = 3072");
            const std::string tr = (base / "data_batch_1.bin").string();
            const std::string te = (base / "test_batch.bin").string();
            plab::data::write_cifar10_binary(train, tr);
            plab::data::write_cifar10_binary(test, te);
            written = {tr, te};
        } else if (kind_s == "features") {
            require(spec->n_train >= 2 * spec->num_classes,
                    "plab_write_fixture: features kind needs n_train >= 2 * num_classes");
            plab::featdump::FeatureDump dump;
            dump.batch.features = train.images;
            dump.batch.labels = train.labels;
            dump.batch.num_classes = synth.num_classes;
            // Nearest-class-mean classifier: rows are class means, logits the
            // matching inner products.
            const auto stats = plab::collapse::accumulate_stats(dump.batch);
            dump.classifier = stats.class_means;
            dump.logits = plab::matmul(dump.batch.features, plab::transpose(dump.classifier));
            const std::string path = (base / "features.dump").string();
            plab::featdump::write_feature_dump(dump, path);
            written = {path};
        } else {
            raise(ErrorCode::Unsupported,
                  "plab_write_fixture: unknown kind '" + kind_s + "' (mnist|cifar10|features)");
        }

        std::string joined;
        for (const auto& p : written) {
            if (!joined.empty()) joined += '\n';
            joined += p;
        }
        *out_paths = dup_cstring(joined);
    });
}

} // extern "C"
