// Acceptance gate: twelve end-to-end criteria, one [PASS]/[FAIL] line each.
//
// Every numeric claim a criterion makes is checked against an oracle written
// here from the definitions (double-loop scatter statistics, a classical
// largest-pivot Jacobi eigensolver for the pseudoinverse, textbook Pearson),
// never against the library's own code paths. The protocol criteria run the
// real experiment runners at desk scale on deterministic synthetic datasets;
// the CLI criteria shell out to the installed binary (PLAB_CLI_PATH).
//
// Usage: acceptance [N ...]  — run only the listed criteria (default: all).
// Exit status is the number of failed criteria. The full gate is CPU-heavy
// (tens of minutes on one core); progress goes to stderr, verdicts to stdout.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plab/analysis.hpp"
#include "plab/collapse.hpp"
#include "plab/config.hpp"
#include "plab/data.hpp"
#include "plab/error.hpp"
#include "plab/experiments.hpp"
#include "plab/interventions.hpp"
#include "plab/matrix.hpp"
#include "plab/nn.hpp"
#include "plab/rng.hpp"
#include "plab/runlog.hpp"

#ifndef PLAB_CLI_PATH
#error "PLAB_CLI_PATH must name the plab CLI binary"
#endif

namespace {

namespace fs = std::filesystem;
using plab::Matrix;

// ---------------------------------------------------------------------------
// plumbing

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

[[noreturn]] void bail(const std::string& msg) { throw std::runtime_error(msg); }

const fs::path& tmp_root() {
    static const fs::path p = [] {
        fs::path q = fs::temp_directory_path() / "plab_acceptance";
        fs::remove_all(q);
        fs::create_directories(q);
        return q;
    }();
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) bail("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) bail("cannot write " + p.string());
}

// Runs the CLI with stdout+stderr captured; returns true on exit status 0.
bool run_cli(const std::string& args, std::string* output) {
    static int counter = 0;
    const fs::path cap = tmp_root() / ("cli_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string("\"") + PLAB_CLI_PATH + "\" " + args + " > \"" + cap.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    if (output) *output = slurp(cap);
    return rc == 0;
}

// ---------------------------------------------------------------------------
// oracle: correlation (textbook two-pass product-moment form)

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) bail("oracle_pearson: bad input");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

// Sliding windows [i, i+w), stride 1. NaN marks a degenerate window.
std::vector<double> oracle_windowed(const std::vector<double>& x, const std::vector<double>& y,
                                    std::size_t w) {
    if (x.size() < w) bail("oracle_windowed: series shorter than window");
    std::vector<double> out;
    for (std::size_t i = 0; i + w <= x.size(); ++i) {
        std::vector<double> xs(x.begin() + i, x.begin() + i + w);
        std::vector<double> ys(y.begin() + i, y.begin() + i + w);
        out.push_back(oracle_pearson(xs, ys));
    }
    return out;
}

// ---------------------------------------------------------------------------
// oracle: eigensolver + pseudoinverse (classical Jacobi, largest off-diagonal
// pivot — deliberately a different algorithm variant from the library's
// cyclic sweeps)

using OMat = std::vector<std::vector<double>>;

OMat omat(std::size_t r, std::size_t c) { return OMat(r, std::vector<double>(c, 0.0)); }

void oracle_jacobi(OMat a, OMat& vecs, std::vector<double>& vals) {
    const std::size_t n = a.size();
    vecs = omat(n, n);
    for (std::size_t i = 0; i < n; ++i) vecs[i][i] = 1.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a[i][j]));
    for (int rot = 0; n >= 2; ++rot) {
        if (rot > 20000) bail("oracle_jacobi: no convergence");
        std::size_t p = 0, q = 1;
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::fabs(a[i][j]) > off) {
                    off = std::fabs(a[i][j]);
                    p = i;
                    q = j;
                }
        if (off <= 1e-14 * scale) break;
        const double app = a[p][p], aqq = a[q][q], apq = a[p][q];
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(tau * tau + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == p || k == q) continue;
            const double akp = a[k][p], akq = a[k][q];
            a[k][p] = a[p][k] = c * akp - s * akq;
            a[k][q] = a[q][k] = s * akp + c * akq;
        }
        a[p][p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
        a[q][q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
        a[p][q] = a[q][p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double vkp = vecs[k][p], vkq = vecs[k][q];
            vecs[k][p] = c * vkp - s * vkq;
            vecs[k][q] = s * vkp + c * vkq;
        }
    }
    vals.resize(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = a[i][i];
}

OMat oracle_pinv(const OMat& sym, double rank_tol) {
    const std::size_t n = sym.size();
    OMat vecs;
    std::vector<double> vals;
    oracle_jacobi(sym, vecs, vals);
    double lmax = 0.0;
    for (double v : vals) lmax = std::max(lmax, v);
    OMat out = omat(n, n);
    if (lmax <= 0.0) return out;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(vals[j] > rank_tol * lmax)) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) out[i][k] += vecs[i][j] * vecs[k][j] / vals[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// oracle: collapse metrics from their definitions (double loops throughout)

struct OracleReport {
    double nc1 = 0.0;
    double norm_cv = 0.0;
    double angle_dev = 0.0;
    double nc3 = 0.0;
    double nc4 = 0.0;
};

double pop_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::sqrt(var / static_cast<double>(v.size()));
}

OracleReport oracle_collapse(const OMat& x, const std::vector<int>& labels,
                             std::size_t num_classes, const OMat& logits, const OMat& w,
                             double rank_tol) {
    const std::size_t n = x.size(), d = x[0].size(), C = num_classes;
    std::vector<std::size_t> cnt(C, 0);
    OMat mu = omat(C, d);
    for (std::size_t i = 0; i < n; ++i) {
        cnt[labels[i]]++;
        for (std::size_t j = 0; j < d; ++j) mu[labels[i]][j] += x[i][j];
    }
    for (std::size_t c = 0; c < C; ++c)
        if (cnt[c])
            for (std::size_t j = 0; j < d; ++j) mu[c][j] /= static_cast<double>(cnt[c]);
    std::vector<double> g(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) g[j] += x[i][j] / static_cast<double>(n);

    OMat sw = omat(d, d), sb = omat(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                sw[a][b] += (x[i][a] - mu[labels[i]][a]) * (x[i][b] - mu[labels[i]][b]) /
                            static_cast<double>(n);
    for (std::size_t c = 0; c < C; ++c) {
        if (!cnt[c]) continue;
        const double wgt = static_cast<double>(cnt[c]) / static_cast<double>(n);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                sb[a][b] += wgt * (mu[c][a] - g[a]) * (mu[c][b] - g[b]);
    }

    OracleReport rep;
    const OMat pinv = oracle_pinv(sb, rank_tol);
    double trace = 0.0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) trace += sw[a][b] * pinv[b][a];
    rep.nc1 = std::max(0.0, trace / static_cast<double>(C));

    // centered means of the nonempty classes
    OMat cm;
    for (std::size_t c = 0; c < C; ++c) {
        if (!cnt[c]) continue;
        std::vector<double> v(d);
        for (std::size_t j = 0; j < d; ++j) v[j] = mu[c][j] - g[j];
        cm.push_back(std::move(v));
    }
    const std::size_t K = cm.size();
    std::vector<double> norms(K);
    for (std::size_t i = 0; i < K; ++i) {
        double s = 0.0;
        for (double v : cm[i]) s += v * v;
        norms[i] = std::sqrt(s);
    }
    double mean_norm = 0.0;
    for (double v : norms) mean_norm += v;
    mean_norm /= static_cast<double>(K);
    rep.norm_cv = pop_std(norms) / mean_norm;

    std::vector<double> cosines;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += cm[i][k] * cm[j][k];
            cosines.push_back(dot / (norms[i] * norms[j]));
        }
    const double target = -1.0 / static_cast<double>(K - 1);
    double dev = 0.0;
    for (double v : cosines) dev += std::fabs(v - target);
    rep.angle_dev = pop_std(cosines) + dev / static_cast<double>(cosines.size());

    // nc3 on the full centered-mean matrix (all classes nonempty here)
    double wn = 0.0, mn = 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < d; ++j) {
            wn += w[c][j] * w[c][j];
            mn += (mu[c][j] - g[j]) * (mu[c][j] - g[j]);
        }
    wn = std::sqrt(wn);
    mn = std::sqrt(mn);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = w[c][j] / wn - (mu[c][j] - g[j]) / mn;
            sum += diff * diff;
        }
    rep.nc3 = sum;

    std::size_t mismatch = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (logits[i][c] > logits[i][argmax]) argmax = c;
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < C; ++c) {
            if (!cnt[c]) continue;
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                dist += (x[i][j] - mu[c][j]) * (x[i][j] - mu[c][j]);
            if (dist < best) {
                best = dist;
                nearest = c;
            }
        }
        if (argmax != nearest) ++mismatch;
    }
    rep.nc4 = static_cast<double>(mismatch) / static_cast<double>(n);
    return rep;
}

// ---------------------------------------------------------------------------
// shared synthetic datasets (memoized; identical to the committed fixture
// recipes so every re-run sees the same bytes)

plab::experiments::TaskData split_synth(const plab::data::SynthConfig& sc, std::size_t n_train) {
    const plab::data::LabeledDataset all = plab::data::synthesize_dataset(sc);
    plab::experiments::TaskData td;
    td.train = plab::data::head(all, n_train);
    std::vector<std::size_t> tail;
    for (std::size_t i = n_train; i < all.size(); ++i) tail.push_back(i);
    td.test = plab::data::take(all, tail);
    return td;
}

// 784-dim, 10-class, 4 template modes per class: hard enough that twenty
// permuted tasks degrade a 100x100 net.
const plab::experiments::TaskData& continual_data() {
    static const plab::experiments::TaskData td = [] {
        plab::data::SynthConfig sc;
        sc.n = 14000;
        sc.dim = 784;
        sc.num_classes = 10;
        sc.modes_per_class = 4;
        sc.class_sep = 0.2;
        sc.amplitude_jitter = 0.25;
        sc.noise = 0.27;
        sc.seed = 404;
        return split_synth(sc, 12000);
    }();
    return td;
}

// 784-dim, 3 modes: the sweep/threshold experiments run a narrow [32] net on
// this so a one-epoch probe cannot mask plasticity damage.
const plab::experiments::TaskData& sweep_data() {
    static const plab::experiments::TaskData td = [] {
        plab::data::SynthConfig sc;
        sc.n = 7500;
        sc.dim = 784;
        sc.num_classes = 10;
        sc.modes_per_class = 3;
        sc.class_sep = 0.22;
        sc.amplitude_jitter = 0.2;
        sc.noise = 0.2;
        sc.seed = 606;
        return split_synth(sc, 6000);
    }();
    return td;
}

// 3072-dim stand-ins with CIFAR-10 geometry for the warm-start experiments.
// Two difficulty levels: the plasticity sweep needs a second phase that
// actually has to retrain (overlapping templates), while the windowed-
// correlation sweep needs a long, noise-dominated accuracy plateau.
const plab::experiments::TaskData& warmstart_hard_data() {
    static const plab::experiments::TaskData td = [] {
        plab::data::SynthConfig sc;
        sc.n = 3000;
        sc.dim = 3072;
        sc.num_classes = 10;
        sc.modes_per_class = 5;
        sc.class_sep = 0.12;
        sc.amplitude_jitter = 0.3;
        sc.noise = 0.35;
        sc.seed = 912;
        return split_synth(sc, 2400);
    }();
    return td;
}

const plab::experiments::TaskData& warmstart_plateau_data() {
    static const plab::experiments::TaskData td = [] {
        plab::data::SynthConfig sc;
        sc.n = 3000;
        sc.dim = 3072;
        sc.num_classes = 10;
        sc.modes_per_class = 5;
        sc.class_sep = 0.18;
        sc.amplitude_jitter = 0.25;
        sc.noise = 0.3;
        sc.seed = 911;
        return split_synth(sc, 2400);
    }();
    return td;
}

const plab::runlog::RunLog& named(const std::vector<plab::experiments::NamedLog>& logs,
                                  const std::string& name) {
    for (const auto& nl : logs)
        if (nl.name == name) return nl.log;
    bail("protocol produced no log named " + name);
}

// ---------------------------------------------------------------------------
// warm-start sweeps (criteria 9, 10, 12)

// Criterion 9 needs a task hard enough that the second phase genuinely has to
// retrain — otherwise the regularizer has nothing to protect.
plab::config::ExperimentConfig warmstart_hard_config(bool reg) {
    plab::config::ExperimentConfig cfg;
    cfg.protocol = "warmstart";
    cfg.dataset = "cifar10";
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.subset_size = 1200;
    cfg.input_dim = 3072;
    cfg.hidden_dims = {48};
    cfg.num_classes = 10;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 64;
    cfg.warmup_epochs = 240;
    cfg.convergence_train_acc = 0.99;
    cfg.phase2_max_epochs = 80;
    cfg.nc1_reg = reg;
    cfg.nc1_reg_weight = 0.05;
    return cfg;
}

const plab::runlog::RunLog& warmstart_hard_log(bool reg) {
    static const plab::runlog::RunLog logs[2] = {
        [] {
            const auto cfg = warmstart_hard_config(false);
            plab::experiments::TaskData td = warmstart_hard_data();
            td.train = plab::data::head(td.train, cfg.subset_size);
            return plab::experiments::run_warmstart(cfg, td);
        }(),
        [] {
            const auto cfg = warmstart_hard_config(true);
            plab::experiments::TaskData td = warmstart_hard_data();
            td.train = plab::data::head(td.train, cfg.subset_size);
            return plab::experiments::run_warmstart(cfg, td);
        }(),
    };
    return logs[reg ? 1 : 0];
}

// Criteria 10 and 12 need the opposite shape: fast learning, then hundreds of
// plateau epochs so the late correlation windows see only noise.
plab::config::ExperimentConfig warmstart_plateau_config() {
    plab::config::ExperimentConfig cfg = warmstart_hard_config(false);
    cfg.learning_rate = 0.03;
    cfg.warmup_epochs = 500;
    return cfg;
}

const plab::runlog::RunLog& warmstart_plateau_log() {
    static const plab::runlog::RunLog log = [] {
        const auto cfg = warmstart_plateau_config();
        plab::experiments::TaskData td = warmstart_plateau_data();
        td.train = plab::data::head(td.train, cfg.subset_size);
        return plab::experiments::run_warmstart(cfg, td);
    }();
    return log;
}

// Per-seed (nc1, test_acc) series over rows where both are recorded — the
// same pull the analyze pipeline performs with no task filter.
struct SeedSeries {
    std::uint64_t seed = 0;
    std::vector<double> x, y, epoch;
};

std::vector<SeedSeries> pull_nc1_acc(const plab::runlog::RunLog& log) {
    std::vector<SeedSeries> out;
    for (const auto& r : log.records) {
        if (std::isnan(r.nc1) || std::isnan(r.test_acc)) continue;
        if (out.empty() || out.back().seed != r.seed) out.push_back({r.seed, {}, {}, {}});
        out.back().x.push_back(r.nc1);
        out.back().y.push_back(r.test_acc);
        out.back().epoch.push_back(static_cast<double>(r.epoch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// criteria

// 1 — backward pass against central finite differences on the training loss.
Outcome criterion1() {
    Timer t;
    plab::RngStream rng(0xACC1);
    const double h = 1e-4, tol = 1e-4;
    int total = 0, ok = 0;
    double worst = 0.0;
    for (int m = 0; m < 10; ++m) {
        const std::size_t in_dim = 5 + rng.uniform_index(8);
        std::vector<std::size_t> hidden(1 + rng.uniform_index(2));
        for (auto& hd : hidden) hd = 6 + rng.uniform_index(10);
        const std::size_t classes = 3 + rng.uniform_index(4);
        const std::size_t n = 6 + rng.uniform_index(6);

        plab::nn::MlpModel model(in_dim, hidden, classes);
        plab::RngStream wrng = rng.derive(1, static_cast<std::uint64_t>(m));
        model.init_weights(wrng);
        Matrix batch(n, in_dim);
        for (std::size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng.uniform(-1.0, 1.0);
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng.uniform_index(classes));

        // analytic gradient read back from a unit-rate, momentum-free step
        plab::nn::MlpModel stepped = model;
        const auto fwd = stepped.forward(batch);
        const auto ce = plab::nn::cross_entropy(fwd.logits, labels);
        stepped.backward_and_step(ce.grad_logits, nullptr, {1.0, 0.0});

        const auto loss_at = [&](plab::nn::MlpModel& mm) {
            return plab::nn::cross_entropy(mm.forward_inference(batch).logits, labels).loss;
        };

        std::size_t coords = 0;
        for (std::size_t l = 0; l < model.num_layers(); ++l)
            coords += model.layer(l).weight.size() + model.layer(l).bias.size();

        for (int k = 0; k < 50; ++k) {
            std::size_t pick = rng.uniform_index(coords);
            std::size_t layer = 0, idx = 0;
            bool bias = false;
            for (std::size_t l = 0; l < model.num_layers(); ++l) {
                const std::size_t ws = model.layer(l).weight.size();
                const std::size_t bs = model.layer(l).bias.size();
                if (pick < ws) {
                    layer = l;
                    bias = false;
                    idx = pick;
                    break;
                }
                pick -= ws;
                if (pick < bs) {
                    layer = l;
                    bias = true;
                    idx = pick;
                    break;
                }
                pick -= bs;
            }
            const double analytic =
                bias ? model.layer(layer).bias[idx] - stepped.layer(layer).bias[idx]
                     : model.layer(layer).weight.data()[idx] -
                           stepped.layer(layer).weight.data()[idx];
            plab::nn::MlpModel probe = model;
            double* slot = bias ? &probe.layer(layer).bias[idx]
                                : &probe.layer(layer).weight.data()[idx];
            const double orig = *slot;
            *slot = orig + h;
            const double lp = loss_at(probe);
            *slot = orig - h;
            const double lm = loss_at(probe);
            const double fd = (lp - lm) / (2.0 * h);
            const double rel = std::fabs(analytic - fd) /
                               std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
            ++total;
            if (rel < tol) ++ok;
            worst = std::max(worst, rel);
        }
    }
    const double secs = t.seconds();
    const double frac = static_cast<double>(ok) / static_cast<double>(total);
    Outcome o;
    o.pass = total == 500 && frac >= 0.95 && secs < 60.0;
    o.detail = std::to_string(ok) + "/" + std::to_string(total) + " coords with rel err < 1e-4 (max " +
               fmt(worst) + "), " + fmt(secs) + "s [need >=95%, <60s]";
    return o;
}

// 2 — NC1-NC4 against the double-loop oracle on random feature batches.
Outcome criterion2() {
    Timer t;
    plab::RngStream rng(0xACC2);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t C = 2 + rng.uniform_index(4);
        const std::size_t d = 3 + rng.uniform_index(8);
        const std::size_t n = 2 * C + rng.uniform_index(50 - 2 * C + 1);
        OMat centers = omat(C, d);
        for (auto& row : centers)
            for (auto& v : row) v = 2.0 * rng.normal();
        OMat x = omat(n, d);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(i % C);
            for (std::size_t j = 0; j < d; ++j)
                x[i][j] = centers[labels[i]][j] + 0.3 * rng.normal();
        }
        OMat logits = omat(n, C), w = omat(C, d);
        for (auto& row : logits)
            for (auto& v : row) v = rng.normal();
        for (auto& row : w)
            for (auto& v : row) v = rng.normal();

        plab::collapse::FeatureBatch fb;
        fb.features = Matrix(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) fb.features(i, j) = x[i][j];
        fb.labels = labels;
        fb.num_classes = C;
        Matrix ml(n, C), mw(C, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < C; ++c) ml(i, c) = logits[i][c];
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t j = 0; j < d; ++j) mw(c, j) = w[c][j];

        const auto lib = plab::collapse::report(fb, ml, mw);
        const auto orc = oracle_collapse(x, labels, C, logits, w, plab::kDefaultRankTol);
        worst = std::max({worst, std::fabs(lib.nc1 - orc.nc1),
                          std::fabs(lib.nc2_norm_cv - orc.norm_cv),
                          std::fabs(lib.nc2_angle_dev - orc.angle_dev),
                          std::fabs(lib.nc3 - orc.nc3),
                          std::fabs(lib.nc4_mismatch - orc.nc4)});
    }
    const double secs = t.seconds();
    Outcome o;
    o.pass = worst <= 1e-9 && secs < 60.0;
    o.detail = "100 random batches, worst |library - oracle| = " + fmt(worst) + ", " + fmt(secs) +
               "s [need <=1e-9, <60s]";
    return o;
}

// 3 — the closed-form two-class scalar case.
Outcome criterion3() {
    plab::collapse::FeatureBatch fb;
    fb.features = Matrix(4, 1);
    fb.features(0, 0) = -1.2;
    fb.features(1, 0) = -0.8;
    fb.features(2, 0) = 0.8;
    fb.features(3, 0) = 1.2;
    fb.labels = {0, 0, 1, 1};
    fb.num_classes = 2;
    const double v = plab::collapse::nc1(plab::collapse::accumulate_stats(fb));
    const double err = std::fabs(v - 0.02);
    Outcome o;
    o.pass = err <= 1e-12;
    o.detail = "nc1 = " + fmt(v) + ", |err| = " + fmt(err) + " [need <=1e-12]";
    return o;
}

// 4 — Penrose conditions for the pseudoinverse on random PSD matrices.
Outcome criterion4() {
    plab::RngStream rng(0xACC4);
    const auto mul = [](const Matrix& a, const Matrix& b) {
        Matrix out(a.rows(), b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double av = a(i, k);
                for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += av * b(k, j);
            }
        return out;
    };
    const auto frob = [](const Matrix& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
        return std::sqrt(s);
    };
    const auto frob_diff = [&](const Matrix& a, const Matrix& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double diff = a.data()[i] - b.data()[i];
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    const auto tr = [](const Matrix& m) {
        Matrix out(m.cols(), m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
        return out;
    };

    double worst = 0.0;
    int deficient = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t d = 2 + rng.uniform_index(11);
        const std::size_t k = 1 + rng.uniform_index(d + 3);
        if (k < d) ++deficient;
        Matrix g(k, d);
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
        Matrix a(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < k; ++r) s += g(r, i) * g(r, j);
                a(i, j) = a(j, i) = s;
            }
        const Matrix p = plab::pseudoinverse(a);
        const Matrix ap = mul(a, p), pa = mul(p, a);
        const double r1 = frob_diff(mul(ap, a), a) / std::max(1.0, frob(a));
        const double r2 = frob_diff(mul(pa, p), p) / std::max(1.0, frob(p));
        const double r3 = frob_diff(tr(ap), ap) / std::max(1.0, frob(ap));
        const double r4 = frob_diff(tr(pa), pa) / std::max(1.0, frob(pa));
        worst = std::max({worst, r1, r2, r3, r4});
    }
    Outcome o;
    o.pass = worst <= 1e-6;
    o.detail = "100 PSD matrices (" + std::to_string(deficient) +
               " rank-deficient), worst Penrose residual = " + fmt(worst) + " [need <=1e-6]";
    return o;
}

// 5 — the continual run: accuracy declines over tasks while NC1 rises.
Outcome criterion5() {
    Timer t;
    plab::config::ExperimentConfig cfg;
    cfg.protocol = "continual";
    cfg.seeds = {1, 2, 3};
    cfg.subset_size = 10000;
    cfg.input_dim = 784;
    cfg.hidden_dims = {100, 100};
    cfg.num_classes = 10;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 64;
    cfg.task_count = 20;
    cfg.first_task_epochs = 20;
    cfg.epochs_per_task = 8;

    plab::experiments::TaskData td = continual_data();
    td.train = plab::data::head(td.train, cfg.subset_size);
    const auto logs = plab::experiments::run_protocol_with_data(cfg, td);
    const auto& log = named(logs, "continual");

    std::vector<double> nc1, acc;
    std::vector<double> task_sum(cfg.task_count, 0.0);
    std::vector<int> task_n(cfg.task_count, 0);
    for (const auto& r : log.records) {
        if (std::isnan(r.nc1) || std::isnan(r.train_acc)) continue;
        nc1.push_back(r.nc1);
        acc.push_back(r.train_acc);
        task_sum[static_cast<std::size_t>(r.task)] += r.train_acc;
        task_n[static_cast<std::size_t>(r.task)] += 1;
    }
    const double r = oracle_pearson(nc1, acc);
    double first5 = 0.0, last5 = 0.0;
    for (int k = 0; k < 5; ++k) {
        first5 += task_sum[k] / task_n[k] / 5.0;
        last5 += task_sum[cfg.task_count - 1 - k] / task_n[cfg.task_count - 1 - k] / 5.0;
    }
    Outcome o;
    o.pass = nc1.size() == 60 && r <= -0.5 && last5 < first5;
    o.detail = "pearson(nc1, train_acc) = " + fmt(r) + " over " + std::to_string(nc1.size()) +
               " task rows; mean acc tasks 1-5 = " + fmt(first5) + " vs 16-20 = " + fmt(last5) +
               "; " + fmt(t.seconds()) + "s [need r <= -0.5, declining]";
    return o;
}

// 6 — longer first-task training lowers NC1 and next-task plasticity.
Outcome criterion6() {
    Timer t;
    plab::config::ExperimentConfig cfg;
    cfg.protocol = "first-task-sweep";
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.subset_size = 3000;
    cfg.input_dim = 784;
    cfg.hidden_dims = {32};
    cfg.num_classes = 10;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 64;
    cfg.e0_grid = {1, 50, 100};

    plab::experiments::TaskData td = sweep_data();
    td.train = plab::data::head(td.train, cfg.subset_size);
    const auto logs = plab::experiments::run_protocol_with_data(cfg, td);
    const auto& log = named(logs, "first_task_sweep");

    bool nc1_ok = true;
    double probe1 = 0.0, probe100 = 0.0;
    int n1 = 0, n100 = 0;
    std::string per_seed;
    for (std::uint64_t seed : cfg.seeds) {
        double nc1_e1 = NAN, nc1_e50 = NAN;
        for (const auto& r : log.records) {
            if (r.seed != seed) continue;
            if (r.task == 0 && r.epoch == 1) nc1_e1 = r.nc1;
            if (r.task == 0 && r.epoch == 50) nc1_e50 = r.nc1;
            if (r.task == 1 && r.epoch == 1) {
                probe1 += r.train_acc;
                ++n1;
            }
            if (r.task == 1 && r.epoch == 100) {
                probe100 += r.train_acc;
                ++n100;
            }
        }
        if (!(nc1_e50 <= nc1_e1)) nc1_ok = false;
        per_seed += (per_seed.empty() ? "" : " ") + fmt(nc1_e1) + ">" + fmt(nc1_e50);
    }
    probe1 /= n1;
    probe100 /= n100;
    Outcome o;
    o.pass = nc1_ok && n1 == 5 && n100 == 5 && probe100 <= probe1;
    o.detail = std::string("nc1(E0=50) <= nc1(E0=1) per seed: ") + (nc1_ok ? "yes" : "NO") +
               " (" + per_seed + "); mean probe acc E0=100 " + fmt(probe100) + " vs E0=1 " +
               fmt(probe1) + "; " + fmt(t.seconds()) + "s";
    return o;
}

// 7 — the NC1-threshold grid: lower thresholds cost epochs and plasticity.
Outcome criterion7() {
    Timer t;
    plab::config::ExperimentConfig cfg;
    cfg.protocol = "nc-threshold";
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.subset_size = 6000;
    cfg.input_dim = 784;
    cfg.hidden_dims = {48};
    cfg.num_classes = 10;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 128;
    cfg.nc1_thresholds = {0.22, 0.20, 0.18};

    plab::experiments::TaskData td = sweep_data();
    td.train = plab::data::head(td.train, cfg.subset_size);
    const auto logs = plab::experiments::run_protocol_with_data(cfg, td);
    const auto& summary = named(logs, "nc_threshold_summary");

    std::vector<double> nc1, epochs, probe;
    int unreachable = 0;
    for (const auto& r : summary.records) {
        if (r.epochs_used < 0) {
            ++unreachable;
            continue;
        }
        nc1.push_back(r.nc1);
        epochs.push_back(static_cast<double>(r.epochs_used));
        probe.push_back(r.train_acc);
    }
    Outcome o;
    if (unreachable > 0 || nc1.size() != 15) {
        o.pass = false;
        o.detail = std::to_string(unreachable) + "/15 grid cells never crossed their threshold; " +
                   fmt(t.seconds()) + "s";
        return o;
    }
    const double r_epochs = oracle_pearson(nc1, epochs);
    const double r_probe = oracle_pearson(nc1, probe);
    o.pass = r_epochs <= -0.8 && r_probe > 0.0;
    o.detail = "pearson(nc1, epochs) = " + fmt(r_epochs) + " [need <= -0.8], pearson(nc1, probe acc) = " +
               fmt(r_probe) + " [need > 0]; " + fmt(t.seconds()) + "s";
    return o;
}

// 8 — shrink-and-perturb hits its first two moments.
Outcome criterion8() {
    plab::nn::MlpModel model(128, {128, 128}, 10);
    plab::RngStream rng(0xACC8);
    Matrix& w0 = model.layer(0).weight; // 128x128: 16384 draws
    for (std::size_t i = 0; i < w0.size(); ++i) w0.data()[i] = 0.5 + 0.1 * rng.normal();
    model.layer(1).weight.fill(0.5); // constant layer isolates the noise term

    const auto moments = [](const Matrix& m) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) mean += m.data()[i];
        mean /= static_cast<double>(m.size());
        double var = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            var += (m.data()[i] - mean) * (m.data()[i] - mean);
        var /= static_cast<double>(m.size());
        return std::pair<double, double>(mean, var);
    };

    const auto [m0, v0] = moments(w0);
    plab::interventions::ShrinkPerturbParams p;
    p.lambda = 0.6;
    p.b = 0.01;
    p.seed = 77;
    const plab::nn::MlpModel out = plab::interventions::shrink_and_perturb(model, p);

    const double noise_var = p.b * p.b * (2.0 / 128.0); // fan_in = 128 for both layers
    const auto [am0, av0] = moments(out.layer(0).weight);
    const auto [am1, av1] = moments(out.layer(1).weight);
    const double em0 = p.lambda * m0, ev0 = p.lambda * p.lambda * v0 + noise_var;
    const double em1 = p.lambda * 0.5, ev1 = noise_var;
    const double r1 = std::fabs(am0 - em0) / std::fabs(em0);
    const double r2 = std::fabs(av0 - ev0) / ev0;
    const double r3 = std::fabs(am1 - em1) / std::fabs(em1);
    const double r4 = std::fabs(av1 - ev1) / ev1;
    const double worst = std::max({r1, r2, r3, r4});
    Outcome o;
    o.pass = worst <= 0.05;
    o.detail = "lambda=0.6 b=0.01 on 128x128 layers: mean/var rel errs " + fmt(r1) + "/" + fmt(r2) +
               " (gaussian layer), " + fmt(r3) + "/" + fmt(r4) +
               " (constant layer) [need <=0.05]";
    return o;
}

// 9 — NC1-regularized warm-up: less collapse, no test-accuracy price.
Outcome criterion9() {
    Timer t;
    const auto& base = warmstart_hard_log(false);
    const auto& reg = warmstart_hard_log(true);
    const std::size_t warmup = warmstart_hard_config(false).warmup_epochs;

    const auto means = [&](const plab::runlog::RunLog& log) {
        double nc1 = 0.0, acc = 0.0;
        int n_nc = 0, n_acc = 0;
        for (const auto& r : log.records) {
            if (r.task == 0 && r.epoch == static_cast<int>(warmup) && !std::isnan(r.nc1)) {
                nc1 += r.nc1;
                ++n_nc;
            }
            if (r.task == 2 && !std::isnan(r.test_acc)) {
                acc += r.test_acc;
                ++n_acc;
            }
        }
        if (n_nc == 0 || n_acc == 0) bail("criterion 9: missing warm-up or final rows");
        return std::pair<double, double>(nc1 / n_nc, acc / n_acc);
    };
    const auto [nc_base, acc_base] = means(base);
    const auto [nc_reg, acc_reg] = means(reg);

    Outcome o;
    const bool improved = acc_reg >= acc_base;
    o.pass = nc_reg > nc_base && acc_reg >= acc_base - 0.002;
    o.detail = "final warm-up nc1: reg " + fmt(nc_reg) + " vs base " + fmt(nc_base) +
               " [need higher]; final test acc: reg " + fmt(acc_reg) + " vs base " +
               fmt(acc_base) + " [need >= base - 0.002]; improvement direction holds: " +
               (improved ? "yes" : "no") + "; " + fmt(t.seconds()) + "s";
    return o;
}

// 10 — the analyze pipeline equals the windowed-Pearson oracle exactly.
Outcome criterion10() {
    Timer t;
    const auto& log = warmstart_plateau_log();
    const fs::path csv = tmp_root() / "warmstart.csv";
    const fs::path corr = tmp_root() / "warmstart_corr.csv";
    plab::runlog::write_csv(log, csv.string());

    std::string cli_out;
    if (!run_cli("analyze --log \"" + csv.string() + "\" --window 100 --no-svg --out-csv \"" +
                     corr.string() + "\"",
                 &cli_out))
        return {false, "analyze invocation failed: " + cli_out};

    // oracle rows in the same (seed, window) order
    struct Row {
        std::uint64_t seed;
        double start, r;
        bool valid;
    };
    std::vector<Row> want;
    for (const auto& s : pull_nc1_acc(log)) {
        const auto rs = oracle_windowed(s.x, s.y, 100);
        for (std::size_t i = 0; i < rs.size(); ++i)
            want.push_back({s.seed, s.epoch[i], rs[i], !std::isnan(rs[i])});
    }

    std::istringstream in(slurp(corr));
    std::string line;
    std::getline(in, line);
    if (line != "seed,start_epoch,r,valid") return {false, "unexpected header: " + line};
    std::vector<Row> got;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string seed, start, r, valid;
        std::getline(ls, seed, ',');
        std::getline(ls, start, ',');
        std::getline(ls, r, ',');
        std::getline(ls, valid, ',');
        got.push_back({std::stoull(seed), std::stod(start), r.empty() ? NAN : std::stod(r),
                       valid == "1"});
    }
    if (got.size() != want.size())
        return {false, "row count " + std::to_string(got.size()) + " != oracle " +
                           std::to_string(want.size())};
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const auto& g = got[i];
        const auto& w = want[i];
        if (g.seed != w.seed || g.start != w.start || g.valid != w.valid)
            return {false, "row " + std::to_string(i) + " keys/validity disagree"};
        if (g.valid) worst = std::max(worst, std::fabs(g.r - w.r));
    }
    Outcome o;
    o.pass = worst <= 1e-12;
    o.detail = std::to_string(got.size()) + " windows, worst |analyze - oracle| = " + fmt(worst) +
               "; " + fmt(t.seconds()) + "s [need <=1e-12]";
    return o;
}

// 11 — byte-identical reruns through the CLI.
Outcome criterion11() {
    Timer t;
    const fs::path dir = tmp_root() / "det";
    fs::create_directories(dir);

    plab::data::SynthConfig sc;
    sc.n = 720;
    sc.dim = 64;
    sc.num_classes = 4;
    sc.modes_per_class = 2;
    sc.class_sep = 0.3;
    sc.seed = 99;
    const auto all = plab::data::synthesize_dataset(sc);
    const auto train = plab::data::head(all, 560);
    std::vector<std::size_t> tail;
    for (std::size_t i = 560; i < all.size(); ++i) tail.push_back(i);
    const auto test = plab::data::take(all, tail);
    plab::data::write_mnist_idx(train, (dir / "tr-img.idx").string(),
                                (dir / "tr-lab.idx").string());
    plab::data::write_mnist_idx(test, (dir / "te-img.idx").string(),
                                (dir / "te-lab.idx").string());

    const std::string common = std::string("train_images = \"") + (dir / "tr-img.idx").string() +
                               "\"\ntrain_labels = \"" + (dir / "tr-lab.idx").string() +
                               "\"\ntest_images = \"" + (dir / "te-img.idx").string() +
                               "\"\ntest_labels = \"" + (dir / "te-lab.idx").string() +
                               "\"\ninput_dim = 64\nnum_classes = 4\nhidden_dims = [12]\n"
                               "learning_rate = 0.05\nbatch_size = 32\n";
    spill(dir / "sweep.toml", "protocol = \"first-task-sweep\"\nseeds = [3, 4]\n"
                              "e0_grid = [1, 4]\n" +
                                  common);
    spill(dir / "cont.toml", "protocol = \"continual\"\nseeds = [3]\ntask_count = 3\n"
                             "first_task_epochs = 2\nepochs_per_task = 2\n" +
                                 common);

    const auto rerun = [&](const std::string& proto, const fs::path& cfg,
                           const std::string& csv) -> std::string {
        std::string out;
        for (int i = 1; i <= 2; ++i) {
            const fs::path od = dir / (proto + std::to_string(i));
            if (!run_cli(proto + " --config \"" + cfg.string() + "\" --out-dir \"" +
                             od.string() + "\"",
                         &out))
                bail(proto + " run failed: " + out);
        }
        const std::string a = slurp(dir / (proto + "1") / csv);
        const std::string b = slurp(dir / (proto + "2") / csv);
        if (a != b) return proto + ": reruns differ";
        if (a.empty()) return proto + ": empty log";
        return "";
    };
    const std::string e1 = rerun("first-task-sweep", dir / "sweep.toml", "first_task_sweep.csv");
    const std::string e2 = rerun("continual", dir / "cont.toml", "continual.csv");
    Outcome o;
    o.pass = e1.empty() && e2.empty();
    o.detail = o.pass ? "first-task-sweep and continual reruns byte-identical; " +
                            fmt(t.seconds()) + "s"
                      : e1 + " " + e2;
    return o;
}

// 12 — windowed correlation fades between early and late warm-up.
Outcome criterion12() {
    Timer t;
    const auto& log = warmstart_plateau_log();
    const auto series = pull_nc1_acc(log);
    if (series.empty()) return {false, "no (nc1, test_acc) rows in the warm-start log"};

    std::vector<double> first_rs, last_rs;
    std::size_t positions = 0;
    for (const auto& s : series) {
        const auto rs = oracle_windowed(s.x, s.y, 100);
        positions = rs.size();
        // a degenerate window means literally no covariation: count it as r = 0
        first_rs.push_back(std::isnan(rs.front()) ? 0.0 : rs.front());
        last_rs.push_back(std::isnan(rs.back()) ? 0.0 : rs.back());
    }
    double first = 0.0, last = 0.0;
    for (double v : first_rs) first += v / first_rs.size();
    for (double v : last_rs) last += v / last_rs.size();
    Outcome o;
    o.pass = std::fabs(first) > std::fabs(last);
    o.detail = "seed-mean windowed r: first window " + fmt(first) + ", last window " + fmt(last) +
               " (" + std::to_string(positions) + " positions/seed); " + fmt(t.seconds()) +
               "s [need |first| > |last|]";
    return o;
}

// ---------------------------------------------------------------------------

struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "gradient-check", criterion1},
    {2, "metric-oracles", criterion2},
    {3, "nc1-analytic", criterion3},
    {4, "pseudoinverse-penrose", criterion4},
    {5, "continual-decline", criterion5},
    {6, "first-task-sweep", criterion6},
    {7, "threshold-grid", criterion7},
    {8, "shrink-perturb-moments", criterion8},
    {9, "nc1-reg-warmstart", criterion9},
    {10, "analyze-window-oracle", criterion10},
    {11, "rerun-determinism", criterion11},
    {12, "correlation-decay", criterion12},
};

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const int id = std::atoi(argv[i]);
        if (id < 1 || id > 12) {
            std::fprintf(stderr, "usage: acceptance [criterion numbers 1-12]\n");
            return 64;
        }
        wanted.insert(id);
    }

    Timer total;
    int failures = 0, run = 0;
    for (const auto& c : kCriteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        std::fprintf(stderr, "[acceptance] running %02d %s...\n", c.id, c.name);
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        ++run;
        if (!o.pass) ++failures;
        std::printf("[%s] %02d %-24s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/%d criteria passed in %.1fs\n", run - failures, run,
                total.seconds());
    return failures;
}
