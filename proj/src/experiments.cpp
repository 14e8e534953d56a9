#include "plab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <tuple>
#include <utility>

namespace plab {
namespace experiments {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string resolve_path(const std::string& path) {
    if (path.empty() || path[0] == '/') return path;
    const char* root = std::getenv("PLAB_DATA_DIR");
    if (!root || !*root) return path;
    return std::string(root) + "/" + path;
}

std::string sanitize_note(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ',' || c == '"') out += ';';
        else if (c == '\n' || c == '\r') out += ' ';
        else out += c;
    }
    return out;
}

void append_note(runlog::Record& r, const std::string& note) {
    if (note.empty()) return;
    if (!r.note.empty()) r.note += "; ";
    r.note += sanitize_note(note);
}

void fill_nc(runlog::Record& r, const Measured& m) {
    if (m.ok) {
        r.nc1 = m.rep.nc1;
        r.nc2_norm_cv = m.rep.nc2_norm_cv;
        r.nc2_angle_dev = m.rep.nc2_angle_dev;
        r.nc3 = m.rep.nc3;
        r.nc4_mismatch = m.rep.nc4_mismatch;
        if (m.rep.nc1_clamped) append_note(r, "nc1 round-off clamped to 0");
    } else {
        append_note(r, "nc skipped: " + m.warning);
    }
}

runlog::Record base_record(std::uint64_t seed, const std::string& protocol, int task,
                           int epoch) {
    runlog::Record r;
    r.seed = seed;
    r.protocol = protocol;
    r.task = task;
    r.epoch = epoch;
    return r;
}

std::uint64_t task_stream(std::uint64_t seed, std::uint64_t task) {
    return RngStream(seed).derive(rng_purpose::kShuffle, task).seed();
}

nn::MlpModel fresh_model(const config::ExperimentConfig& cfg, std::uint64_t seed) {
    nn::MlpModel model(cfg.input_dim, cfg.hidden_dims, cfg.num_classes);
    RngStream rng = RngStream(seed).derive(rng_purpose::kModelInit);
    model.init_weights(rng);
    return model;
}

double eval_acc(const nn::MlpModel& model, const data::LabeledDataset& ds) {
    return nn::evaluate_accuracy(model, ds.images, ds.labels);
}

// Task construction: identity for task 0 (configurable) or for every task in
// no-shift control runs.
std::pair<data::LabeledDataset, data::PermutedTask>
make_task(const config::ExperimentConfig& cfg, const data::LabeledDataset& base,
          std::size_t task_index, std::uint64_t seed) {
    if (cfg.identity_all_tasks) {
        data::PermutedTask t;
        t.task_index = task_index;
        t.seed = seed;
        t.permutation.resize(base.dim());
        for (std::size_t i = 0; i < base.dim(); ++i) t.permutation[i] = i;
        return {base, t};
    }
    return data::make_permuted_task(base, task_index, seed, cfg.identity_task0);
}

void check_data(const config::ExperimentConfig& cfg, const TaskData& data) {
    data.train.validate();
    data.test.validate();
    if (data.train.size() == 0) raise(ErrorCode::InvalidArgument, "training set is empty");
    if (data.train.dim() != cfg.input_dim)
        raise(ErrorCode::Dimension,
              "training data dim " + std::to_string(data.train.dim()) +
                  " does not match configured input_dim " + std::to_string(cfg.input_dim));
    if (data.test.size() > 0 && data.test.dim() != cfg.input_dim)
        raise(ErrorCode::Dimension,
              "test data dim " + std::to_string(data.test.dim()) +
                  " does not match configured input_dim " + std::to_string(cfg.input_dim));
    for (int label : data.train.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= cfg.num_classes)
            raise(ErrorCode::InvalidArgument,
                  "training label " + std::to_string(label) + " outside configured " +
                      std::to_string(cfg.num_classes) + " classes");
    for (int label : data.test.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= cfg.num_classes)
            raise(ErrorCode::InvalidArgument,
                  "test label " + std::to_string(label) + " outside configured " +
                      std::to_string(cfg.num_classes) + " classes");
}

} // namespace

TaskData load_task_data(const config::ExperimentConfig& cfg) {
    cfg.validate();
    TaskData out;
    if (cfg.dataset == "mnist-idx") {
        const char* missing = cfg.train_images.empty()   ? "train_images"
                              : cfg.train_labels.empty() ? "train_labels"
                              : cfg.test_images.empty()  ? "test_images"
                              : cfg.test_labels.empty()  ? "test_labels"
                                                         : nullptr;
        if (missing)
            raise(ErrorCode::InvalidArgument,
                  std::string(missing) + " path is empty for dataset mnist-idx");
        out.train = data::load_mnist_idx(resolve_path(cfg.train_images),
                                         resolve_path(cfg.train_labels));
        out.test =
            data::load_mnist_idx(resolve_path(cfg.test_images), resolve_path(cfg.test_labels));
    } else {
        if (cfg.cifar_train.empty())
            raise(ErrorCode::InvalidArgument, "cifar_train path list is empty");
        if (cfg.cifar_test.empty())
            raise(ErrorCode::InvalidArgument, "cifar_test path list is empty");
        std::vector<std::string> train_paths, test_paths;
        for (const auto& p : cfg.cifar_train) train_paths.push_back(resolve_path(p));
        for (const auto& p : cfg.cifar_test) test_paths.push_back(resolve_path(p));
        out.train = data::load_cifar10_binary(train_paths);
        out.test = data::load_cifar10_binary(test_paths);
    }
    if (cfg.subset_size > 0 && cfg.subset_size < out.train.size())
        out.train = data::head(out.train, cfg.subset_size);
    if (cfg.test_subset_size > 0 && cfg.test_subset_size < out.test.size())
        out.test = data::head(out.test, cfg.test_subset_size);
    check_data(cfg, out);
    return out;
}

double train_one_epoch(nn::MlpModel& model, const data::LabeledDataset& ds,
                       const nn::SgdConfig& sgd, std::size_t batch_size,
                       std::uint64_t shuffle_seed, std::uint64_t epoch,
                       const interventions::Nc1RegConfig* reg) {
    const auto batches = data::minibatch_indices(ds.size(), batch_size, shuffle_seed, epoch);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
        const data::Minibatch mb = data::gather(ds, idx);
        const auto fwd = model.forward(mb.images);
        auto ce = nn::cross_entropy(fwd.logits, mb.labels);
        double loss = ce.loss;

        Matrix extra;
        const Matrix* extra_ptr = nullptr;
        if (reg) {
            auto pen = interventions::nc1_batch_loss(fwd.features, mb.labels,
                                                     model.num_classes(), *reg);
            if (!pen.skipped) {
                loss += reg->weight * pen.penalty;
                extra = std::move(pen.grad_features);
                for (std::size_t i = 0; i < extra.size(); ++i) extra.data()[i] *= reg->weight;
                extra_ptr = &extra;
            }
        }
        model.backward_and_step(ce.grad_logits, extra_ptr, sgd);
        loss_sum += loss;
    }
    return batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
}

Measured measure_collapse(const nn::MlpModel& model, const data::LabeledDataset& ds,
                          std::size_t num_classes, double rank_tol) {
    Measured m;
    const std::size_t n = ds.size();
    Matrix features(n, model.feature_dim());
    Matrix logits(n, model.num_classes());
    const std::size_t eval_batch = 256;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n; start += eval_batch) {
        const std::size_t stop = std::min(start + eval_batch, n);
        idx.clear();
        for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
        const data::Minibatch mb = data::gather(ds, idx);
        const auto fwd = model.forward_inference(mb.images);
        for (std::size_t i = start; i < stop; ++i) {
            for (std::size_t j = 0; j < features.cols(); ++j)
                features(i, j) = fwd.features(i - start, j);
            for (std::size_t j = 0; j < logits.cols(); ++j)
                logits(i, j) = fwd.logits(i - start, j);
        }
    }
    collapse::FeatureBatch batch;
    batch.features = std::move(features);
    batch.labels = ds.labels;
    batch.num_classes = num_classes;
    try {
        m.rep = collapse::report(batch, logits, model.classifier_weight(), rank_tol);
        m.ok = true;
    } catch (const Error& e) {
        m.warning = e.what();
    }
    return m;
}

double plasticity_probe(const nn::MlpModel& model, const ProbeTask& task, int budget_epochs) {
    if (budget_epochs < 1)
        raise(ErrorCode::InvalidArgument, "plasticity probe: budget must be >= 1");
    if (!task.train || !task.eval)
        raise(ErrorCode::InvalidArgument, "plasticity probe: train and eval datasets required");
    task.sgd.validate();
    nn::MlpModel copy = model;
    copy.clear_cache();
    for (int e = 0; e < budget_epochs; ++e)
        train_one_epoch(copy, *task.train, task.sgd, task.batch_size, task.shuffle_seed,
                        static_cast<std::uint64_t>(e));
    return eval_acc(copy, *task.eval);
}

runlog::RunLog run_continual(const config::ExperimentConfig& cfg, const TaskData& data) {
    cfg.validate();
    check_data(cfg, data);
    const nn::SgdConfig sgd{cfg.learning_rate, cfg.momentum};
    runlog::RunLog log;
    for (std::uint64_t seed : cfg.seeds) {
        nn::MlpModel model = fresh_model(cfg, seed);
        for (std::size_t t = 0; t < cfg.task_count; ++t) {
            const auto start = Clock::now();
            auto [task_train, ptask] = make_task(cfg, data.train, t, seed);
            const std::size_t epochs = t == 0 ? cfg.first_task_epochs : cfg.epochs_per_task;
            for (std::size_t e = 0; e < epochs; ++e)
                train_one_epoch(model, task_train, sgd, cfg.batch_size, task_stream(seed, t),
                                e);

            runlog::Record r = base_record(seed, "continual", static_cast<int>(t),
                                           static_cast<int>(epochs));
            r.train_acc = eval_acc(model, task_train);
            if (data.test.size() > 0) {
                const data::LabeledDataset task_test =
                    cfg.permute_test ? data::apply_permutation(data.test, ptask.permutation)
                                     : data.test;
                r.test_acc = eval_acc(model, task_test);
            }
            fill_nc(r, measure_collapse(model, task_train, cfg.num_classes, cfg.rank_tol));
            r.epochs_used = static_cast<long>(epochs);
            if (cfg.record_wall_time) r.wall_time_ms = ms_since(start);
            log.records.push_back(std::move(r));
        }
    }
    log.validate();
    return log;
}

runlog::RunLog run_first_task_sweep(const config::ExperimentConfig& cfg, const TaskData& data) {
    cfg.validate();
    check_data(cfg, data);
    const nn::SgdConfig sgd{cfg.learning_rate, cfg.momentum};
    runlog::RunLog log;
    for (std::uint64_t seed : cfg.seeds) {
        std::vector<runlog::Record> task0, probes;
        const data::LabeledDataset probe_train = make_task(cfg, data.train, 1, seed).first;
        for (std::size_t e0 : cfg.e0_grid) {
            const auto start = Clock::now();
            nn::MlpModel model = fresh_model(cfg, seed);
            const data::LabeledDataset task_train = make_task(cfg, data.train, 0, seed).first;
            for (std::size_t e = 0; e < e0; ++e)
                train_one_epoch(model, task_train, sgd, cfg.batch_size, task_stream(seed, 0),
                                e);

            if (e0 > 0) {
                runlog::Record r =
                    base_record(seed, "first-task-sweep", 0, static_cast<int>(e0));
                r.train_acc = eval_acc(model, task_train);
                fill_nc(r, measure_collapse(model, task_train, cfg.num_classes, cfg.rank_tol));
                r.epochs_used = static_cast<long>(e0);
                if (cfg.record_wall_time) r.wall_time_ms = ms_since(start);
                task0.push_back(std::move(r));
            }

            ProbeTask probe;
            probe.train = &probe_train;
            probe.eval = &probe_train; // permuted-image protocols measure training accuracy
            probe.sgd = sgd;
            probe.batch_size = cfg.batch_size;
            probe.shuffle_seed = task_stream(seed, 1);
            runlog::Record p = base_record(seed, "first-task-sweep", 1, static_cast<int>(e0));
            p.train_acc = plasticity_probe(model, probe, 1);
            p.epochs_used = static_cast<long>(e0);
            if (e0 == 0) append_note(p, "e0 0: task-0 nc record skipped");
            probes.push_back(std::move(p));
        }
        for (auto& r : task0) log.records.push_back(std::move(r));
        for (auto& r : probes) log.records.push_back(std::move(r));
    }
    log.validate();
    return log;
}

namespace {

struct ThresholdCell {
    ThresholdOutcome outcome;
    bool reached = false;
    double best_nc1 = std::numeric_limits<double>::quiet_NaN();
};

ThresholdCell threshold_cell(const config::ExperimentConfig& cfg, const TaskData& data,
                             std::uint64_t seed, double threshold) {
    if (!(threshold > 0.0))
        raise(ErrorCode::InvalidArgument, "nc1 threshold must be positive");
    const nn::SgdConfig sgd{cfg.learning_rate, cfg.momentum};
    ThresholdCell cell;
    nn::MlpModel model = fresh_model(cfg, seed);
    const data::LabeledDataset task_train = make_task(cfg, data.train, 0, seed).first;

    for (std::size_t e = 1; e <= cfg.threshold_epoch_cap; ++e) {
        const auto start = Clock::now();
        train_one_epoch(model, task_train, sgd, cfg.batch_size, task_stream(seed, 0), e - 1);
        runlog::Record r = base_record(seed, "nc-threshold", 0, static_cast<int>(e));
        r.train_acc = eval_acc(model, task_train);
        const Measured m = measure_collapse(model, task_train, cfg.num_classes, cfg.rank_tol);
        fill_nc(r, m);
        if (cfg.record_wall_time) r.wall_time_ms = ms_since(start);
        cell.outcome.log.records.push_back(std::move(r));
        if (m.ok && (std::isnan(cell.best_nc1) || m.rep.nc1 < cell.best_nc1))
            cell.best_nc1 = m.rep.nc1;
        if (m.ok && m.rep.nc1 < threshold) {
            cell.reached = true;
            cell.outcome.epochs_used = static_cast<long>(e);
            cell.outcome.final_nc1 = m.rep.nc1;
            cell.outcome.final_train_acc = cell.outcome.log.records.back().train_acc;
            break;
        }
    }
    if (!cell.reached) return cell;

    const data::LabeledDataset probe_train = make_task(cfg, data.train, 1, seed).first;
    ProbeTask probe;
    probe.train = &probe_train;
    probe.eval = &probe_train;
    probe.sgd = sgd;
    probe.batch_size = cfg.batch_size;
    probe.shuffle_seed = task_stream(seed, 1);
    cell.outcome.probe_acc = plasticity_probe(model, probe, 1);

    runlog::Record p = base_record(seed, "nc-threshold", 1,
                                   static_cast<int>(cell.outcome.epochs_used));
    p.train_acc = cell.outcome.probe_acc;
    p.epochs_used = cell.outcome.epochs_used;
    cell.outcome.log.records.push_back(std::move(p));
    cell.outcome.model = std::move(model);
    return cell;
}

std::string fmt_threshold(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

} // namespace

ThresholdOutcome train_to_nc1_threshold(const config::ExperimentConfig& cfg,
                                        const TaskData& data, std::uint64_t seed,
                                        double threshold) {
    cfg.validate();
    check_data(cfg, data);
    ThresholdCell cell = threshold_cell(cfg, data, seed, threshold);
    if (!cell.reached) {
        std::string best = std::isnan(cell.best_nc1) ? "never measurable"
                                                     : "best " + fmt_threshold(cell.best_nc1);
        throw ThresholdUnreachable(
            cell.best_nc1, static_cast<long>(cfg.threshold_epoch_cap),
            "threshold unreachable: nc1 never fell below " + fmt_threshold(threshold) +
                " within " + std::to_string(cfg.threshold_epoch_cap) + " epochs (" + best +
                ")");
    }
    return std::move(cell.outcome);
}

runlog::RunLog run_warmstart(const config::ExperimentConfig& cfg, const TaskData& data) {
    cfg.validate();
    check_data(cfg, data);
    const nn::SgdConfig sgd{cfg.learning_rate, cfg.momentum};
    interventions::Nc1RegConfig reg;
    reg.weight = cfg.nc1_reg_weight;
    reg.rank_tol = cfg.rank_tol;

    runlog::RunLog log;
    for (std::uint64_t seed : cfg.seeds) {
        const data::WarmStartSplit split = data::split_warmup(data.train, seed);
        nn::MlpModel model = fresh_model(cfg, seed);

        for (std::size_t e = 1; e <= cfg.warmup_epochs; ++e) {
            const auto start = Clock::now();
            train_one_epoch(model, split.warmup, sgd, cfg.batch_size, task_stream(seed, 0),
                            e - 1, cfg.nc1_reg ? &reg : nullptr);
            runlog::Record r = base_record(seed, "warmstart", 0, static_cast<int>(e));
            r.train_acc = eval_acc(model, split.warmup);
            if (data.test.size() > 0) r.test_acc = eval_acc(model, data.test);
            fill_nc(r, measure_collapse(model, split.warmup, cfg.num_classes, cfg.rank_tol));
            if (cfg.record_wall_time) r.wall_time_ms = ms_since(start);
            log.records.push_back(std::move(r));
        }

        if (cfg.shrink_perturb) {
            interventions::ShrinkPerturbParams sp;
            sp.lambda = cfg.sp_lambda;
            sp.b = cfg.sp_b;
            sp.seed = seed;
            model = interventions::shrink_and_perturb(model, sp);
            runlog::Record r = base_record(seed, "warmstart", 1, 0);
            r.train_acc = eval_acc(model, split.warmup);
            if (data.test.size() > 0) r.test_acc = eval_acc(model, data.test);
            fill_nc(r, measure_collapse(model, split.warmup, cfg.num_classes, cfg.rank_tol));
            append_note(r, "post shrink-perturb");
            log.records.push_back(std::move(r));
        }

        long used = 0;
        bool converged = false;
        for (std::size_t e = 1; e <= cfg.phase2_max_epochs; ++e) {
            const auto start = Clock::now();
            train_one_epoch(model, split.full, sgd, cfg.batch_size, task_stream(seed, 1),
                            e - 1);
            runlog::Record r = base_record(seed, "warmstart", 1, static_cast<int>(e));
            r.train_acc = eval_acc(model, split.full);
            if (data.test.size() > 0) r.test_acc = eval_acc(model, data.test);
            if (cfg.record_wall_time) r.wall_time_ms = ms_since(start);
            used = static_cast<long>(e);
            converged = r.train_acc >= cfg.convergence_train_acc;
            log.records.push_back(std::move(r));
            if (converged) break;
        }

        runlog::Record fin = base_record(seed, "warmstart", 2, 0);
        if (data.test.size() > 0) fin.test_acc = eval_acc(model, data.test);
        fin.train_acc = eval_acc(model, split.warmup); // accuracy on the warm-up portion
        fin.epochs_used = used;
        if (!converged)
            append_note(fin, "phase 2 hit the epoch cap before reaching " +
                                 fmt_threshold(cfg.convergence_train_acc) +
                                 " training accuracy");
        log.records.push_back(std::move(fin));
    }
    log.validate();
    return log;
}

std::vector<NamedLog> run_protocol_with_data(const config::ExperimentConfig& cfg,
                                             const TaskData& data) {
    cfg.validate();
    std::vector<NamedLog> out;
    if (cfg.protocol == "continual") {
        out.push_back({"continual", run_continual(cfg, data)});
    } else if (cfg.protocol == "first-task-sweep") {
        out.push_back({"first_task_sweep", run_first_task_sweep(cfg, data)});
    } else if (cfg.protocol == "warmstart") {
        out.push_back({"warmstart", run_warmstart(cfg, data)});
    } else { // nc-threshold
        runlog::RunLog summary;
        for (std::size_t ti = 0; ti < cfg.nc1_thresholds.size(); ++ti) {
            const double threshold = cfg.nc1_thresholds[ti];
            runlog::RunLog detail;
            for (std::uint64_t seed : cfg.seeds) {
                ThresholdCell cell = threshold_cell(cfg, data, seed, threshold);
                for (auto& r : cell.outcome.log.records)
                    detail.records.push_back(std::move(r));

                runlog::Record s = base_record(seed, "nc-threshold",
                                               static_cast<int>(ti), 0);
                append_note(s, "threshold " + fmt_threshold(threshold));
                if (cell.reached) {
                    s.nc1 = cell.outcome.final_nc1;
                    s.train_acc = cell.outcome.probe_acc;
                    s.epochs_used = cell.outcome.epochs_used;
                } else {
                    s.nc1 = cell.best_nc1;
                    s.epochs_used = -1;
                    append_note(s, "threshold unreachable within " +
                                       std::to_string(cfg.threshold_epoch_cap) + " epochs");
                }
                summary.records.push_back(std::move(s));
            }
            out.push_back({"nc_threshold_" + std::to_string(ti), std::move(detail)});
        }
        std::stable_sort(summary.records.begin(), summary.records.end(),
                         [](const runlog::Record& a, const runlog::Record& b) {
                             return std::make_tuple(a.seed, a.task, a.epoch) <
                                    std::make_tuple(b.seed, b.task, b.epoch);
                         });
        out.push_back({"nc_threshold_summary", std::move(summary)});
    }
    const std::string snapshot = cfg.to_toml();
    for (auto& named : out) {
        named.log.config_snapshot = snapshot;
        named.log.validate();
    }
    return out;
}

std::vector<NamedLog> run_protocol(const config::ExperimentConfig& cfg) {
    const TaskData data = load_task_data(cfg);
    return run_protocol_with_data(cfg, data);
}

} // namespace experiments
} // namespace plab
