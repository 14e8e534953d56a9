#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/collapse.hpp"
#include "plab/config.hpp"
#include "plab/data.hpp"
#include "plab/interventions.hpp"
#include "plab/nn.hpp"
#include "plab/runlog.hpp"

namespace plab {
namespace experiments {

// Train/test pair every protocol draws from. Permuted tasks and warm-start
// splits are derived from `train` per seed.
struct TaskData {
    data::LabeledDataset train;
    data::LabeledDataset test;
};

// Reads the datasets named by the config (MNIST IDX pair or CIFAR-10
// batches), resolving relative paths against $PLAB_DATA_DIR, then applies the
// subset_size/test_subset_size head cuts and checks dims against the config.
TaskData load_task_data(const config::ExperimentConfig& cfg);

// One epoch of minibatch SGD; returns mean training loss (cross-entropy plus
// the weighted NC1 penalty when `reg` is set). Shuffle order comes from
// (shuffle_seed, epoch) only.
double train_one_epoch(nn::MlpModel& model, const data::LabeledDataset& ds,
                       const nn::SgdConfig& sgd, std::size_t batch_size,
                       std::uint64_t shuffle_seed, std::uint64_t epoch,
                       const interventions::Nc1RegConfig* reg = nullptr);

// Full-dataset collapse measurement. Metric failures (e.g. vanished
// between-class scatter on an untrained net) surface as `ok = false` with a
// note, never as exceptions: a 140-task run must outlive them.
struct Measured {
    collapse::CollapseReport rep;
    bool ok = false;
    std::string warning;
};

Measured measure_collapse(const nn::MlpModel& model, const data::LabeledDataset& ds,
                          std::size_t num_classes, double rank_tol);

// Trains a throwaway copy of `model` on `train` for budget_epochs and returns
// accuracy on `eval` (pass train itself for the permuted-image protocols,
// the test set for warm starts). The input model is never touched.
struct ProbeTask {
    const data::LabeledDataset* train = nullptr;
    const data::LabeledDataset* eval = nullptr;
    nn::SgdConfig sgd;
    std::size_t batch_size = 64;
    std::uint64_t shuffle_seed = 0;
};

double plasticity_probe(const nn::MlpModel& model, const ProbeTask& task, int budget_epochs);

// Raised when NC1 never crosses the requested threshold within the epoch cap.
class ThresholdUnreachable : public Error {
public:
    ThresholdUnreachable(double best_nc1, long epochs, const std::string& message)
        : Error(ErrorCode::State, message), best_nc1_(best_nc1), epochs_(epochs) {}

    double best_nc1() const { return best_nc1_; }
    long epochs() const { return epochs_; }

private:
    double best_nc1_;
    long epochs_;
};

// --- protocol runners -------------------------------------------------------
// Record layouts (strictly ordered by (seed, task, epoch)):
//   continual:        one record per (seed, task); epoch = epochs trained on
//                     that task; metrics on that task's training data.
//   first-task-sweep: per seed, one task-0 record per E0 (epoch = E0, skipped
//                     with a warning when E0 = 0), then one task-1 probe
//                     record per E0 (epoch = E0, train_acc = probe accuracy).
//   nc-threshold:     detail log per threshold (task-0 records per epoch,
//                     then the probe record); summary log keyed task =
//                     threshold index with epochs_used and the probe accuracy.
//   warmstart:        task 0 = warm-up epochs (per-epoch NC + test acc),
//                     task 1 epoch 0 = post-shrink-perturb snapshot (only if
//                     enabled), task 1 epochs >= 1 = full-dataset phase,
//                     task 2 epoch 0 = final test / warm-up-portion accuracy.

runlog::RunLog run_continual(const config::ExperimentConfig& cfg, const TaskData& data);

runlog::RunLog run_first_task_sweep(const config::ExperimentConfig& cfg, const TaskData& data);

struct ThresholdOutcome {
    long epochs_used = 0;
    nn::MlpModel model;
    runlog::RunLog log; // per-epoch task-0 records plus the probe record
    double final_nc1 = 0.0;
    double probe_acc = 0.0;
    double final_train_acc = 0.0;
};

// Single (seed, threshold) cell; throws ThresholdUnreachable at the cap.
ThresholdOutcome train_to_nc1_threshold(const config::ExperimentConfig& cfg,
                                        const TaskData& data, std::uint64_t seed,
                                        double threshold);

runlog::RunLog run_warmstart(const config::ExperimentConfig& cfg, const TaskData& data);

// Named output files of one protocol run (nc-threshold yields one detail log
// per threshold plus "nc_threshold_summary"; the others yield one log).
struct NamedLog {
    std::string name;
    runlog::RunLog log;
};

std::vector<NamedLog> run_protocol_with_data(const config::ExperimentConfig& cfg,
                                             const TaskData& data);

// Loads data per config, runs, and stamps each log with the config snapshot.
std::vector<NamedLog> run_protocol(const config::ExperimentConfig& cfg);

} // namespace experiments
} // namespace plab
