#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plab/eig.hpp"
#include "plab/error.hpp"

namespace plab {
namespace config {

// One value from the flat TOML subset: strings, numbers, booleans, and
// single-line arrays of strings or numbers. No tables, no nesting.
struct TomlValue {
    enum class Kind { String, Number, Boolean, NumberArray, StringArray };
    Kind kind = Kind::Number;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<double> nums;
    std::vector<std::string> strs;
    int line = 0; // 1-based source line, for error messages
};

// Parses `key = value` lines; '#' starts a comment outside strings. Errors
// carry the offending line number.
std::map<std::string, TomlValue> parse_toml(const std::string& text);

struct ExperimentConfig {
    std::string protocol = "continual"; // continual | first-task-sweep | nc-threshold | warmstart
    std::vector<std::uint64_t> seeds = {1};

    std::string dataset = "mnist-idx"; // mnist-idx | cifar10
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::vector<std::string> cifar_train;
    std::vector<std::string> cifar_test;
    std::string out_dir = "runs";
    std::size_t subset_size = 0; // 0 = use everything
    std::size_t test_subset_size = 0;

    std::size_t input_dim = 784;
    std::vector<std::size_t> hidden_dims = {100, 100};
    std::size_t num_classes = 10;
    double learning_rate = 0.01;
    double momentum = 0.0;
    std::size_t batch_size = 64;

    std::size_t task_count = 20;
    std::size_t first_task_epochs = 1;
    std::size_t epochs_per_task = 1;
    std::vector<std::size_t> e0_grid = {1, 2, 5, 10, 50, 100};
    std::vector<double> nc1_thresholds = {0.22, 0.20, 0.18};
    std::size_t threshold_epoch_cap = 500;

    std::size_t warmup_epochs = 100;
    double convergence_train_acc = 0.99;
    std::size_t phase2_max_epochs = 200;
    bool shrink_perturb = false;
    double sp_lambda = 0.6;
    double sp_b = 0.01;
    bool nc1_reg = false;
    double nc1_reg_weight = 0.05;

    bool identity_task0 = true;
    bool identity_all_tasks = false; // no-shift control runs
    bool permute_test = true;
    bool record_wall_time = false;
    double rank_tol = kDefaultRankTol;

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const;
    std::string to_toml() const; // canonical snapshot: fixed key order, %.17g
    std::uint64_t hash() const;  // FNV-1a over the canonical snapshot

    // Unknown keys are Parse errors naming the line. Integer-valued keys are
    // read through doubles, so seeds above 2^53 are out of range.
    static ExperimentConfig from_toml_text(const std::string& text);
    static ExperimentConfig from_toml_file(const std::string& path);
};

} // namespace config
} // namespace plab
