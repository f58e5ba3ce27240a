#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asvd/continual.hpp"
#include "asvd/network.hpp"
#include "asvd/tasks.hpp"

namespace asvd {

inline constexpr int kConfigSchemaVersion = 1;

/// Malformed configuration. `key` is the dotted path of the offending entry.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct NetworkConfig {
    std::vector<int> hidden = {32, 32};
    Activation activation = Activation::tanh;
    double init_scale = 0.01;
};

/// Input dimension and output dimension come from the task stream.
Network make_network(const NetworkConfig& config, int input_dim, int output_dim, std::uint64_t seed);

struct TheoryConfig {
    int hierarchy_trials = 50;
    int blocks = 3;
    int block_dim = 4;
    double update_norm_sq = 1.0;
    int rayleigh_trials = 1000;
    int rayleigh_dim = 12;
    /// Also measure the hierarchy on the Hessian of a small trained network.
    bool network_hessian = true;
    int network_dimension = 6;
    int network_width = 6;
};

struct ExperimentConfig {
    TaskStreamSpec tasks;  // tasks.seed is overwritten by each run seed
    NetworkConfig network;
    std::vector<TrainerKind> trainers = {TrainerKind::adaptive_svd};
    OptimizerConfig optimizer;
    RetentionConfig retention;
    double fixed_fraction = 0.5;
    std::size_t importance_samples = kDefaultImportanceSamples;
    ImportanceSplit importance_split = ImportanceSplit::train;
    bool track_first_order = true;
    /// Check the interference bound at every step; otherwise every 100th.
    bool debug_checks = true;
    /// Also run adaptive_svd with mrr and trr halved.
    bool halved_retention_ablation = false;
    std::vector<std::uint64_t> seeds = {0};
    /// Explicit task orders (1-based ids). Empty means `permutations` orders
    /// per seed: the identity followed by seeded shuffles.
    std::vector<std::vector<int>> task_orders;
    int permutations = 1;
    /// Held-out tasks evaluated before and after training; nullopt disables.
    std::optional<TaskStreamSpec> suite;
    std::string output_dir;  // empty: resolved from the environment
    TheoryConfig theory;

    TrainerConfig trainer_config(TrainerKind kind) const;

    /// Task orders used with a given seed.
    std::vector<std::vector<int>> orders_for_seed(std::uint64_t seed) const;

    /// Data, suite and init streams all derive from `seed`.
    TaskStreamSpec task_spec_for_seed(std::uint64_t seed) const;
    std::optional<TaskStreamSpec> suite_spec_for_seed(std::uint64_t seed) const;

    nlohmann::json to_json() const;
    /// Missing keys take defaults; unknown keys, wrong types and invalid
    /// values throw SchemaError.
    static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws SchemaError if the configured activation is not twice differentiable.
void require_smooth_theory(const ExperimentConfig& config);

}  // namespace asvd
