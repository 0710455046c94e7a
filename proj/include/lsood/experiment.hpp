#pragma once

// k-fold experiment comparing MD and RMD on baseline and label-smoothed
// features, plus the config file that drives it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lsood/bench.hpp"
#include "lsood/gaussian_ood.hpp"
#include "lsood/metrics.hpp"
#include "lsood/trainer.hpp"
#include "lsood/viz.hpp"

namespace lsood {

enum class TemplateSource { Weights, Means };

inline TrainConfig experiment_train_config(double epsilon) {
    TrainConfig t;
    t.epsilon = epsilon;
    t.learning_rate = 0.005;
    t.epochs = 30;
    return t;
}

struct PipelineConfig {
    BenchConfig bench;
    // Desk-scale schedule: compressed relative to the TrainConfig defaults.
    TrainConfig train_baseline = experiment_train_config(0.0);
    TrainConfig train_smoothed = experiment_train_config(0.1);
    std::vector<std::string> methods{"MD", "RMD", "MD-LS", "RMD-LS"};
    FitOptions detector;
    double target_tpr = 0.95;
    std::size_t bins = 50;
    std::array<int, 3> projection_classes{0, 1, 2};
    TemplateSource templates = TemplateSource::Weights;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    std::filesystem::path workspace = "workspace";
    bool parallel_folds = true;

    /// Throws ConfigInvalid naming the offending field.
    void validate() const;
};

PipelineConfig config_from_json(std::string_view text);
std::string config_to_json(const PipelineConfig& config);
/// Applies the master seed to every derived seed slot (bench and trainers).
void apply_master_seed(PipelineConfig& config, std::uint64_t seed);
/// FNV-1a over the canonical config, ignoring workspace and fold scheduling.
std::uint64_t config_hash(const PipelineConfig& config);
std::filesystem::path run_directory(const PipelineConfig& config);

struct FoldResult {
    std::size_t fold = 0;
    std::vector<EvalReport> reports;  // one per configured method, in order
    double baseline_accuracy = 0.0;
    double smoothed_accuracy = 0.0;
    double baseline_separation = 0.0;
    double smoothed_separation = 0.0;
    double baseline_shrinkage = 0.0;
    double smoothed_shrinkage = 0.0;
    // Filled for fold 0 only.
    std::vector<ProjectionResult> projections;
    std::vector<DensitySeries> densities;
};

struct ExperimentResult {
    std::vector<FoldResult> folds;
    std::vector<EvalReport> aggregate;  // mean over folds, per method
    double baseline_accuracy = 0.0;
    double smoothed_accuracy = 0.0;
    double baseline_separation = 0.0;
    double smoothed_separation = 0.0;

    const EvalReport& aggregate_for(std::string_view method) const;
};

struct RunOptions {
    /// When set, per-fold reports are written as each fold finishes.
    std::filesystem::path fold_output_dir;
    bool quiet = true;
};

ExperimentResult run_experiment(const PipelineConfig& config, const LabeledDataset& data,
                                const RunOptions& options = {});

/// Writes reports, tables, projection and density files under dir.
void write_experiment_outputs(const PipelineConfig& config, const ExperimentResult& result,
                              const std::filesystem::path& dir);

std::string accuracy_table(const ExperimentResult& result);

}  // namespace lsood
