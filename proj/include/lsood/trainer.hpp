#pragma once

// Compact ReLU classifier trained with (optionally label-smoothed) cross
// entropy. The post-activation output of the last hidden layer is the
// feature map handed to the Gaussian detector.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lsood/gaussian_ood.hpp"
#include "lsood/numerics.hpp"

namespace lsood {

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    bool operator==(const DenseLayer&) const = default;
};

struct ClassifierParams {
    /// input, hidden..., penultimate, classes
    std::vector<std::size_t> layer_sizes;
    /// layers.size() == layer_sizes.size() - 1; the last one is the linear head.
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t feature_dim() const { return layer_sizes[layer_sizes.size() - 2]; }
    std::size_t class_count() const { return layer_sizes.back(); }
    const DenseLayer& head() const { return layers.back(); }

    /// All-zero parameters with the given shape.
    static ClassifierParams zeros(std::vector<std::size_t> layer_sizes);
    std::size_t parameter_count() const;
    bool operator==(const ClassifierParams&) const = default;
};

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
    double epsilon = 0.1;
    double learning_rate = 0.001;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_sizes{64};
    std::size_t penultimate_dim = 16;
    LrSchedule schedule = LrSchedule::Cosine;
    // Adam constants.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Holdout-loss early stopping; disabled while patience is 0.
    std::size_t early_stop_patience = 0;
    double holdout_fraction = 0.1;

    void validate() const;
    std::string source_tag() const { return epsilon > 0.0 ? "label-smoothed" : "baseline"; }
};

std::string_view to_string(LrSchedule s);
LrSchedule parse_schedule(std::string_view name);

/// N x C rows: (1 - eps) + eps / C on the true class, eps / C elsewhere.
Matrix smooth_targets(std::span<const int> labels, std::size_t class_count, double epsilon);

struct ForwardResult {
    Vector logits;
    Vector penultimate;
};

ForwardResult forward(const ClassifierParams& params, std::span<const double> x);

/// Logits for every row of inputs (N x C).
Matrix logits_batch(const ClassifierParams& params, const Matrix& inputs);
/// Penultimate activations for every row of inputs (N x p).
Matrix penultimate_batch(const ClassifierParams& params, const Matrix& inputs);

struct LossAndGradient {
    double loss = 0.0;
    ClassifierParams gradient;
};

/// Mean soft-target cross entropy over the batch and its exact gradient.
LossAndGradient loss_and_gradient(const ClassifierParams& params, const Matrix& inputs,
                                  const Matrix& targets);
double loss_only(const ClassifierParams& params, const Matrix& inputs, const Matrix& targets);

ClassifierParams init_params(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

struct TrainResult {
    ClassifierParams params;
    double initial_loss = 0.0;            // full training loss before the first step
    std::vector<double> epoch_losses;     // full training loss after each epoch
    std::size_t best_epoch = 0;           // meaningful only with early stopping
};

TrainResult train_with_history(const Matrix& inputs, std::span<const int> labels,
                               std::size_t class_count, const TrainConfig& config);
ClassifierParams train(const Matrix& inputs, std::span<const int> labels,
                       std::size_t class_count, const TrainConfig& config);

FeatureSet extract_features(const ClassifierParams& params, const Matrix& inputs,
                            std::span<const int> labels, std::string source_tag);

/// argmax of the logits, lowest index on ties.
std::vector<int> predict(const ClassifierParams& params, const Matrix& inputs);

std::string params_to_json(const ClassifierParams& params);
ClassifierParams params_from_json(std::string_view text);
void save_params(const ClassifierParams& params, const std::filesystem::path& path);
ClassifierParams load_params(const std::filesystem::path& path);

}  // namespace lsood
