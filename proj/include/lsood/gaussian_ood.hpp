#pragma once

// Class-conditional Gaussians with one shared covariance, and the Mahalanobis
// (MD) and relative-Mahalanobis (RMD) OOD scores derived from them.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsood/numerics.hpp"
#include "lsood/table_io.hpp"

namespace lsood {

/// Label value for rows that belong to no in-distribution class.
inline constexpr int kOodLabel = -1;

struct FeatureSet {
    Matrix features;          // N x p
    std::vector<int> labels;  // class index in [0, class_count) or kOodLabel
    std::size_t class_count = 0;
    std::string source_tag;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dim() const noexcept { return features.cols(); }

    /// Checks label range, row count and finiteness; throws on violation.
    void validate() const;

    /// Rows whose label is not kOodLabel, in original order.
    FeatureSet id_rows() const;
    FeatureSet select(std::span<const std::size_t> rows) const;
};

struct FitOptions {
    bool allow_shrinkage = true;
    /// Fit the background Gaussian with its own covariance around the global
    /// mean instead of reusing the shared class covariance.
    bool separate_background_covariance = false;
};

struct GaussianOodModel {
    std::vector<Vector> class_means;
    Vector global_mean;
    CholeskyFactor shared_cov_factor;  // of Sigma + lambda I
    double shrinkage_lambda = 0.0;
    std::vector<std::size_t> class_counts;
    std::size_t feature_dim = 0;
    std::string source_tag;

    // Present only when fitted with separate_background_covariance.
    std::optional<CholeskyFactor> background_cov_factor;
    double background_shrinkage_lambda = 0.0;

    std::size_t class_count() const noexcept { return class_means.size(); }
    const CholeskyFactor& background_factor() const noexcept {
        return background_cov_factor ? *background_cov_factor : shared_cov_factor;
    }
};

/// Relative shrinkage multipliers tried in order; each is scaled by trace(Sigma)/p.
inline constexpr double kShrinkageLadder[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};

/// Pooled within-class covariance divided by N (not N - C).
Matrix pooled_covariance(const FeatureSet& train, const std::vector<Vector>& class_means);

GaussianOodModel fit_gaussians(const FeatureSet& train, const FitOptions& options = {});

/// Squared Mahalanobis distance ||L^{-1}(z - mu_c)||^2.
double mahalanobis(const GaussianOodModel& model, std::span<const double> z, std::size_t c);
double mahalanobis_global(const GaussianOodModel& model, std::span<const double> z);

enum class ScoreMethod { MD, RMD };

std::string_view to_string(ScoreMethod m);
ScoreMethod parse_score_method(std::string_view name);

/// Higher score = more in-distribution.
struct ScoreVector {
    ScoreMethod method = ScoreMethod::MD;
    std::vector<double> scores;
    /// N x C; MD_c for MD, MD_c - MD_global for RMD.
    Matrix per_class_distances;
    /// Diagnostic argmin class per row; lowest index wins ties.
    std::vector<int> nearest_class;
};

// Row-parallel kernels (OpenMP). Output is row-order identical to the serial path.
ScoreVector score_md(const GaussianOodModel& model, const FeatureSet& test);
ScoreVector score_rmd(const GaussianOodModel& model, const FeatureSet& test);
ScoreVector score(const GaussianOodModel& model, const FeatureSet& test, ScoreMethod method);

namespace serial {
// Single-threaded reference implementations kept for tests and benchmarks.
ScoreVector score_md(const GaussianOodModel& model, const FeatureSet& test);
ScoreVector score_rmd(const GaussianOodModel& model, const FeatureSet& test);
}  // namespace serial

LabeledTable feature_set_to_table(const FeatureSet& fs);
FeatureSet feature_set_from_table(const LabeledTable& table);
void save_features(const FeatureSet& fs, const std::filesystem::path& path);
FeatureSet load_features(const std::filesystem::path& path);

std::string model_to_json(const GaussianOodModel& model);
GaussianOodModel model_from_json(std::string_view text);
void save_model(const GaussianOodModel& model, const std::filesystem::path& path);
GaussianOodModel load_model(const std::filesystem::path& path);

/// Per-row scores as written by the CLI: a "# method=..,source_tag=..,threshold=.."
/// line, then rows "row,label,score,accept" with accept = score >= threshold.
struct ScoreTable {
    std::string method;
    std::string source_tag;
    std::vector<int> labels;
    std::vector<double> scores;
};

std::string score_table_to_text(const ScoreTable& table, double threshold);
ScoreTable score_table_from_text(std::string_view text);
void save_scores(const ScoreTable& table, double threshold, const std::filesystem::path& path);
ScoreTable load_scores(const std::filesystem::path& path);

}  // namespace lsood
