#pragma once

// Plot-ready data: activations projected onto the plane through three class
// templates, and binned score densities for ID vs OOD.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lsood/gaussian_ood.hpp"
#include "lsood/numerics.hpp"

namespace lsood {

struct ProjectedPoint {
    int label = 0;
    double u = 0.0;
    double v = 0.0;
};

struct ProjectionResult {
    std::string source_tag;
    std::array<int, 3> classes{};
    Vector anchor;  // template of classes[0]
    Vector u1;
    Vector u2;
    std::vector<ProjectedPoint> points;
    /// The three templates themselves, in the order of `classes`.
    std::array<ProjectedPoint, 3> template_points{};
};

ProjectionResult project_to_weight_plane(const FeatureSet& features,
                                         const std::array<Vector, 3>& templates,
                                         const std::array<int, 3>& classes);

/// Mean pairwise distance between projected class centroids divided by the mean
/// distance of projected points to their own centroid.
double projection_separation_ratio(const ProjectionResult& projection);

std::string projection_to_text(const ProjectionResult& projection);

struct DensitySeries {
    std::string method;
    std::vector<double> edges;  // bins + 1 uniform edges
    std::vector<double> id_mass;
    std::vector<double> ood_mass;
};

/// Shared uniform bins over [min, max]; half-open except the last, which is closed.
DensitySeries score_density(std::span<const double> id_scores, std::span<const double> ood_scores,
                            std::size_t bins, std::string method = {});

std::string density_to_text(const DensitySeries& density);

}  // namespace lsood
