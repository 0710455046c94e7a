#include "lsood/viz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsood {

ProjectionResult project_to_weight_plane(const FeatureSet& features,
                                         const std::array<Vector, 3>& templates,
                                         const std::array<int, 3>& classes) {
    for (const auto& t : templates) {
        if (t.dim() != features.dim()) {
            throw Error(ErrorCode::DimensionMismatch, "template dim differs from feature dim");
        }
    }
    for (int c : classes) {
        const bool present = std::find(features.labels.begin(), features.labels.end(), c) !=
                             features.labels.end();
        if (c < 0 || static_cast<std::size_t>(c) >= features.class_count || !present) {
            throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c) + " not in features");
        }
    }
    auto basis = orthonormal_plane_basis(templates[0], templates[1], templates[2]);

    ProjectionResult out;
    out.source_tag = features.source_tag;
    out.classes = classes;
    out.anchor = templates[0];
    out.u1 = std::move(basis.u1);
    out.u2 = std::move(basis.u2);

    const std::size_t p = features.dim();
    std::vector<double> rel(p);
    auto project = [&](std::span<const double> z, int label) {
        for (std::size_t j = 0; j < p; ++j) rel[j] = z[j] - out.anchor[j];
        return ProjectedPoint{label, dot(rel, out.u1.span()), dot(rel, out.u2.span())};
    };
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int y = features.labels[i];
        if (std::find(classes.begin(), classes.end(), y) == classes.end()) continue;
        out.points.push_back(project(features.features.row(i), y));
    }
    for (std::size_t k = 0; k < 3; ++k) out.template_points[k] = project(templates[k].span(), classes[k]);
    return out;
}

double projection_separation_ratio(const ProjectionResult& projection) {
    std::array<double, 3> cu{}, cv{};
    std::array<std::size_t, 3> count{};
    auto slot = [&](int label) {
        return static_cast<std::size_t>(
            std::find(projection.classes.begin(), projection.classes.end(), label) -
            projection.classes.begin());
    };
    for (const auto& pt : projection.points) {
        const auto k = slot(pt.label);
        cu[k] += pt.u;
        cv[k] += pt.v;
        ++count[k];
    }
    for (std::size_t k = 0; k < 3; ++k) {
        if (count[k] == 0) throw Error(ErrorCode::EmptyGroup, "projected class has no points");
        cu[k] /= static_cast<double>(count[k]);
        cv[k] /= static_cast<double>(count[k]);
    }
    double between = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) between += std::hypot(cu[a] - cu[b], cv[a] - cv[b]);
    between /= 3.0;
    double within = 0.0;
    for (const auto& pt : projection.points) {
        const auto k = slot(pt.label);
        within += std::hypot(pt.u - cu[k], pt.v - cv[k]);
    }
    within /= static_cast<double>(projection.points.size());
    return within > 0.0 ? between / within : std::numeric_limits<double>::infinity();
}

std::string projection_to_text(const ProjectionResult& projection) {
    auto vec = [](const Vector& v) {
        std::string s;
        for (std::size_t i = 0; i < v.dim(); ++i) {
            if (i) s += ',';
            s += format_double(v[i]);
        }
        return s;
    };
    std::string out;
    out += "# lsood-projection v1\n";
    out += "# classes=" + std::to_string(projection.classes[0]) + "," +
           std::to_string(projection.classes[1]) + "," + std::to_string(projection.classes[2]) + "\n";
    out += "# anchor=" + vec(projection.anchor) + "\n";
    out += "# u1=" + vec(projection.u1) + "\n";
    out += "# u2=" + vec(projection.u2) + "\n";
    out += "class,source_tag,u,v\n";
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& t = projection.template_points[k];
        out += "template:" + std::to_string(t.label) + "," + projection.source_tag + "," +
               format_double(t.u) + "," + format_double(t.v) + "\n";
    }
    for (const auto& pt : projection.points) {
        out += std::to_string(pt.label) + "," + projection.source_tag + "," + format_double(pt.u) +
               "," + format_double(pt.v) + "\n";
    }
    return out;
}

DensitySeries score_density(std::span<const double> id_scores, std::span<const double> ood_scores,
                            std::size_t bins, std::string method) {
    if (bins < 2) throw Error(ErrorCode::ConfigInvalid, "need at least 2 bins");
    if (id_scores.empty() || ood_scores.empty()) {
        throw Error(ErrorCode::EmptyGroup, "both ID and OOD scores are required");
    }
    double lo = id_scores[0];
    double hi = id_scores[0];
    for (auto group : {id_scores, ood_scores}) {
        for (double s : group) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    }
    if (!(hi > lo)) throw Error(ErrorCode::DegenerateRange, "all scores are equal");

    DensitySeries d;
    d.method = std::move(method);
    d.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) d.edges[i] = lo + static_cast<double>(i) * width;
    d.edges[bins] = hi;

    auto histogram = [&](std::span<const double> group) {
        std::vector<double> mass(bins, 0.0);
        for (double s : group) {
            // First edge strictly greater than s, minus one; the closed last bin takes hi.
            auto it = std::upper_bound(d.edges.begin(), d.edges.end(), s);
            auto bin = static_cast<std::size_t>(it - d.edges.begin());
            bin = std::clamp<std::size_t>(bin, 1, bins) - 1;
            mass[bin] += 1.0;
        }
        for (double& m : mass) m /= static_cast<double>(group.size());
        return mass;
    };
    d.id_mass = histogram(id_scores);
    d.ood_mass = histogram(ood_scores);
    return d;
}

std::string density_to_text(const DensitySeries& density) {
    std::string out = "# lsood-density v1 method=" + density.method + "\n";
    out += "bin_left,bin_right,id_mass,ood_mass\n";
    for (std::size_t i = 0; i + 1 < density.edges.size(); ++i) {
        out += format_double(density.edges[i]) + "," + format_double(density.edges[i + 1]) + "," +
               format_double(density.id_mass[i]) + "," + format_double(density.ood_mass[i]) + "\n";
    }
    return out;
}

}  // namespace lsood
