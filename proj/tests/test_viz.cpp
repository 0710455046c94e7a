#include <doctest.h>

#include <cmath>

#include "lsood/viz.hpp"
#include "oracles.hpp"

using namespace lsood;

namespace {

FeatureSet tiny() {
    FeatureSet fs;
    fs.class_count = 3;
    fs.source_tag = "baseline";
    fs.features = Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 5}};
    fs.labels = {0, 1, 2, 0};
    return fs;
}

}  // namespace

TEST_CASE("projection onto an axis-aligned plane") {
    const std::array<Vector, 3> templates{Vector{0, 0, 0}, Vector{2, 0, 0}, Vector{0, 3, 0}};
    const auto p = project_to_weight_plane(tiny(), templates, {0, 1, 2});
    REQUIRE(p.points.size() == 4);
    CHECK(p.points[0].u == 1.0);
    CHECK(p.points[0].v == 0.0);
    CHECK(p.points[1].u == 0.0);
    CHECK(p.points[1].v == 1.0);
    CHECK(p.points[2].u == 0.0);
    CHECK(p.points[2].v == 0.0);
    CHECK(p.points[3].u == 2.0);
    CHECK(p.template_points[1].u == 2.0);
    CHECK(p.template_points[2].v == 3.0);
    CHECK(p.source_tag == "baseline");
}

TEST_CASE("projection skips classes outside the chosen three") {
    auto fs = tiny();
    fs.class_count = 4;
    fs.labels = {0, 1, 2, 3};
    const std::array<Vector, 3> templates{Vector{0, 0, 0}, Vector{2, 0, 0}, Vector{0, 3, 0}};
    CHECK(project_to_weight_plane(fs, templates, {0, 1, 2}).points.size() == 3);
}

TEST_CASE("projection errors") {
    const std::array<Vector, 3> collinear{Vector{0, 0, 0}, Vector{1, 1, 1}, Vector{2, 2, 2}};
    CHECK_THROWS_WITH_AS(project_to_weight_plane(tiny(), collinear, {0, 1, 2}), doctest::Contains("DegeneratePlane"), Error);
    const std::array<Vector, 3> ok{Vector{0, 0, 0}, Vector{2, 0, 0}, Vector{0, 3, 0}};
    CHECK_THROWS_WITH_AS(project_to_weight_plane(tiny(), ok, {0, 1, 5}), doctest::Contains("UnknownClass"), Error);
    const std::array<Vector, 3> short_t{Vector{0, 0}, Vector{2, 0}, Vector{0, 3}};
    CHECK_THROWS_AS(project_to_weight_plane(tiny(), short_t, {0, 1, 2}), Error);
}

TEST_CASE("projection residuals are orthogonal to the plane") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        auto fs = oracle::random_feature_set(60, 12, 3, rng);
        const std::array<Vector, 3> t{oracle::random_vector(12, rng), oracle::random_vector(12, rng),
                                      oracle::random_vector(12, rng)};
        const auto p = project_to_weight_plane(fs, t, {0, 1, 2});
        for (std::size_t i = 0; i < fs.size(); ++i) {
            // z - anchor - u*u1 - v*u2 must be orthogonal to u1 and u2
            Vector r(12);
            for (std::size_t j = 0; j < 12; ++j)
                r[j] = fs.features(i, j) - p.anchor[j] - p.points[i].u * p.u1[j] - p.points[i].v * p.u2[j];
            CHECK(std::abs(dot(r.span(), p.u1.span())) < 1e-10);
            CHECK(std::abs(dot(r.span(), p.u2.span())) < 1e-10);
        }
        // templates land on their own coordinates exactly
        CHECK(p.template_points[0].u == 0.0);
        CHECK(p.template_points[0].v == 0.0);
    }
}

TEST_CASE("projection ignores components orthogonal to the plane") {
    Rng rng(32);
    auto fs = oracle::random_feature_set(30, 6, 3, rng);
    const std::array<Vector, 3> t{oracle::random_vector(6, rng), oracle::random_vector(6, rng),
                                  oracle::random_vector(6, rng)};
    const auto p = project_to_weight_plane(fs, t, {0, 1, 2});
    // random direction with the plane component removed
    auto w = oracle::random_vector(6, rng);
    const double a = dot(w.span(), p.u1.span()), b = dot(w.span(), p.u2.span());
    for (std::size_t j = 0; j < 6; ++j) w[j] -= a * p.u1[j] + b * p.u2[j];
    auto moved = fs;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const double scale = rng.normal();
        for (std::size_t j = 0; j < 6; ++j) moved.features(i, j) += scale * w[j];
    }
    const auto q = project_to_weight_plane(moved, t, {0, 1, 2});
    for (std::size_t i = 0; i < fs.size(); ++i) {
        CHECK(std::abs(p.points[i].u - q.points[i].u) < 1e-10);
        CHECK(std::abs(p.points[i].v - q.points[i].v) < 1e-10);
    }
}

TEST_CASE("separation ratio grows as clusters tighten") {
    Rng rng(33);
    auto fs = oracle::random_feature_set(90, 4, 3, rng);
    std::array<Vector, 3> t;
    for (int c = 0; c < 3; ++c) {
        Vector m(4);
        double n = 0;
        for (std::size_t i = 0; i < fs.size(); ++i)
            if (fs.labels[i] == c) {
                for (std::size_t j = 0; j < 4; ++j) m[j] += fs.features(i, j);
                ++n;
            }
        for (std::size_t j = 0; j < 4; ++j) m[j] /= n;
        t[static_cast<std::size_t>(c)] = m;
    }
    auto tight = fs;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto& m = t[static_cast<std::size_t>(fs.labels[i])];
        for (std::size_t j = 0; j < 4; ++j) tight.features(i, j) = m[j] + 0.5 * (fs.features(i, j) - m[j]);
    }
    const double loose_ratio = projection_separation_ratio(project_to_weight_plane(fs, t, {0, 1, 2}));
    const double tight_ratio = projection_separation_ratio(project_to_weight_plane(tight, t, {0, 1, 2}));
    CHECK(std::abs(tight_ratio / loose_ratio - 2.0) < 1e-9);
}

TEST_CASE("projection text has one row per point and three templates") {
    const std::array<Vector, 3> templates{Vector{0, 0, 0}, Vector{2, 0, 0}, Vector{0, 3, 0}};
    const auto text = projection_to_text(project_to_weight_plane(tiny(), templates, {0, 1, 2}));
    std::size_t rows = 0, tmpl = 0;
    for (auto line : split(text, '\n')) {
        if (line.empty() || line.front() == '#') continue;
        ++rows;
        tmpl += line.starts_with("template:");
    }
    CHECK(tmpl == 3);
    CHECK(rows == 1 + 4 + 3);  // column header, points, templates
}

TEST_CASE("score_density examples") {
    const std::vector<double> id{0, 1, 2, 3}, ood{0, 0, 3, 3};
    const auto d = score_density(id, ood, 3, "MD");
    CHECK(d.edges == std::vector<double>{0, 1, 2, 3});
    CHECK(d.id_mass == std::vector<double>{0.25, 0.25, 0.5});
    CHECK(d.ood_mass == std::vector<double>{0.5, 0.0, 0.5});
    CHECK(density_to_text(d).find("bin_left,bin_right,id_mass,ood_mass") != std::string::npos);
}

TEST_CASE("score_density errors") {
    const std::vector<double> a{1, 1}, b{1};
    CHECK_THROWS_WITH_AS(score_density(a, b, 5), doctest::Contains("DegenerateRange"), Error);
    CHECK_THROWS_WITH_AS(score_density(a, std::vector<double>{}, 5), doctest::Contains("EmptyGroup"), Error);
    CHECK_THROWS_AS(score_density(std::vector<double>{0}, std::vector<double>{1}, 1), Error);
}

TEST_CASE("score_density matches a brute histogram and sums to one") {
    Rng rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> id(1 + rng.below(200)), ood(1 + rng.below(200));
        for (double& s : id) s = std::round(rng.normal() * 4.0) / 4.0;
        for (double& s : ood) s = rng.normal() - 1.0;
        ood[0] = 10.0;
        const std::size_t bins = 2 + rng.below(60);
        const auto d = score_density(id, ood, bins);
        const auto hid = oracle::histogram(id, d.edges);
        const auto hood = oracle::histogram(ood, d.edges);
        double sid = 0.0, sood = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            CHECK(std::abs(d.id_mass[k] - hid[k] / static_cast<double>(id.size())) < 1e-15);
            CHECK(std::abs(d.ood_mass[k] - hood[k] / static_cast<double>(ood.size())) < 1e-15);
            sid += d.id_mass[k];
            sood += d.ood_mass[k];
        }
        CHECK(std::abs(sid - 1.0) < 1e-12);
        CHECK(std::abs(sood - 1.0) < 1e-12);
    }
}
