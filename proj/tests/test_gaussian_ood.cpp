#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lsood/gaussian_ood.hpp"
#include "oracles.hpp"

using namespace lsood;

namespace {

FeatureSet one_d_example() {
    FeatureSet fs;
    fs.class_count = 2;
    fs.features = Matrix(4, 1, {0.0, 2.0, 10.0, 12.0});
    fs.labels = {0, 0, 1, 1};
    return fs;
}

FeatureSet single_row(std::vector<double> z) {
    FeatureSet fs;
    fs.class_count = 0;
    const auto p = z.size();
    fs.features = Matrix(1, p, std::move(z));
    fs.labels = {kOodLabel};
    return fs;
}

GaussianOodModel model_with(std::vector<Vector> means, const Matrix& cov) {
    GaussianOodModel m;
    m.feature_dim = cov.rows();
    m.class_means = std::move(means);
    m.class_counts.assign(m.class_means.size(), 2);
    m.global_mean = Vector(cov.rows());
    m.shared_cov_factor = cholesky(cov);
    return m;
}

}  // namespace

TEST_CASE("fit_gaussians on the 1-D two-class example") {
    const auto m = fit_gaussians(one_d_example());
    CHECK(m.class_means[0][0] == 1.0);
    CHECK(m.class_means[1][0] == 11.0);
    CHECK(m.global_mean[0] == 6.0);
    CHECK(m.shared_cov_factor.lower()(0, 0) == 1.0);  // sigma = [[1]]
    CHECK(m.shrinkage_lambda == 0.0);
    CHECK(m.class_counts == std::vector<std::size_t>{2, 2});
}

TEST_CASE("duplicated rows engage shrinkage and record lambda") {
    FeatureSet fs;
    fs.class_count = 1;
    fs.features = Matrix(3, 2, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0});
    fs.labels = {0, 0, 0};
    const auto m = fit_gaussians(fs);
    CHECK(m.shrinkage_lambda > 0.0);
    CHECK_THROWS_WITH_AS(fit_gaussians(fs, {.allow_shrinkage = false}),
                         doctest::Contains("NotPositiveDefinite"), Error);
}

TEST_CASE("rank-deficient covariance takes the first ladder step that factors") {
    // p > N: pooled covariance has rank at most N - C.
    Rng rng(3);
    auto fs = oracle::random_feature_set(6, 10, 2, rng);
    const auto m = fit_gaussians(fs);
    const auto cov = pooled_covariance(fs, m.class_means);
    const double scale = trace(cov) / 10.0;
    const double ratio = m.shrinkage_lambda / scale;
    const bool on_ladder = std::any_of(std::begin(kShrinkageLadder), std::end(kShrinkageLadder),
                                       [&](double k) { return std::abs(k - ratio) <= 1e-12 * k; });
    CHECK(m.shrinkage_lambda > 0.0);
    CHECK(on_ladder);
}

TEST_CASE("fit_gaussians errors") {
    auto fs = one_d_example();
    fs.labels = {0, 1, 1, 1};
    CHECK_THROWS_WITH_AS(fit_gaussians(fs), doctest::Contains("EmptyClass"), Error);
    fs.labels = {0, 0, 1, kOodLabel};
    CHECK_THROWS_WITH_AS(fit_gaussians(fs), doctest::Contains("ContainsOodRows"), Error);
    fs.labels = {0, 0, 1, 5};
    CHECK_THROWS_AS(fit_gaussians(fs), Error);
}

TEST_CASE("pooled covariance matches the brute-force double loop") {
    Rng rng(21);
    const auto fs = oracle::random_feature_set(300, 8, 3, rng);
    const auto m = fit_gaussians(fs);
    const auto cov = pooled_covariance(fs, m.class_means);
    const auto brute = oracle::fit(fs);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(std::abs(cov(i, j) - cov(j, i)) <= 1e-10);
            CHECK(std::abs(cov(i, j) - brute.cov[i][j]) <= 1e-9);
        }
    }
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(m.global_mean[j] - brute.global_mean[j]) <= 1e-10);
}

TEST_CASE("mahalanobis examples") {
    const auto ident = model_with({Vector{0, 0}}, Matrix::identity(2));
    CHECK(mahalanobis(ident, Vector{0, 0}.span(), 0) == 0.0);
    CHECK(mahalanobis(ident, Vector{3, 4}.span(), 0) == doctest::Approx(25.0).epsilon(1e-15));
    const auto diag = model_with({Vector{0, 0}}, Matrix{{4, 0}, {0, 1}});
    CHECK(mahalanobis(diag, Vector{2, 0}.span(), 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_WITH_AS(mahalanobis(diag, Vector{2, 0, 1}.span(), 0),
                         doctest::Contains("DimensionMismatch"), Error);
    CHECK_THROWS_WITH_AS(mahalanobis(diag, Vector{2, 0}.span(), 1), doctest::Contains("UnknownClass"),
                         Error);
}

TEST_CASE("score_md on the 1-D model") {
    const auto m = fit_gaussians(one_d_example());
    const auto s = score_md(m, single_row({6.0}));
    CHECK(s.scores[0] == -25.0);
    CHECK(s.per_class_distances(0, 0) == 25.0);
    CHECK(s.per_class_distances(0, 1) == 25.0);
    CHECK(s.nearest_class[0] == 0);  // tie goes to the lowest index
    CHECK(score_md(m, single_row({11.0})).scores[0] == 0.0);
    CHECK_THROWS_AS(score_md(m, single_row({1.0, 2.0})), Error);
}

TEST_CASE("score_rmd on the 1-D model") {
    const auto m = fit_gaussians(one_d_example());
    // z = global mean: MD_global = 0, MD_0 = MD_1 = 25.
    CHECK(score_rmd(m, single_row({6.0})).scores[0] == -25.0);
    // z = mu_0: MD_0 vanishes, score = MD_global(mu_0) = 25.
    CHECK(score_rmd(m, single_row({1.0})).scores[0] == doctest::Approx(25.0));
    CHECK(mahalanobis_global(m, Vector{1.0}.span()) == 25.0);
}

TEST_CASE("score_md and score_rmd agree with explicit-inverse oracles") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t p = 1 + rng.below(16);
        const std::size_t C = 1 + rng.below(5);
        const std::size_t n = std::max<std::size_t>(4 * C, 20 + rng.below(480));
        const auto train = oracle::random_feature_set(n, p, C, rng);
        auto test = oracle::random_feature_set(60, p, C, rng);
        const auto model = fit_gaussians(train);
        REQUIRE(model.shrinkage_lambda == 0.0);
        const auto brute = oracle::fit(train);
        const auto md = score_md(model, test);
        const auto rmd = score_rmd(model, test);
        const auto md_ref = oracle::md_scores(brute, test);
        const auto rmd_ref = oracle::rmd_scores(brute, test);
        for (std::size_t i = 0; i < test.size(); ++i) {
            CHECK(std::abs(md.scores[i] - md_ref[i]) <= 1e-8 * std::max(1.0, std::abs(md_ref[i])));
            CHECK(std::abs(rmd.scores[i] - rmd_ref[i]) <= 1e-8 * std::max(1.0, std::abs(rmd_ref[i])));
            for (std::size_t c = 0; c < C; ++c) {
                const double ref = oracle::quad_form(brute.cov_inv, test.features.row(i), brute.means[c]);
                CHECK(std::abs(md.per_class_distances(i, c) - ref) <= 1e-8 * std::max(1.0, ref));
            }
        }
    }
}

TEST_CASE("score vector invariants") {
    Rng rng(41);
    const auto train = oracle::random_feature_set(200, 6, 4, rng);
    const auto model = fit_gaussians(train);
    const auto test = oracle::random_feature_set(100, 6, 4, rng);
    const auto md = score_md(model, test);
    bool rmd_positive = false, rmd_negative = false;
    const auto rmd = score_rmd(model, test);
    for (std::size_t i = 0; i < test.size(); ++i) {
        CHECK(md.scores[i] <= 0.0);
        double mn = INFINITY;
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(md.per_class_distances(i, c) >= 0.0);
            mn = std::min(mn, md.per_class_distances(i, c));
        }
        CHECK(md.scores[i] == -mn);
        rmd_positive |= rmd.scores[i] > 0.0;
        rmd_negative |= rmd.scores[i] < 0.0;
    }
    CHECK(rmd_positive);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(mahalanobis(model, model.class_means[c].span(), c) <= 1e-9);
    }
    (void)rmd_negative;
}

TEST_CASE("parallel kernels are row-order identical to the serial reference") {
    Rng rng(51);
    const auto train = oracle::random_feature_set(500, 12, 5, rng);
    const auto model = fit_gaussians(train);
    const auto test = oracle::random_feature_set(3001, 12, 5, rng);
    const auto a = score_md(model, test);
    const auto b = serial::score_md(model, test);
    CHECK(a.scores == b.scores);
    CHECK(a.per_class_distances == b.per_class_distances);
    CHECK(a.nearest_class == b.nearest_class);
    CHECK(score_rmd(model, test).scores == serial::score_rmd(model, test).scores);
}

TEST_CASE("affine equivariance of MD and RMD") {
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t p = 2 + rng.below(8);
        const auto train = oracle::random_feature_set(200, p, 3, rng);
        const auto test = oracle::random_feature_set(50, p, 3, rng);
        Matrix a = oracle::random_matrix(p, p, rng);
        for (std::size_t i = 0; i < p; ++i) a(i, i) += 3.0;  // keep it well conditioned
        const auto b = oracle::random_vector(p, rng);
        auto transform = [&](const FeatureSet& fs) {
            FeatureSet out = fs;
            for (std::size_t i = 0; i < fs.size(); ++i) {
                const Vector z(std::vector<double>(fs.features.row(i).begin(), fs.features.row(i).end()));
                const Vector t = a * z + b;
                std::copy(t.values().begin(), t.values().end(), out.features.row(i).begin());
            }
            return out;
        };
        const FitOptions strict{.allow_shrinkage = false};
        const auto m0 = fit_gaussians(train, strict);
        const auto m1 = fit_gaussians(transform(train), strict);
        const auto md0 = score_md(m0, test).scores;
        const auto md1 = score_md(m1, transform(test)).scores;
        const auto r0 = score_rmd(m0, test).scores;
        const auto r1 = score_rmd(m1, transform(test)).scores;
        for (std::size_t i = 0; i < md0.size(); ++i) {
            CHECK(std::abs(md0[i] - md1[i]) <= 1e-6 * std::max(1.0, std::abs(md0[i])));
            CHECK(std::abs(r0[i] - r1[i]) <= 1e-6 * std::max(1.0, std::abs(r0[i])));
        }
    }
}

TEST_CASE("row permutation leaves the fitted means stable") {
    Rng rng(71);
    const auto fs = oracle::random_feature_set(400, 7, 3, rng);
    std::vector<std::size_t> perm(fs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    const auto a = fit_gaussians(fs);
    const auto b = fit_gaussians(fs.select(perm));
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(a.class_means[c][j] - b.class_means[c][j]) <= 1e-12);
    for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(a.global_mean[j] - b.global_mean[j]) <= 1e-12);
}

TEST_CASE("separate background covariance option") {
    Rng rng(81);
    const auto train = oracle::random_feature_set(300, 5, 3, rng);
    const auto shared = fit_gaussians(train);
    const auto separate = fit_gaussians(train, {.separate_background_covariance = true});
    REQUIRE(separate.background_cov_factor.has_value());
    CHECK_FALSE(shared.background_cov_factor.has_value());
    // The total scatter about the global mean exceeds the pooled within-class scatter,
    // so background distances shrink under the separate fit.
    const auto z = train.features.row(0);
    CHECK(mahalanobis_global(separate, z) < mahalanobis_global(shared, z));
    CHECK(score_md(separate, train).scores == score_md(shared, train).scores);
    // Oracle: background covariance is the plain total scatter / N.
    oracle::Dense total(5, std::vector<double>(5, 0.0));
    const auto brute = oracle::fit(train);
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t b = 0; b < 5; ++b)
                total[a][b] += (train.features(i, a) - brute.global_mean[a]) *
                               (train.features(i, b) - brute.global_mean[b]) / 300.0;
    const double ref = oracle::quad_form(oracle::inverse(total), z, brute.global_mean);
    CHECK(mahalanobis_global(separate, z) == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("model JSON round trip reproduces scores") {
    Rng rng(91);
    const auto train = oracle::random_feature_set(250, 9, 4, rng);
    const auto test = oracle::random_feature_set(80, 9, 4, rng);
    auto model = fit_gaussians(train, {.separate_background_covariance = true});
    model.source_tag = "label-smoothed";
    const auto back = model_from_json(model_to_json(model));
    CHECK(back.source_tag == "label-smoothed");
    CHECK(back.shrinkage_lambda == model.shrinkage_lambda);
    const auto a = score_md(model, test).scores;
    const auto b = score_md(back, test).scores;
    const auto ra = score_rmd(model, test).scores;
    const auto rb = score_rmd(back, test).scores;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) <= 1e-12);
        CHECK(std::abs(ra[i] - rb[i]) <= 1e-12);
    }
    CHECK_THROWS_AS(model_from_json("{\"format\":\"nope\"}"), Error);
    CHECK_THROWS_AS(model_from_json("not json"), Error);
}

TEST_CASE("feature set validation") {
    FeatureSet fs;
    fs.class_count = 2;
    fs.features = Matrix(2, 1, {1.0, 2.0});
    fs.labels = {0, 2};
    CHECK_THROWS_AS(fs.validate(), Error);
    fs.labels = {0};
    CHECK_THROWS_AS(fs.validate(), Error);
    fs.labels = {1, kOodLabel};
    CHECK_NOTHROW(fs.validate());
    CHECK(fs.id_rows().size() == 1);
}

TEST_CASE("score table text round trip and errors") {
    const ScoreTable t{"RMD", "baseline", {0, kOodLabel, 2}, {1.25, -3.5, 0.1}};
    const std::string text = score_table_to_text(t, 0.0);
    CHECK(text.find("0,0,1.25,1") != std::string::npos);
    CHECK(text.find("1,ood,-3.5,0") != std::string::npos);
    const auto back = score_table_from_text(text);
    CHECK(back.method == "RMD");
    CHECK(back.source_tag == "baseline");
    CHECK(back.labels == t.labels);
    CHECK(back.scores == t.scores);
    CHECK_THROWS_WITH_AS(score_table_from_text("row,label,score,accept\n"), doctest::Contains("EmptyInput"), Error);
    CHECK_THROWS_WITH_AS(score_table_from_text("0,1,2\n"), doctest::Contains("ParseError"), Error);
    CHECK_THROWS_AS(score_table_from_text("0,1,nan,1\n"), Error);
}
