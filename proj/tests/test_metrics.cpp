#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lsood/metrics.hpp"
#include "oracles.hpp"

using namespace lsood;

namespace {

std::vector<double> random_scores(std::size_t n, Rng& rng, double shift, bool ties) {
    std::vector<double> v(n);
    for (double& s : v) {
        s = rng.normal() + shift;
        if (ties) s = std::round(s * 2.0) / 2.0;
    }
    return v;
}

std::vector<double> negate(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
    return out;
}

}  // namespace

TEST_CASE("auroc examples") {
    const std::vector<double> hi{3, 4}, lo{1, 2}, same{1, 1};
    CHECK(auroc(hi, lo) == 1.0);
    CHECK(auroc(lo, hi) == 0.0);
    CHECK(auroc(same, same) == 0.5);
    CHECK(auroc(std::vector<double>{1, 3}, std::vector<double>{2}) == 0.5);
    CHECK(auroc(std::vector<double>{2, 2}, std::vector<double>{2, 1}) == 0.75);
    CHECK_THROWS_WITH_AS(auroc(std::vector<double>{}, lo), doctest::Contains("EmptyInput"), Error);
    CHECK_THROWS_AS(auroc(lo, std::vector<double>{}), Error);
}

TEST_CASE("aupr examples") {
    const std::vector<double> hi{3, 4}, lo{1, 2};
    CHECK(aupr(hi, lo, PositiveClass::ID) == 1.0);
    CHECK(aupr(hi, lo, PositiveClass::OOD) == 1.0);
    // id {2}, ood {3, 1}: ranked 3(ood) 2(id) 1(ood) -> precision 1/2 at recall 1
    CHECK(aupr(std::vector<double>{2}, std::vector<double>{3, 1}, PositiveClass::ID) == 0.5);
    // all tied: one threshold, precision equals prevalence
    CHECK(std::abs(aupr(std::vector<double>{1, 1}, std::vector<double>{1, 1, 1}, PositiveClass::ID) - 0.4) < 1e-15);
}

TEST_CASE("auroc and aupr agree with brute-force oracles on random data with ties") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const bool ties = trial % 2 == 0;
        const auto id = random_scores(1 + rng.below(60), rng, 0.7, ties);
        const auto ood = random_scores(1 + rng.below(60), rng, 0.0, ties);
        CHECK(std::abs(auroc(id, ood) - oracle::auroc_pairs(id, ood)) < 1e-12);
        CHECK(std::abs(aupr(id, ood, PositiveClass::ID) - oracle::aupr_scan(id, ood)) < 1e-12);
        CHECK(std::abs(aupr(id, ood, PositiveClass::OOD) - oracle::aupr_scan(negate(ood), negate(id))) < 1e-12);
        CHECK(std::abs(auroc(id, ood) + auroc(ood, id) - 1.0) < 1e-12);
    }
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const auto id = random_scores(40, rng, 0.5, true);
        const auto ood = random_scores(30, rng, 0.0, true);
        std::vector<double> id2(id.size()), ood2(ood.size());
        auto f = [](double s) { return std::exp(0.5 * s) + 3.0 * s; };
        std::transform(id.begin(), id.end(), id2.begin(), f);
        std::transform(ood.begin(), ood.end(), ood2.begin(), f);
        CHECK(std::abs(auroc(id, ood) - auroc(id2, ood2)) < 1e-12);
        CHECK(std::abs(aupr(id, ood, PositiveClass::ID) - aupr(id2, ood2, PositiveClass::ID)) < 1e-12);
        CHECK(std::abs(aupr(id, ood, PositiveClass::OOD) - aupr(id2, ood2, PositiveClass::OOD)) < 1e-12);
    }
}

TEST_CASE("random scores give chance-level metrics") {
    Rng rng(23);
    const auto id = random_scores(4000, rng, 0.0, false);
    const auto ood = random_scores(2000, rng, 0.0, false);
    CHECK(std::abs(auroc(id, ood) - 0.5) < 0.03);
    CHECK(std::abs(aupr(id, ood, PositiveClass::ID) - 4000.0 / 6000.0) < 0.03);
    CHECK(std::abs(aupr(id, ood, PositiveClass::OOD) - 2000.0 / 6000.0) < 0.03);
}

TEST_CASE("threshold_at_tpr examples") {
    std::vector<double> id(100);
    std::iota(id.begin(), id.end(), 1.0);
    CHECK(threshold_at_tpr(id, 0.95) == 6.0);
    CHECK(threshold_at_tpr(id, 1.0) == 1.0);
    CHECK(threshold_at_tpr(id, 0.01) == 100.0);
    CHECK_THROWS_AS(threshold_at_tpr(id, 0.0), Error);
    CHECK_THROWS_AS(threshold_at_tpr(id, 1.5), Error);
    CHECK_THROWS_AS(threshold_at_tpr(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("threshold_at_tpr matches an exhaustive scan and attains the target") {
    Rng rng(24);
    for (int trial = 0; trial < 100; ++trial) {
        const auto id = random_scores(1 + rng.below(80), rng, 0.0, trial % 2 == 0);
        const double target = rng.uniform(0.01, 1.0);
        const double t = threshold_at_tpr(id, target);
        CHECK(t == oracle::threshold_scan(id, target));
        CHECK(oracle::tpr_at(id, t) >= target);
    }
}

TEST_CASE("precision and F1 treat ID as positive") {
    const std::vector<double> id{5, 4, 3, 1}, ood{4.5, 2, 0};
    // threshold 3: TP 3, FP 1 (4.5), FN 1
    const auto op = precision_f1_at(3.0, id, ood);
    CHECK(op.precision == 0.75);
    CHECK(op.recall == 0.75);
    CHECK(op.f1 == doctest::Approx(0.75).epsilon(1e-15));
    const auto none = precision_f1_at(10.0, id, ood);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
}

TEST_CASE("evaluate fills a consistent report") {
    Rng rng(25);
    const auto id = random_scores(200, rng, 1.0, false);
    const auto ood = random_scores(100, rng, 0.0, false);
    const auto r = evaluate(id, ood, 0.95, "MD", "baseline");
    CHECK(r.auroc == auroc(id, ood));
    CHECK(r.recall_at_tpr >= 0.95);
    CHECK(r.threshold_at_tpr == threshold_at_tpr(id, 0.95));
    CHECK(r.n_id == 200);
    CHECK(r.n_ood == 100);
    const auto back = report_from_json(report_to_json(r));
    CHECK(back.auroc == r.auroc);
    CHECK(back.f1_at_tpr == r.f1_at_tpr);
    CHECK(back.method == "MD");
    CHECK(report_to_json(r).find("\"positive_class\"") != std::string::npos);

    const std::vector<EvalReport> two{r, evaluate(ood, id, 0.95, "MD", "baseline")};
    const auto m = mean_report(two);
    CHECK(std::abs(m.auroc - 0.5) < 1e-12);
    CHECK(format_table(two).find("AUROC") != std::string::npos);
    const std::vector<EvalReport> mixed{r, evaluate(id, ood, 0.95, "RMD", "baseline")};
    CHECK_THROWS_AS(mean_report(mixed), Error);
}

TEST_CASE("id_accuracy") {
    CHECK(id_accuracy(std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 1, 1, 1}) == 0.75);
    CHECK(id_accuracy(Matrix{{1, 2}, {3, 0}, {5, 5}}, std::vector<int>{1, 0, 0}) == 1.0);
    CHECK_THROWS_AS(id_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), Error);
    CHECK_THROWS_AS(id_accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}
