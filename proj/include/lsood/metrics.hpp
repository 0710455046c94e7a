#pragma once

// Threshold-free and operating-point metrics for ID-vs-OOD score arrays.
// Higher scores mean "more in-distribution" throughout.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsood/numerics.hpp"

namespace lsood {

/// Mann-Whitney AUROC with ID as the positive class; tied pairs count 1/2.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

enum class PositiveClass { ID, OOD };

/// Step-wise (average precision) area under the PR curve. For OOD-positive the
/// scores are negated so OOD becomes the high-score class.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores,
            PositiveClass positive);

/// Largest attained ID score t with fraction(id >= t) >= target_tpr.
double threshold_at_tpr(std::span<const double> id_scores, double target_tpr);

struct OperatingPoint {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// ID-positive confusion counts at "score >= threshold".
OperatingPoint precision_f1_at(double threshold, std::span<const double> id_scores,
                               std::span<const double> ood_scores);

double id_accuracy(std::span<const int> predicted, std::span<const int> truth);
/// argmax per logits row, lowest class index on ties.
double id_accuracy(const Matrix& logits, std::span<const int> truth);

struct EvalReport {
    std::string method;
    std::string source_tag;
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
    double target_tpr = 0.95;
    double threshold_at_tpr = 0.0;
    double precision_at_tpr = 0.0;
    double recall_at_tpr = 0.0;
    double f1_at_tpr = 0.0;
    std::optional<double> id_accuracy;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
};

EvalReport evaluate(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double target_tpr, std::string method, std::string source_tag);

/// Mean of every numeric field; counts are summed. Reports must share a method.
EvalReport mean_report(std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(std::string_view text);

/// Aligned text table, one row per report.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace lsood
