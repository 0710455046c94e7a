#include "lsood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace lsood {

using nlohmann::json;

namespace {

void require_nonempty(std::span<const double> a, const char* what) {
    if (a.empty()) throw Error(ErrorCode::EmptyInput, std::string(what) + " is empty");
}

struct Tagged {
    double score;
    bool positive;
};

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    require_nonempty(id_scores, "id_scores");
    require_nonempty(ood_scores, "ood_scores");
    std::vector<Tagged> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.score < b.score; });

    // U statistic via tie groups: each ID sample beats every OOD sample below its
    // group and ties with half of the OOD samples inside it. Counts stay integral
    // (doubled) so the result matches the pairwise definition exactly.
    double doubled_u = 0.0;
    std::size_t ood_below = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::size_t id_in = 0;
        std::size_t ood_in = 0;
        while (j < all.size() && all[j].score == all[i].score) {
            (all[j].positive ? id_in : ood_in) += 1;
            ++j;
        }
        doubled_u += static_cast<double>(id_in) * static_cast<double>(2 * ood_below + ood_in);
        ood_below += ood_in;
        i = j;
    }
    return doubled_u / 2.0 /
           (static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size()));
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores,
            PositiveClass positive) {
    require_nonempty(id_scores, "id_scores");
    require_nonempty(ood_scores, "ood_scores");
    std::vector<Tagged> all;
    all.reserve(id_scores.size() + ood_scores.size());
    const bool id_pos = positive == PositiveClass::ID;
    const double sign = id_pos ? 1.0 : -1.0;
    for (double s : id_scores) all.push_back({sign * s, id_pos});
    for (double s : ood_scores) all.push_back({sign * s, !id_pos});
    std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.score > b.score; });

    const double n_pos = static_cast<double>(id_pos ? id_scores.size() : ood_scores.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    double prev_recall = 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) {
            (all[j].positive ? tp : fp) += 1;
            ++j;
        }
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

double threshold_at_tpr(std::span<const double> id_scores, double target_tpr) {
    require_nonempty(id_scores, "id_scores");
    if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "target_tpr must be in (0, 1]");
    }
    std::vector<double> sorted(id_scores.begin(), id_scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double n = static_cast<double>(sorted.size());
    // Guard against n * tpr landing a rounding step above an integer.
    auto k = static_cast<std::size_t>(std::ceil(n * target_tpr - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

OperatingPoint precision_f1_at(double threshold, std::span<const double> id_scores,
                               std::span<const double> ood_scores) {
    require_nonempty(id_scores, "id_scores");
    require_nonempty(ood_scores, "ood_scores");
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (double s : id_scores) tp += s >= threshold ? 1 : 0;
    for (double s : ood_scores) fp += s >= threshold ? 1 : 0;
    const std::size_t fn = id_scores.size() - tp;
    OperatingPoint op;
    op.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    op.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    op.f1 = op.precision + op.recall == 0.0
                ? 0.0
                : 2.0 * op.precision * op.recall / (op.precision + op.recall);
    return op;
}

double id_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
    }
    if (truth.empty()) throw Error(ErrorCode::EmptyInput, "no labels");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double id_accuracy(const Matrix& logits, std::span<const int> truth) {
    if (logits.rows() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "logit rows and labels differ in length");
    }
    std::vector<int> pred(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto r = logits.row(i);
        pred[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return id_accuracy(pred, truth);
}

EvalReport evaluate(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double target_tpr, std::string method, std::string source_tag) {
    EvalReport r;
    r.method = std::move(method);
    r.source_tag = std::move(source_tag);
    r.auroc = auroc(id_scores, ood_scores);
    r.aupr_in = aupr(id_scores, ood_scores, PositiveClass::ID);
    r.aupr_out = aupr(id_scores, ood_scores, PositiveClass::OOD);
    r.target_tpr = target_tpr;
    r.threshold_at_tpr = threshold_at_tpr(id_scores, target_tpr);
    const auto op = precision_f1_at(r.threshold_at_tpr, id_scores, ood_scores);
    r.precision_at_tpr = op.precision;
    r.recall_at_tpr = op.recall;
    r.f1_at_tpr = op.f1;
    r.n_id = id_scores.size();
    r.n_ood = ood_scores.size();
    return r;
}

EvalReport mean_report(std::span<const EvalReport> reports) {
    if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to aggregate");
    EvalReport m;
    m.method = reports.front().method;
    m.source_tag = reports.front().source_tag;
    m.target_tpr = reports.front().target_tpr;
    const double k = static_cast<double>(reports.size());
    bool all_acc = true;
    double acc = 0.0;
    for (const auto& r : reports) {
        if (r.method != m.method) throw Error(ErrorCode::LengthMismatch, "mixed methods in aggregate");
        m.auroc += r.auroc;
        m.aupr_in += r.aupr_in;
        m.aupr_out += r.aupr_out;
        m.threshold_at_tpr += r.threshold_at_tpr;
        m.precision_at_tpr += r.precision_at_tpr;
        m.recall_at_tpr += r.recall_at_tpr;
        m.f1_at_tpr += r.f1_at_tpr;
        m.n_id += r.n_id;
        m.n_ood += r.n_ood;
        if (r.id_accuracy) acc += *r.id_accuracy; else all_acc = false;
    }
    m.auroc /= k;
    m.aupr_in /= k;
    m.aupr_out /= k;
    m.threshold_at_tpr /= k;
    m.precision_at_tpr /= k;
    m.recall_at_tpr /= k;
    m.f1_at_tpr /= k;
    if (all_acc) m.id_accuracy = acc / k;
    return m;
}

std::string report_to_json(const EvalReport& r) {
    json j;
    j["format"] = "lsood-eval-report";
    j["positive_class"] = "ID";
    j["method"] = r.method;
    j["source_tag"] = r.source_tag;
    j["auroc"] = r.auroc;
    j["aupr_in"] = r.aupr_in;
    j["aupr_out"] = r.aupr_out;
    j["target_tpr"] = r.target_tpr;
    j["threshold_at_tpr"] = r.threshold_at_tpr;
    j["precision_at_tpr"] = r.precision_at_tpr;
    j["recall_at_tpr"] = r.recall_at_tpr;
    j["f1_at_tpr"] = r.f1_at_tpr;
    j["id_accuracy"] = r.id_accuracy ? json(*r.id_accuracy) : json(nullptr);
    j["n_id"] = r.n_id;
    j["n_ood"] = r.n_ood;
    return j.dump(1) + "\n";
}

EvalReport report_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        EvalReport r;
        r.method = j.at("method").get<std::string>();
        r.source_tag = j.value("source_tag", "");
        r.auroc = j.at("auroc").get<double>();
        r.aupr_in = j.at("aupr_in").get<double>();
        r.aupr_out = j.at("aupr_out").get<double>();
        r.target_tpr = j.at("target_tpr").get<double>();
        r.threshold_at_tpr = j.at("threshold_at_tpr").get<double>();
        r.precision_at_tpr = j.at("precision_at_tpr").get<double>();
        r.recall_at_tpr = j.at("recall_at_tpr").get<double>();
        r.f1_at_tpr = j.at("f1_at_tpr").get<double>();
        if (!j.at("id_accuracy").is_null()) r.id_accuracy = j["id_accuracy"].get<double>();
        r.n_id = j.at("n_id").get<std::size_t>();
        r.n_ood = j.at("n_ood").get<std::size_t>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

std::string format_table(std::span<const EvalReport> reports) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %-15s %8s %8s %8s %10s %10s\n", "Method", "Features",
                  "AUROC", "AUPR-In", "AUPR-Out", "Precision", "F1");
    out += line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%-8s %-15s %8.4f %8.4f %8.4f %10.4f %10.4f\n",
                      r.method.c_str(), r.source_tag.c_str(), r.auroc, r.aupr_in, r.aupr_out,
                      r.precision_at_tpr, r.f1_at_tpr);
        out += line;
    }
    return out;
}

}  // namespace lsood
