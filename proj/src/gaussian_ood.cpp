#include "lsood/gaussian_ood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace lsood {

using nlohmann::json;

void FeatureSet::validate() const {
    if (features.rows() == 0) throw Error(ErrorCode::EmptyInput, "feature set has no rows");
    if (labels.size() != features.rows()) {
        throw Error(ErrorCode::LengthMismatch, "labels and feature rows differ in count");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y != kOodLabel && (y < 0 || static_cast<std::size_t>(y) >= class_count)) {
            throw Error(ErrorCode::LabelOutOfRange,
                        "row " + std::to_string(i) + " label " + std::to_string(y));
        }
    }
    for (double v : features.data()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite feature");
    }
}

FeatureSet FeatureSet::select(std::span<const std::size_t> rows) const {
    FeatureSet out;
    out.class_count = class_count;
    out.source_tag = source_tag;
    out.features = Matrix(rows.size(), dim());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

FeatureSet FeatureSet::id_rows() const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kOodLabel) keep.push_back(i);
    return select(keep);
}

namespace {

std::vector<Vector> class_means_of(const FeatureSet& train, std::vector<std::size_t>& counts) {
    const std::size_t p = train.dim();
    const std::size_t C = train.class_count;
    std::vector<std::vector<CompensatedSum>> sums(C, std::vector<CompensatedSum>(p));
    counts.assign(C, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto c = static_cast<std::size_t>(train.labels[i]);
        ++counts[c];
        const auto row = train.features.row(i);
        for (std::size_t j = 0; j < p; ++j) sums[c][j].add(row[j]);
    }
    std::vector<Vector> means(C, Vector(p));
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < p; ++j)
            means[c][j] = sums[c][j].value() / static_cast<double>(counts[c]);
    return means;
}

Vector global_mean_of(const Matrix& z) {
    const std::size_t p = z.cols();
    std::vector<CompensatedSum> sums(p);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        for (std::size_t j = 0; j < p; ++j) sums[j].add(row[j]);
    }
    Vector mean(p);
    for (std::size_t j = 0; j < p; ++j) mean[j] = sums[j].value() / static_cast<double>(z.rows());
    return mean;
}

Matrix scatter_about(const Matrix& z, const std::vector<const Vector*>& centre_per_row) {
    const std::size_t p = z.cols();
    const std::size_t n = z.rows();
    std::vector<CompensatedSum> acc(p * (p + 1) / 2);
    std::vector<double> d(p);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = z.row(i);
        const Vector& mu = *centre_per_row[i];
        for (std::size_t j = 0; j < p; ++j) d[j] = row[j] - mu[j];
        std::size_t idx = 0;
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k <= j; ++k) acc[idx++].add(d[j] * d[k]);
    }
    Matrix cov(p, p);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k <= j; ++k) {
            const double v = acc[idx++].value() / static_cast<double>(n);
            cov(j, k) = v;
            cov(k, j) = v;
        }
    }
    return cov;
}

struct Regularized {
    CholeskyFactor factor;
    double lambda = 0.0;
};

Regularized factor_with_ladder(const Matrix& cov, bool allow_shrinkage) {
    const std::size_t p = cov.rows();
    double scale = trace(cov) / static_cast<double>(p);
    // All-zero covariance still needs a positive ridge.
    if (!(scale > 0.0)) scale = 1.0;
    for (double multiplier : kShrinkageLadder) {
        const double lambda = multiplier * scale;
        Matrix shifted = cov;
        for (std::size_t j = 0; j < p; ++j) shifted(j, j) += lambda;
        try {
            return {cholesky(shifted), lambda};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotPositiveDefinite) throw;
            if (!allow_shrinkage) throw;
        }
    }
    throw Error(ErrorCode::NotPositiveDefinite,
                "covariance not positive definite even at the largest shrinkage step");
}

void require_dim(const GaussianOodModel& model, std::size_t dim) {
    if (dim != model.feature_dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "feature dim " + std::to_string(dim) + " vs model dim " +
                        std::to_string(model.feature_dim));
    }
}

double whitened_sq_norm(const Matrix& lower, std::span<const double> z,
                        std::span<const double> mu, std::span<double> scratch) {
    for (std::size_t j = 0; j < z.size(); ++j) scratch[j] = z[j] - mu[j];
    forward_substitute(lower, scratch);
    double s = 0.0;
    for (double v : scratch) s += v * v;
    return s;
}

// Fills one row of a score vector; shared by the parallel and serial drivers.
void score_row(const GaussianOodModel& model, ScoreMethod method, std::span<const double> z,
               std::span<double> scratch, std::span<double> per_class, double& score,
               int& nearest) {
    const Matrix& lower = model.shared_cov_factor.lower();
    const double background =
        method == ScoreMethod::RMD
            ? whitened_sq_norm(model.background_factor().lower(), z, model.global_mean.span(),
                               scratch)
            : 0.0;
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < model.class_count(); ++c) {
        const double d = whitened_sq_norm(lower, z, model.class_means[c].span(), scratch) - background;
        per_class[c] = d;
        if (d < best) {
            best = d;
            best_c = static_cast<int>(c);
        }
    }
    score = -best;
    nearest = best_c;
}

ScoreVector make_output(const GaussianOodModel& model, const FeatureSet& test,
                        ScoreMethod method) {
    require_dim(model, test.dim());
    ScoreVector out;
    out.method = method;
    out.scores.assign(test.size(), 0.0);
    out.per_class_distances = Matrix(test.size(), model.class_count());
    out.nearest_class.assign(test.size(), 0);
    return out;
}

ScoreVector score_parallel(const GaussianOodModel& model, const FeatureSet& test,
                           ScoreMethod method) {
    ScoreVector out = make_output(model, test, method);
    const auto n = static_cast<std::ptrdiff_t>(test.size());
    const std::size_t p = model.feature_dim;
#pragma omp parallel
    {
        std::vector<double> scratch(p);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(i);
            score_row(model, method, test.features.row(r), scratch,
                      out.per_class_distances.row(r), out.scores[r], out.nearest_class[r]);
        }
    }
    return out;
}

ScoreVector score_serial(const GaussianOodModel& model, const FeatureSet& test,
                         ScoreMethod method) {
    ScoreVector out = make_output(model, test, method);
    std::vector<double> scratch(model.feature_dim);
    for (std::size_t r = 0; r < test.size(); ++r) {
        score_row(model, method, test.features.row(r), scratch, out.per_class_distances.row(r),
                  out.scores[r], out.nearest_class[r]);
    }
    return out;
}

}  // namespace

Matrix pooled_covariance(const FeatureSet& train, const std::vector<Vector>& class_means) {
    std::vector<const Vector*> centre(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        centre[i] = &class_means[static_cast<std::size_t>(train.labels[i])];
    return scatter_about(train.features, centre);
}

GaussianOodModel fit_gaussians(const FeatureSet& train, const FitOptions& options) {
    train.validate();
    if (train.class_count == 0) throw Error(ErrorCode::EmptyClass, "class_count is zero");
    for (int y : train.labels) {
        if (y == kOodLabel) {
            throw Error(ErrorCode::ContainsOodRows, "training set must not contain OOD rows");
        }
    }
    GaussianOodModel model;
    model.feature_dim = train.dim();
    model.source_tag = train.source_tag;
    model.class_means = class_means_of(train, model.class_counts);
    for (std::size_t c = 0; c < train.class_count; ++c) {
        if (model.class_counts[c] < 2) {
            throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has " +
                                                   std::to_string(model.class_counts[c]) +
                                                   " samples; at least 2 required");
        }
    }
    model.global_mean = global_mean_of(train.features);

    auto shared = factor_with_ladder(pooled_covariance(train, model.class_means),
                                     options.allow_shrinkage);
    model.shared_cov_factor = std::move(shared.factor);
    model.shrinkage_lambda = shared.lambda;

    if (options.separate_background_covariance) {
        std::vector<const Vector*> centre(train.size(), &model.global_mean);
        auto bg = factor_with_ladder(scatter_about(train.features, centre), options.allow_shrinkage);
        model.background_cov_factor = std::move(bg.factor);
        model.background_shrinkage_lambda = bg.lambda;
    }
    return model;
}

double mahalanobis(const GaussianOodModel& model, std::span<const double> z, std::size_t c) {
    require_dim(model, z.size());
    if (c >= model.class_count()) {
        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c));
    }
    std::vector<double> scratch(z.size());
    return whitened_sq_norm(model.shared_cov_factor.lower(), z, model.class_means[c].span(),
                            scratch);
}

double mahalanobis_global(const GaussianOodModel& model, std::span<const double> z) {
    require_dim(model, z.size());
    std::vector<double> scratch(z.size());
    return whitened_sq_norm(model.background_factor().lower(), z, model.global_mean.span(),
                            scratch);
}

std::string_view to_string(ScoreMethod m) { return m == ScoreMethod::MD ? "MD" : "RMD"; }

ScoreMethod parse_score_method(std::string_view name) {
    if (name == "MD" || name == "md") return ScoreMethod::MD;
    if (name == "RMD" || name == "rmd") return ScoreMethod::RMD;
    throw Error(ErrorCode::ConfigInvalid, "unknown score method '" + std::string(name) + "'");
}

ScoreVector score_md(const GaussianOodModel& model, const FeatureSet& test) {
    return score_parallel(model, test, ScoreMethod::MD);
}

ScoreVector score_rmd(const GaussianOodModel& model, const FeatureSet& test) {
    return score_parallel(model, test, ScoreMethod::RMD);
}

ScoreVector score(const GaussianOodModel& model, const FeatureSet& test, ScoreMethod method) {
    return score_parallel(model, test, method);
}

namespace serial {
ScoreVector score_md(const GaussianOodModel& model, const FeatureSet& test) {
    return score_serial(model, test, ScoreMethod::MD);
}
ScoreVector score_rmd(const GaussianOodModel& model, const FeatureSet& test) {
    return score_serial(model, test, ScoreMethod::RMD);
}
}  // namespace serial

LabeledTable feature_set_to_table(const FeatureSet& fs) {
    LabeledTable t;
    t.kind = "features";
    t.attributes["classes"] = std::to_string(fs.class_count);
    t.attributes["tag"] = fs.source_tag;
    t.labels = fs.labels;
    t.values = fs.features;
    return t;
}

FeatureSet feature_set_from_table(const LabeledTable& table) {
    if (table.kind != "features") {
        throw Error(ErrorCode::ParseError, "expected kind=features, got '" + table.kind + "'");
    }
    FeatureSet fs;
    fs.features = table.values;
    fs.labels = table.labels;
    const auto it = table.attributes.find("classes");
    if (it == table.attributes.end()) throw Error(ErrorCode::ParseError, "table lacks classes=");
    fs.class_count = static_cast<std::size_t>(parse_integer(it->second));
    if (auto tag = table.attributes.find("tag"); tag != table.attributes.end()) {
        fs.source_tag = tag->second;
    }
    fs.validate();
    return fs;
}

void save_features(const FeatureSet& fs, const std::filesystem::path& path) {
    write_text_file(path, table_to_text(feature_set_to_table(fs)));
}

FeatureSet load_features(const std::filesystem::path& path) {
    return feature_set_from_table(table_from_text(read_text_file(path)));
}

namespace {

json lower_to_json(const Matrix& lower) {
    json rows = json::array();
    for (std::size_t i = 0; i < lower.rows(); ++i) {
        const auto r = lower.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(i) + 1));
    }
    return rows;
}

CholeskyFactor lower_from_json(const json& rows, std::size_t p) {
    if (!rows.is_array() || rows.size() != p) {
        throw Error(ErrorCode::ParseError, "factor must have feature_dim rows");
    }
    Matrix l(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        const auto r = rows[i].get<std::vector<double>>();
        if (r.size() != i + 1) throw Error(ErrorCode::ParseError, "factor row has wrong length");
        for (std::size_t j = 0; j <= i; ++j) l(i, j) = r[j];
    }
    return CholeskyFactor(std::move(l));
}

}  // namespace

std::string model_to_json(const GaussianOodModel& model) {
    json j;
    j["format"] = "lsood-gaussian-model";
    j["version"] = 1;
    j["class_count"] = model.class_count();
    j["feature_dim"] = model.feature_dim;
    j["source_tag"] = model.source_tag;
    j["shrinkage_lambda"] = model.shrinkage_lambda;
    j["class_counts"] = model.class_counts;
    json means = json::array();
    for (const auto& m : model.class_means) means.push_back(m.values());
    j["class_means"] = std::move(means);
    j["global_mean"] = model.global_mean.values();
    j["cov_factor_lower"] = lower_to_json(model.shared_cov_factor.lower());
    if (model.background_cov_factor) {
        j["background_cov_factor_lower"] = lower_to_json(model.background_cov_factor->lower());
        j["background_shrinkage_lambda"] = model.background_shrinkage_lambda;
    }
    return j.dump(1) + "\n";
}

GaussianOodModel model_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "lsood-gaussian-model") {
            throw Error(ErrorCode::ParseError, "not a gaussian model file");
        }
        GaussianOodModel m;
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        const auto C = j.at("class_count").get<std::size_t>();
        m.source_tag = j.value("source_tag", "");
        m.shrinkage_lambda = j.at("shrinkage_lambda").get<double>();
        m.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
        for (const auto& mu : j.at("class_means")) {
            m.class_means.emplace_back(mu.get<std::vector<double>>());
        }
        m.global_mean = Vector(j.at("global_mean").get<std::vector<double>>());
        if (m.class_means.size() != C || m.class_counts.size() != C) {
            throw Error(ErrorCode::ParseError, "class_count disagrees with stored means");
        }
        for (const auto& mu : m.class_means) {
            if (mu.dim() != m.feature_dim) throw Error(ErrorCode::ParseError, "mean has wrong dim");
        }
        if (m.global_mean.dim() != m.feature_dim) {
            throw Error(ErrorCode::ParseError, "global mean has wrong dim");
        }
        m.shared_cov_factor = lower_from_json(j.at("cov_factor_lower"), m.feature_dim);
        if (j.contains("background_cov_factor_lower")) {
            m.background_cov_factor = lower_from_json(j["background_cov_factor_lower"], m.feature_dim);
            m.background_shrinkage_lambda = j.value("background_shrinkage_lambda", 0.0);
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

void save_model(const GaussianOodModel& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model));
}

GaussianOodModel load_model(const std::filesystem::path& path) {
    return model_from_json(read_text_file(path));
}

std::string score_table_to_text(const ScoreTable& table, double threshold) {
    if (table.labels.size() != table.scores.size()) {
        throw Error(ErrorCode::LengthMismatch, "score table labels and scores differ in length");
    }
    std::string out = "# method=" + table.method + ",source_tag=" + table.source_tag +
                      ",threshold=" + format_double(threshold) + "\nrow,label,score,accept\n";
    for (std::size_t i = 0; i < table.scores.size(); ++i) {
        const int y = table.labels[i];
        out += std::to_string(i) + ',' + (y == kOodLabel ? "ood" : std::to_string(y)) + ',' +
               format_double(table.scores[i]) + ',' + (table.scores[i] >= threshold ? "1" : "0") + '\n';
    }
    return out;
}

ScoreTable score_table_from_text(std::string_view text) {
    ScoreTable t;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line == "row,label,score,accept") continue;
        if (line.front() == '#') {
            for (auto kv : split(line.substr(1), ',')) {
                while (!kv.empty() && kv.front() == ' ') kv.remove_prefix(1);
                const auto eq = kv.find('=');
                if (eq == std::string_view::npos) continue;
                const auto key = kv.substr(0, eq);
                if (key == "method") t.method = std::string(kv.substr(eq + 1));
                if (key == "source_tag") t.source_tag = std::string(kv.substr(eq + 1));
            }
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != 4) {
            throw Error(ErrorCode::ParseError, "score line " + std::to_string(line_no) + ": expected 4 fields");
        }
        t.labels.push_back(cells[1] == "ood" ? kOodLabel : static_cast<int>(parse_integer(cells[1])));
        const double v = parse_double(cells[2]);
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::ParseError, "score line " + std::to_string(line_no) + ": non-finite score");
        }
        t.scores.push_back(v);
    }
    if (t.scores.empty()) throw Error(ErrorCode::EmptyInput, "score file has no rows");
    return t;
}

void save_scores(const ScoreTable& table, double threshold, const std::filesystem::path& path) {
    write_text_file(path, score_table_to_text(table, threshold));
}

ScoreTable load_scores(const std::filesystem::path& path) {
    return score_table_from_text(read_text_file(path));
}

}  // namespace lsood
