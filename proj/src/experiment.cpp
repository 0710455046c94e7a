#include "lsood/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <iostream>
#include <set>

#include <json.hpp>

namespace lsood {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
    throw Error(ErrorCode::ConfigInvalid, field + ": " + why);
}

void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) config_error(section, "must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.contains(key)) config_error(section.empty() ? key : section + "." + key, "unknown field");
    }
}

template <typename T>
void read_field(const json& obj, const std::string& section, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const std::string name = section.empty() ? key : section + "." + key;
    const json& v = obj[key];
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) config_error(name, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned())) {
                config_error(name, "expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) config_error(name, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) config_error(name, "expected a string");
        }
        out = v.get<T>();
    } catch (const json::exception&) {
        config_error(name, "has the wrong type");
    }
}

void read_train(const json& obj, const std::string& section, TrainConfig& t) {
    check_keys(obj, section,
               {"epsilon", "learning_rate", "epochs", "batch_size", "hidden_sizes",
                "penultimate_dim", "schedule", "early_stop_patience", "holdout_fraction"});
    read_field(obj, section, "epsilon", t.epsilon);
    read_field(obj, section, "learning_rate", t.learning_rate);
    read_field(obj, section, "epochs", t.epochs);
    read_field(obj, section, "batch_size", t.batch_size);
    read_field(obj, section, "penultimate_dim", t.penultimate_dim);
    read_field(obj, section, "early_stop_patience", t.early_stop_patience);
    read_field(obj, section, "holdout_fraction", t.holdout_fraction);
    if (obj.contains("hidden_sizes")) {
        const auto& h = obj["hidden_sizes"];
        if (!h.is_array()) config_error(section + ".hidden_sizes", "expected an array");
        t.hidden_sizes.clear();
        for (const auto& v : h) {
            if (!v.is_number_unsigned()) config_error(section + ".hidden_sizes", "expected positive integers");
            t.hidden_sizes.push_back(v.get<std::size_t>());
        }
    }
    if (obj.contains("schedule")) {
        std::string s;
        read_field(obj, section, "schedule", s);
        try {
            t.schedule = parse_schedule(s);
        } catch (const Error&) {
            config_error(section + ".schedule", "must be \"constant\" or \"cosine\"");
        }
    }
}

json train_to_json(const TrainConfig& t) {
    return {{"epsilon", t.epsilon},
            {"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"hidden_sizes", t.hidden_sizes},
            {"penultimate_dim", t.penultimate_dim},
            {"schedule", std::string(to_string(t.schedule))},
            {"early_stop_patience", t.early_stop_patience},
            {"holdout_fraction", t.holdout_fraction}};
}

const std::set<std::string> kKnownMethods{"MD", "RMD", "MD-LS", "RMD-LS"};

}  // namespace

void PipelineConfig::validate() const {
    try {
        bench.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string(e.what()).substr(std::string("ConfigInvalid: ").size()));
    }
    auto check_train = [](const TrainConfig& t, const std::string& section) {
        try {
            t.validate();
        } catch (const Error& e) {
            config_error(section, e.what());
        }
    };
    check_train(train_baseline, "train_baseline");
    check_train(train_smoothed, "train_smoothed");
    if (methods.empty()) config_error("detector.methods", "must list at least one method");
    for (const auto& m : methods) {
        if (!kKnownMethods.contains(m)) config_error("detector.methods", "unknown method '" + m + "'");
    }
    if (!(target_tpr > 0.0 && target_tpr <= 1.0)) config_error("metrics.target_tpr", "must be in (0, 1]");
    if (bins < 2) config_error("metrics.bins", "must be at least 2");
    for (int c : projection_classes) {
        if (c < 0 || static_cast<std::size_t>(c) >= bench.class_count) {
            config_error("projection.classes", "class " + std::to_string(c) + " out of range");
        }
    }
    if (projection_classes[0] == projection_classes[1] || projection_classes[0] == projection_classes[2] ||
        projection_classes[1] == projection_classes[2]) {
        config_error("projection.classes", "classes must be distinct");
    }
    if (folds < 2) config_error("folds", "must be at least 2");
    if (folds > bench.samples_per_class * bench.class_count) config_error("folds", "more folds than ID samples");
}

PipelineConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    check_keys(j, "", {"bench", "train_baseline", "train_smoothed", "detector", "metrics",
                       "projection", "folds", "seed", "workspace", "parallel_folds"});
    if (j.contains("bench")) {
        const auto& b = j["bench"];
        check_keys(b, "bench", {"input_dim", "background_dim", "class_count", "ood_class_count",
                                "samples_per_class", "ood_samples_per_class", "background_scale",
                                "semantic_separation", "noise_scale"});
        read_field(b, "bench", "input_dim", c.bench.input_dim);
        read_field(b, "bench", "background_dim", c.bench.background_dim);
        read_field(b, "bench", "class_count", c.bench.class_count);
        read_field(b, "bench", "ood_class_count", c.bench.ood_class_count);
        read_field(b, "bench", "samples_per_class", c.bench.samples_per_class);
        read_field(b, "bench", "ood_samples_per_class", c.bench.ood_samples_per_class);
        read_field(b, "bench", "background_scale", c.bench.background_scale);
        read_field(b, "bench", "semantic_separation", c.bench.semantic_separation);
        read_field(b, "bench", "noise_scale", c.bench.noise_scale);
    }
    if (j.contains("train_baseline")) read_train(j["train_baseline"], "train_baseline", c.train_baseline);
    if (j.contains("train_smoothed")) read_train(j["train_smoothed"], "train_smoothed", c.train_smoothed);
    if (j.contains("detector")) {
        const auto& d = j["detector"];
        check_keys(d, "detector", {"methods", "separate_background_covariance", "allow_shrinkage"});
        if (d.contains("methods")) {
            if (!d["methods"].is_array()) config_error("detector.methods", "expected an array of strings");
            c.methods.clear();
            for (const auto& m : d["methods"]) {
                if (!m.is_string()) config_error("detector.methods", "expected an array of strings");
                c.methods.push_back(m.get<std::string>());
            }
        }
        read_field(d, "detector", "separate_background_covariance", c.detector.separate_background_covariance);
        read_field(d, "detector", "allow_shrinkage", c.detector.allow_shrinkage);
    }
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        check_keys(m, "metrics", {"target_tpr", "bins"});
        read_field(m, "metrics", "target_tpr", c.target_tpr);
        read_field(m, "metrics", "bins", c.bins);
    }
    if (j.contains("projection")) {
        const auto& p = j["projection"];
        check_keys(p, "projection", {"classes", "templates"});
        if (p.contains("classes")) {
            const auto& cl = p["classes"];
            if (!cl.is_array() || cl.size() != 3) config_error("projection.classes", "expected three class indices");
            for (std::size_t k = 0; k < 3; ++k) {
                if (!cl[k].is_number_integer()) config_error("projection.classes", "expected integers");
                c.projection_classes[k] = cl[k].get<int>();
            }
        }
        if (p.contains("templates")) {
            std::string t;
            read_field(p, "projection", "templates", t);
            if (t == "weights") c.templates = TemplateSource::Weights;
            else if (t == "means") c.templates = TemplateSource::Means;
            else config_error("projection.templates", "must be \"weights\" or \"means\"");
        }
    }
    read_field(j, "", "folds", c.folds);
    if (j.contains("seed")) {
        std::uint64_t seed = 0;
        read_field(j, "", "seed", seed);
        apply_master_seed(c, seed);
    }
    if (j.contains("workspace")) {
        std::string w;
        read_field(j, "", "workspace", w);
        c.workspace = w;
    }
    read_field(j, "", "parallel_folds", c.parallel_folds);
    c.validate();
    return c;
}

std::string config_to_json(const PipelineConfig& c) {
    json j;
    j["bench"] = {{"input_dim", c.bench.input_dim},
                  {"background_dim", c.bench.background_dim},
                  {"class_count", c.bench.class_count},
                  {"ood_class_count", c.bench.ood_class_count},
                  {"samples_per_class", c.bench.samples_per_class},
                  {"ood_samples_per_class", c.bench.ood_samples_per_class},
                  {"background_scale", c.bench.background_scale},
                  {"semantic_separation", c.bench.semantic_separation},
                  {"noise_scale", c.bench.noise_scale}};
    j["train_baseline"] = train_to_json(c.train_baseline);
    j["train_smoothed"] = train_to_json(c.train_smoothed);
    j["detector"] = {{"methods", c.methods},
                     {"separate_background_covariance", c.detector.separate_background_covariance},
                     {"allow_shrinkage", c.detector.allow_shrinkage}};
    j["metrics"] = {{"target_tpr", c.target_tpr}, {"bins", c.bins}};
    j["projection"] = {{"classes", c.projection_classes},
                       {"templates", c.templates == TemplateSource::Weights ? "weights" : "means"}};
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["workspace"] = c.workspace.string();
    j["parallel_folds"] = c.parallel_folds;
    return j.dump(2) + "\n";
}

void apply_master_seed(PipelineConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.bench.seed = seed;
    config.train_baseline.seed = seed;
    config.train_smoothed.seed = seed;
}

std::uint64_t config_hash(const PipelineConfig& config) {
    PipelineConfig canon = config;
    canon.workspace.clear();
    canon.parallel_folds = true;
    const std::string text = config_to_json(canon);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::filesystem::path run_directory(const PipelineConfig& config) {
    char name[64];
    std::snprintf(name, sizeof(name), "run-%016llx-seed%llu",
                  static_cast<unsigned long long>(config_hash(config)),
                  static_cast<unsigned long long>(config.seed));
    return config.workspace / name;
}

const EvalReport& ExperimentResult::aggregate_for(std::string_view method) const {
    for (const auto& r : aggregate)
        if (r.method == method) return r;
    throw Error(ErrorCode::ConfigInvalid, "method " + std::string(method) + " was not run");
}

namespace {

struct TrainedView {
    ClassifierParams params;
    FeatureSet train_features;
    FeatureSet test_id_features;
    FeatureSet ood_features;
    GaussianOodModel model;
    double accuracy = 0.0;
};

TrainedView train_and_fit(const TrainConfig& base_cfg, std::size_t fold, const Matrix& train_x,
                          const std::vector<int>& train_y, const Matrix& test_x,
                          const std::vector<int>& test_y, const Matrix& ood_x,
                          std::size_t class_count, const FitOptions& fit) {
    TrainConfig cfg = base_cfg;
    cfg.seed = mix_seed(base_cfg.seed, 100 + fold);
    TrainedView v;
    v.params = train(train_x, train_y, class_count, cfg);
    const std::string tag = cfg.source_tag();
    v.train_features = extract_features(v.params, train_x, train_y, tag);
    v.test_id_features = extract_features(v.params, test_x, test_y, tag);
    v.ood_features = extract_features(v.params, ood_x, std::vector<int>(ood_x.rows(), kOodLabel), tag);
    v.model = fit_gaussians(v.train_features, fit);
    v.accuracy = id_accuracy(logits_batch(v.params, test_x), test_y);
    return v;
}

std::array<Vector, 3> templates_for(const TrainedView& v, const PipelineConfig& config) {
    std::array<Vector, 3> t;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto c = static_cast<std::size_t>(config.projection_classes[k]);
        if (config.templates == TemplateSource::Weights) {
            const auto row = v.params.head().weights.row(c);
            t[k] = Vector(std::vector<double>(row.begin(), row.end()));
        } else {
            t[k] = v.model.class_means[c];
        }
    }
    return t;
}

std::string fold_dir_name(std::size_t fold) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fold_%02zu", fold);
    return buf;
}

FoldResult run_fold(const PipelineConfig& config, const LabeledDataset& data,
                    const std::vector<std::size_t>& id_rows, const std::vector<std::size_t>& ood_rows,
                    const std::vector<std::vector<std::size_t>>& folds, std::size_t fold) {
    std::vector<std::size_t> train_rows;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f == fold) continue;
        for (auto i : folds[f]) train_rows.push_back(id_rows[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::vector<std::size_t> test_rows;
    for (auto i : folds[fold]) test_rows.push_back(id_rows[i]);

    auto gather = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<int>& y) {
        x = Matrix(rows.size(), data.inputs.cols());
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto src = data.inputs.row(rows[i]);
            std::copy(src.begin(), src.end(), x.row(i).begin());
            y[i] = data.labels[rows[i]];
        }
    };
    Matrix train_x, test_x, ood_x;
    std::vector<int> train_y, test_y, ood_y;
    gather(train_rows, train_x, train_y);
    gather(test_rows, test_x, test_y);
    gather(ood_rows, ood_x, ood_y);

    const std::size_t C = config.bench.class_count;
    const TrainedView base = train_and_fit(config.train_baseline, fold, train_x, train_y, test_x,
                                           test_y, ood_x, C, config.detector);
    const TrainedView ls = train_and_fit(config.train_smoothed, fold, train_x, train_y, test_x,
                                         test_y, ood_x, C, config.detector);

    FoldResult r;
    r.fold = fold;
    r.baseline_accuracy = base.accuracy;
    r.smoothed_accuracy = ls.accuracy;
    r.baseline_shrinkage = base.model.shrinkage_lambda;
    r.smoothed_shrinkage = ls.model.shrinkage_lambda;

    for (const auto& method : config.methods) {
        const bool smoothed = method.ends_with("-LS");
        const TrainedView& v = smoothed ? ls : base;
        const ScoreMethod sm = method.starts_with("RMD") ? ScoreMethod::RMD : ScoreMethod::MD;
        const auto id_scores = score(v.model, v.test_id_features, sm).scores;
        const auto ood_scores = score(v.model, v.ood_features, sm).scores;
        EvalReport rep = evaluate(id_scores, ood_scores, config.target_tpr, method, v.test_id_features.source_tag);
        rep.id_accuracy = v.accuracy;
        r.reports.push_back(std::move(rep));
        if (fold == 0) r.densities.push_back(score_density(id_scores, ood_scores, config.bins, method));
    }

    for (const TrainedView* v : {&base, &ls}) {
        auto proj = project_to_weight_plane(v->test_id_features, templates_for(*v, config),
                                            config.projection_classes);
        const double ratio = projection_separation_ratio(proj);
        (v == &base ? r.baseline_separation : r.smoothed_separation) = ratio;
        if (fold == 0) r.projections.push_back(std::move(proj));
    }
    return r;
}

void write_fold_reports(const FoldResult& r, const std::filesystem::path& dir) {
    const auto fold_dir = dir / fold_dir_name(r.fold);
    for (const auto& rep : r.reports) {
        write_text_file(fold_dir / ("report_" + rep.method + ".json"), report_to_json(rep));
    }
    json j = {{"fold", r.fold},
              {"baseline_accuracy", r.baseline_accuracy},
              {"smoothed_accuracy", r.smoothed_accuracy},
              {"baseline_separation", r.baseline_separation},
              {"smoothed_separation", r.smoothed_separation},
              {"baseline_shrinkage", r.baseline_shrinkage},
              {"smoothed_shrinkage", r.smoothed_shrinkage}};
    write_text_file(fold_dir / "fold_summary.json", j.dump(1) + "\n");
}

}  // namespace

ExperimentResult run_experiment(const PipelineConfig& config, const LabeledDataset& data,
                                const RunOptions& options) {
    config.validate();
    if (data.inputs.cols() != config.bench.input_dim) {
        throw Error(ErrorCode::DimensionMismatch, "dataset dim differs from bench.input_dim");
    }
    const auto id_rows = data.id_indices();
    const auto ood_rows = data.ood_indices();
    if (ood_rows.empty()) throw Error(ErrorCode::EmptyGroup, "dataset has no OOD rows");
    const auto folds = kfold_split(id_rows.size(), config.folds, mix_seed(config.seed, 2));

    const auto k = static_cast<std::ptrdiff_t>(config.folds);
    std::vector<FoldResult> results(config.folds);
    std::vector<std::exception_ptr> errors(config.folds);

#pragma omp parallel for schedule(dynamic, 1) if (config.parallel_folds)
    for (std::ptrdiff_t f = 0; f < k; ++f) {
        const auto fold = static_cast<std::size_t>(f);
        try {
            results[fold] = run_fold(config, data, id_rows, ood_rows, folds, fold);
            if (!options.fold_output_dir.empty()) write_fold_reports(results[fold], options.fold_output_dir);
            if (!options.quiet) {
                std::string msg = "fold " + std::to_string(fold) + " done: AUROC";
                for (const auto& rep : results[fold].reports) msg += " " + rep.method + "=" + format_double(rep.auroc);
#pragma omp critical(lsood_log)
                std::cerr << msg << '\n';
            }
        } catch (...) {
            errors[fold] = std::current_exception();
        }
    }
    for (std::size_t f = 0; f < errors.size(); ++f) {
        if (!errors[f]) continue;
        try {
            std::rethrow_exception(errors[f]);
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
        }
    }

    ExperimentResult out;
    out.folds = std::move(results);
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        std::vector<EvalReport> per_fold;
        for (const auto& fr : out.folds) per_fold.push_back(fr.reports[m]);
        out.aggregate.push_back(mean_report(per_fold));
    }
    const double kf = static_cast<double>(config.folds);
    for (const auto& fr : out.folds) {
        out.baseline_accuracy += fr.baseline_accuracy / kf;
        out.smoothed_accuracy += fr.smoothed_accuracy / kf;
        out.baseline_separation += fr.baseline_separation / kf;
        out.smoothed_separation += fr.smoothed_separation / kf;
    }
    return out;
}

std::string accuracy_table(const ExperimentResult& result) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-6s %14s %14s\n", "Fold", "baseline", "label-smoothed");
    out += line;
    for (const auto& f : result.folds) {
        std::snprintf(line, sizeof(line), "%-6zu %14.4f %14.4f\n", f.fold, f.baseline_accuracy,
                      f.smoothed_accuracy);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-6s %14.4f %14.4f\n", "mean", result.baseline_accuracy,
                  result.smoothed_accuracy);
    out += line;
    return out;
}

void write_experiment_outputs(const PipelineConfig& config, const ExperimentResult& result,
                              const std::filesystem::path& dir) {
    write_text_file(dir / "config.json", config_to_json(config));
    for (const auto& fr : result.folds) write_fold_reports(fr, dir);
    for (const auto& rep : result.aggregate) {
        write_text_file(dir / "aggregate" / ("report_" + rep.method + ".json"), report_to_json(rep));
    }
    char tpr[32];
    std::snprintf(tpr, sizeof(tpr), "%g", config.target_tpr);
    std::string table = "# OOD detection, mean over " + std::to_string(config.folds) +
                        " folds; ID is the positive class; precision/F1 at TPR=" + tpr + "\n";
    table += format_table(result.aggregate);
    write_text_file(dir / "ood_table.txt", table);
    write_text_file(dir / "accuracy_table.txt",
                    "# ID classification accuracy per fold\n" + accuracy_table(result));

    json summary;
    summary["seed"] = config.seed;
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(config)));
    summary["config_hash"] = hash;
    json methods = json::object();
    for (std::size_t m = 0; m < result.aggregate.size(); ++m) {
        const auto& rep = result.aggregate[m];
        json per_fold = json::array();
        for (const auto& fr : result.folds) per_fold.push_back(fr.reports[m].auroc);
        methods[rep.method] = {{"auroc", rep.auroc},
                               {"aupr_in", rep.aupr_in},
                               {"aupr_out", rep.aupr_out},
                               {"precision_at_tpr", rep.precision_at_tpr},
                               {"f1_at_tpr", rep.f1_at_tpr},
                               {"auroc_per_fold", per_fold}};
    }
    summary["methods"] = std::move(methods);
    summary["id_accuracy"] = {{"baseline", result.baseline_accuracy},
                              {"label-smoothed", result.smoothed_accuracy}};
    summary["projection_separation"] = {{"baseline", result.baseline_separation},
                                        {"label-smoothed", result.smoothed_separation}};
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");

    if (!result.folds.empty()) {
        const auto& f0 = result.folds.front();
        for (const auto& proj : f0.projections) {
            write_text_file(dir / ("projection_" + proj.source_tag + ".csv"), projection_to_text(proj));
        }
        for (const auto& d : f0.densities) {
            write_text_file(dir / ("density_" + d.method + ".csv"), density_to_text(d));
        }
    }
}

}  // namespace lsood
