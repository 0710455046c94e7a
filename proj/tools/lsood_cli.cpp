// lsood command-line front end.
// Exit codes: 0 success, 1 usage, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lsood/bench.hpp"
#include "lsood/error.hpp"
#include "lsood/experiment.hpp"
#include "lsood/gaussian_ood.hpp"
#include "lsood/metrics.hpp"
#include "lsood/table_io.hpp"
#include "lsood/trainer.hpp"
#include "lsood/viz.hpp"

namespace fs = std::filesystem;
using namespace lsood;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string workspace;
    bool quiet = false;
};

PipelineConfig load_config(const Globals& g) {
    PipelineConfig c = g.config_path.empty() ? PipelineConfig{} : config_from_json(read_text_file(g.config_path));
    if (g.seed) apply_master_seed(c, *g.seed);
    if (!g.workspace.empty()) c.workspace = g.workspace;
    c.validate();
    return c;
}

void note(const Globals& g, const std::string& msg) {
    if (!g.quiet) std::cerr << msg << '\n';
}

void split_scores(const ScoreTable& s, std::vector<double>& id, std::vector<double>& ood) {
    for (std::size_t i = 0; i < s.scores.size(); ++i)
        (s.labels[i] == kOodLabel ? ood : id).push_back(s.scores[i]);
}

std::array<int, 3> parse_classes(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 3) throw Error(ErrorCode::ConfigInvalid, "--classes: expected three comma-separated indices");
    std::array<int, 3> out{};
    for (std::size_t k = 0; k < 3; ++k) out[k] = static_cast<int>(parse_integer(parts[k]));
    return out;
}

int exit_code_for(const Error& e) {
    switch (category_of(e.code())) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Data: return 3;
        case ErrorCategory::Numerical: return 4;
    }
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian OOD detection on penultimate features, with and without label smoothing"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--workspace", g.workspace, "output root for run-experiment");
    app.add_flag("--quiet", g.quiet, "suppress progress messages");

    // generate
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "sample the synthetic benchmark");
    gen->add_option("--out", gen_out, "dataset table")->required();

    // train
    std::string tr_data, tr_out;
    std::optional<double> tr_eps, tr_lr;
    std::optional<std::size_t> tr_epochs;
    bool tr_baseline = false;
    auto* tr = app.add_subcommand("train", "train the classifier on the ID rows of a dataset");
    tr->add_option("--data", tr_data, "dataset table")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "parameter JSON")->required();
    tr->add_flag("--baseline", tr_baseline, "use train_baseline instead of train_smoothed");
    tr->add_option("--epsilon", tr_eps, "label smoothing strength");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--epochs", tr_epochs, "epoch count");

    // extract
    std::string ex_params, ex_data, ex_out, ex_tag;
    auto* ex = app.add_subcommand("extract", "write penultimate features for every dataset row");
    ex->add_option("--params", ex_params, "parameter JSON")->required()->check(CLI::ExistingFile);
    ex->add_option("--data", ex_data, "dataset table")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "feature table")->required();
    ex->add_option("--tag", ex_tag, "source tag")->default_val("features");

    // fit
    std::string fit_features, fit_out;
    bool fit_separate = false, fit_no_shrink = false;
    auto* fit = app.add_subcommand("fit", "fit class-conditional Gaussians on ID features");
    fit->add_option("--features", fit_features, "feature table")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", fit_out, "model JSON")->required();
    fit->add_flag("--separate-background", fit_separate, "fit a separate background covariance");
    fit->add_flag("--no-shrinkage", fit_no_shrink, "fail instead of shrinking a singular covariance");

    // score
    std::string sc_model, sc_features, sc_out, sc_method = "MD";
    double sc_threshold = -std::numeric_limits<double>::infinity();
    auto* sc = app.add_subcommand("score", "score features; higher means more in-distribution");
    sc->add_option("--model", sc_model, "model JSON")->required()->check(CLI::ExistingFile);
    sc->add_option("--features", sc_features, "feature table")->required()->check(CLI::ExistingFile);
    sc->add_option("--method", sc_method, "MD or RMD")->check(CLI::IsMember({"MD", "RMD"}));
    sc->add_option("--threshold", sc_threshold, "accept rows with score >= threshold");
    sc->add_option("--out", sc_out, "score CSV")->required();

    // eval
    std::string ev_scores, ev_out;
    std::optional<double> ev_tpr;
    auto* ev = app.add_subcommand("eval", "metrics from a score CSV (ID is the positive class)");
    ev->add_option("--scores", ev_scores, "score CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--tpr", ev_tpr, "target ID true-positive rate");
    ev->add_option("--out", ev_out, "report JSON");

    // project
    std::string pj_features, pj_params, pj_out, pj_classes;
    auto* pj = app.add_subcommand("project", "project features onto the plane of three class templates");
    pj->add_option("--features", pj_features, "feature table")->required()->check(CLI::ExistingFile);
    pj->add_option("--params", pj_params, "parameter JSON; templates are head weight rows")->check(CLI::ExistingFile);
    pj->add_option("--classes", pj_classes, "three class indices, e.g. 0,1,2");
    pj->add_option("--out", pj_out, "projection CSV")->required();

    // density
    std::string dn_scores, dn_out;
    std::optional<std::size_t> dn_bins;
    auto* dn = app.add_subcommand("density", "binned ID and OOD score densities");
    dn->add_option("--scores", dn_scores, "score CSV")->required()->check(CLI::ExistingFile);
    dn->add_option("--bins", dn_bins, "bin count");
    dn->add_option("--out", dn_out, "density CSV")->required();

    // run-experiment
    std::string rx_data;
    auto* rx = app.add_subcommand("run-experiment", "k-fold comparison of MD/RMD with and without smoothing");
    rx->add_option("--data", rx_data, "dataset table (default: generate from the config)")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const PipelineConfig config = load_config(g);

        if (*gen) {
            const auto ds = generate(config.bench);
            save_dataset(ds, gen_out);
            note(g, "wrote " + std::to_string(ds.size()) + " rows to " + gen_out);
        } else if (*tr) {
            const auto ds = load_dataset(tr_data);
            TrainConfig t = tr_baseline ? config.train_baseline : config.train_smoothed;
            if (tr_eps) t.epsilon = *tr_eps;
            if (tr_lr) t.learning_rate = *tr_lr;
            if (tr_epochs) t.epochs = *tr_epochs;
            t.validate();
            const auto rows = ds.id_indices();
            Matrix x(rows.size(), ds.inputs.cols());
            std::vector<int> y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                std::copy(ds.inputs.row(rows[i]).begin(), ds.inputs.row(rows[i]).end(), x.row(i).begin());
                y[i] = ds.labels[rows[i]];
            }
            const auto r = train_with_history(x, y, ds.config.class_count, t);
            save_params(r.params, tr_out);
            note(g, "trained " + std::string(t.source_tag()) + " net, final loss " +
                        format_double(r.epoch_losses.back()) + ", train accuracy " +
                        format_double(id_accuracy(logits_batch(r.params, x), y)));
        } else if (*ex) {
            const auto params = load_params(ex_params);
            const auto ds = load_dataset(ex_data);
            auto feats = extract_features(params, ds.inputs, ds.labels, ex_tag);
            feats.class_count = ds.config.class_count;
            save_features(feats, ex_out);
        } else if (*fit) {
            FitOptions opt = config.detector;
            if (fit_separate) opt.separate_background_covariance = true;
            if (fit_no_shrink) opt.allow_shrinkage = false;
            const auto model = fit_gaussians(load_features(fit_features).id_rows(), opt);
            save_model(model, fit_out);
            note(g, "fitted " + std::to_string(model.class_count()) + " classes, shrinkage " +
                        format_double(model.shrinkage_lambda));
        } else if (*sc) {
            const auto model = load_model(sc_model);
            const auto feats = load_features(sc_features);
            const auto sv = score(model, feats, parse_score_method(sc_method));
            save_scores({sc_method, feats.source_tag, feats.labels, sv.scores}, sc_threshold, sc_out);
        } else if (*ev) {
            const auto s = load_scores(ev_scores);
            std::vector<double> id, ood;
            split_scores(s, id, ood);
            if (id.empty() || ood.empty()) throw Error(ErrorCode::EmptyGroup, "eval needs both ID and OOD rows");
            const auto report = evaluate(id, ood, ev_tpr.value_or(config.target_tpr), s.method, s.source_tag);
            if (!ev_out.empty()) write_text_file(ev_out, report_to_json(report));
            std::cout << format_table(std::vector<EvalReport>{report});
        } else if (*pj) {
            const auto feats = load_features(pj_features);
            const auto classes = pj_classes.empty() ? config.projection_classes : parse_classes(pj_classes);
            std::array<Vector, 3> templates;
            if (!pj_params.empty()) {
                const auto params = load_params(pj_params);
                for (std::size_t k = 0; k < 3; ++k) {
                    if (classes[k] < 0 || static_cast<std::size_t>(classes[k]) >= params.class_count()) {
                        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(classes[k]) + " not in the head");
                    }
                    const auto row = params.head().weights.row(static_cast<std::size_t>(classes[k]));
                    templates[k] = Vector(std::vector<double>(row.begin(), row.end()));
                }
            } else {
                const auto model = fit_gaussians(feats.id_rows(), config.detector);
                for (std::size_t k = 0; k < 3; ++k) {
                    if (classes[k] < 0 || static_cast<std::size_t>(classes[k]) >= model.class_count()) {
                        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(classes[k]) + " not in features");
                    }
                    templates[k] = model.class_means[static_cast<std::size_t>(classes[k])];
                }
            }
            const auto proj = project_to_weight_plane(feats, templates, classes);
            write_text_file(pj_out, projection_to_text(proj));
            note(g, "separation ratio " + format_double(projection_separation_ratio(proj)));
        } else if (*dn) {
            const auto s = load_scores(dn_scores);
            std::vector<double> id, ood;
            split_scores(s, id, ood);
            write_text_file(dn_out, density_to_text(score_density(id, ood, dn_bins.value_or(config.bins), s.method)));
        } else if (*rx) {
            const auto data = rx_data.empty() ? generate(config.bench) : load_dataset(rx_data);
            const fs::path dir = run_directory(config);
            note(g, "run directory " + dir.string());
            write_text_file(dir / "config.json", config_to_json(config));
            RunOptions opt;
            opt.fold_output_dir = dir;
            opt.quiet = g.quiet;
            const auto result = run_experiment(config, data, opt);
            write_experiment_outputs(config, result, dir);
            std::cout << format_table(result.aggregate) << '\n' << accuracy_table(result);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
