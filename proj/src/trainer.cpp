#include "lsood/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace lsood {

using nlohmann::json;

ClassifierParams ClassifierParams::zeros(std::vector<std::size_t> layer_sizes) {
    if (layer_sizes.size() < 3) {
        throw Error(ErrorCode::ConfigInvalid,
                    "need at least input, penultimate and output layer sizes");
    }
    ClassifierParams p;
    p.layer_sizes = std::move(layer_sizes);
    for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
        if (p.layer_sizes[l] == 0 || p.layer_sizes[l + 1] == 0) {
            throw Error(ErrorCode::ConfigInvalid, "layer sizes must be positive");
        }
        p.layers.push_back({Matrix(p.layer_sizes[l + 1], p.layer_sizes[l]),
                            Vector(p.layer_sizes[l + 1])});
    }
    return p;
}

std::size_t ClassifierParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.data().size() + layer.bias.dim();
    return n;
}

void TrainConfig::validate() const {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw Error(ErrorCode::EpsilonOutOfRange, "epsilon must be in [0, 1)");
    }
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "learning_rate must be > 0");
    if (batch_size == 0) throw Error(ErrorCode::ConfigInvalid, "batch_size must be > 0");
    if (penultimate_dim == 0) throw Error(ErrorCode::ConfigInvalid, "penultimate_dim must be > 0");
    for (auto h : hidden_sizes)
        if (h == 0) throw Error(ErrorCode::ConfigInvalid, "hidden sizes must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
        throw Error(ErrorCode::ConfigInvalid, "optimizer constants out of range");
    }
    if (early_stop_patience > 0 && !(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "holdout_fraction must be in (0, 1)");
    }
}

std::string_view to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

LrSchedule parse_schedule(std::string_view name) {
    if (name == "cosine") return LrSchedule::Cosine;
    if (name == "constant") return LrSchedule::Constant;
    throw Error(ErrorCode::ConfigInvalid, "unknown schedule '" + std::string(name) + "'");
}

Matrix smooth_targets(std::span<const int> labels, std::size_t class_count, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw Error(ErrorCode::EpsilonOutOfRange, "epsilon " + std::to_string(epsilon));
    }
    if (class_count == 0) throw Error(ErrorCode::LabelOutOfRange, "class_count is zero");
    const double off = epsilon / static_cast<double>(class_count);
    const double on = (1.0 - epsilon) + off;
    Matrix t(labels.size(), class_count, off);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
            throw Error(ErrorCode::LabelOutOfRange,
                        "label " + std::to_string(labels[i]) + " at row " + std::to_string(i));
        }
        t(i, static_cast<std::size_t>(labels[i])) = on;
    }
    return t;
}

namespace {

// Activations of every layer for a batch; acts[0] is the input.
struct BatchActivations {
    std::vector<Matrix> acts;
};

void dense_forward(const DenseLayer& layer, const Matrix& in, Matrix& out, bool relu) {
    const std::size_t n = in.rows();
    const std::size_t fan_out = layer.weights.rows();
    out = Matrix(n, fan_out);
    for (std::size_t b = 0; b < n; ++b) {
        const auto a = in.row(b);
        auto z = out.row(b);
        for (std::size_t o = 0; o < fan_out; ++o) {
            const auto w = layer.weights.row(o);
            double s = layer.bias[o];
            for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i];
            z[o] = relu ? std::max(s, 0.0) : s;
        }
    }
}

BatchActivations forward_all(const ClassifierParams& params, const Matrix& inputs) {
    if (inputs.cols() != params.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "input dim " + std::to_string(inputs.cols()) + " vs network input " +
                        std::to_string(params.input_dim()));
    }
    BatchActivations fa;
    fa.acts.resize(params.layers.size() + 1);
    fa.acts[0] = inputs;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const bool relu = l + 1 < params.layers.size();
        dense_forward(params.layers[l], fa.acts[l], fa.acts[l + 1], relu);
    }
    return fa;
}

void require_targets(const ClassifierParams& params, const Matrix& inputs, const Matrix& targets) {
    if (targets.rows() != inputs.rows() || targets.cols() != params.class_count()) {
        throw Error(ErrorCode::DimensionMismatch, "targets shape does not match batch");
    }
    if (inputs.rows() == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
}

// Mean cross entropy; fills dlogits with d(loss)/d(logits) when non-null.
double soft_cross_entropy(const Matrix& logits, const Matrix& targets, Matrix* dlogits) {
    const std::size_t n = logits.rows();
    const std::size_t C = logits.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    std::vector<double> prob(C);
    for (std::size_t b = 0; b < n; ++b) {
        const auto l = logits.row(b);
        const auto y = targets.row(b);
        const double m = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            prob[c] = std::exp(l[c] - m);
            z += prob[c];
        }
        const double lse = m + std::log(z);
        double y_sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            total += y[c] * (lse - l[c]);
            y_sum += y[c];
        }
        if (dlogits != nullptr) {
            auto d = dlogits->row(b);
            for (std::size_t c = 0; c < C; ++c) d[c] = (prob[c] / z * y_sum - y[c]) * inv_n;
        }
    }
    return total * inv_n;
}

}  // namespace

ForwardResult forward(const ClassifierParams& params, std::span<const double> x) {
    Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
    const auto fa = forward_all(params, in);
    const auto& pen = fa.acts[fa.acts.size() - 2];
    const auto& out = fa.acts.back();
    return {Vector(std::vector<double>(out.data().begin(), out.data().end())),
            Vector(std::vector<double>(pen.data().begin(), pen.data().end()))};
}

Matrix logits_batch(const ClassifierParams& params, const Matrix& inputs) {
    return std::move(forward_all(params, inputs).acts.back());
}

Matrix penultimate_batch(const ClassifierParams& params, const Matrix& inputs) {
    auto fa = forward_all(params, inputs);
    return std::move(fa.acts[fa.acts.size() - 2]);
}

double loss_only(const ClassifierParams& params, const Matrix& inputs, const Matrix& targets) {
    require_targets(params, inputs, targets);
    const auto fa = forward_all(params, inputs);
    return soft_cross_entropy(fa.acts.back(), targets, nullptr);
}

LossAndGradient loss_and_gradient(const ClassifierParams& params, const Matrix& inputs,
                                  const Matrix& targets) {
    require_targets(params, inputs, targets);
    const auto fa = forward_all(params, inputs);
    const std::size_t n = inputs.rows();

    LossAndGradient out;
    out.gradient = ClassifierParams::zeros(params.layer_sizes);
    Matrix delta(n, params.class_count());
    out.loss = soft_cross_entropy(fa.acts.back(), targets, &delta);

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const Matrix& a_in = fa.acts[l];
        const DenseLayer& layer = params.layers[l];
        DenseLayer& g = out.gradient.layers[l];
        const std::size_t fan_out = layer.weights.rows();
        const std::size_t fan_in = layer.weights.cols();
        for (std::size_t b = 0; b < n; ++b) {
            const auto d = delta.row(b);
            const auto a = a_in.row(b);
            for (std::size_t o = 0; o < fan_out; ++o) {
                if (d[o] == 0.0) continue;
                g.bias[o] += d[o];
                auto gw = g.weights.row(o);
                for (std::size_t i = 0; i < fan_in; ++i) gw[i] += d[o] * a[i];
            }
        }
        if (l == 0) break;
        Matrix prev(n, fan_in);
        for (std::size_t b = 0; b < n; ++b) {
            const auto d = delta.row(b);
            auto pd = prev.row(b);
            for (std::size_t o = 0; o < fan_out; ++o) {
                if (d[o] == 0.0) continue;
                const auto w = layer.weights.row(o);
                for (std::size_t i = 0; i < fan_in; ++i) pd[i] += d[o] * w[i];
            }
            // ReLU derivative, taken as 0 at the kink.
            const auto a = a_in.row(b);
            for (std::size_t i = 0; i < fan_in; ++i)
                if (a[i] <= 0.0) pd[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return out;
}

ClassifierParams init_params(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    auto p = ClassifierParams::zeros(std::move(layer_sizes));
    Rng rng(seed);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& w = p.layers[l].weights;
        const double fan_in = static_cast<double>(w.cols());
        // He-uniform for ReLU layers, LeCun-uniform for the linear head.
        const bool is_head = l + 1 == p.layers.size();
        const double limit = std::sqrt((is_head ? 3.0 : 6.0) / fan_in);
        for (double& v : w.data()) v = rng.uniform(-limit, limit);
    }
    return p;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::size_t step = 0;

    explicit AdamState(const ClassifierParams& p) {
        for (const auto& layer : p.layers) {
            m.emplace_back(layer.weights.data().size() + layer.bias.dim(), 0.0);
            v.emplace_back(layer.weights.data().size() + layer.bias.dim(), 0.0);
        }
    }

    void apply(ClassifierParams& p, const ClassifierParams& g, double lr, const TrainConfig& cfg) {
        ++step;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& m_l = m[l];
            auto& v_l = v[l];
            std::size_t k = 0;
            auto update = [&](double& param, double grad) {
                m_l[k] = cfg.beta1 * m_l[k] + (1.0 - cfg.beta1) * grad;
                v_l[k] = cfg.beta2 * v_l[k] + (1.0 - cfg.beta2) * grad * grad;
                const double mhat = m_l[k] / c1;
                const double vhat = v_l[k] / c2;
                param -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
                ++k;
            };
            auto pw = p.layers[l].weights.data();
            const auto gw = g.layers[l].weights.data();
            for (std::size_t i = 0; i < pw.size(); ++i) update(pw[i], gw[i]);
            auto pb = p.layers[l].bias.span();
            const auto gb = g.layers[l].bias.span();
            for (std::size_t i = 0; i < pb.size(); ++i) update(pb[i], gb[i]);
        }
    }
};

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

bool all_finite(const ClassifierParams& p) {
    for (const auto& layer : p.layers) {
        for (double v : layer.weights.data())
            if (!std::isfinite(v)) return false;
        for (double v : layer.bias.span())
            if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace

TrainResult train_with_history(const Matrix& inputs, std::span<const int> labels,
                               std::size_t class_count, const TrainConfig& config) {
    config.validate();
    if (labels.size() != inputs.rows()) {
        throw Error(ErrorCode::LengthMismatch, "inputs and labels differ in length");
    }
    if (inputs.rows() == 0) throw Error(ErrorCode::EmptyInput, "empty training set");
    const Matrix all_targets = smooth_targets(labels, class_count, config.epsilon);

    std::vector<std::size_t> sizes{inputs.cols()};
    sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    sizes.push_back(config.penultimate_dim);
    sizes.push_back(class_count);

    Rng rng(mix_seed(config.seed, 0x7261696eULL));
    TrainResult result;
    result.params = init_params(sizes, mix_seed(config.seed, 0x696e6974ULL));

    std::vector<std::size_t> order(inputs.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::size_t> holdout;
    if (config.early_stop_patience > 0) {
        rng.shuffle(order);
        const auto n_hold = std::max<std::size_t>(
            1, static_cast<std::size_t>(config.holdout_fraction * static_cast<double>(order.size())));
        if (n_hold >= order.size()) throw Error(ErrorCode::TooFewSamples, "holdout leaves no training rows");
        holdout.assign(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());
        order.resize(order.size() - n_hold);
        std::sort(order.begin(), order.end());
    }
    const Matrix train_x = gather_rows(inputs, order);
    const Matrix train_y = gather_rows(all_targets, order);
    const Matrix hold_x = holdout.empty() ? Matrix() : gather_rows(inputs, holdout);
    const Matrix hold_y = holdout.empty() ? Matrix() : gather_rows(all_targets, holdout);

    result.initial_loss = loss_only(result.params, train_x, train_y);

    AdamState adam(result.params);
    const std::size_t n = train_x.rows();
    const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = std::max<std::size_t>(1, batches_per_epoch * config.epochs);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    ClassifierParams best = result.params;
    double best_holdout = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(perm);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> idx(perm.data() + start, end - start);
            const auto g = loss_and_gradient(result.params, gather_rows(train_x, idx),
                                             gather_rows(train_y, idx));
            if (!std::isfinite(g.loss)) {
                throw Error(ErrorCode::NonFiniteLoss,
                            "loss diverged during epoch " + std::to_string(epoch));
            }
            double lr = config.learning_rate;
            if (config.schedule == LrSchedule::Cosine) {
                const double t = static_cast<double>(adam.step) / static_cast<double>(total_steps);
                lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * t));
            }
            adam.apply(result.params, g.gradient, lr, config);
        }
        if (!all_finite(result.params)) {
            throw Error(ErrorCode::NonFiniteLoss,
                        "parameters became non-finite in epoch " + std::to_string(epoch));
        }
        result.epoch_losses.push_back(loss_only(result.params, train_x, train_y));

        if (config.early_stop_patience > 0) {
            const double h = loss_only(result.params, hold_x, hold_y);
            if (h < best_holdout) {
                best_holdout = h;
                best = result.params;
                result.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= config.early_stop_patience) {
                break;
            }
        }
    }
    if (config.early_stop_patience > 0) result.params = std::move(best);
    return result;
}

ClassifierParams train(const Matrix& inputs, std::span<const int> labels,
                       std::size_t class_count, const TrainConfig& config) {
    return train_with_history(inputs, labels, class_count, config).params;
}

FeatureSet extract_features(const ClassifierParams& params, const Matrix& inputs,
                            std::span<const int> labels, std::string source_tag) {
    if (labels.size() != inputs.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "inputs and labels differ in length");
    }
    FeatureSet fs;
    fs.features = penultimate_batch(params, inputs);
    fs.labels.assign(labels.begin(), labels.end());
    fs.class_count = params.class_count();
    fs.source_tag = std::move(source_tag);
    return fs;
}

std::vector<int> predict(const ClassifierParams& params, const Matrix& inputs) {
    const Matrix logits = logits_batch(params, inputs);
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto r = logits.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

namespace {

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

std::vector<double> unhex(const json& arr) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& s : arr) out.push_back(parse_double(s.get<std::string>()));
    return out;
}

json hex_array(std::span<const double> values) {
    json a = json::array();
    for (double v : values) a.push_back(hex(v));
    return a;
}

}  // namespace

std::string params_to_json(const ClassifierParams& params) {
    json j;
    j["format"] = "lsood-classifier";
    j["version"] = 1;
    j["encoding"] = "hexfloat";
    j["layer_sizes"] = params.layer_sizes;
    json layers = json::array();
    for (const auto& layer : params.layers) {
        layers.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"weights", hex_array(layer.weights.data())},
                          {"bias", hex_array(layer.bias.span())}});
    }
    j["layers"] = std::move(layers);
    return j.dump(1) + "\n";
}

ClassifierParams params_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "lsood-classifier") {
            throw Error(ErrorCode::ParseError, "not a classifier parameter file");
        }
        auto p = ClassifierParams::zeros(j.at("layer_sizes").get<std::vector<std::size_t>>());
        const auto& layers = j.at("layers");
        if (layers.size() != p.layers.size()) {
            throw Error(ErrorCode::ParseError, "layer count disagrees with layer_sizes");
        }
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& dst = p.layers[l];
            auto w = unhex(layers[l].at("weights"));
            auto b = unhex(layers[l].at("bias"));
            if (w.size() != dst.weights.data().size() || b.size() != dst.bias.dim()) {
                throw Error(ErrorCode::ParseError, "layer " + std::to_string(l) + " has wrong shape");
            }
            dst.weights = Matrix(dst.weights.rows(), dst.weights.cols(), std::move(w));
            dst.bias = Vector(std::move(b));
        }
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

void save_params(const ClassifierParams& params, const std::filesystem::path& path) {
    write_text_file(path, params_to_json(params));
}

ClassifierParams load_params(const std::filesystem::path& path) {
    return params_from_json(read_text_file(path));
}

}  // namespace lsood
