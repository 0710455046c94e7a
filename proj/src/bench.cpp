#include "lsood/bench.hpp"

#include <algorithm>
#include <cmath>

#include "lsood/gaussian_ood.hpp"

namespace lsood {

void BenchConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw Error(ErrorCode::ConfigInvalid, "bench." + field + ": " + why);
    };
    if (input_dim == 0) fail("input_dim", "must be positive");
    if (class_count < 2) fail("class_count", "need at least 2 classes");
    if (background_dim + semantic_dim() > input_dim) {
        fail("input_dim", "background_dim + class_count + ood_class_count exceeds input_dim");
    }
    if (samples_per_class < 2) fail("samples_per_class", "need at least 2 samples per class");
    if (!(background_scale > 0.0)) fail("background_scale", "must be > 0");
    if (!(semantic_separation > 0.0)) fail("semantic_separation", "must be > 0");
    if (!(noise_scale > 0.0)) fail("noise_scale", "must be > 0");
}

std::vector<std::size_t> LabeledDataset::id_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kOodLabel) out.push_back(i);
    return out;
}

std::vector<std::size_t> LabeledDataset::ood_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == kOodLabel) out.push_back(i);
    return out;
}

Matrix random_orthonormal_columns(std::size_t dim, std::size_t count, Rng& rng) {
    if (count > dim) throw Error(ErrorCode::ConfigInvalid, "more directions than dimensions");
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        // Two Gram-Schmidt passes keep the columns orthogonal to rounding level.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& u : basis) {
                const double proj = dot(v, u);
                for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * u[i];
            }
        }
        const double n = norm(v);
        if (n < 1e-6) continue;
        for (double& x : v) x /= n;
        basis.push_back(std::move(v));
    }
    Matrix cols(dim, count);
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < dim; ++i) cols(i, c) = basis[c][i];
    return cols;
}

DirectionFrame make_frame(const BenchConfig& config) {
    Rng rng(mix_seed(config.seed, 0xF4A3E));
    const std::size_t dB = config.background_dim;
    const std::size_t dS = config.semantic_dim();
    const Matrix all = random_orthonormal_columns(config.input_dim, dB + dS, rng);
    DirectionFrame f{Matrix(config.input_dim, dB), Matrix(config.input_dim, dS)};
    for (std::size_t i = 0; i < config.input_dim; ++i) {
        for (std::size_t c = 0; c < dB; ++c) f.background(i, c) = all(i, c);
        for (std::size_t c = 0; c < dS; ++c) f.semantic(i, c) = all(i, dB + c);
    }
    return f;
}

LabeledDataset generate(const BenchConfig& config) {
    config.validate();
    const DirectionFrame frame = make_frame(config);
    const std::size_t d = config.input_dim;
    const std::size_t total_classes = config.semantic_dim();
    const std::size_t n_id = config.class_count * config.samples_per_class;
    const std::size_t n = n_id + config.ood_class_count * config.ood_samples_per_class;

    LabeledDataset ds;
    ds.config = config;
    ds.inputs = Matrix(n, d);
    ds.labels.assign(n, kOodLabel);
    ds.source_class.assign(n, 0);

    // Classes are generated from independent per-class streams, so the loop
    // can run in any order (or in parallel) with identical output.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(total_classes); ++k) {
        const auto cls = static_cast<std::size_t>(k);
        const bool is_id = cls < config.class_count;
        const std::size_t count = is_id ? config.samples_per_class : config.ood_samples_per_class;
        const std::size_t first =
            is_id ? cls * config.samples_per_class
                  : n_id + (cls - config.class_count) * config.ood_samples_per_class;
        Rng rng(mix_seed(config.seed, 0x1000 + cls));
        std::vector<double> b(config.background_dim);
        for (std::size_t s = 0; s < count; ++s) {
            const std::size_t r = first + s;
            auto x = ds.inputs.row(r);
            for (double& v : b) v = config.background_scale * rng.normal();
            for (std::size_t i = 0; i < d; ++i) {
                double v = config.semantic_separation * frame.semantic(i, cls);
                for (std::size_t j = 0; j < b.size(); ++j) v += frame.background(i, j) * b[j];
                x[i] = v;
            }
            for (std::size_t i = 0; i < d; ++i) x[i] += config.noise_scale * rng.normal();
            ds.labels[r] = is_id ? static_cast<int>(cls) : kOodLabel;
            ds.source_class[r] = static_cast<int>(cls);
        }
    }
    return ds;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                  std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::TooFewSamples, "k must be at least 2");
    if (n < k) {
        throw Error(ErrorCode::TooFewSamples,
                    std::to_string(n) + " samples cannot fill " + std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0xF01D));
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

LabeledTable dataset_to_table(const LabeledDataset& ds) {
    const BenchConfig& c = ds.config;
    LabeledTable t;
    t.kind = "dataset";
    t.attributes["classes"] = std::to_string(c.class_count);
    t.attributes["ood_classes"] = std::to_string(c.ood_class_count);
    t.attributes["background_dim"] = std::to_string(c.background_dim);
    t.attributes["samples_per_class"] = std::to_string(c.samples_per_class);
    t.attributes["ood_samples_per_class"] = std::to_string(c.ood_samples_per_class);
    t.attributes["background_scale"] = format_double(c.background_scale);
    t.attributes["semantic_separation"] = format_double(c.semantic_separation);
    t.attributes["noise_scale"] = format_double(c.noise_scale);
    t.attributes["seed"] = std::to_string(c.seed);
    t.attributes["tag"] = "synthetic";
    t.labels = ds.labels;
    t.values = ds.inputs;
    return t;
}

LabeledDataset dataset_from_table(const LabeledTable& table) {
    if (table.kind != "dataset") {
        throw Error(ErrorCode::ParseError, "expected kind=dataset, got '" + table.kind + "'");
    }
    auto attr = [&](const std::string& key) -> const std::string& {
        const auto it = table.attributes.find(key);
        if (it == table.attributes.end()) throw Error(ErrorCode::ParseError, "dataset lacks " + key);
        return it->second;
    };
    LabeledDataset ds;
    BenchConfig& c = ds.config;
    c.input_dim = table.values.cols();
    c.class_count = static_cast<std::size_t>(parse_integer(attr("classes")));
    c.ood_class_count = static_cast<std::size_t>(parse_integer(attr("ood_classes")));
    c.background_dim = static_cast<std::size_t>(parse_integer(attr("background_dim")));
    c.samples_per_class = static_cast<std::size_t>(parse_integer(attr("samples_per_class")));
    c.ood_samples_per_class = static_cast<std::size_t>(parse_integer(attr("ood_samples_per_class")));
    c.background_scale = parse_double(attr("background_scale"));
    c.semantic_separation = parse_double(attr("semantic_separation"));
    c.noise_scale = parse_double(attr("noise_scale"));
    c.seed = static_cast<std::uint64_t>(parse_integer(attr("seed")));
    ds.inputs = table.values;
    ds.labels = table.labels;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        const int y = ds.labels[i];
        if (y != kOodLabel && (y < 0 || static_cast<std::size_t>(y) >= c.class_count)) {
            throw Error(ErrorCode::LabelOutOfRange, "dataset row " + std::to_string(i));
        }
    }
    ds.source_class.assign(ds.labels.size(), kOodLabel);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) ds.source_class[i] = ds.labels[i];
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    write_text_file(path, table_to_text(dataset_to_table(ds)));
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    return dataset_from_table(table_from_text(read_text_file(path)));
}

}  // namespace lsood
