#pragma once

// Synthetic near-OOD benchmark. Every sample is
//
//   x = B b + delta * s_k + noise
//
// where the columns of B span a background subspace shared by every class
// (in- and out-of-distribution alike), s_k is a unit semantic direction owned
// by class k, and B and all s_k are mutually orthonormal. OOD classes own
// semantic directions of their own, so they overlap the in-distribution data
// in background statistics and differ only in semantics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lsood/numerics.hpp"
#include "lsood/table_io.hpp"

namespace lsood {

struct BenchConfig {
    std::size_t input_dim = 32;
    std::size_t background_dim = 8;
    std::size_t class_count = 8;
    std::size_t ood_class_count = 4;
    std::size_t samples_per_class = 500;
    std::size_t ood_samples_per_class = 250;
    double background_scale = 2.0;
    double semantic_separation = 1.5;
    double noise_scale = 0.5;
    std::uint64_t seed = 0;

    std::size_t semantic_dim() const { return class_count + ood_class_count; }
    void validate() const;
    bool operator==(const BenchConfig&) const = default;
};

struct DirectionFrame {
    Matrix background;  // d x dB, orthonormal columns
    Matrix semantic;    // d x (C + ood classes), orthonormal columns, orthogonal to background
};

struct LabeledDataset {
    Matrix inputs;            // N x d
    std::vector<int> labels;  // class index or kOodLabel
    BenchConfig config;
    /// Generating class per row, OOD classes numbered C.. C + ood - 1. Not persisted.
    std::vector<int> source_class;

    std::size_t size() const noexcept { return inputs.rows(); }
    std::vector<std::size_t> id_indices() const;
    std::vector<std::size_t> ood_indices() const;
};

/// Gram-Schmidt on seeded Gaussian vectors; returns d x count orthonormal columns.
Matrix random_orthonormal_columns(std::size_t dim, std::size_t count, Rng& rng);

DirectionFrame make_frame(const BenchConfig& config);

LabeledDataset generate(const BenchConfig& config);

/// Partitions 0..n-1 into k shuffled folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

LabeledTable dataset_to_table(const LabeledDataset& ds);
LabeledDataset dataset_from_table(const LabeledTable& table);
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace lsood
