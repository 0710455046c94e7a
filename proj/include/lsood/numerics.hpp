#pragma once

// Dense 64-bit linear algebra and a seedable random stream.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "lsood/error.hpp"

namespace lsood {

class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t dim, double fill = 0.0);
    explicit Vector(std::vector<double> data);
    Vector(std::initializer_list<double> values);

    std::size_t dim() const noexcept { return data_.size(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    std::span<const double> span() const noexcept { return data_; }
    std::span<double> span() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool operator==(const Vector&) const = default;

private:
    std::vector<double> data_;
};

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, const Vector& x);
Vector operator-(const Vector& a, const Vector& b);
Vector operator+(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& v);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double trace(const Matrix& m);

/// Lower-triangular L with L * L^T equal to the factored matrix.
class CholeskyFactor {
public:
    CholeskyFactor() = default;
    /// Takes an already-computed factor; validates shape and a positive diagonal.
    explicit CholeskyFactor(Matrix lower);

    std::size_t dim() const noexcept { return lower_.rows(); }
    const Matrix& lower() const noexcept { return lower_; }

    Matrix reconstruct() const;

private:
    Matrix lower_;
};

CholeskyFactor cholesky(const Matrix& m);

/// Solves L y = b in place; L lower triangular.
void forward_substitute(const Matrix& lower, std::span<double> b);
/// Solves L^T x = y in place.
void backward_substitute_transposed(const Matrix& lower, std::span<double> y);

Vector solve_spd(const CholeskyFactor& f, const Vector& b);

struct PlaneBasis {
    Vector u1;
    Vector u2;
};

/// Orthonormal basis of the plane through a, b, c; u1 points from a toward b.
PlaneBasis orthonormal_plane_basis(const Vector& a, const Vector& b, const Vector& c);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept;
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// splitmix64 seeding into a xoshiro256** stream. Output is identical across
/// platforms; normals come from a hand-rolled Box-Muller so no libstdc++
/// distribution is involved.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent child seed; used for folds, classes and models.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lsood
