#include "lsood/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace lsood {

namespace {

void require_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite entry in constructor input");
        }
    }
}

constexpr double kSymmetryTol = 1e-10;
constexpr double kCollinearSineTol = 1e-8;

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Vector::Vector(std::size_t dim, double fill) : data_(dim, fill) {
    require_finite(data_);
}

Vector::Vector(std::vector<double> data) : data_(std::move(data)) {
    require_finite(data_);
}

Vector::Vector(std::initializer_list<double> values) : data_(values) {
    require_finite(data_);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    require_finite(data_);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorCode::DimensionMismatch,
                    "matrix data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
    require_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw Error(ErrorCode::DimensionMismatch, "ragged matrix initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "matrix product inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

Vector operator*(const Matrix& a, const Vector& x) {
    if (a.cols() != x.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "matrix-vector dimensions differ");
    }
    Vector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x.span());
    return out;
}

Vector operator-(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "vector subtraction");
    Vector out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector operator+(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "vector addition");
    Vector out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector operator*(double s, const Vector& v) {
    Vector out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = s * v[i];
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "dot product");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double trace(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
    return t;
}

CholeskyFactor::CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {
    if (lower_.rows() != lower_.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "Cholesky factor must be square");
    }
    for (std::size_t i = 0; i < lower_.rows(); ++i) {
        if (!(lower_(i, i) > 0.0)) {
            throw Error(ErrorCode::NotPositiveDefinite, "factor diagonal must be positive");
        }
        for (std::size_t j = i + 1; j < lower_.cols(); ++j) {
            if (lower_(i, j) != 0.0) {
                throw Error(ErrorCode::NotSymmetric, "factor must be lower triangular");
            }
        }
    }
}

Matrix CholeskyFactor::reconstruct() const {
    const std::size_t n = dim();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= j; ++k) s += lower_(i, k) * lower_(j, k);
            m(i, j) = s;
            m(j, i) = s;
        }
    }
    return m;
}

CholeskyFactor cholesky(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
    }
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double scale = std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
            if (std::abs(m(i, j) - m(j, i)) > kSymmetryTol * scale) {
                throw Error(ErrorCode::NotSymmetric,
                            "entries (" + std::to_string(i) + "," + std::to_string(j) +
                                ") differ from their transpose");
            }
        }
    }

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        // Relative pivot floor: a pivot that collapses to rounding noise is rank deficiency.
        if (!(diag > 1e-14 * std::max(std::abs(m(j, j)), 1e-300))) {
            throw Error(ErrorCode::NotPositiveDefinite,
                        "non-positive pivot at column " + std::to_string(j));
        }
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return CholeskyFactor(std::move(l));
}

void forward_substitute(const Matrix& lower, std::span<double> b) {
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        const double* li = lower.row(i).data();
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
        b[i] = s / li[i];
    }
}

void backward_substitute_transposed(const Matrix& lower, std::span<double> y) {
    const std::size_t n = lower.rows();
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * y[k];
        y[ii] = s / lower(ii, ii);
    }
}

Vector solve_spd(const CholeskyFactor& f, const Vector& b) {
    if (f.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "factor dim " + std::to_string(f.dim()) + " vs rhs dim " +
                        std::to_string(b.dim()));
    }
    Vector x = b;
    forward_substitute(f.lower(), x.span());
    backward_substitute_transposed(f.lower(), x.span());
    return x;
}

PlaneBasis orthonormal_plane_basis(const Vector& a, const Vector& b, const Vector& c) {
    if (a.dim() != b.dim() || a.dim() != c.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "plane anchors differ in dimension");
    }
    Vector d1 = b - a;
    Vector d2 = c - a;
    const double n1 = norm(d1.span());
    const double n2 = norm(d2.span());
    if (n1 == 0.0 || n2 == 0.0) {
        throw Error(ErrorCode::DegeneratePlane, "zero-length difference vector");
    }
    Vector u1 = (1.0 / n1) * d1;
    Vector w = d2 - dot(d2.span(), u1.span()) * u1;
    const double wn = norm(w.span());
    // wn / n2 is the sine of the angle between the two difference vectors.
    if (wn / n2 < kCollinearSineTol) {
        throw Error(ErrorCode::DegeneratePlane, "difference vectors are collinear");
    }
    Vector u2 = (1.0 / wn) * w;
    // One re-orthogonalisation pass keeps <u1,u2> at rounding level for nearly collinear input.
    const double leak = dot(u2.span(), u1.span());
    u2 = u2 - leak * u1;
    u2 = (1.0 / norm(u2.span())) * u2;
    return {std::move(u1), std::move(u2)};
}

void CompensatedSum::add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        comp_ += (sum_ - t) + x;
    } else {
        comp_ += (x - t) + sum_;
    }
    sum_ = t;
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& s : s_) s = splitmix64(state);
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection; unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (stream * 0xD1B54A32D192ED03ULL);
    splitmix64(state);
    return splitmix64(state);
}

}  // namespace lsood
