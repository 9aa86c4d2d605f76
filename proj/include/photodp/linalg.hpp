#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace photodp {

/// Dense real vector. All public operations leave every entry finite.
using Vector = std::vector<double>;

/// Dense row-major matrix of 64-bit floats.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    Vector row_vector(std::size_t i) const {
        return Vector(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                      data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Deterministic seeded random stream: identical seed, identical samples.
/// Instances are single-owner; never share one across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform draw strictly inside (0, 1).
    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (stdlib distributions are not
    /// bit-stable across implementations).
    double normal();

    /// Derive an independent stream; tag disambiguates siblings.
    Rng fork(std::uint64_t tag) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer, used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

// Core per-sample operations. Accumulation in matmul is row-major,
// left-to-right, so results are reproducible bit-for-bit.
Vector matmul(const Matrix& a, const Vector& x);
Vector hadamard(const Vector& u, const Vector& v);
Matrix outer(const Vector& u, const Vector& v);
Vector gaussian(Rng& rng, std::size_t len, double mean, double stddev);
double l2_norm(const Vector& v);
double cosine(const Vector& u, const Vector& v);

// Batched kernels for minibatch math. Work is partitioned into fixed
// row blocks so results do not depend on the number of threads.
Matrix gemm(const Matrix& a, const Matrix& b);                         // A * B
Matrix gemm_nt(const Matrix& a, const Matrix& b);                      // A * B^T
Matrix gemm_tn(const Matrix& a, const Matrix& b);                      // A^T * B
Matrix gemm_leftcols(const Matrix& a, const Matrix& b, std::size_t n); // A * B[:, :n]

void check_finite(std::span<const double> values, const char* what);

} // namespace photodp
