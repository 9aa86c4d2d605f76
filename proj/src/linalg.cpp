#include "photodp/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace photodp {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

// Fixed block height for the deterministic row partition of batched
// products. Each block is computed independently over the full inner
// dimension, so results are identical for any thread count.
constexpr std::size_t kRowBlock = 64;

ConstMap map_of(const Matrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

} // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::fork(std::uint64_t tag) const {
    return Rng(mix64(seed_ ^ mix64(tag + 0x9e3779b97f4a7c15ULL)));
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string(what) + ": non-finite value produced");
        }
    }
}

Vector matmul(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) {
        throw std::invalid_argument("matmul: dimension mismatch");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.data() + i * a.cols();
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

Vector hadamard(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("hadamard: length mismatch");
    }
    Vector w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] * v[i];
    return w;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        double* row = m.data() + i * v.size();
        for (std::size_t j = 0; j < v.size(); ++j) row[j] = u[i] * v[j];
    }
    return m;
}

Vector gaussian(Rng& rng, std::size_t len, double mean, double stddev) {
    if (stddev < 0.0) throw std::invalid_argument("gaussian: negative stddev");
    Vector v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = mean + stddev * rng.normal();
    return v;
}

double l2_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: length mismatch");
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) {
        throw std::invalid_argument("cosine: undefined for zero vector");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    double c = dot / (nu * nv);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

namespace {

template <typename Body>
void for_each_row_block(std::size_t rows, Body&& body) {
    const std::size_t nblocks = (rows + kRowBlock - 1) / kRowBlock;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
        const std::size_t r0 = static_cast<std::size_t>(b) * kRowBlock;
        const std::size_t r1 = std::min(rows, r0 + kRowBlock);
        body(r0, r1);
    }
}

} // namespace

Matrix gemm(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("gemm: dimension mismatch");
    Matrix c(a.rows(), b.cols());
    auto A = map_of(a), B = map_of(b);
    Map C(c.data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()));
    for_each_row_block(a.rows(), [&](std::size_t r0, std::size_t r1) {
        const auto n = static_cast<Eigen::Index>(r1 - r0);
        C.middleRows(static_cast<Eigen::Index>(r0), n).noalias() =
            A.middleRows(static_cast<Eigen::Index>(r0), n) * B;
    });
    return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("gemm_nt: dimension mismatch");
    Matrix c(a.rows(), b.rows());
    auto A = map_of(a), B = map_of(b);
    Map C(c.data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()));
    for_each_row_block(a.rows(), [&](std::size_t r0, std::size_t r1) {
        const auto n = static_cast<Eigen::Index>(r1 - r0);
        C.middleRows(static_cast<Eigen::Index>(r0), n).noalias() =
            A.middleRows(static_cast<Eigen::Index>(r0), n) * B.transpose();
    });
    return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("gemm_tn: dimension mismatch");
    Matrix c(a.cols(), b.cols());
    auto A = map_of(a), B = map_of(b);
    Map C(c.data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()));
    for_each_row_block(a.cols(), [&](std::size_t r0, std::size_t r1) {
        const auto n = static_cast<Eigen::Index>(r1 - r0);
        C.middleRows(static_cast<Eigen::Index>(r0), n).noalias() =
            A.middleCols(static_cast<Eigen::Index>(r0), n).transpose() * B;
    });
    return c;
}

Matrix gemm_leftcols(const Matrix& a, const Matrix& b, std::size_t n) {
    if (a.cols() != b.rows()) throw std::invalid_argument("gemm_leftcols: dimension mismatch");
    if (n > b.cols()) throw std::invalid_argument("gemm_leftcols: column count out of range");
    Matrix c(a.rows(), n);
    auto A = map_of(a), B = map_of(b);
    Map C(c.data(), static_cast<Eigen::Index>(c.rows()), static_cast<Eigen::Index>(c.cols()));
    for_each_row_block(a.rows(), [&](std::size_t r0, std::size_t r1) {
        const auto nr = static_cast<Eigen::Index>(r1 - r0);
        C.middleRows(static_cast<Eigen::Index>(r0), nr).noalias() =
            A.middleRows(static_cast<Eigen::Index>(r0), nr) *
            B.leftCols(static_cast<Eigen::Index>(n));
    });
    return c;
}

} // namespace photodp
