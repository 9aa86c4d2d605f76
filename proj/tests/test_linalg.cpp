#include <doctest.h>

#include <stdexcept>

#include "photodp/linalg.hpp"

#include <cmath>

using namespace photodp;

namespace {

Vector naive_matvec(const Matrix& a, const Vector& x) {
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
    }
    return y;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Vector random_vector(Rng& rng, std::size_t n) {
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double rel_err(double got, double want) {
    const double scale = std::max({std::fabs(got), std::fabs(want), 1e-300});
    return std::fabs(got - want) / scale;
}

} // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    const Matrix id = Matrix::identity(2);
    CHECK(matmul(id, {3.0, 4.0}) == Vector{3.0, 4.0});
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(matmul(a, {1.0, 1.0}) == Vector{3.0, 7.0});
    CHECK_THROWS_AS(matmul(a, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("matmul matches the naive triple loop on random instances") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 1 + rng.next_u64() % 8;
        const std::size_t c = 1 + rng.next_u64() % 8;
        const Matrix a = random_matrix(rng, r, c);
        const Vector x = random_vector(rng, c);
        const Vector got = matmul(a, x);
        const Vector want = naive_matvec(a, x);
        for (std::size_t i = 0; i < r; ++i) CHECK(rel_err(got[i], want[i]) < 1e-12);
    }
}

TEST_CASE("hadamard") {
    CHECK(hadamard({1, 2}, {3, 4}) == Vector{3, 8});
    CHECK(hadamard({5, -2}, {0, 0}) == Vector{0, 0});
    CHECK(hadamard({5, -2}, {1, 1}) == Vector{5, -2});
    CHECK_THROWS_AS(hadamard({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("outer product") {
    const Matrix m = outer({1, 2}, {3, 4});
    CHECK(m == Matrix::from_rows({{3, 4}, {6, 8}}));
    CHECK(outer({0, 0}, {1, 2}) == Matrix(2, 2, 0.0));
}

TEST_CASE("outer product has rank at most one") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector u = random_vector(rng, 5);
        const Vector v = random_vector(rng, 4);
        const Matrix m = outer(u, v);
        // every 2x2 minor vanishes
        for (std::size_t i = 0; i + 1 < m.rows(); ++i) {
            for (std::size_t j = 0; j + 1 < m.cols(); ++j) {
                const double det = m(i, j) * m(i + 1, j + 1) - m(i, j + 1) * m(i + 1, j);
                CHECK(std::fabs(det) < 1e-12);
            }
        }
    }
}

TEST_CASE("gaussian sampling") {
    Rng rng(5);
    const Vector constant = gaussian(rng, 16, 2.5, 0.0);
    for (double v : constant) CHECK(v == 2.5);
    CHECK_THROWS_AS(gaussian(rng, 4, 0.0, -1.0), std::invalid_argument);

    Rng a(99), b(99);
    CHECK(gaussian(a, 64, 0.0, 1.0) == gaussian(b, 64, 0.0, 1.0));
}

TEST_CASE("gaussian moments over 1e6 samples") {
    Rng rng(1234);
    const std::size_t n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double stddev = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
    CHECK(std::fabs(mean) < 4e-3);      // 4/sqrt(n)
    CHECK(std::fabs(stddev - 1.0) < 5e-3);
}

TEST_CASE("distinct seeds give distinct streams") {
    Rng a(1), b(2);
    const Vector va = gaussian(a, 32, 0.0, 1.0);
    const Vector vb = gaussian(b, 32, 0.0, 1.0);
    CHECK(va != vb);

    Rng parent(77);
    Rng fork_a = parent.fork(1);
    Rng fork_b = parent.fork(2);
    Rng fork_a_again = parent.fork(1);
    const Vector sa = gaussian(fork_a, 8, 0, 1);
    CHECK(sa != gaussian(fork_b, 8, 0, 1));
    CHECK(sa == gaussian(fork_a_again, 8, 0, 1));
}

TEST_CASE("norms and cosine") {
    CHECK(l2_norm({3, 4}) == doctest::Approx(5.0));
    const Vector v{0.3, -1.2, 4.0};
    CHECK(cosine(v, v) == doctest::Approx(1.0));
    CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(cosine({0, 0}, {1, 0}), std::invalid_argument);
}

TEST_CASE("batched gemm kernels agree with naive products") {
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 1 + rng.next_u64() % 70; // crosses the block boundary
        const std::size_t k = 1 + rng.next_u64() % 9;
        const std::size_t n = 1 + rng.next_u64() % 9;
        const Matrix a = random_matrix(rng, m, k);
        const Matrix b = random_matrix(rng, k, n);
        const Matrix c = gemm(a, b);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double want = 0.0;
                for (std::size_t p = 0; p < k; ++p) want += a(i, p) * b(p, j);
                CHECK(rel_err(c(i, j), want) < 1e-12);
            }
        }

        const Matrix bt = random_matrix(rng, n, k);
        const Matrix c2 = gemm_nt(a, bt);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double want = 0.0;
                for (std::size_t p = 0; p < k; ++p) want += a(i, p) * bt(j, p);
                CHECK(rel_err(c2(i, j), want) < 1e-12);
            }
        }

        const Matrix at = random_matrix(rng, k, m);
        const Matrix c3 = gemm_tn(at, b);
        REQUIRE(c3.rows() == m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double want = 0.0;
                for (std::size_t p = 0; p < k; ++p) want += at(p, i) * b(p, j);
                CHECK(rel_err(c3(i, j), want) < 1e-12);
            }
        }
    }
}

TEST_CASE("gemm_leftcols multiplies against a column prefix") {
    Rng rng(11);
    const Matrix a = random_matrix(rng, 5, 6);
    const Matrix b = random_matrix(rng, 6, 8);
    const Matrix c = gemm_leftcols(a, b, 3);
    const Matrix full = gemm(a, b);
    REQUIRE(c.cols() == 3);
    for (std::size_t i = 0; i < c.rows(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(c(i, j) == full(i, j));
    }
    CHECK_THROWS_AS(gemm_leftcols(a, b, 9), std::invalid_argument);
}
