#include <doctest.h>

#include <stdexcept>

#include "photodp/opu.hpp"

#include <cmath>

using namespace photodp;

TEST_CASE("the projection matrix is a deterministic function of its seed") {
    OpuSim a(8, 16, 1.0, 42, 1, 0.0);
    OpuSim b(8, 16, 1.0, 42, 2, 0.0);
    OpuSim c(8, 16, 1.0, 43, 1, 0.0);
    CHECK(a.matrix() == b.matrix());
    CHECK_FALSE(a.matrix() == c.matrix());
    CHECK_THROWS_AS(OpuSim(0, 4, 1.0, 1, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(OpuSim(4, 0, 1.0, 1, 1, 0.0), std::invalid_argument);
}

TEST_CASE("matrix entries match the requested scale") {
    OpuSim sim(1000, 1000, 0.03, 7, 1, 0.0);
    const Matrix& m = sim.matrix();
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        sum += m.data()[i];
        sum_sq += m.data()[i] * m.data()[i];
    }
    const double n = static_cast<double>(m.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    CHECK(std::fabs(stddev - 0.03) < 0.0003); // 1% over 1e6 entries

    OpuSim defaulted(4, 64, 0.0, 7, 1, 0.0);
    // default scale 1/sqrt(out_dim)
    double ss = 0.0;
    for (std::size_t i = 0; i < defaulted.matrix().size(); ++i) {
        ss += defaulted.matrix().data()[i] * defaulted.matrix().data()[i];
    }
    CHECK(std::sqrt(ss / 256.0) == doctest::Approx(1.0 / 8.0).epsilon(0.15));
}

TEST_CASE("project adds fresh noise around Bx") {
    OpuSim noiseless(6, 4, 1.0, 11, 5, 0.0);
    const Vector x{0.1, -0.2, 0.3, 0.0, 1.0, -1.0};
    CHECK(noiseless.project(x) == noiseless.linear(x));
    CHECK_THROWS_AS(noiseless.project({1.0}), std::invalid_argument);

    OpuSim sim(6, 4, 1.0, 11, 5, 1.0);
    const Vector zero(6, 0.0);
    const std::size_t trials = 100000;
    Vector mean(4, 0.0), var(4, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector p = sim.project(zero);
        for (std::size_t i = 0; i < 4; ++i) {
            mean[i] += p[i];
            var[i] += p[i] * p[i];
        }
    }
    for (std::size_t i = 0; i < 4; ++i) {
        mean[i] /= static_cast<double>(trials);
        var[i] = var[i] / static_cast<double>(trials) - mean[i] * mean[i];
        CHECK(std::fabs(mean[i]) < 4.0 / std::sqrt(static_cast<double>(trials)));
        CHECK(std::sqrt(var[i]) == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("projection noise is fresh on every call") {
    OpuSim sim(3, 5, 1.0, 2, 9, 0.5);
    const Vector x{1.0, 2.0, 3.0};
    const std::size_t trials = 20000;
    double diff_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector p1 = sim.project(x);
        const Vector p2 = sim.project(x);
        CHECK_FALSE(p1 == p2);
        for (std::size_t i = 0; i < p1.size(); ++i) {
            diff_sq += (p1[i] - p2[i]) * (p1[i] - p2[i]);
        }
    }
    const double per_coord_std =
        std::sqrt(diff_sq / static_cast<double>(trials * 5));
    CHECK(per_coord_std == doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(0.02));
}

TEST_CASE("the matrix never changes across a simulator's lifetime") {
    OpuSim sim(4, 4, 1.0, 3, 3, 0.7);
    const Matrix before = sim.matrix();
    for (int i = 0; i < 100; ++i) {
        (void)sim.project({1.0, 2.0, 3.0, 4.0});
        (void)sim.project_ternary({0.4, -0.4, 0.0, 0.2}, 0.15);
    }
    CHECK(sim.matrix() == before);
}

TEST_CASE("ternarize maps by strict threshold comparison") {
    const TernaryVector t = ternarize({0.2, -0.1, -0.5}, 0.15);
    CHECK(t == TernaryVector{1, 0, -1});
    CHECK(ternarize({0.15, -0.15}, 0.15) == TernaryVector{0, 0}); // boundaries to 0
    CHECK(ternarize({0.3, -0.7, 0.0}, 0.0) == TernaryVector{1, -1, 0});
    CHECK_THROWS_AS(ternarize({1.0}, -0.1), std::invalid_argument);

    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Vector e(8);
        for (double& x : e) x = rng.normal();
        const TernaryVector first = ternarize(e, 0.15);
        Vector as_real(first.size());
        for (std::size_t i = 0; i < first.size(); ++i) as_real[i] = first[i];
        CHECK(ternarize(as_real, 0.6) == first); // idempotent for t' < 1
    }
}

TEST_CASE("project_ternary equals the projection of the ternarized vector") {
    OpuSim sim(10, 7, 1.0, 17, 4, 0.0);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        Vector e(10);
        for (double& x : e) x = rng.normal();
        const Vector via_parts = sim.project_ternary(e, 0.15);
        const TernaryVector t = ternarize(e, 0.15);
        Vector as_real(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) as_real[i] = t[i];
        const Vector direct = sim.project(as_real); // sigma = 0: noiseless
        for (std::size_t i = 0; i < direct.size(); ++i) {
            CHECK(via_parts[i] == doctest::Approx(direct[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("project_ternary of an all-zero error is pure noise") {
    OpuSim sim(5, 4, 1.0, 1, 12, 0.8);
    const std::size_t trials = 50000;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector p = sim.project_ternary(Vector(5, 0.0), 0.15);
        for (double v : p) sum_sq += v * v;
    }
    const double stddev = std::sqrt(sum_sq / static_cast<double>(trials * 4));
    CHECK(stddev == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("per-pass noise doubles the variance") {
    OpuSim sim(5, 4, 1.0, 1, 12, 0.5, true);
    CHECK(sim.effective_sigma() == doctest::Approx(0.5 * std::sqrt(2.0)));
    const std::size_t trials = 50000;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector p = sim.project_ternary(Vector(5, 0.0), 0.15);
        for (double v : p) sum_sq += v * v;
    }
    const double stddev = std::sqrt(sum_sq / static_cast<double>(trials * 4));
    CHECK(stddev == doctest::Approx(0.5 * std::sqrt(2.0)).epsilon(0.02));
}
