#pragma once

#include "photodp/linalg.hpp"

#include <cstdint>

namespace photodp {

/// Error vector quantized to {-1, 0, +1}.
using TernaryVector = std::vector<std::int8_t>;

/// Ternarize by threshold: v < -t maps to -1, v > t maps to +1, everything
/// in between (boundaries included) maps to 0.
TernaryVector ternarize(const Vector& e, double t);

/// Simulated optical co-processor: a fixed Gaussian random matrix applied
/// with fresh additive Gaussian read-out noise on every projection.
///
/// The projection matrix is drawn once at construction and never changes.
/// project() consumes the internal noise stream, so an OpuSim instance is
/// single-owner: concurrent users must hold separate instances.
class OpuSim {
public:
    /// entry_std <= 0 selects the default 1/sqrt(out_dim), which keeps
    /// projection norms comparable to input norms.
    OpuSim(std::size_t in_dim, std::size_t out_dim, double entry_std,
           std::uint64_t matrix_seed, std::uint64_t noise_seed, double noise_sigma,
           bool per_pass_noise = false);

    std::size_t in_dim() const { return matrix_.cols(); }
    std::size_t out_dim() const { return matrix_.rows(); }
    double noise_sigma() const { return noise_sigma_; }
    bool per_pass_noise() const { return per_pass_noise_; }
    std::uint64_t matrix_seed() const { return matrix_seed_; }
    std::uint64_t noise_seed() const { return noise_seed_; }
    const Matrix& matrix() const { return matrix_; }

    /// The noise std of the mechanism this simulator realizes: sigma for a
    /// single post-subtraction draw, sigma*sqrt(2) when noise is applied on
    /// each physical pass.
    double effective_sigma() const;

    /// B x plus one fresh noise draw.
    Vector project(const Vector& x);

    /// Projection of a ternarized input, the way the hardware performs it:
    /// the positive and negative parts are projected separately and
    /// subtracted. By default one noise draw of variance sigma^2 is added
    /// after the subtraction so the realized mechanism matches the analyzed
    /// one; per-pass mode draws noise for each part (variance 2 sigma^2).
    Vector project_ternary(const Vector& e, double t);

    /// Noise-free linear map B x; does not consume the noise stream.
    Vector linear(const Vector& x) const;

    /// Draw one noise vector of length out_dim from the read-out stream.
    Vector draw_noise();

    /// Direct access to the read-out noise stream (single-owner, like the
    /// simulator itself).
    Rng& noise_stream() { return noise_rng_; }

private:
    Matrix matrix_;
    double noise_sigma_;
    bool per_pass_noise_;
    std::uint64_t matrix_seed_;
    std::uint64_t noise_seed_;
    Rng noise_rng_;
};

} // namespace photodp
