#pragma once

// Randomized neighboring-batch constructions that match the setting of the
// accountant's proof: clipped per-sample quantities in the magnitude-floor
// regime, with the replaced sample's products enlarged so the covariance
// difference is non-negative. Shared by the unit suite and the acceptance
// suite.

#include "photodp/linalg.hpp"
#include "photodp/privacy.hpp"

#include <cmath>

namespace photodp_test {

struct DominationCase {
    photodp::MechanismBounds bounds;
    double alpha = 2.0;
    photodp::GaussianSpec p, q;
};

inline double uniform_in(photodp::Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.uniform();
}

/// Draw one construction. The returned P/Q pair realizes the column
/// mechanism on neighboring batches whose clipped quantities satisfy every
/// bound the proof assumes, so exact_renyi(P, Q) <= epsilon_pdfa(bounds).
inline DominationCase draw_domination_case(photodp::Rng& rng) {
    using photodp::MechanismBounds;
    DominationCase out;

    MechanismBounds& b = out.bounds;
    b.m = 2 + rng.next_u64() % 63;
    b.n_l = 1 + rng.next_u64() % 8;
    b.sigma = uniform_in(rng, 0.05, 2.0);
    b.tau_b = uniform_in(rng, 0.1, 2.0);
    b.gamma_min = uniform_in(rng, 0.1, 1.0);
    b.tau_h_min = uniform_in(rng, 0.1, 1.0);
    // keep the log-term argument positive: hi/lo < sqrt(m+1)
    const double max_ratio = 0.98 * std::sqrt(static_cast<double>(b.m) + 1.0);
    const double ratio = uniform_in(rng, 1.0, std::max(1.0001, max_ratio));
    const double split = uniform_in(rng, 0.0, 1.0);
    b.gamma_max = b.gamma_min * std::pow(ratio, split);
    b.tau_h_max = b.tau_h_min * std::pow(ratio, 1.0 - split);
    out.alpha = uniform_in(rng, 1.05, 64.0);

    const std::size_t n = b.n_l, m = b.m;
    const double root_n = std::sqrt(static_cast<double>(n));
    const double nu = b.tau_h_min / root_n;
    const double cap = b.tau_h_max / root_n;

    // per-sample clipped quantities: |phi'| in [gamma_min, gamma_max],
    // |h| in [nu, cap] (magnitude-floor regime), signal norm <= tau_b
    std::vector<photodp::Vector> phi(m, photodp::Vector(n));
    std::vector<double> h(m);
    std::vector<photodp::Vector> signal(m, photodp::Vector(n));
    for (std::size_t i = 0; i < m; ++i) {
        h[i] = uniform_in(rng, nu, cap) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            phi[i][j] = uniform_in(rng, b.gamma_min, b.gamma_max) *
                        (rng.uniform() < 0.5 ? -1.0 : 1.0);
            signal[i][j] = rng.normal();
        }
        double norm = photodp::l2_norm(signal[i]);
        const double target = uniform_in(rng, 0.0, b.tau_b);
        if (norm > 0) {
            for (double& v : signal[i]) v *= target / norm;
        }
    }

    // the replaced sample I gets enlarged magnitudes so that
    // (phi~' h~)^2 - (phi' h)^2 >= 0 coordinate-wise
    const std::size_t I = rng.next_u64() % m;
    photodp::Vector phi_tilde(n);
    const double h_tilde = uniform_in(rng, std::fabs(h[I]), cap) *
                           (rng.uniform() < 0.5 ? -1.0 : 1.0);
    photodp::Vector signal_tilde(n);
    for (std::size_t j = 0; j < n; ++j) {
        phi_tilde[j] = uniform_in(rng, std::fabs(phi[I][j]), b.gamma_max) *
                       (rng.uniform() < 0.5 ? -1.0 : 1.0);
        signal_tilde[j] = rng.normal();
    }
    {
        const double norm = photodp::l2_norm(signal_tilde);
        const double target = uniform_in(rng, 0.0, b.tau_b);
        if (norm > 0) {
            for (double& v : signal_tilde) v *= target / norm;
        }
    }

    // mechanism means and covariances for both datasets
    const double md = static_cast<double>(m);
    out.p.mean.assign(n, 0.0);
    out.q.mean.assign(n, 0.0);
    out.p.var.assign(n, 0.0);
    out.q.var.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0, a_sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            mean += signal[i][j] * phi[i][j] * h[i] / md;
            a_sq += phi[i][j] * phi[i][j] * h[i] * h[i];
        }
        const double replaced = phi[I][j] * phi[I][j] * h[I] * h[I];
        const double replacement = phi_tilde[j] * phi_tilde[j] * h_tilde * h_tilde;
        out.p.mean[j] = mean;
        out.q.mean[j] = mean - signal[I][j] * phi[I][j] * h[I] / md +
                        signal_tilde[j] * phi_tilde[j] * h_tilde / md;
        const double scale = b.sigma * b.sigma / (md * md);
        out.p.var[j] = scale * a_sq;
        out.q.var[j] = scale * (a_sq - replaced + replacement);
    }
    return out;
}

} // namespace photodp_test
