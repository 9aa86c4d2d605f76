#pragma once

// Test-side oracle: the 1-D Renyi divergence of two Gaussians evaluated by
// numerical quadrature of E_Q[(P/Q)^alpha], independent of the closed form
// under test. The integration runs in log space so large divergences do not
// overflow.

#include <algorithm>
#include <cmath>
#include <vector>

namespace photodp_test {

inline double gaussian_log_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * d * d / var - 0.5 * std::log(2.0 * M_PI * var);
}

/// (1/(alpha-1)) log \int P(x)^alpha Q(x)^(1-alpha) dx via composite Simpson
/// quadrature accumulated with log-sum-exp. The window is centered on the
/// stationary point of the log-integrand, which is itself Gaussian-shaped
/// with curvature alpha/v1 + (1-alpha)/v2.
inline double renyi_1d_numeric(double mean1, double var1, double mean2, double var2,
                               double alpha) {
    const double curvature = alpha / var1 + (1.0 - alpha) / var2;
    double lo, hi;
    if (curvature > 0.0) {
        const double peak =
            (alpha * mean1 / var1 + (1.0 - alpha) * mean2 / var2) / curvature;
        const double width = 16.0 / std::sqrt(curvature);
        const double sd = std::sqrt(std::max(var1, var2));
        lo = std::min(peak - width, std::min(mean1, mean2) - 12.0 * sd);
        hi = std::max(peak + width, std::max(mean1, mean2) + 12.0 * sd);
    } else {
        // the integral diverges; mirror the closed form's +inf
        return std::numeric_limits<double>::infinity();
    }

    const int n = 40000; // even
    const double h = (hi - lo) / n;
    std::vector<double> log_terms;
    log_terms.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double simpson = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        log_terms.push_back(alpha * gaussian_log_pdf(x, mean1, var1) +
                            (1.0 - alpha) * gaussian_log_pdf(x, mean2, var2) +
                            std::log(simpson));
    }
    const double peak_term = *std::max_element(log_terms.begin(), log_terms.end());
    double acc = 0.0;
    for (double t : log_terms) acc += std::exp(t - peak_term);
    const double log_integral = peak_term + std::log(acc) + std::log(h / 3.0);
    return log_integral / (alpha - 1.0);
}

} // namespace photodp_test
