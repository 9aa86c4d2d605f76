#include "photodp/clipping.hpp"

#include <cmath>
#include <stdexcept>

namespace photodp {

void ClipConfig::validate() const {
    // tau_h_min = 0 disables the offset (useful for mechanism-off limits);
    // the accountant separately insists on a strictly positive floor.
    if (tau_h_min < 0.0 || tau_h_max <= 0.0 || tau_b <= 0.0) {
        throw std::invalid_argument("ClipConfig: thresholds must be positive");
    }
    if (tau_h_min > tau_h_max) {
        throw std::invalid_argument("ClipConfig: tau_h_min must not exceed tau_h_max");
    }
}

Vector clip(const Vector& v, double c) {
    if (c <= 0.0) throw std::invalid_argument("clip: cap must be positive");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double m = std::fabs(v[i]);
        out[i] = std::copysign(std::min(c, m), v[i]);
    }
    return out;
}

Vector scale(const Vector& v, double s) {
    if (s <= 0.0) throw std::invalid_argument("scale: cap must be positive");
    Vector out = v;
    scale_inplace(out, s);
    return out;
}

void scale_inplace(std::span<double> v, double s) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    // 0/0 at the origin; the continuity limit keeps the zero vector fixed.
    if (norm <= s || norm == 0.0) return;
    const double f = s / norm;
    for (double& x : v) x *= f;
}

Vector offset(const Vector& v, double nu) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] + nu;
    return out;
}

LayerClipParams layer_params(const ClipConfig& cfg, std::size_t n_l) {
    cfg.validate();
    if (n_l == 0) throw std::invalid_argument("layer_params: layer width must be positive");
    const double root_n = std::sqrt(static_cast<double>(n_l));
    return {cfg.tau_h_max / root_n, cfg.tau_h_min / root_n, cfg.tau_b};
}

void clip_activations_inplace(std::span<double> h, const LayerClipParams& p,
                              bool magnitude_floor) {
    for (double& x : h) {
        double v = x + p.nu;
        if (magnitude_floor) {
            // Zero maps to +nu; otherwise raise the magnitude, keep the sign.
            double m = std::fabs(v);
            if (m < p.nu) m = p.nu;
            if (m > p.c) m = p.c;
            v = v == 0.0 ? p.nu : std::copysign(m, v);
        } else {
            v = std::copysign(std::min(p.c, std::fabs(v)), v);
        }
        x = v;
    }
}

Vector clip_activations(const Vector& h, const LayerClipParams& p, bool magnitude_floor) {
    Vector out = h;
    clip_activations_inplace(out, p, magnitude_floor);
    return out;
}

} // namespace photodp
