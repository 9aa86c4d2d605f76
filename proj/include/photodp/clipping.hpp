#pragma once

#include "photodp/linalg.hpp"

namespace photodp {

/// Thresholds driving the per-layer clipping pipeline. gamma bounds are
/// configuration inputs for the accountant, not derived from activations:
/// over the whole real line inf |tanh'| is 0, which is useless, so callers
/// supply a calibrated lower bound (see MechanismBounds).
struct ClipConfig {
    double tau_h_min = 0.1;
    double tau_h_max = 1.0;
    double tau_b = 1.0;
    /// When set, every clipped coordinate keeps magnitude >= nu (zero maps
    /// to +nu). The plain clip-offset pipeline cannot promise that for
    /// signed activations, and the accountant's lower bound on the noise
    /// covariance assumes it.
    bool magnitude_floor = false;

    void validate() const;
};

/// Per-layer parameters derived from ClipConfig and the layer width.
struct LayerClipParams {
    double c = 0.0;  // per-coordinate cap, tau_h_max / sqrt(n)
    double nu = 0.0; // offset, tau_h_min / sqrt(n)
    double s = 0.0;  // L2 cap on the feedback signal, tau_b
};

/// Per-coordinate magnitude cap, sign preserved.
Vector clip(const Vector& v, double c);

/// Rescale to L2 norm min(s, |v|); the zero vector maps to itself.
Vector scale(const Vector& v, double s);

/// Add nu to every coordinate.
Vector offset(const Vector& v, double nu);

LayerClipParams layer_params(const ClipConfig& cfg, std::size_t n_l);

/// clip_c(offset_nu(h)), optionally flooring each coordinate's magnitude
/// at nu. Output always satisfies ||.||_2 <= tau_h_max.
Vector clip_activations(const Vector& h, const LayerClipParams& p, bool magnitude_floor);

// In-place variants used by the batched training path.
void clip_activations_inplace(std::span<double> h, const LayerClipParams& p,
                              bool magnitude_floor);
void scale_inplace(std::span<double> v, double s);

} // namespace photodp
