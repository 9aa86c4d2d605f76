#include "photodp/opu.hpp"

#include <cmath>
#include <stdexcept>

namespace photodp {

TernaryVector ternarize(const Vector& e, double t) {
    if (t < 0.0) throw std::invalid_argument("ternarize: threshold must be non-negative");
    TernaryVector out(e.size(), 0);
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] > t) out[i] = 1;
        else if (e[i] < -t) out[i] = -1;
    }
    return out;
}

OpuSim::OpuSim(std::size_t in_dim, std::size_t out_dim, double entry_std,
               std::uint64_t matrix_seed, std::uint64_t noise_seed, double noise_sigma,
               bool per_pass_noise)
    : matrix_(out_dim, in_dim),
      noise_sigma_(noise_sigma),
      per_pass_noise_(per_pass_noise),
      matrix_seed_(matrix_seed),
      noise_seed_(noise_seed),
      noise_rng_(noise_seed) {
    if (in_dim == 0 || out_dim == 0) {
        throw std::invalid_argument("OpuSim: dimensions must be positive");
    }
    if (noise_sigma < 0.0) {
        throw std::invalid_argument("OpuSim: noise sigma must be non-negative");
    }
    if (entry_std <= 0.0) {
        entry_std = 1.0 / std::sqrt(static_cast<double>(out_dim));
    }
    Rng matrix_rng(matrix_seed);
    for (double& v : std::span(matrix_.data(), matrix_.size())) {
        v = entry_std * matrix_rng.normal();
    }
}

double OpuSim::effective_sigma() const {
    return per_pass_noise_ ? noise_sigma_ * std::sqrt(2.0) : noise_sigma_;
}

Vector OpuSim::project(const Vector& x) {
    if (x.size() != in_dim()) throw std::invalid_argument("OpuSim::project: dimension mismatch");
    Vector p = matmul(matrix_, x);
    if (noise_sigma_ > 0.0) {
        for (double& v : p) v += noise_sigma_ * noise_rng_.normal();
    }
    return p;
}

Vector OpuSim::linear(const Vector& x) const {
    if (x.size() != in_dim()) throw std::invalid_argument("OpuSim::linear: dimension mismatch");
    return matmul(matrix_, x);
}

Vector OpuSim::draw_noise() {
    return gaussian(noise_rng_, out_dim(), 0.0, noise_sigma_);
}

Vector OpuSim::project_ternary(const Vector& e, double t) {
    if (e.size() != in_dim()) {
        throw std::invalid_argument("OpuSim::project_ternary: dimension mismatch");
    }
    const TernaryVector tern = ternarize(e, t);
    Vector pos(e.size(), 0.0), neg(e.size(), 0.0);
    for (std::size_t i = 0; i < tern.size(); ++i) {
        if (tern[i] > 0) pos[i] = 1.0;
        else if (tern[i] < 0) neg[i] = 1.0;
    }
    Vector p_pos = matmul(matrix_, pos);
    Vector p_neg = matmul(matrix_, neg);
    if (per_pass_noise_ && noise_sigma_ > 0.0) {
        for (double& v : p_pos) v += noise_sigma_ * noise_rng_.normal();
        for (double& v : p_neg) v += noise_sigma_ * noise_rng_.normal();
    }
    Vector p(out_dim());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = p_pos[i] - p_neg[i];
    if (!per_pass_noise_ && noise_sigma_ > 0.0) {
        for (double& v : p) v += noise_sigma_ * noise_rng_.normal();
    }
    return p;
}

} // namespace photodp
