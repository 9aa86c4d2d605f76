#pragma once

#include "photodp/linalg.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace photodp {

/// Diagonal multivariate Gaussian, parameterized by per-coordinate
/// variances.
struct GaussianSpec {
    Vector mean;
    Vector var;
};

/// Everything the closed-form bounds need about one layer's mechanism.
struct MechanismBounds {
    std::size_t m = 0;      // batch size
    double sigma = 0.0;     // read-out noise std
    std::size_t n_l = 0;    // mechanism dimension (rows of the layer)
    double gamma_min = 0.0; // lower bound on |phi'| over the observed domain
    double gamma_max = 0.0; // analytic upper bound on |phi'|
    double tau_h_min = 0.0;
    double tau_h_max = 0.0;
    double tau_b = 0.0;

    void validate() const;
};

/// Which closed-form epsilon is evaluated. `main` is the appendix
/// derivation (the n_l factor of the main text cancels against the
/// sensitivity); `main_conservative` keeps the main-text factor;
/// `alt_log` is the appendix alternative expression whose log term needs
/// no precondition; `equal_cov` and `saturating` are the two special-case
/// bounds.
enum class BoundVariant { Main, MainConservative, AltLog, EqualCov, Saturating };

enum class Composition { PerLayer, Uniform };
enum class TInterpretation { Steps, Epochs };

const char* to_string(BoundVariant v);
BoundVariant parse_bound_variant(const std::string& name);

/// Exact Renyi divergence of order alpha between diagonal Gaussians.
/// Returns +infinity when alpha*var2 + (1-alpha)*var1 is not positive in
/// every coordinate (the divergence is undefined there).
double renyi_gaussian(const GaussianSpec& p, const GaussianSpec& q, double alpha);

/// Worst-case L2 sensitivity of one column of the layer update:
/// (2/m) tau_b gamma_max tau_h_max / sqrt(n_l).
double sensitivity_bound(const MechanismBounds& b);

/// The per-column Renyi bound for one layer at order alpha.
double epsilon_pdfa(const MechanismBounds& b, double alpha,
                    BoundVariant variant = BoundVariant::Main);

/// Equal-covariance special case (the log term vanishes).
double epsilon_equal_cov(const MechanismBounds& b, double alpha);

/// Saturating-covariance special case: (2 alpha / m sigma^2) tau_b^2,
/// independent of the gamma and tau_h parameters.
double epsilon_saturating(const MechanismBounds& b, double alpha);

/// RDP composition over layers and steps. Per-layer mode sums
/// T * columns_l * eps_l; uniform mode reproduces the literal
/// L * T * n * eps formula using the worst layer.
double compose(const std::vector<double>& eps_per_column,
               const std::vector<std::size_t>& columns, std::size_t steps,
               Composition mode = Composition::PerLayer);

/// RDP -> (eps, delta)-DP: eps + log(1/delta)/(alpha - 1).
double rdp_to_dp(double alpha, double eps_rdp, double delta);

struct AlphaSearchResult {
    double alpha = 0.0;
    double eps_dp = std::numeric_limits<double>::infinity();
};

/// Minimize the converted DP epsilon over a grid of alpha values, skipping
/// entries where the bound is undefined. Errors when nothing on the grid
/// is valid.
AlphaSearchResult best_alpha(const std::vector<MechanismBounds>& layers,
                             const std::vector<std::size_t>& columns, std::size_t steps,
                             double delta, const std::vector<double>& alpha_grid,
                             BoundVariant variant = BoundVariant::Main,
                             Composition mode = Composition::PerLayer);

struct PrivacyReport {
    double alpha = 0.0;
    double sigma = 0.0;
    double delta = 0.0;
    std::size_t steps = 0; // T as used by the composition
    std::size_t epochs = 0;
    TInterpretation t_interpretation = TInterpretation::Steps;
    Composition composition = Composition::PerLayer;
    BoundVariant variant = BoundVariant::Main;
    std::vector<double> eps_rdp_per_column; // one entry per layer
    std::vector<std::size_t> columns;       // clipped columns per layer (bias included)
    double eps_rdp_total = std::numeric_limits<double>::infinity();
    double eps_dp = std::numeric_limits<double>::infinity();
    bool magnitude_floor = false;
    bool no_guarantee = false; // sigma == 0: the bound diverges
    std::string clipping_note;
};

struct AuditOptions {
    double delta = 1e-5;
    std::vector<double> alpha_grid;
    BoundVariant variant = BoundVariant::Main;
    Composition composition = Composition::PerLayer;
    TInterpretation t_interpretation = TInterpretation::Steps;
    bool magnitude_floor = false;
};

/// Assemble the full report: pick alpha on the grid, compose across layers
/// and steps, convert to (eps, delta). steps/epochs are both recorded; the
/// one selected by t_interpretation drives the composition.
PrivacyReport audit_report(const std::vector<MechanismBounds>& layers,
                           const std::vector<std::size_t>& columns, std::size_t steps,
                           std::size_t epochs, const AuditOptions& opts);

/// Human-readable rendering ("+inf" prints as "undefined (divergence)").
std::string render_report(const PrivacyReport& report);

} // namespace photodp
