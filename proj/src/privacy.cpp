#include "photodp/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace photodp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_alpha(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("alpha must be greater than 1");
}

std::string fmt(double v) {
    if (std::isinf(v)) return "undefined (divergence)";
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

void MechanismBounds::validate() const {
    if (m == 0) throw std::invalid_argument("MechanismBounds: batch size must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("MechanismBounds: sigma must be positive");
    if (n_l == 0) throw std::invalid_argument("MechanismBounds: layer width must be positive");
    if (!(gamma_min > 0.0) || !(gamma_max > 0.0) || !(tau_h_min > 0.0) ||
        !(tau_h_max > 0.0) || !(tau_b > 0.0)) {
        throw std::invalid_argument("MechanismBounds: all bounds must be positive");
    }
    if (gamma_min > gamma_max) {
        throw std::invalid_argument("MechanismBounds: gamma_min exceeds gamma_max");
    }
    if (tau_h_min > tau_h_max) {
        throw std::invalid_argument("MechanismBounds: tau_h_min exceeds tau_h_max");
    }
}

const char* to_string(BoundVariant v) {
    switch (v) {
        case BoundVariant::Main: return "main";
        case BoundVariant::MainConservative: return "main_conservative";
        case BoundVariant::AltLog: return "alt_log";
        case BoundVariant::EqualCov: return "equal_cov";
        case BoundVariant::Saturating: return "saturating";
    }
    return "?";
}

BoundVariant parse_bound_variant(const std::string& name) {
    if (name == "main") return BoundVariant::Main;
    if (name == "main_conservative" || name == "conservative")
        return BoundVariant::MainConservative;
    if (name == "alt_log" || name == "alternative") return BoundVariant::AltLog;
    if (name == "equal_cov") return BoundVariant::EqualCov;
    if (name == "saturating") return BoundVariant::Saturating;
    throw std::invalid_argument("unknown bound variant: " + name);
}

double renyi_gaussian(const GaussianSpec& p, const GaussianSpec& q, double alpha) {
    require_alpha(alpha);
    if (p.mean.size() != p.var.size() || q.mean.size() != q.var.size() ||
        p.mean.size() != q.mean.size()) {
        throw std::invalid_argument("renyi_gaussian: dimension mismatch");
    }
    for (std::size_t j = 0; j < p.var.size(); ++j) {
        if (!(p.var[j] > 0.0) || !(q.var[j] > 0.0)) {
            throw std::invalid_argument("renyi_gaussian: variances must be positive");
        }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < p.mean.size(); ++j) {
        // s_j = alpha*var2 + (1-alpha)*var1; not a convex combination, so it
        // can go non-positive, in which case the divergence is +inf.
        const double s = alpha * q.var[j] + (1.0 - alpha) * p.var[j];
        if (!(s > 0.0)) return kInf;
        const double dmu = p.mean[j] - q.mean[j];
        total += 0.5 * alpha * dmu * dmu / s;
        total -= (std::log(s) - (1.0 - alpha) * std::log(p.var[j]) -
                  alpha * std::log(q.var[j])) /
                 (2.0 * (alpha - 1.0));
    }
    return total;
}

double sensitivity_bound(const MechanismBounds& b) {
    b.validate();
    return 2.0 / static_cast<double>(b.m) * b.tau_b * b.gamma_max * b.tau_h_max /
           std::sqrt(static_cast<double>(b.n_l));
}

double epsilon_pdfa(const MechanismBounds& b, double alpha, BoundVariant variant) {
    b.validate();
    require_alpha(alpha);
    if (variant == BoundVariant::EqualCov) return epsilon_equal_cov(b, alpha);
    if (variant == BoundVariant::Saturating) return epsilon_saturating(b, alpha);

    const double m = static_cast<double>(b.m);
    const double lo = b.gamma_min * b.tau_h_min;
    const double hi = b.gamma_max * b.tau_h_max;
    double first = epsilon_equal_cov(b, alpha);
    if (variant == BoundVariant::MainConservative) {
        first *= static_cast<double>(b.n_l);
    }

    double log_arg;
    if (variant == BoundVariant::AltLog) {
        log_arg = (m - 1.0) / m + hi * hi / (m * lo * lo);
    } else {
        const double denom = (m + 1.0) * lo * lo - hi * hi;
        if (!(denom > 0.0)) {
            throw std::domain_error(
                "epsilon_pdfa: precondition violated: (m+1)*(gamma_min*tau_h_min)^2 must "
                "exceed (gamma_max*tau_h_max)^2; raise gamma_min/tau_h_min, increase the "
                "batch size, or use the alt_log/saturating variant");
        }
        log_arg = m * lo * lo / denom;
    }
    const double log_term = static_cast<double>(b.n_l) * alpha / (2.0 * (alpha - 1.0)) *
                            std::log(log_arg);
    return first + log_term;
}

double epsilon_equal_cov(const MechanismBounds& b, double alpha) {
    b.validate();
    require_alpha(alpha);
    const double lo = b.gamma_min * b.tau_h_min;
    const double hi = b.gamma_max * b.tau_h_max;
    // written as eps3 * ratio^2 so equal products collapse onto eps3 exactly
    const double ratio = hi / lo;
    return epsilon_saturating(b, alpha) * ratio * ratio;
}

double epsilon_saturating(const MechanismBounds& b, double alpha) {
    b.validate();
    require_alpha(alpha);
    return 2.0 * alpha / (static_cast<double>(b.m) * b.sigma * b.sigma) * b.tau_b * b.tau_b;
}

double compose(const std::vector<double>& eps_per_column,
               const std::vector<std::size_t>& columns, std::size_t steps,
               Composition mode) {
    if (eps_per_column.size() != columns.size()) {
        throw std::invalid_argument("compose: layer count mismatch");
    }
    if (steps == 0) throw std::invalid_argument("compose: step count must be positive");
    if (eps_per_column.empty()) throw std::invalid_argument("compose: no layers");
    const double t = static_cast<double>(steps);
    if (mode == Composition::Uniform) {
        double worst_eps = 0.0;
        std::size_t worst_cols = 0;
        for (std::size_t l = 0; l < eps_per_column.size(); ++l) {
            worst_eps = std::max(worst_eps, eps_per_column[l]);
            worst_cols = std::max(worst_cols, columns[l]);
        }
        return static_cast<double>(eps_per_column.size()) * t *
               static_cast<double>(worst_cols) * worst_eps;
    }
    double total = 0.0;
    for (std::size_t l = 0; l < eps_per_column.size(); ++l) {
        total += t * static_cast<double>(columns[l]) * eps_per_column[l];
    }
    return total;
}

double rdp_to_dp(double alpha, double eps_rdp, double delta) {
    require_alpha(alpha);
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw std::invalid_argument("rdp_to_dp: delta must lie in (0,1)");
    }
    return eps_rdp + std::log(1.0 / delta) / (alpha - 1.0);
}

AlphaSearchResult best_alpha(const std::vector<MechanismBounds>& layers,
                             const std::vector<std::size_t>& columns, std::size_t steps,
                             double delta, const std::vector<double>& alpha_grid,
                             BoundVariant variant, Composition mode) {
    if (alpha_grid.empty()) throw std::invalid_argument("best_alpha: empty alpha grid");
    AlphaSearchResult best;
    bool found = false;
    for (double alpha : alpha_grid) {
        if (!(alpha > 1.0)) continue;
        std::vector<double> eps;
        eps.reserve(layers.size());
        try {
            for (const MechanismBounds& b : layers) {
                eps.push_back(epsilon_pdfa(b, alpha, variant));
            }
            const double total = compose(eps, columns, steps, mode);
            const double converted = rdp_to_dp(alpha, total, delta);
            if (!found || converted < best.eps_dp) {
                best = {alpha, converted};
                found = true;
            }
        } catch (const std::domain_error&) {
            continue; // bound undefined at this alpha
        }
    }
    if (!found) {
        throw std::domain_error(
            "best_alpha: the bound is undefined on the whole alpha grid "
            "(log-term precondition violated); see epsilon_pdfa");
    }
    return best;
}

PrivacyReport audit_report(const std::vector<MechanismBounds>& layers,
                           const std::vector<std::size_t>& columns, std::size_t steps,
                           std::size_t epochs, const AuditOptions& opts) {
    if (layers.empty() || layers.size() != columns.size()) {
        throw std::invalid_argument("audit_report: inconsistent layer description");
    }
    PrivacyReport report;
    report.delta = opts.delta;
    report.variant = opts.variant;
    report.composition = opts.composition;
    report.t_interpretation = opts.t_interpretation;
    report.magnitude_floor = opts.magnitude_floor;
    report.steps = opts.t_interpretation == TInterpretation::Steps ? steps : epochs;
    report.epochs = epochs;
    report.columns = columns;
    report.sigma = layers.front().sigma;
    report.clipping_note =
        opts.magnitude_floor
            ? "magnitude-floor clipping: the per-coordinate lower bound the "
              "covariance analysis assumes is enforced"
            : "default clipping reproduces the literal clip/offset operators; "
              "activations near -nu can fall below the assumed magnitude floor, "
              "so the covariance lower bound is assumed rather than enforced";

    if (!(report.sigma > 0.0)) {
        report.no_guarantee = true;
        report.alpha = opts.alpha_grid.empty() ? 2.0 : opts.alpha_grid.front();
        report.eps_rdp_per_column.assign(layers.size(), kInf);
        report.eps_rdp_total = kInf;
        report.eps_dp = kInf;
        return report;
    }

    const AlphaSearchResult pick = best_alpha(layers, columns, report.steps, opts.delta,
                                              opts.alpha_grid, opts.variant,
                                              opts.composition);
    report.alpha = pick.alpha;
    for (const MechanismBounds& b : layers) {
        report.eps_rdp_per_column.push_back(epsilon_pdfa(b, pick.alpha, opts.variant));
    }
    report.eps_rdp_total =
        compose(report.eps_rdp_per_column, columns, report.steps, opts.composition);
    report.eps_dp = rdp_to_dp(pick.alpha, report.eps_rdp_total, opts.delta);
    return report;
}

std::string render_report(const PrivacyReport& report) {
    std::ostringstream os;
    os << "privacy report\n";
    os << "  variant:        " << to_string(report.variant) << "\n";
    os << "  composition:    "
       << (report.composition == Composition::PerLayer ? "per-layer" : "uniform") << "\n";
    os << "  T interpreted:  "
       << (report.t_interpretation == TInterpretation::Steps ? "update steps" : "epochs")
       << " (T = " << report.steps << ")\n";
    os << "  sigma:          " << report.sigma << "\n";
    os << "  alpha:          " << report.alpha << "\n";
    os << "  delta:          " << report.delta << "\n";
    if (report.no_guarantee) {
        os << "  eps:            no DP guarantee (sigma = 0, the bound diverges)\n";
        return os.str();
    }
    os << "  per-column RDP eps by layer:";
    for (std::size_t l = 0; l < report.eps_rdp_per_column.size(); ++l) {
        os << (l ? ", " : " ") << fmt(report.eps_rdp_per_column[l]) << " x"
           << report.columns[l];
    }
    os << "\n";
    os << "  eps_rdp_total:  " << fmt(report.eps_rdp_total) << "\n";
    os << "  eps_dp:         " << fmt(report.eps_dp) << " at delta " << report.delta << "\n";
    os << "  clipping:       " << report.clipping_note << "\n";
    return os.str();
}

} // namespace photodp
