#pragma once

// Real linear spectrum of the Kolmogorov flow between slip walls.
//
// The eigenfunction exp(i kx x) sum_n i^n phi_n sin((n + j/2N) y) of
//     L psi = (sigma / R) Laplacian psi
// has real coefficients obeying the three-term recurrence
//     Dt_n phi_n = (beta_{n+1} - 1) phi_{n+1} - (beta_{n-1} - 1) phi_{n-1},
//     Dt_n = 2 (1 + lambda) beta_n (sigma + lambda + beta_n) / (R kx).
// With u_n = (beta_n - 1) phi_n and d_n = Dt_n / (beta_n - 1) the decaying
// solutions on either side of n = 0 are continued fractions
//     gamma_{+n} = u_n / u_{n-1} = -1 / (d_n + 1 / (d_{n+1} + ...)),
//     gamma_{-n} = u_{-n} / u_{-n+1} = 1 / (d_{-n} + 1 / (d_{-n-1} + ...)),
// and the n = 0 row closes the dispersion relation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kolmo/detail/roots.hpp"
#include "kolmo/domain.hpp"

namespace kolmo {

struct LinstabOptions {
    double cf_tol = 1e-13;          ///< relative head change between depth doublings
    int cf_depth_start = 16;
    int cf_depth_max = 1 << 20;
    double root_tol = 1e-11;        ///< |dispersion residual| target
    double sigma_cap = 1e6;         ///< bracket expansion limit for sigma
    double reynolds_cap = 1e9;      ///< bracket expansion limit for R_c
    double phi_decay = 1e-14;       ///< truncation threshold relative to max |phi|
    int phi_max_depth = 128;
};

class ContinuedFractionError : public NumericalError {
public:
    ContinuedFractionError(const std::string& what, double prev, double last)
        : NumericalError(what), head_prev(prev), head_last(last) {}
    double head_prev;
    double head_last;
};

class RootNotConverged : public NumericalError {
public:
    RootNotConverged(const std::string& what, double best, double residual)
        : NumericalError(what), best_iterate(best), best_residual(residual) {}
    double best_iterate;
    double best_residual;
};

/// sigma + lambda + beta_n written as tau + (beta_n - beta_0), tau = sigma + lambda + beta_0,
/// so that tiny tau keeps its digits.
inline double shifted_rate(const GeometryParams& g, double tau, int n) {
    const std::int64_t d = g.denom();
    const std::int64_t s = d * n + g.j_mode;
    const std::int64_t j = g.j_mode;
    return tau + static_cast<double>(s * s - j * j) / static_cast<double>(d * d);
}

/// Partial denominator d_n of the continued fractions (n != 0), as a
/// function of tau = sigma + lambda + beta_0.
inline double partial_denominator_tau(const PhysicalParams& p, const GeometryParams& g, double tau, int n) {
    const double b = beta_eigen(g, n);
    return 2.0 * (1.0 + p.lambda) * b * shifted_rate(g, tau, n) / (p.reynolds * g.kx * (b - 1.0));
}

inline double partial_denominator(const PhysicalParams& p, const GeometryParams& g, double sigma, int n) {
    return partial_denominator_tau(p, g, sigma + p.lambda + beta_eigen(g, 0), n);
}

/// Dt_n, the diagonal of the coefficient recurrence, from tau = sigma + lambda + beta_0.
inline double recurrence_diagonal_tau(const PhysicalParams& p, const GeometryParams& g, double tau, int n) {
    const double b = beta_eigen(g, n);
    return 2.0 * (1.0 + p.lambda) * b * shifted_rate(g, tau, n) / (p.reynolds * g.kx);
}

/// Lower end of the admissible sigma range, -lambda - beta_0.
inline double sigma_floor(const PhysicalParams& p, const GeometryParams& g) {
    return -p.lambda - beta_eigen(g, 0);
}

struct ContinuedFractionEval {
    std::vector<double> gamma_plus;   ///< gamma_plus[k] = gamma_{+(k+1)}
    std::vector<double> gamma_minus;  ///< gamma_minus[k] = gamma_{-(k+1)}
    int depth_used = 0;
    bool converged = false;

    double head_plus() const { return gamma_plus.front(); }
    double head_minus() const { return gamma_minus.front(); }
};

namespace detail {

inline void sweep_fractions(const PhysicalParams& p, const GeometryParams& g, double tau, int depth,
                            std::vector<double>& plus, std::vector<double>& minus) {
    plus.assign(depth, 0.0);
    minus.assign(depth, 0.0);
    double rp = 0.0, rm = 0.0;
    for (int n = depth; n >= 1; --n) {
        rp = -1.0 / (partial_denominator_tau(p, g, tau, n) - rp);
        rm = 1.0 / (partial_denominator_tau(p, g, tau, -n) + rm);
        plus[n - 1] = rp;
        minus[n - 1] = rm;
    }
}

inline bool close_rel(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::fmax(std::fabs(a), std::fabs(b)) || a == b;
}

}  // namespace detail

/// Bottom-up evaluation with depth doubling until both heads settle.
/// tau = sigma + lambda + beta_0 >= 0.
inline ContinuedFractionEval continued_fractions_tau(const PhysicalParams& p, const GeometryParams& g, double tau,
                                                     int depth, const LinstabOptions& opt = {}) {
    if (depth < 1) throw ValidationError("continued_fractions: depth must be >= 1");
    if (!(tau >= 0.0)) throw ValidationError("continued_fractions: sigma below -lambda - beta0");
    ContinuedFractionEval out;
    detail::sweep_fractions(p, g, tau, depth, out.gamma_plus, out.gamma_minus);
    out.depth_used = depth;
    while (2 * out.depth_used <= opt.cf_depth_max) {
        ContinuedFractionEval next;
        next.depth_used = 2 * out.depth_used;
        detail::sweep_fractions(p, g, tau, next.depth_used, next.gamma_plus, next.gamma_minus);
        const bool settled = detail::close_rel(next.head_plus(), out.head_plus(), opt.cf_tol) &&
                             detail::close_rel(next.head_minus(), out.head_minus(), opt.cf_tol);
        const double prev = out.head_plus() - out.head_minus();
        out = std::move(next);
        if (settled) {
            out.converged = true;
            return out;
        }
        if (2 * out.depth_used > opt.cf_depth_max) {
            std::ostringstream os;
            os.precision(17);
            os << "continued fraction did not converge by depth " << out.depth_used;
            throw ContinuedFractionError(os.str(), prev, out.head_plus() - out.head_minus());
        }
    }
    throw ContinuedFractionError("continued fraction depth_max below start depth", 0.0,
                                 out.head_plus() - out.head_minus());
}

inline ContinuedFractionEval continued_fractions(const PhysicalParams& p, const GeometryParams& g, double sigma,
                                                 int depth, const LinstabOptions& opt = {}) {
    return continued_fractions_tau(p, g, sigma - sigma_floor(p, g), depth, opt);
}

/// Pre-multiplied dispersion relation:
///   2 beta0 (1+lambda)(sigma+lambda+beta0) / (R kx (1-beta0)) - [CF_+ + CF_-],
/// CF_+ = -gamma_{+1}, CF_- = gamma_{-1}. Increasing through its root.
inline double dispersion_residual_tau(const PhysicalParams& p, const GeometryParams& g, double tau,
                                      const LinstabOptions& opt = {}) {
    const double b0 = beta_eigen(g, 0);
    const double lhs = 2.0 * b0 * (1.0 + p.lambda) * tau / (p.reynolds * g.kx * (1.0 - b0));
    const auto cf = continued_fractions_tau(p, g, tau, opt.cf_depth_start, opt);
    return lhs - (cf.gamma_minus.front() - cf.gamma_plus.front());
}

inline double dispersion_residual(const PhysicalParams& p, const GeometryParams& g, double sigma,
                                  const LinstabOptions& opt = {}) {
    return dispersion_residual_tau(p, g, sigma - sigma_floor(p, g), opt);
}

struct EigenSolution {
    double sigma = 0.0;
    double sigma_shift = 0.0;       ///< sigma + lambda + beta_0, computed without cancellation
    double reynolds = 0.0;
    int depth = 0;                  ///< phi holds n in [-depth, depth]
    std::vector<double> phi;        ///< phi[n + depth]
    std::vector<double> phi_star;   ///< (-1)^n (beta_n - 1) phi_n
    double recurrence_residual = 0.0;
    double identity_residual = 0.0;
    double dispersion_residual = 0.0;

    double coeff(int n) const {
        return (n < -depth || n > depth) ? 0.0 : phi[static_cast<std::size_t>(n + depth)];
    }
    double coeff_star(int n) const {
        return (n < -depth || n > depth) ? 0.0 : phi_star[static_cast<std::size_t>(n + depth)];
    }
};

/// Max over n of the three-term recurrence residual, relative to max |phi|.
inline double recurrence_residual(const PhysicalParams& p, const GeometryParams& g, const EigenSolution& e) {
    double pmax = 0.0, rmax = 0.0;
    for (double v : e.phi) pmax = std::fmax(pmax, std::fabs(v));
    for (int n = -e.depth; n <= e.depth; ++n) {
        const double r = recurrence_diagonal_tau(p, g, e.sigma_shift, n) * e.coeff(n) -
                         (beta_eigen(g, n + 1) - 1.0) * e.coeff(n + 1) +
                         (beta_eigen(g, n - 1) - 1.0) * e.coeff(n - 1);
        rmax = std::fmax(rmax, std::fabs(r));
    }
    return rmax / pmax;
}

/// |sum beta(s+l+beta)(beta-1) phi^2| / sum beta(s+l+beta)|beta-1| phi^2.
inline double identity_residual(const GeometryParams& g, const EigenSolution& e) {
    double num = 0.0, den = 0.0;
    for (int n = -e.depth; n <= e.depth; ++n) {
        const double b = beta_eigen(g, n);
        const double w = b * shifted_rate(g, e.sigma_shift, n) * e.coeff(n) * e.coeff(n);
        num += w * (b - 1.0);
        den += w * std::fabs(b - 1.0);
    }
    return std::fabs(num) / den;
}

/// Coefficient forms of <Laplacian psi, psi*> and <psi, psi*> without the
/// measure and the Laplacian's minus sign: sum (-1)^n beta_n (beta_n-1) phi_n^2
/// and sum (-1)^n (beta_n-1) phi_n^2. Both are negative.
struct PairingSums {
    double laplacian_sum = 0.0;
    double plain_sum = 0.0;
};

inline PairingSums pairing_sums(const GeometryParams& g, const EigenSolution& e) {
    PairingSums s;
    for (int n = -e.depth; n <= e.depth; ++n) {
        const double b = beta_eigen(g, n);
        const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
        const double q = sgn * (b - 1.0) * e.coeff(n) * e.coeff(n);
        s.laplacian_sum += b * q;
        s.plain_sum += q;
    }
    return s;
}

/// Coefficients phi_n from converged fractions at sigma, truncated where they
/// have decayed below opt.phi_decay of their maximum.
inline EigenSolution eigen_coefficients_tau(const PhysicalParams& p, const GeometryParams& g, double tau,
                                            const LinstabOptions& opt = {}) {
    const int cap = opt.phi_max_depth;
    const double sigma = tau + sigma_floor(p, g);
    const auto cf = continued_fractions_tau(p, g, tau, std::max(opt.cf_depth_start, 4 * cap), opt);
    const double b0 = beta_eigen(g, 0);
    std::vector<double> plus(cap + 1, 0.0), minus(cap + 1, 0.0);
    plus[0] = minus[0] = 1.0;
    double up = b0 - 1.0, um = b0 - 1.0;
    for (int n = 1; n <= cap; ++n) {
        up *= cf.gamma_plus[n - 1];
        um *= cf.gamma_minus[n - 1];
        plus[n] = up / (beta_eigen(g, n) - 1.0);
        minus[n] = um / (beta_eigen(g, -n) - 1.0);
    }
    double pmax = 1.0;
    for (int n = 0; n <= cap; ++n) pmax = std::fmax(pmax, std::fmax(std::fabs(plus[n]), std::fabs(minus[n])));
    int depth = cap;
    for (int m = 1; m <= cap; ++m) {
        if (std::fabs(plus[m]) < opt.phi_decay * pmax && std::fabs(minus[m]) < opt.phi_decay * pmax) {
            depth = m;
            break;
        }
    }
    EigenSolution e;
    e.sigma = sigma;
    e.sigma_shift = tau;
    e.reynolds = p.reynolds;
    e.depth = depth;
    e.phi.assign(2 * depth + 1, 0.0);
    e.phi_star.assign(2 * depth + 1, 0.0);
    for (int n = -depth; n <= depth; ++n) {
        const double v = n >= 0 ? plus[n] : minus[-n];
        e.phi[n + depth] = v;
        e.phi_star[n + depth] = ((n % 2 == 0) ? 1.0 : -1.0) * (beta_eigen(g, n) - 1.0) * v;
    }
    e.recurrence_residual = recurrence_residual(p, g, e);
    e.identity_residual = identity_residual(g, e);
    return e;
}

inline EigenSolution eigen_coefficients(const PhysicalParams& p, const GeometryParams& g, double sigma,
                                        const LinstabOptions& opt = {}) {
    return eigen_coefficients_tau(p, g, sigma - sigma_floor(p, g), opt);
}

/// The unique real eigenvalue sigma(R) with its eigen/conjugate coefficients.
inline EigenSolution sigma_of_R(const PhysicalParams& p, const GeometryParams& g, const LinstabOptions& opt = {}) {
    p.validate();
    require_admissible(g);
    auto res = [&](double t) { return dispersion_residual_tau(p, g, t, opt); };
    const double floor = sigma_floor(p, g);
    const double flo = res(0.0);
    if (flo == 0.0) return eigen_coefficients_tau(p, g, 0.0, opt);
    if (!(flo < 0.0)) throw NumericalError("sigma_of_R: residual not negative at sigma floor");
    double hi = 1.0 - floor, fhi = res(hi);
    while (!(fhi > 0.0)) {
        if (hi + floor >= opt.sigma_cap) throw NumericalError("sigma_of_R: no bracket below sigma cap");
        hi = std::fmin(2.0 * (hi + floor), opt.sigma_cap) - floor;
        fhi = res(hi);
    }
    const auto root = detail::solve_bracketed(res, 0.0, hi, flo, fhi, opt.root_tol);
    if (!root.converged)
        throw RootNotConverged("sigma_of_R: residual tolerance not met", root.x + floor, root.fx);
    auto e = eigen_coefficients_tau(p, g, root.x, opt);
    e.dispersion_residual = root.fx;
    return e;
}

inline double growth_rate(const PhysicalParams& p, const GeometryParams& g, const LinstabOptions& opt = {}) {
    return sigma_of_R(p, g, opt).sigma / p.reynolds;
}

/// R at which sigma(R) = 0.
inline double critical_reynolds(double lambda, const GeometryParams& g, const LinstabOptions& opt = {}) {
    require_admissible(g);
    auto res = [&](double logR) {
        PhysicalParams p{lambda, std::exp(logR)};
        return dispersion_residual(p, g, 0.0, opt);
    };
    double lo = 0.0, flo = res(lo);
    while (!(flo > 0.0)) {
        lo -= std::log(2.0);
        if (lo < std::log(1e-12)) throw NumericalError("critical_reynolds: no positive residual at small R");
        flo = res(lo);
    }
    double hi = lo + std::log(2.0), fhi = res(hi);
    while (!(fhi < 0.0)) {
        lo = hi, flo = fhi;
        hi += std::log(2.0);
        if (hi > std::log(opt.reynolds_cap)) throw NumericalError("critical_reynolds: bracket exceeds R cap");
        fhi = res(hi);
    }
    // residual decreases in R at sigma = 0; flip the sign for an increasing bracket
    auto neg = [&](double x) { return -res(x); };
    const auto root = detail::solve_bracketed(neg, lo, hi, -flo, -fhi, opt.root_tol);
    if (!root.converged) throw RootNotConverged("critical_reynolds: residual tolerance not met", std::exp(root.x), root.fx);
    return std::exp(root.x);
}

struct NeutralPoint {
    double kx = 0.0;
    double reynolds_c = std::numeric_limits<double>::quiet_NaN();
    std::string error;  ///< empty on success
};

struct NeutralCurve {
    std::vector<NeutralPoint> points;
    std::optional<std::size_t> argmin;
};

inline NeutralCurve neutral_curve(double lambda, const GeometryParams& g, const std::vector<double>& kx_grid,
                                  const LinstabOptions& opt = {}) {
    if (!std::is_sorted(kx_grid.begin(), kx_grid.end())) throw ValidationError("neutral_curve: kx grid must be sorted");
    NeutralCurve out;
    for (double kx : kx_grid) {
        NeutralPoint pt;
        pt.kx = kx;
        GeometryParams gk = g;
        gk.kx = kx;
        try {
            pt.reynolds_c = critical_reynolds(lambda, gk, opt);
        } catch (const std::exception& ex) {
            pt.error = ex.what();
        }
        out.points.push_back(pt);
    }
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        if (!out.points[i].error.empty()) continue;
        if (!out.argmin || out.points[i].reynolds_c < out.points[*out.argmin].reynolds_c) out.argmin = i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent route: determinant of the truncated tridiagonal system in phi_n,
// n in [-M, M], as a function of sigma.

/// Sign of det A(sigma) (+1, -1 or 0), with A the truncated recurrence matrix.
inline int recurrence_determinant_sign(const PhysicalParams& p, const GeometryParams& g, double sigma, int M) {
    // p_k = a_k p_{k-1} + (beta_k - 1)(beta_{k-1} - 1) p_{k-2}
    double pm2 = 1.0;
    const double tau = sigma - sigma_floor(p, g);
    double pm1 = recurrence_diagonal_tau(p, g, tau, -M);
    for (int n = -M + 1; n <= M; ++n) {
        const double cur = recurrence_diagonal_tau(p, g, tau, n) * pm1 +
                           (beta_eigen(g, n) - 1.0) * (beta_eigen(g, n - 1) - 1.0) * pm2;
        pm2 = pm1;
        pm1 = cur;
        const double big = std::fmax(std::fabs(pm1), std::fabs(pm2));
        if (big > 1e150 || (big < 1e-150 && big > 0.0)) {
            const double s = 1.0 / big;
            pm1 *= s;
            pm2 *= s;
        }
    }
    return (pm1 > 0.0) - (pm1 < 0.0);
}

/// Largest real root of det A(sigma) above -lambda - beta0, by sign-change
/// scan from a Gershgorin upper bound followed by bisection.
inline double sigma_determinant_oracle(const PhysicalParams& p, const GeometryParams& g, int M) {
    if (M < 8) throw ValidationError("sigma_determinant_oracle: M must be >= 8");
    p.validate();
    require_admissible(g);
    const double lo = sigma_floor(p, g);
    // sigma is an eigenvalue of -W^{-1}(D0 + C); bound it by row discs
    double hi = lo;
    for (int n = -M; n <= M; ++n) {
        const double b = beta_eigen(g, n);
        const double w = 2.0 * (1.0 + p.lambda) * b / (p.reynolds * g.kx);
        const double off = (n < M ? std::fabs(beta_eigen(g, n + 1) - 1.0) : 0.0) +
                           (n > -M ? std::fabs(beta_eigen(g, n - 1) - 1.0) : 0.0);
        hi = std::fmax(hi, -(p.lambda + b) + off / w);
    }
    hi += 1.0;
    auto sgn = [&](double s) { return recurrence_determinant_sign(p, g, s, M); };
    const int steps = 4096;
    const double h = (hi - lo) / steps;
    int s_hi = sgn(hi);
    for (int k = steps - 1; k >= 0; --k) {
        const double x = lo + k * h;
        const int s = sgn(x);
        if (s == 0) return x;
        if (s != s_hi) {
            const double a = x, b = x + h;
            return detail::bisect_sign([&](double t) { return static_cast<double>(sgn(t)); }, a, b, s > 0);
        }
        s_hi = s;
    }
    throw NumericalError("sigma_determinant_oracle: no sign change in scan window");
}

/// Determinant route with M doubled until the root moves by < tol (relative).
inline double sigma_determinant_converged(const PhysicalParams& p, const GeometryParams& g, int M0 = 16,
                                          double tol = 1e-12, int M_max = 1024) {
    double prev = sigma_determinant_oracle(p, g, M0);
    for (int M = 2 * M0; M <= M_max; M *= 2) {
        const double cur = sigma_determinant_oracle(p, g, M);
        if (std::fabs(cur - prev) <= tol * std::fmax(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("sigma_determinant_converged: root not stable under M doubling");
}

}  // namespace kolmo
