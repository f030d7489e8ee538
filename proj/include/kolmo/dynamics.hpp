#pragma once

// Time integration of the full vorticity equation on the Galerkin lattice.
//
// Per mode, with J = N(psi, psi) and forcing F = 1/R at (0, 2N):
//     da/dt = -((beta + lambda) / R) a - J / beta + F / beta.
// The linear part is integrated exactly (ETDRK2, Cox-Matthews).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "kolmo/domain.hpp"
#include "kolmo/spectral.hpp"

namespace kolmo {

struct SimConfig {
    PhysicalParams phys;
    GeometryParams geom;
    int mx_max = 2;
    int c_max = 0;               ///< 0 selects 64 N
    double dt = 1.0;             ///< requested step; capped by 0.5 R / (beta_max + lambda)
    double t_end = 1000.0;
    double steady_tol = 1e-10;
    double snapshot_every = 10.0;
    std::uint64_t seed = 1;
    bool nonlinear = true;       ///< false drops J (linear problem about zero)
    bool forcing = true;
    bool dissipation = true;     ///< false drops the linear damping term
    bool modulo_translation = false;  ///< steady test allows a uniform drift in x

    Lattice lattice() const { return {mx_max, c_max > 0 ? c_max : 64 * geom.n_walls}; }

    double beta_max() const {
        const Lattice l = lattice();
        return beta(geom, l.mx_max, l.c_max);
    }

    double effective_dt() const {
        if (!dissipation) return dt;
        return std::min(0.5 * phys.reynolds / (beta_max() + phys.lambda), dt);
    }

    void validate() const {
        phys.validate();
        geom.validate();
        if (mx_max < 2) throw ValidationError("mx_max must be >= 2");
        if (c_max < 0) throw ValidationError("c_max must be >= 1 (or 0 for the default)");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be > 0");
        if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ValidationError("t_end must be >= 0");
        if (!(steady_tol > 0.0)) throw ValidationError("steady_tol must be > 0");
        if (!(snapshot_every > 0.0)) throw ValidationError("snapshot_every must be > 0");
    }
};

class BlowUpError : public NumericalError {
public:
    BlowUpError(const std::string& what, double t_) : NumericalError(what), t(t_) {}
    double t;
};

struct SimState {
    double t = 0.0;
    long steps = 0;
    SpectralField field;
    double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Kinetic energy per mode, (1/2) beta |a|^2 times the domain measure.
inline double mode_energy(const SpectralField& f, int m, std::int64_t c) {
    const double measure = (2.0 * std::numbers::pi / f.geom().kx) * (f.geom().n_walls * std::numbers::pi);
    return 0.5 * measure * beta(f.geom(), m, c) * std::norm(f(m, c));
}

/// Energy of block m (m and -m counted separately).
inline double block_energy(const SpectralField& f, int m) {
    double e = 0.0;
    for (int c = 1; c <= f.c_max(); ++c) e += mode_energy(f, m, c);
    return e;
}

inline double total_energy(const SpectralField& f) {
    double e = 0.0;
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m) e += block_energy(f, m);
    return e;
}

/// Energy of f - psi_0.
inline double perturbation_energy(const SpectralField& f, double lambda) {
    SpectralField d = f;
    d.add(0, f.geom().denom(), -1.0 / (1.0 + lambda));
    return total_energy(d);
}

/// Per-|m| energies of the perturbation about psi_0: entry k sums blocks +k and -k.
inline std::vector<double> energy_split(const SpectralField& f, double lambda) {
    SpectralField d = f;
    d.add(0, f.geom().denom(), -1.0 / (1.0 + lambda));
    std::vector<double> out(static_cast<std::size_t>(f.mx_max()) + 1, 0.0);
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m) out[std::abs(m)] += block_energy(d, m);
    return out;
}

namespace detail {

inline void add_rhs(const SimConfig& cfg, const SpectralField& f, SpectralField& out, bool with_linear) {
    const auto& g = f.geom();
    const double R = cfg.phys.reynolds;
    auto o = out.raw();
    if (cfg.nonlinear) {
        const auto J = advection(f, f, f.lattice(), Truncation::truncate);
        const auto j = J.coeffs();
        for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
            for (int c = 1; c <= f.c_max(); ++c) o[f.index(m, c)] -= j[f.index(m, c)] / beta(g, m, c);
    }
    if (cfg.forcing) o[f.index(0, g.denom())] += 1.0 / R;  // beta = 1
    if (with_linear && cfg.dissipation) {
        for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
            for (int c = 1; c <= f.c_max(); ++c)
                o[f.index(m, c)] -= (beta(g, m, c) + cfg.phys.lambda) / R * f(m, c);
    }
}

/// phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2.
inline double phi1(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }

inline double phi2(double z) {
    if (std::fabs(z) < 0.1) {
        double term = 0.5, sum = 0.0;
        for (int k = 0; k < 10; ++k) {
            sum += term;
            term *= z / (k + 3);
        }
        return sum;
    }
    return (std::expm1(z) - z) / (z * z);
}

}  // namespace detail

/// da/dt for the full field.
inline SpectralField rhs(const SimConfig& cfg, const SpectralField& f) {
    SpectralField out(f.geom(), f.lattice(), f.is_real());
    detail::add_rhs(cfg, f, out, true);
    return out;
}

/// ||rhs|| / ||field|| in coefficient space.
inline double steady_residual(const SimConfig& cfg, const SpectralField& f) {
    const double fn = coeff_norm(f);
    return fn == 0.0 ? coeff_norm(rhs(cfg, f)) : coeff_norm(rhs(cfg, f)) / fn;
}

struct ComovingResidual {
    double residual = 0.0;  ///< ||rhs - c d/dx psi|| / ||psi|| at the best drift speed c
    double speed = 0.0;     ///< c; the pattern moves as psi(x - c t)
};

/// Residual of a relative equilibrium: steady up to a uniform drift in x.
inline ComovingResidual comoving_residual(const SimConfig& cfg, const SpectralField& f) {
    const auto r = rhs(cfg, f);
    // d/dt psi = -c d/dx psi for psi(x - c t)
    SpectralField dx(f.geom(), f.lattice());
    for (int m = 1; m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) dx.set(m, c, -cplx(0.0, m * f.geom().kx) * f(m, c));
    const double d2 = inner(dx, dx).real();
    ComovingResidual out;
    out.speed = d2 > 0.0 ? inner(r, dx).real() / d2 : 0.0;
    const double fn = coeff_norm(f);
    const double rn = coeff_norm(r - out.speed * dx);
    out.residual = fn == 0.0 ? rn : rn / fn;
    return out;
}

/// ETDRK2 integrator with precomputed per-mode factors.
class Stepper {
public:
    explicit Stepper(const SimConfig& cfg) : cfg_(cfg), lat_(cfg.lattice()), h_(cfg.effective_dt()) {
        cfg_.validate();
        const std::size_t n = static_cast<std::size_t>(2 * lat_.mx_max + 1) * static_cast<std::size_t>(lat_.c_max);
        e_.resize(n);
        p1_.resize(n);
        p2_.resize(n);
        for (int m = -lat_.mx_max; m <= lat_.mx_max; ++m)
            for (int c = 1; c <= lat_.c_max; ++c) {
                const double lin = cfg.dissipation ? -(beta(cfg.geom, m, c) + cfg.phys.lambda) / cfg.phys.reynolds : 0.0;
                const double z = lin * h_;
                const std::size_t i = static_cast<std::size_t>(m + lat_.mx_max) * lat_.c_max + (c - 1);
                e_[i] = std::exp(z);
                p1_[i] = h_ * detail::phi1(z);
                p2_[i] = h_ * detail::phi2(z);
            }
    }

    double dt() const { return h_; }
    Lattice lattice() const { return lat_; }
    const SimConfig& config() const { return cfg_; }

    void step(SimState& s) const {
        if (!(s.field.lattice() == lat_)) throw ValidationError("step: state lattice differs from config");
        SpectralField n0(s.field.geom(), lat_), n1(s.field.geom(), lat_);
        detail::add_rhs(cfg_, s.field, n0, false);
        SpectralField a = s.field;
        auto ar = a.raw();
        const auto u = s.field.coeffs();
        const auto nu = n0.coeffs();
        for (std::size_t i = 0; i < ar.size(); ++i) ar[i] = e_[i] * u[i] + p1_[i] * nu[i];
        detail::add_rhs(cfg_, a, n1, false);
        const auto na = n1.coeffs();
        for (std::size_t i = 0; i < ar.size(); ++i) ar[i] += p2_[i] * (na[i] - nu[i]);
        a.enforce_reality();
        for (std::size_t i = 0; i < ar.size(); ++i) {
            if (!(std::abs(ar[i]) <= 1e9)) {
                const int m = static_cast<int>(i / lat_.c_max) - lat_.mx_max;
                const int c = static_cast<int>(i % lat_.c_max) + 1;
                throw BlowUpError("blow-up at t=" + std::to_string(s.t + h_) + " in mode (" + std::to_string(m) +
                                      "," + std::to_string(c) + ")",
                                  s.t + h_);
            }
        }
        s.field = std::move(a);
        s.t += h_;
        ++s.steps;
    }

private:
    SimConfig cfg_;
    Lattice lat_;
    double h_;
    std::vector<double> e_, p1_, p2_;
};

inline SimState step(const SimConfig& cfg, SimState s) {
    Stepper(cfg).step(s);
    return s;
}

inline SimState initial_state(const SimConfig& cfg, const SpectralField& initial) {
    SimState s;
    s.field = initial.resized(cfg.lattice(), Truncation::truncate);
    s.field.enforce_reality();
    return s;
}

/// Marches for a fixed number of steps, calling observe every snapshot interval.
inline SimState integrate(const SimConfig& cfg, SimState s, double duration,
                          const std::function<void(const SimState&)>& observe = {}) {
    const Stepper st(cfg);
    const long n = static_cast<long>(std::llround(duration / st.dt()));
    const long every = std::max(1L, static_cast<long>(std::llround(cfg.snapshot_every / st.dt())));
    for (long k = 1; k <= n; ++k) {
        st.step(s);
        if (observe && k % every == 0) observe(s);
    }
    return s;
}

struct SteadyResult {
    SimState state;
    bool converged = false;
};

inline double state_residual(const SimConfig& cfg, const SpectralField& f) {
    return cfg.modulo_translation ? comoving_residual(cfg, f).residual : steady_residual(cfg, f);
}

/// Marches until the residual stays below steady_tol for 10 consecutive
/// snapshots, or until t_end.
inline SteadyResult run_to_steady(const SimConfig& cfg, const SpectralField& initial,
                                  const std::function<void(const SimState&)>& observe = {}) {
    const Stepper st(cfg);
    SteadyResult r;
    r.state = initial_state(cfg, initial);
    const long every = std::max(1L, static_cast<long>(std::llround(cfg.snapshot_every / st.dt())));
    const long n = static_cast<long>(std::ceil(cfg.t_end / st.dt() - 1e-9));
    int streak = 0;
    r.state.residual = state_residual(cfg, r.state.field);
    if (observe) observe(r.state);
    for (long k = 1; k <= n; ++k) {
        st.step(r.state);
        if (k % every == 0 || k == n) {
            r.state.residual = state_residual(cfg, r.state.field);
            if (observe) observe(r.state);
            streak = r.state.residual < cfg.steady_tol ? streak + 1 : 0;
            if (streak >= 10) {
                r.converged = true;
                break;
            }
        }
    }
    r.state.residual = state_residual(cfg, r.state.field);
    return r;
}

struct EnergyBalance {
    double lhs_sum = 0.0;  ///< sum over beta < 1 of |a|^2 (beta + lambda) beta (1 - beta)
    double rhs_sum = 0.0;  ///< sum over beta > 1 of |a|^2 (beta + lambda) beta (beta - 1)
    double imbalance = 0.0;
};

/// Balance of energy transfer between modes with beta < 1 and beta > 1.
/// (1/2) d/dt sum beta (beta - 1) |a|^2 = (lhs_sum - rhs_sum) / R.
inline EnergyBalance steady_energy_balance(const SpectralField& f, double lambda) {
    EnergyBalance b;
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) {
            const double be = beta(f.geom(), m, c);
            const double w = std::norm(f(m, c)) * (be + lambda) * be * (be - 1.0);
            if (be < 1.0)
                b.lhs_sum -= w;
            else if (be > 1.0)
                b.rhs_sum += w;
        }
    const double scale = std::max(b.lhs_sum, b.rhs_sum);
    b.imbalance = scale > 0.0 ? std::fabs(b.lhs_sum - b.rhs_sum) / scale : 0.0;
    return b;
}

/// sum beta (beta - 1) |a|^2, whose rate the balance above describes.
inline double balance_energy(const SpectralField& f) {
    double s = 0.0;
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) {
            const double be = beta(f.geom(), m, c);
            s += be * (be - 1.0) * std::norm(f(m, c));
        }
    return s;
}

// ---------------------------------------------------------------------------
// Distances modulo streamwise translation.

struct ShiftedDistance {
    double distance = 0.0;  ///< min over shifts of ||f - shift(g)|| / (||f|| + ||g||) * 2
    double shift = 0.0;
};

inline ShiftedDistance shifted_distance(const SpectralField& f, const SpectralField& g) {
    f.require_same(g);
    const double k = f.geom().kx;
    const double period = 2.0 * std::numbers::pi / k;
    const double nf = norm(f), ng = norm(g);
    const double scale = 0.5 * (nf + ng);
    ShiftedDistance best{std::numeric_limits<double>::infinity(), 0.0};
    if (scale == 0.0) return {0.0, 0.0};
    // ||f - S g||^2 = ||f||^2 + ||g||^2 - 2 Re sum_m e^{-i m k d} c_m
    std::vector<cplx> cm(static_cast<std::size_t>(2 * f.mx_max() + 1));
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m) {
        cplx s{};
        for (int c = 1; c <= f.c_max(); ++c) s += std::conj(f(m, c)) * g(m, c);
        cm[m + f.mx_max()] = s;
    }
    const double measure = (2.0 * std::numbers::pi / k) * (f.geom().n_walls * std::numbers::pi);
    auto dist2 = [&](double d) {
        double cross = 0.0;
        for (int m = -f.mx_max(); m <= f.mx_max(); ++m) cross += (std::polar(1.0, m * k * d) * cm[m + f.mx_max()]).real();
        return std::max(0.0, nf * nf + ng * ng - 2.0 * measure * cross);
    };
    const int n = 360 * std::max(1, f.mx_max());
    double bd = 0.0, bv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double d = period * i / n;
        const double v = dist2(d);
        if (v < bv) bv = v, bd = d;
    }
    // golden-section refinement around the grid minimum
    double lo = bd - period / n, hi = bd + period / n;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = dist2(x1), f2 = dist2(x2);
    for (int it = 0; it < 100 && hi - lo > 1e-15 * period; ++it) {
        if (f1 < f2) {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = dist2(x1);
        } else {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = dist2(x2);
        }
    }
    const double xm = 0.5 * (lo + hi);
    const double vm = dist2(xm);
    if (vm < bv) bv = vm, bd = xm;
    best.distance = std::sqrt(bv) / scale;
    best.shift = bd;
    return best;
}

// ---------------------------------------------------------------------------
// Sensitivity experiments.

struct SensitivityRun {
    int id = 0;
    bool blew_up = false;
    std::string error;
    SimState final_state;
    std::vector<double> end_spectrum;  ///< energy_split of the final field
};

struct SensitivityReport {
    std::vector<double> times;
    std::vector<SensitivityRun> runs;
    /// pair_distance[k][t]: pairs (i < j) in lexicographic order, shifted distance at times[t]
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::vector<double>> pair_distance;
    double max_final_distance() const {
        double d = 0.0;
        for (const auto& row : pair_distance)
            if (!row.empty()) d = std::max(d, row.back());
        return d;
    }
};

/// psi_0 plus a seeded random perturbation of the given coefficient-norm,
/// spread over |m| <= mx_max and c <= 8 N.
inline SpectralField random_perturbed_basic_flow(const SimConfig& cfg, std::uint64_t seed, double scale) {
    const auto lat = cfg.lattice();
    auto f = basic_flow(cfg.geom, cfg.phys.lambda, lat);
    if (scale == 0.0) return f;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralField p(cfg.geom, lat);
    const int cmax = std::min(lat.c_max, 8 * cfg.geom.n_walls);
    for (int m = 0; m <= lat.mx_max; ++m)
        for (int c = 1; c <= cmax; ++c) {
            const double re = u(rng), im = u(rng);
            p.set(m, c, m == 0 ? cplx(re, 0.0) : cplx(re, im));
        }
    p *= scale / coeff_norm(p);
    return f + p;
}

/// Independent trajectories from seeds cfg.seed + run id, run concurrently.
inline SensitivityReport sensitivity_run(const SimConfig& cfg, int n_runs, double perturb_scale,
                                         unsigned max_threads = 0) {
    if (n_runs < 2) throw ValidationError("sensitivity_run: n_runs must be >= 2");
    cfg.validate();
    SensitivityReport rep;
    rep.runs.resize(n_runs);
    std::vector<std::vector<SpectralField>> snaps(n_runs);
    std::vector<std::vector<double>> times(n_runs);
    auto work = [&](int id) {
        auto& run = rep.runs[id];
        run.id = id;
        try {
            SimState s = initial_state(cfg, random_perturbed_basic_flow(cfg, cfg.seed + id, perturb_scale));
            snaps[id].push_back(s.field);
            times[id].push_back(s.t);
            s = integrate(cfg, s, cfg.t_end, [&](const SimState& st) {
                snaps[id].push_back(st.field);
                times[id].push_back(st.t);
            });
            run.final_state = s;
            run.end_spectrum = energy_split(s.field, cfg.phys.lambda);
        } catch (const BlowUpError& e) {
            run.blew_up = true;
            run.error = e.what();
        }
    };
    unsigned nt = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
    for (int first = 0; first < n_runs; first += static_cast<int>(nt)) {
        std::vector<std::thread> pool;
        for (int id = first; id < std::min(n_runs, first + static_cast<int>(nt)); ++id) pool.emplace_back(work, id);
        for (auto& t : pool) t.join();
    }
    std::size_t n_t = std::numeric_limits<std::size_t>::max();
    for (int i = 0; i < n_runs; ++i)
        if (!rep.runs[i].blew_up) n_t = std::min(n_t, snaps[i].size());
    if (n_t == std::numeric_limits<std::size_t>::max()) n_t = 0;
    for (int i = 0; i < n_runs && rep.times.empty(); ++i)
        if (!rep.runs[i].blew_up) rep.times.assign(times[i].begin(), times[i].begin() + n_t);
    for (int i = 0; i < n_runs; ++i)
        for (int j = i + 1; j < n_runs; ++j) {
            if (rep.runs[i].blew_up || rep.runs[j].blew_up) continue;
            rep.pairs.emplace_back(i, j);
            std::vector<double> row(n_t);
            for (std::size_t t = 0; t < n_t; ++t) row[t] = shifted_distance(snaps[i][t], snaps[j][t]).distance;
            rep.pair_distance.push_back(std::move(row));
        }
    return rep;
}

}  // namespace kolmo
