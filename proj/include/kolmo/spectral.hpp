#pragma once

// Galerkin fields on the (m, c) lattice and the exact spectral operators.
//
// A field is f(x, y) = sum a_{m,c} e^{i m kx x} sin((c/2N) y) with
// |m| <= mx_max and 1 <= c <= c_max. Real fields keep a_{-m,c} = conj(a_{m,c}).
// Products are evaluated by exact convolution with
//     sin(p y) cos(q y) = (sin((p+q) y) + sin((p-q) y)) / 2
// and sin(-p y) = -sin(p y), so there is no aliasing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kolmo/domain.hpp"
#include "kolmo/linstab.hpp"

namespace kolmo {

using cplx = std::complex<double>;

struct Lattice {
    int mx_max = 2;
    int c_max = 64;
    friend bool operator==(const Lattice&, const Lattice&) = default;
};

enum class Truncation { exact, truncate };

class SpectralField {
public:
    SpectralField() = default;
    SpectralField(const GeometryParams& g, Lattice lat, bool real = true)
        : geom_(g), lat_(lat), real_(real),
          coeff_(static_cast<std::size_t>(2 * lat.mx_max + 1) * static_cast<std::size_t>(lat.c_max)) {
        if (lat.mx_max < 0 || lat.c_max < 1) throw ValidationError("SpectralField: bad lattice");
    }

    const GeometryParams& geom() const { return geom_; }
    Lattice lattice() const { return lat_; }
    int mx_max() const { return lat_.mx_max; }
    int c_max() const { return lat_.c_max; }
    bool is_real() const { return real_; }
    std::size_t size() const { return coeff_.size(); }

    bool contains(int m, std::int64_t c) const { return std::abs(m) <= lat_.mx_max && c >= 1 && c <= lat_.c_max; }

    cplx operator()(int m, std::int64_t c) const { return contains(m, c) ? coeff_[index(m, c)] : cplx{}; }

    /// Sets a_{m,c}; a real field also sets its mirror a_{-m,c}.
    void set(int m, std::int64_t c, cplx v) {
        check(m, c);
        if (real_) {
            if (m == 0) v = v.real();
            coeff_[index(-m, c)] = std::conj(v);
        }
        coeff_[index(m, c)] = v;
    }

    void add(int m, std::int64_t c, cplx v) { set(m, c, (*this)(m, c) + v); }

    std::span<const cplx> coeffs() const { return coeff_; }
    /// Raw access; call enforce_reality() afterwards on real fields.
    std::span<cplx> raw() { return coeff_; }
    std::span<const cplx> block(int m) const {
        return std::span<const cplx>(coeff_).subspan(index(m, 1), static_cast<std::size_t>(lat_.c_max));
    }

    std::size_t index(int m, std::int64_t c) const {
        return static_cast<std::size_t>(m + lat_.mx_max) * static_cast<std::size_t>(lat_.c_max) +
               static_cast<std::size_t>(c - 1);
    }

    /// Projects onto real fields: a_{m} <- (a_m + conj(a_{-m})) / 2.
    void enforce_reality() {
        real_ = true;
        for (int m = 0; m <= lat_.mx_max; ++m) {
            for (int c = 1; c <= lat_.c_max; ++c) {
                const cplx v = 0.5 * (coeff_[index(m, c)] + std::conj(coeff_[index(-m, c)]));
                coeff_[index(m, c)] = (m == 0) ? cplx(v.real(), 0.0) : v;
                coeff_[index(-m, c)] = std::conj(coeff_[index(m, c)]);
            }
        }
    }

    /// Max |a_{m,c} - conj(a_{-m,c})|.
    double reality_defect() const {
        double d = 0.0;
        for (int m = 0; m <= lat_.mx_max; ++m)
            for (int c = 1; c <= lat_.c_max; ++c)
                d = std::max(d, std::abs(coeff_[index(m, c)] - std::conj(coeff_[index(-m, c)])));
        return d;
    }

    bool finite() const {
        return std::all_of(coeff_.begin(), coeff_.end(),
                           [](cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }

    /// Same function on another lattice; modes that do not fit must be zero
    /// unless truncation is requested.
    SpectralField resized(Lattice lat, Truncation t = Truncation::exact) const {
        SpectralField out(geom_, lat, real_);
        for (int m = -lat_.mx_max; m <= lat_.mx_max; ++m)
            for (int c = 1; c <= lat_.c_max; ++c) {
                const cplx v = coeff_[index(m, c)];
                if (out.contains(m, c))
                    out.coeff_[out.index(m, c)] = v;
                else if (v != cplx{} && t == Truncation::exact)
                    throw ValidationError("resized: nonzero mode outside target lattice");
            }
        return out;
    }

    SpectralField conj() const {
        SpectralField out(geom_, lat_, real_);
        for (int m = -lat_.mx_max; m <= lat_.mx_max; ++m)
            for (int c = 1; c <= lat_.c_max; ++c) out.coeff_[out.index(-m, c)] = std::conj(coeff_[index(m, c)]);
        return out;
    }

    SpectralField& operator+=(const SpectralField& o) { return axpy(1.0, o); }
    SpectralField& operator-=(const SpectralField& o) { return axpy(-1.0, o); }
    SpectralField& operator*=(cplx s) {
        for (auto& v : coeff_) v *= s;
        if (s.imag() != 0.0) real_ = false;
        return *this;
    }
    SpectralField& operator*=(double s) {
        for (auto& v : coeff_) v *= s;
        return *this;
    }

    /// this += s * o; o must live on the same lattice.
    SpectralField& axpy(cplx s, const SpectralField& o) {
        require_same(o);
        for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += s * o.coeff_[i];
        real_ = real_ && o.real_ && s.imag() == 0.0;
        return *this;
    }

    void require_same(const SpectralField& o) const {
        if (!(lat_ == o.lat_) || geom_.n_walls != o.geom_.n_walls || geom_.kx != o.geom_.kx)
            throw ValidationError("fields live on different lattices");
    }

private:
    void check(int m, std::int64_t c) const {
        if (!contains(m, c)) throw ValidationError("mode (" + std::to_string(m) + "," + std::to_string(c) +
                                                   ") outside lattice");
    }

    GeometryParams geom_;
    Lattice lat_;
    bool real_ = true;
    std::vector<cplx> coeff_;
};

inline SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
inline SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
inline SpectralField operator*(double s, SpectralField a) { return a *= s; }
inline SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

/// Basic flow sin(y) / (1 + lambda), i.e. a_{0,2N} = 1/(1+lambda).
inline SpectralField basic_flow(const GeometryParams& g, double lambda, Lattice lat) {
    SpectralField f(g, lat);
    f.set(0, g.denom(), 1.0 / (1.0 + lambda));
    return f;
}

inline SpectralField laplacian(const SpectralField& f) {
    SpectralField out = f;
    auto raw = out.raw();
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) raw[f.index(m, c)] *= -beta(f.geom(), m, c);
    return out;
}

/// <f, g> = int int f conj(g) dx dy over one period and the duct.
inline cplx inner(const SpectralField& f, const SpectralField& g) {
    f.require_same(g);
    const auto a = f.coeffs(), b = g.coeffs();
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::conj(b[i]);
    const double measure = (2.0 * std::numbers::pi / f.geom().kx) * (f.geom().n_walls * std::numbers::pi);
    return measure * s;
}

inline double norm(const SpectralField& f) { return std::sqrt(inner(f, f).real()); }

/// Coefficient-space Euclidean norm, without the domain measure.
inline double coeff_norm(const SpectralField& f) {
    double s = 0.0;
    for (cplx v : f.coeffs()) s += std::norm(v);
    return std::sqrt(s);
}

/// Translation x -> x + shift: a_{m,c} e^{i m kx shift}.
inline SpectralField shift_x(const SpectralField& f, double shift) {
    SpectralField out = f;
    auto raw = out.raw();
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m) {
        const cplx ph = std::polar(1.0, m * f.geom().kx * shift);
        for (int c = 1; c <= f.c_max(); ++c) raw[f.index(m, c)] *= ph;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinear term N(f, g) = f_x (Lap g)_y - f_y (Lap g)_x.
//
// For f = A e^{i m1 k x} sin(p y), g = B e^{i m2 k x} sin(q y), p = c1/2N, q = c2/2N:
//   N = -(i k beta2 / 2) A B e^{i(m1+m2) k x}
//       [ (m1 q - m2 p) sin((p+q) y) + (m1 q + m2 p) sin((p-q) y) ].

namespace detail {

inline void lattice_overflow(const char* op) {
    throw ValidationError(std::string(op) + ": output falls outside the lattice (pass Truncation::truncate)");
}

}  // namespace detail

inline Lattice advection_lattice(const SpectralField& f, const SpectralField& g) {
    return {f.mx_max() + g.mx_max(), f.c_max() + g.c_max()};
}

inline SpectralField advection(const SpectralField& f, const SpectralField& g, Lattice out_lat,
                               Truncation trunc = Truncation::exact) {
    if (f.geom().n_walls != g.geom().n_walls || f.geom().kx != g.geom().kx)
        throw ValidationError("advection: fields from different geometries");
    const GeometryParams& geo = f.geom();
    const bool real_out = f.is_real() && g.is_real();
    SpectralField out(geo, out_lat, real_out);
    auto o = out.raw();
    const double k = geo.kx;
    const double inv2n = 1.0 / geo.denom();
    const int C1 = f.c_max(), C2 = g.c_max(), Co = out_lat.c_max;
    const auto fa = f.coeffs();
    const auto ga = g.coeffs();

    // beta2-weighted g once per block
    std::vector<cplx> gb(ga.size());
    for (int m2 = -g.mx_max(); m2 <= g.mx_max(); ++m2)
        for (int c2 = 1; c2 <= C2; ++c2) gb[g.index(m2, c2)] = ga[g.index(m2, c2)] * beta(geo, m2, c2);
    std::vector<int> nz2;
    nz2.reserve(static_cast<std::size_t>(C2));

    for (int m1 = -f.mx_max(); m1 <= f.mx_max(); ++m1) {
        for (int m2 = -g.mx_max(); m2 <= g.mx_max(); ++m2) {
            const int m = m1 + m2;
            // real output: the m < 0 half is the mirror of m > 0
            if (real_out && m < 0) continue;
            const bool m_in = std::abs(m) <= out_lat.mx_max;
            nz2.clear();
            for (int c2 = 1; c2 <= C2; ++c2)
                if (gb[g.index(m2, c2)] != cplx{}) nz2.push_back(c2);
            if (nz2.empty()) continue;
            cplx* orow = m_in ? &o[out.index(m, 1)] - 1 : nullptr;  // orow[c], c >= 1
            for (int c1 = 1; c1 <= C1; ++c1) {
                const cplx A = fa[f.index(m1, c1)];
                if (A == cplx{}) continue;
                // -(i k / 2) A
                const cplx pre = cplx(0.0, -0.5 * k) * A;
                for (int c2 : nz2) {
                    const cplx w = pre * gb[g.index(m2, c2)];
                    const double coef_sum = (m1 * c2 - m2 * c1) * inv2n;
                    const double coef_dif = (m1 * c2 + m2 * c1) * inv2n;
                    const int cs = c1 + c2;
                    const int cd = c1 - c2;
                    if (coef_sum != 0.0) {
                        if (m_in && cs <= Co)
                            orow[cs] += w * coef_sum;
                        else if (trunc == Truncation::exact)
                            detail::lattice_overflow("advection");
                    }
                    if (cd != 0 && coef_dif != 0.0) {
                        const int ca = cd > 0 ? cd : -cd;
                        const double sg = cd > 0 ? 1.0 : -1.0;
                        if (m_in && ca <= Co)
                            orow[ca] += (sg * coef_dif) * w;
                        else if (trunc == Truncation::exact)
                            detail::lattice_overflow("advection");
                    }
                }
            }
        }
    }
    if (real_out) {
        for (int m = 1; m <= out_lat.mx_max; ++m)
            for (int c = 1; c <= Co; ++c) o[out.index(-m, c)] = std::conj(o[out.index(m, c)]);
        for (int c = 1; c <= Co; ++c) o[out.index(0, c)] = o[out.index(0, c)].real();
    }
    return out;
}

/// Exact N(f, g) on the widened lattice.
inline SpectralField advection(const SpectralField& f, const SpectralField& g) {
    return advection(f, g, advection_lattice(f, g), Truncation::exact);
}

// ---------------------------------------------------------------------------
// Linearized operator about the basic flow
//   L f = -(lambda/R) Lap f + (1/R) Lap^2 f - (1/(1+lambda)) cos y (Lap + 1) f_x.
// Mode (m, c): diagonal beta(beta + lambda)/R, and the cos y term sends it to
// c +- 2N with weight i m kx (beta - 1) / (2 (1 + lambda)) (folded sign below 0).

struct ModeCoupling {
    double diagonal = 0.0;
    cplx shear{};  ///< weight onto c + 2N and (signed) c - 2N
};

inline ModeCoupling l_coupling(const PhysicalParams& p, const GeometryParams& g, int m, std::int64_t c) {
    const double b = beta(g, m, c);
    return {b * (b + p.lambda) / p.reynolds, cplx(0.0, m * g.kx * (b - 1.0) / (2.0 * (1.0 + p.lambda)))};
}

inline Lattice apply_L_lattice(const SpectralField& f) { return {f.mx_max(), f.c_max() + f.geom().denom()}; }

inline SpectralField apply_L(const PhysicalParams& p, const SpectralField& f, Lattice out_lat,
                             Truncation trunc = Truncation::exact) {
    const GeometryParams& g = f.geom();
    const int two_n = g.denom();
    SpectralField out(g, out_lat, f.is_real());
    auto o = out.raw();
    auto put = [&](int m, int c, cplx v) {
        if (out.contains(m, c))
            o[out.index(m, c)] += v;
        else if (v != cplx{} && trunc == Truncation::exact)
            detail::lattice_overflow("apply_L");
    };
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) {
            const cplx a = f(m, c);
            if (a == cplx{}) continue;
            const auto cp = l_coupling(p, g, m, c);
            put(m, c, cp.diagonal * a);
            if (m == 0) continue;
            put(m, c + two_n, cp.shear * a);
            if (c > two_n)
                put(m, c - two_n, cp.shear * a);
            else if (c < two_n)
                put(m, two_n - c, -cp.shear * a);
        }
    return out;
}

inline SpectralField apply_L(const PhysicalParams& p, const SpectralField& f) {
    return apply_L(p, f, apply_L_lattice(f), Truncation::exact);
}

// ---------------------------------------------------------------------------
// Blockwise inverse. Within block m the cos y coupling links c to c +- 2N, so
// the block splits into chains ordered by signed wavenumber r + 2N n; each
// chain is tridiagonal (the c = N chain folds onto itself at its first entry).

namespace detail {

/// Complex tridiagonal solve with partial pivoting (LAPACK gtsv scheme).
/// sub[i] = A(i+1, i), diag[i] = A(i, i), sup[i] = A(i, i+1). Overwrites rhs.
/// Returns min |pivot| / max |pivot|.
inline double tridiag_solve(std::vector<cplx> sub, std::vector<cplx> diag, std::vector<cplx> sup,
                            std::vector<cplx>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return 1.0;
    std::vector<cplx> sup2(n, cplx{});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(diag[i]) >= std::abs(sub[i])) {
            if (diag[i] == cplx{}) return 0.0;
            const cplx f = sub[i] / diag[i];
            diag[i + 1] -= f * sup[i];
            rhs[i + 1] -= f * rhs[i];
            sub[i] = 0.0;
        } else {
            const cplx f = diag[i] / sub[i];
            diag[i] = sub[i];
            const cplx t = diag[i + 1];
            diag[i + 1] = sup[i] - f * t;
            if (i + 2 < n) {
                sup2[i] = sup[i + 1];
                sup[i + 1] = -f * sup2[i];
            }
            sup[i] = t;
            std::swap(rhs[i], rhs[i + 1]);
            rhs[i + 1] -= f * rhs[i];
        }
    }
    double pmin = std::abs(diag[0]), pmax = pmin;
    for (std::size_t i = 0; i < n; ++i) {
        pmin = std::min(pmin, std::abs(diag[i]));
        pmax = std::max(pmax, std::abs(diag[i]));
    }
    if (pmin == 0.0) return 0.0;
    rhs[n - 1] /= diag[n - 1];
    if (n > 1) rhs[n - 2] = (rhs[n - 2] - sup[n - 2] * rhs[n - 1]) / diag[n - 2];
    for (std::size_t ii = n - 2; ii-- > 0;) rhs[ii] = (rhs[ii] - sup[ii] * rhs[ii + 1] - sup2[ii] * rhs[ii + 2]) / diag[ii];
    return pmin / pmax;
}

/// Lattice numerators c <= c_max on the chain through residue r (0 <= r <= N),
/// in the order in which the shear term couples neighbours.
inline std::vector<int> chain_members(int r, int n_walls, int c_max) {
    const int two_n = 2 * n_walls;
    std::vector<int> cs;
    if (r == 0 || r == n_walls) {
        for (int c = (r == 0 ? two_n : n_walls); c <= c_max; c += two_n) cs.push_back(c);
        return cs;
    }
    // signed values r + 2N n, most negative first
    std::vector<int> neg;
    for (int c = two_n - r; c <= c_max; c += two_n) neg.push_back(c);
    cs.assign(neg.rbegin(), neg.rend());
    for (int c = r; c <= c_max; c += two_n) cs.push_back(c);
    return cs;
}

}  // namespace detail

struct BlockSolveOptions {
    double max_condition = 1e10;
};

/// Dense matrix of block m of L restricted to the lattice (for inspection and tests).
inline std::vector<std::vector<cplx>> block_matrix(const PhysicalParams& p, const GeometryParams& g, int m,
                                                   int c_max) {
    std::vector<std::vector<cplx>> A(c_max, std::vector<cplx>(c_max, cplx{}));
    const int two_n = g.denom();
    for (int c = 1; c <= c_max; ++c) {
        const auto cp = l_coupling(p, g, m, c);
        A[c - 1][c - 1] += cp.diagonal;
        if (m == 0) continue;
        if (c + two_n <= c_max) A[c + two_n - 1][c - 1] += cp.shear;
        if (c > two_n)
            A[c - two_n - 1][c - 1] += cp.shear;
        else if (c < two_n)
            A[two_n - c - 1][c - 1] -= cp.shear;
    }
    return A;
}

/// Solves L x = rhs on block m (c <= rhs.c_max()). Fails when the block is
/// numerically singular.
inline std::vector<cplx> solve_L_block(const PhysicalParams& p, const SpectralField& rhs, int m,
                                       const BlockSolveOptions& opt = {}) {
    const GeometryParams& g = rhs.geom();
    const int C = rhs.c_max();
    const int two_n = g.denom();
    std::vector<cplx> x(static_cast<std::size_t>(C), cplx{});
    const auto b = rhs.block(m);
    if (m == 0) {
        for (int c = 1; c <= C; ++c) x[c - 1] = b[c - 1] / l_coupling(p, g, 0, c).diagonal;
        return x;
    }
    double anorm = 0.0;
    for (int c = 1; c <= C; ++c) {
        const auto cp = l_coupling(p, g, m, c);
        anorm = std::max(anorm, std::abs(cp.diagonal) + 2.0 * std::abs(cp.shear));
    }
    for (int r = 0; r <= g.n_walls; ++r) {
        const auto cs = detail::chain_members(r, g.n_walls, C);
        const std::size_t n = cs.size();
        if (n == 0) continue;
        std::vector<cplx> sub(n > 0 ? n - 1 : 0), diag(n), sup(n > 0 ? n - 1 : 0), v(n);
        double bnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = b[cs[i] - 1];
            bnorm = std::max(bnorm, std::abs(v[i]));
        }
        // column i: the image of mode cs[i]
        for (std::size_t i = 0; i < n; ++i) {
            const int c = cs[i];
            const auto cp = l_coupling(p, g, m, c);
            diag[i] += cp.diagonal;
            auto place = [&](int target, cplx w) {
                if (target < 1 || target > C) return;
                if (i + 1 < n && cs[i + 1] == target)
                    sub[i] += w;
                else if (i > 0 && cs[i - 1] == target)
                    sup[i - 1] += w;
                else if (target == c)
                    diag[i] += w;
                else
                    throw NumericalError("solve_L_block: chain is not tridiagonal");
            };
            place(c + two_n, cp.shear);
            if (c > two_n)
                place(c - two_n, cp.shear);
            else if (c < two_n)
                place(two_n - c, -cp.shear);
        }
        if (bnorm == 0.0) continue;
        const double pivot_ratio = detail::tridiag_solve(sub, diag, sup, v);
        double xnorm = 0.0;
        for (auto& vi : v) xnorm = std::max(xnorm, std::abs(vi));
        const double cond_est = std::max(pivot_ratio > 0.0 ? 1.0 / pivot_ratio : INFINITY, anorm * xnorm / bnorm);
        if (!(cond_est <= opt.max_condition))
            throw NumericalError("solve_L_block: block m=" + std::to_string(m) + " (chain r=" + std::to_string(r) +
                                 ") is singular or near-singular");
        for (std::size_t i = 0; i < n; ++i) x[cs[i] - 1] = v[i];
    }
    return x;
}

/// Solves L x = rhs block by block for every block with content.
inline SpectralField solve_L(const PhysicalParams& p, const SpectralField& rhs, const BlockSolveOptions& opt = {}) {
    SpectralField out(rhs.geom(), rhs.lattice(), rhs.is_real());
    auto o = out.raw();
    for (int m = -rhs.mx_max(); m <= rhs.mx_max(); ++m) {
        const auto b = rhs.block(m);
        if (std::all_of(b.begin(), b.end(), [](cplx v) { return v == cplx{}; })) continue;
        if (rhs.is_real() && m < 0) continue;
        const auto x = solve_L_block(p, rhs, m, opt);
        for (int c = 1; c <= rhs.c_max(); ++c) o[out.index(m, c)] = x[c - 1];
    }
    if (rhs.is_real())
        for (int m = 1; m <= rhs.mx_max(); ++m)
            for (int c = 1; c <= rhs.c_max(); ++c) o[out.index(-m, c)] = std::conj(o[out.index(m, c)]);
    return out;
}

// ---------------------------------------------------------------------------
// Eigenfields.

struct EigenFields {
    SpectralField psi;        ///< complex eigenfunction, block m = 1 only
    SpectralField psi_star;   ///< complex conjugate eigenfunction
    SpectralField psi1, psi2; ///< Re psi, Im psi
    SpectralField psi1_star, psi2_star;
};

/// Lattice that holds every eigen coefficient of e.
inline int eigen_c_max(const GeometryParams& g, const EigenSolution& e) { return g.denom() * (e.depth + 1); }

inline SpectralField field_from_coefficients(const GeometryParams& g, const std::vector<double>& coeffs, int depth,
                                             Lattice lat) {
    SpectralField f(g, lat, false);
    for (int n = -depth; n <= depth; ++n) {
        const auto img = eigen_to_lattice(n, g);
        if (img.mode.c > lat.c_max) {
            if (coeffs[n + depth] != 0.0) throw ValidationError("eigenfields: lattice too small for eigen depth");
            continue;
        }
        static const cplx quarter[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        f.set(1, img.mode.c, static_cast<double>(img.sign) * quarter[img.quarter_turn] * coeffs[n + depth]);
    }
    return f;
}

inline SpectralField real_part(const SpectralField& z) {
    SpectralField out(z.geom(), z.lattice(), true);
    auto o = out.raw();
    for (int m = -z.mx_max(); m <= z.mx_max(); ++m)
        for (int c = 1; c <= z.c_max(); ++c)
            o[out.index(m, c)] = 0.5 * (z(m, c) + std::conj(z(-m, c)));
    return out;
}

inline SpectralField imag_part(const SpectralField& z) {
    SpectralField out(z.geom(), z.lattice(), true);
    auto o = out.raw();
    for (int m = -z.mx_max(); m <= z.mx_max(); ++m)
        for (int c = 1; c <= z.c_max(); ++c)
            o[out.index(m, c)] = (z(m, c) - std::conj(z(-m, c))) / cplx(0.0, 2.0);
    return out;
}

inline EigenFields eigenfields(const GeometryParams& g, const EigenSolution& e, Lattice lat) {
    if (lat.mx_max < 1) throw ValidationError("eigenfields: lattice needs |m| >= 1");
    EigenFields ef;
    ef.psi = field_from_coefficients(g, e.phi, e.depth, lat);
    ef.psi_star = field_from_coefficients(g, e.phi_star, e.depth, lat);
    ef.psi1 = real_part(ef.psi);
    ef.psi2 = imag_part(ef.psi);
    ef.psi1_star = real_part(ef.psi_star);
    ef.psi2_star = imag_part(ef.psi_star);
    return ef;
}

inline EigenFields eigenfields(const GeometryParams& g, const EigenSolution& e) {
    return eigenfields(g, e, Lattice{1, eigen_c_max(g, e)});
}

// ---------------------------------------------------------------------------
// Physical-space sampling.

struct Grid2D {
    std::vector<double> x, y;
    std::vector<double> values;  ///< row-major, values[iy * x.size() + ix]
    double at(std::size_t ix, std::size_t iy) const { return values[iy * x.size() + ix]; }
};

/// Samples the real part of f on nx x ny points, x in [x0, x1], y in [0, 2N pi].
inline Grid2D sample_grid(const SpectralField& f, int nx, int ny, double x0, double x1) {
    if (nx < 2 || ny < 2) throw ValidationError("sample_grid: need at least 2 points per direction");
    const auto& g = f.geom();
    Grid2D grid;
    grid.x.resize(nx);
    grid.y.resize(ny);
    const double ytop = 2.0 * g.n_walls * std::numbers::pi;
    for (int i = 0; i < nx; ++i) grid.x[i] = x0 + (x1 - x0) * i / (nx - 1);
    for (int i = 0; i < ny; ++i) grid.y[i] = ytop * i / (ny - 1);
    grid.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    const int C = f.c_max();
    // profile_m(y) = sum_c a_{m,c} sin(c y / 2N)
    std::vector<cplx> prof(static_cast<std::size_t>(ny));
    for (int m = -f.mx_max(); m <= f.mx_max(); ++m) {
        const auto blk = f.block(m);
        if (std::all_of(blk.begin(), blk.end(), [](cplx v) { return v == cplx{}; })) continue;
        for (int iy = 0; iy < ny; ++iy) {
            cplx s{};
            const double y = grid.y[iy];
            // exact zeros on the walls
            if (iy == 0 || iy == ny - 1) {
                prof[iy] = 0.0;
                continue;
            }
            for (int c = 1; c <= C; ++c)
                if (blk[c - 1] != cplx{}) s += blk[c - 1] * std::sin(c * y / g.denom());
            prof[iy] = s;
        }
        for (int ix = 0; ix < nx; ++ix) {
            const cplx e = std::polar(1.0, m * g.kx * grid.x[ix]);
            for (int iy = 0; iy < ny; ++iy) grid.values[iy * nx + ix] += (prof[iy] * e).real();
        }
    }
    return grid;
}

}  // namespace kolmo
