#pragma once

// Center-manifold reduction at R = R_c and the circle of secondary states.
//
// Perturbations of the basic flow are written phi = z psi + conj(z psi) + h with
// psi the complex critical eigenfunction. To second order
//     h = z^2 h20 + |z|^2 h11 + conj(z^2 h20),
//     L h20 = -N(psi, psi),  L h11 = -(N(psi, conj psi) + N(conj psi, psi)),
// and projecting onto psi* gives dz/dt = mu z + (g / P) z |z|^2 with
//     g = <N(psi, h11) + N(conj psi, h20) + N(h11, psi) + N(h20, conj psi), psi*>,
//     P = <Lap psi, psi*>.
// In the real amplitude X = s1 + i s2 = 2 conj(z) this reads
//     dX/dt = mu X - (a + b) X |X|^2,
// with a, b the parts of -conj(g / P) / 4 coming from N(psi, .) and N(., psi).

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>

#include "kolmo/domain.hpp"
#include "kolmo/linstab.hpp"
#include "kolmo/spectral.hpp"

namespace kolmo {

struct NormalizedConjugates {
    SpectralField psi1_star, psi2_star;  ///< real pair with <Lap psi_i, psi_j*> = delta_ij
    SpectralField psi_star;              ///< psi1_star + i psi2_star
    double scale = 0.0;                  ///< factor applied to the raw conjugates
    double cross = 0.0;                  ///< max |<Lap psi_i, psi_j*>| for i != j after scaling
};

/// Scales the conjugate pair so that <Lap psi_i, psi_j*> = delta_ij.
inline NormalizedConjugates normalize_pair(const SpectralField& psi1, const SpectralField& psi2,
                                           const SpectralField& psi1_star, const SpectralField& psi2_star,
                                           double min_pairing = 1e-300) {
    const cplx p11 = inner(laplacian(psi1), psi1_star);
    const cplx p22 = inner(laplacian(psi2), psi2_star);
    if (!(std::abs(p11) > min_pairing) || !(std::abs(p22) > min_pairing))
        throw NumericalError("normalize_pair: degenerate pairing <Lap psi_1, psi_1*>");
    const double rel_mismatch = std::abs(p11 - p22) / std::abs(p11);
    if (rel_mismatch > 1e-10 || std::abs(p11.imag()) > 1e-12 * std::abs(p11))
        throw NumericalError("normalize_pair: pairings of psi_1 and psi_2 differ");
    NormalizedConjugates out;
    out.scale = 1.0 / p11.real();
    out.psi1_star = out.scale * psi1_star;
    out.psi2_star = out.scale * psi2_star;
    out.psi_star = out.psi1_star;
    out.psi_star.axpy(cplx(0.0, 1.0), out.psi2_star);
    out.cross = std::max(std::abs(inner(laplacian(psi1), out.psi2_star)),
                         std::abs(inner(laplacian(psi2), out.psi1_star)));
    return out;
}

struct BifurcationOptions {
    LinstabOptions linstab;
    BlockSolveOptions block;
    int c_pad_factor = 2;      ///< solve L on c <= (2 + c_pad_factor/4) * c_eigen
    double purity_tol = 1e-12; ///< allowed |m| = 1 content of N(psi_i, psi_j), relative
    double imag_tol = 1e-8;    ///< allowed imaginary part of a, b, relative
};

struct CenterManifoldData {
    double reynolds = 0.0;  ///< R at which L is taken (normally R_c)
    double sigma = 0.0;
    EigenFields eig;
    NormalizedConjugates conj;
    SpectralField h20, h11;       ///< complex quadratic fields
    SpectralField chi[2][2];      ///< real fields chi_ij = -L^{-1} N(psi_i, psi_j)
    double purity_defect = 0.0;   ///< largest |m| = 1 content of the quadratic forcing
    double chi_residual = 0.0;    ///< max ||L chi_ij + N(psi_i, psi_j)|| / ||N(psi_i, psi_j)||
    double a_coef = 0.0, b_coef = 0.0, landau = 0.0;
    cplx a_complex{}, b_complex{};
    cplx cubic_sum{};           ///< the four-term nondegeneracy sum with unit-pairing conjugate
    double imag_residue = 0.0;    ///< max(|Im a|, |Im b|) / |a + b|
    bool supercritical() const { return landau > 0.0; }
};

namespace detail {

inline double block_norm(const SpectralField& f, int m) {
    if (std::abs(m) > f.mx_max()) return 0.0;
    double s = 0.0;
    for (cplx v : f.block(m)) s += std::norm(v);
    return std::sqrt(s);
}

/// Solves L x = rhs after widening rhs to the given lattice.
inline SpectralField solve_wide(const PhysicalParams& p, const SpectralField& rhs, Lattice lat,
                                const BlockSolveOptions& opt) {
    return solve_L(p, rhs.resized(lat), opt);
}

}  // namespace detail

/// Quadratic center-manifold fields and Landau coefficients at the given R
/// (normally R_c, where the m = +-1 blocks of L are singular and untouched).
inline CenterManifoldData quadratic_manifold(const PhysicalParams& p, const GeometryParams& g,
                                             const EigenSolution& e, const BifurcationOptions& opt = {}) {
    CenterManifoldData d;
    d.reynolds = p.reynolds;
    d.sigma = e.sigma;
    const int c1 = eigen_c_max(g, e);
    d.eig = eigenfields(g, e, Lattice{1, c1});
    d.conj = normalize_pair(d.eig.psi1, d.eig.psi2, d.eig.psi1_star, d.eig.psi2_star);

    const auto& psi = d.eig.psi;
    const auto psib = psi.conj();
    const Lattice quad{2, 2 * c1 + opt.c_pad_factor * c1 / 4 + 2 * g.denom()};

    // quadratic forcing; its m = +-1 content must vanish
    const auto n_pp = advection(psi, psi);
    const auto n_pb = advection(psi, psib);
    const auto n_bp = advection(psib, psi);
    auto purity = [&](const SpectralField& f) {
        const double tot = coeff_norm(f);
        return tot == 0.0 ? 0.0 : std::max(detail::block_norm(f, 1), detail::block_norm(f, -1)) / tot;
    };
    d.purity_defect = std::max({purity(n_pp), purity(n_pb), purity(n_bp)});
    if (d.purity_defect > opt.purity_tol)
        throw NumericalError("quadratic_manifold: quadratic forcing has m = +-1 content");

    d.h20 = detail::solve_wide(p, -1.0 * n_pp, quad, opt.block);
    d.h11 = detail::solve_wide(p, -1.0 * (n_pb + n_bp), quad, opt.block);

    // real chi_ij from the real eigenfields
    const SpectralField* ps[2] = {&d.eig.psi1, &d.eig.psi2};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const auto nij = advection(*ps[i], *ps[j]);
            d.chi[i][j] = detail::solve_wide(p, -1.0 * nij, quad, opt.block);
            const auto lchi = apply_L(p, d.chi[i][j], quad, Truncation::truncate);
            const auto res = lchi + nij.resized(quad);
            const double nn = coeff_norm(nij);
            if (nn > 0.0) d.chi_residual = std::max(d.chi_residual, coeff_norm(res) / nn);
        }

    // cubic projections; only the m = 1 block of each term pairs with psi*
    const Lattice cub{1, quad.c_max + c1};
    const auto star = d.conj.psi_star.resized(cub);
    auto pair = [&](const SpectralField& f, const SpectralField& h) {
        return inner(advection(f, h, cub, Truncation::truncate), star);
    };
    const cplx ga = pair(psi, d.h11) + pair(psib, d.h20);   // N(psi-type, h)
    const cplx gb = pair(d.h11, psi) + pair(d.h20, psib);   // N(h, psi-type)
    // P = <Lap psi, psi*> = 2 after normalization
    const cplx P = inner(laplacian(psi), d.conj.psi_star);
    d.a_complex = -std::conj(ga / P) / 4.0;
    d.b_complex = -std::conj(gb / P) / 4.0;
    d.cubic_sum = -(ga + gb);
    d.a_coef = d.a_complex.real();
    d.b_coef = d.b_complex.real();
    d.landau = d.a_coef + d.b_coef;
    d.imag_residue = std::max(std::abs(d.a_complex.imag()), std::abs(d.b_complex.imag())) / std::abs(d.landau);
    if (!(d.imag_residue <= opt.imag_tol))
        throw NumericalError("landau_coefficients: imaginary residue " + std::to_string(d.imag_residue));
    return d;
}

inline CenterManifoldData quadratic_manifold(const PhysicalParams& p, const GeometryParams& g,
                                             const BifurcationOptions& opt = {}) {
    return quadratic_manifold(p, g, sigma_of_R(p, g, opt.linstab), opt);
}

struct LandauCoefficients {
    double a = 0.0, b = 0.0;
    double landau = 0.0;
    bool supercritical = false;
    cplx cubic_sum{};
};

inline LandauCoefficients landau_coefficients(const CenterManifoldData& d) {
    return {d.a_coef, d.b_coef, d.landau, d.supercritical(), d.cubic_sum};
}

/// Center-manifold data at R_c for the given lambda and geometry.
inline CenterManifoldData critical_manifold(double lambda, const GeometryParams& g,
                                            const BifurcationOptions& opt = {}) {
    const double rc = critical_reynolds(lambda, g, opt.linstab);
    return quadratic_manifold(PhysicalParams{lambda, rc}, g, opt);
}

struct SecondaryFlowSpec {
    double reynolds = 0.0;
    double mu = 0.0;         ///< sigma(R) / R
    double amplitude = 0.0;  ///< |X| = sqrt(mu / (a + b))
    double theta = 0.0;
    int order = 1;
    bool exists = false;     ///< false on the side of R_c without a steady branch
    bool large_amplitude = false;
    std::string note;
    SpectralField field;     ///< psi_0 + s1 psi_1 + s2 psi_2 (+ quadratic terms)
};

struct SecondaryOptions {
    double warn_amplitude = 0.2;
};

/// Secondary steady state at R built from the manifold data d (taken at R_c).
/// (s1, s2) = amplitude (cos theta, sin theta); the field at theta is the
/// field at 0 translated by x -> x - theta / kx.
inline SecondaryFlowSpec secondary_flow(const CenterManifoldData& d, double lambda, double reynolds, double theta,
                                        int order, Lattice lat, const SecondaryOptions& sopt = {},
                                        const LinstabOptions& lopt = {}) {
    if (order != 1 && order != 2) throw ValidationError("secondary_flow: order must be 1 or 2");
    const GeometryParams& g = d.eig.psi1.geom();
    PhysicalParams p{lambda, reynolds};
    p.validate();
    SecondaryFlowSpec s;
    s.reynolds = reynolds;
    s.theta = theta;
    s.order = order;
    s.mu = sigma_of_R(p, g, lopt).sigma / reynolds;
    s.field = basic_flow(g, lambda, lat);
    const double ratio = s.mu / d.landau;
    if (ratio < 0.0) {
        s.exists = false;
        s.note = "no steady branch on this side of R_c";
        return s;
    }
    s.exists = true;
    s.amplitude = std::sqrt(ratio);
    if (s.amplitude > sopt.warn_amplitude) {
        s.large_amplitude = true;
        s.note = "amplitude above local-validity threshold; field is advisory";
    }
    if (s.amplitude == 0.0) return s;
    const double s1 = s.amplitude * std::cos(theta), s2 = s.amplitude * std::sin(theta);
    s.field += (s1 * d.eig.psi1 + s2 * d.eig.psi2).resized(lat, Truncation::truncate);
    if (order == 2) {
        const double s_[2] = {s1, s2};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                s.field += (s_[i] * s_[j] * d.chi[i][j]).resized(lat, Truncation::truncate);
    }
    return s;
}

/// |X| of a field measured by projection of its m = 1 block onto the
/// normalized conjugate: X = 2 conj(<Lap f, psi*> / <Lap psi, psi*>).
inline cplx measured_amplitude(const CenterManifoldData& d, const SpectralField& f) {
    const auto& star = d.conj.psi_star;
    SpectralField f1(f.geom(), Lattice{1, star.c_max()}, false);
    for (int c = 1; c <= std::min(f.c_max(), star.c_max()); ++c) f1.set(1, c, f(1, c));
    const cplx P = inner(laplacian(d.eig.psi), star);
    return 2.0 * std::conj(inner(laplacian(f1), star) / P);
}

}  // namespace kolmo
