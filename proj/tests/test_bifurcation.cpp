#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kolmo/bifurcation.hpp"
#include "kolmo/dynamics.hpp"

using namespace kolmo;

namespace {

const GeometryParams kRef{0.7, 4, 1};
constexpr double kLambda = 20.0;

const CenterManifoldData& critical() {
    static const CenterManifoldData d = critical_manifold(kLambda, kRef);
    return d;
}

double max_grid_diff(const SpectralField& a, const SpectralField& b) {
    const auto ga = sample_grid(a, 64, 65, 0.0, 2.0 * std::numbers::pi / a.geom().kx);
    const auto gb = sample_grid(b, 64, 65, 0.0, 2.0 * std::numbers::pi / b.geom().kx);
    double d = 0.0;
    for (std::size_t k = 0; k < ga.values.size(); ++k) d = std::max(d, std::fabs(ga.values[k] - gb.values[k]));
    return d;
}

}  // namespace

TEST(NormalizePair, UnitPairingAndOrthogonality) {
    const auto& d = critical();
    const auto& ef = d.eig;
    EXPECT_NEAR(inner(laplacian(ef.psi1), d.conj.psi1_star).real(), 1.0, 1e-12);
    EXPECT_NEAR(inner(laplacian(ef.psi2), d.conj.psi2_star).real(), 1.0, 1e-12);
    EXPECT_LT(d.conj.cross, 1e-13);
    // <Lap psi, psi*> of the raw pair is positive, so is the scale
    EXPECT_GT(d.conj.scale, 0.0);
}

TEST(NormalizePair, DegeneratePairingThrows) {
    const auto& ef = critical().eig;
    SpectralField zero(ef.psi1.geom(), Lattice{ef.psi1.mx_max(), ef.psi1.c_max()});
    EXPECT_THROW(normalize_pair(ef.psi1, ef.psi2, zero, zero), NumericalError);
}

TEST(QuadraticManifold, ForcingHasNoFirstHarmonic) {
    const auto& d = critical();
    EXPECT_LE(d.purity_defect, 1e-12);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const auto n = advection(i ? d.eig.psi2 : d.eig.psi1, j ? d.eig.psi2 : d.eig.psi1);
            const auto star = d.conj.psi1_star.resized(Lattice{n.mx_max(), std::max(n.c_max(), d.conj.psi1_star.c_max())},
                                                       Truncation::truncate);
            const auto nw = n.resized(star.lattice(), Truncation::truncate);
            EXPECT_LT(std::abs(inner(nw, star)), 1e-14 * norm(n) * norm(star) + 1e-300);
        }
}

TEST(QuadraticManifold, ChiSolvesLinearProblem) {
    const auto& d = critical();
    EXPECT_LT(d.chi_residual, 1e-9);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            EXPECT_TRUE(d.chi[i][j].is_real());
            EXPECT_TRUE(d.chi[i][j].finite());
        }
}

TEST(Landau, SupercriticalAndCubicSum) {
    const auto& d = critical();
    EXPECT_GT(d.landau, 0.0);
    EXPECT_TRUE(d.supercritical());
    EXPECT_LT(d.imag_residue, 1e-8);
    // with <Lap psi, psi*> = 2 the four-term sum equals 8 (a + b)
    EXPECT_NEAR(d.cubic_sum.real(), 8.0 * d.landau, 1e-9 * d.landau);
    EXPECT_NEAR(d.cubic_sum.imag(), 0.0, 1e-9 * d.landau);
    const auto lc = landau_coefficients(d);
    EXPECT_DOUBLE_EQ(lc.a + lc.b, lc.landau);
}

TEST(Landau, FieldInvariantUnderEigenvectorRescaling) {
    const auto& d = critical();
    const PhysicalParams pc{kLambda, d.reynolds};
    auto e = sigma_of_R(pc, kRef);
    for (double& v : e.phi) v *= -3.7;
    for (double& v : e.phi_star) v *= 0.21;
    const auto d2 = quadratic_manifold(pc, kRef, e);
    const double R = 1.03 * d.reynolds;
    const Lattice lat{2, 128};
    const auto s1 = secondary_flow(d, kLambda, R, 0.4, 2, lat);
    const auto s2 = secondary_flow(d2, kLambda, R, 0.4, 2, lat);
    EXPECT_NEAR(s2.amplitude * 3.7, s1.amplitude, 1e-9 * s1.amplitude);
    // first order fields agree up to the sign of the eigenvector
    const auto f1 = s1.field - basic_flow(kRef, kLambda, lat);
    const auto f2 = s2.field - basic_flow(kRef, kLambda, lat);
    const auto sh = shift_x(f2, std::numbers::pi / kRef.kx);
    EXPECT_LT(max_grid_diff(f1, sh), 1e-9 * max_grid_diff(f1, 0.0 * f1));
}

TEST(Landau, RandomGeometriesSatisfyCubicSumIdentity) {
    for (const GeometryParams g : {GeometryParams{0.7, 3, 1}, GeometryParams{0.7, 5, 2}, GeometryParams{0.8, 4, 1}}) {
        for (double lam : {0.0, 5.0, 20.0}) {
            const auto d = critical_manifold(lam, g);
            EXPECT_NEAR(d.cubic_sum.real(), 8.0 * d.landau, 1e-8 * std::fabs(d.landau));
            EXPECT_LT(d.chi_residual, 1e-8);
        }
    }
}

TEST(SecondaryFlow, ThetaActsAsTranslation) {
    const auto& d = critical();
    const Lattice lat{2, 128};
    const double R = 1.03 * d.reynolds;
    const auto base = secondary_flow(d, kLambda, R, 0.0, 2, lat);
    for (double th : {std::numbers::pi / 3.0, std::numbers::pi, 2.1}) {
        const auto s = secondary_flow(d, kLambda, R, th, 2, lat);
        const auto expect = shift_x(base.field, -th / kRef.kx);
        EXPECT_LT(max_grid_diff(s.field, expect), 1e-12);
    }
}

TEST(SecondaryFlow, AmplitudeLaw) {
    const auto& d = critical();
    const Lattice lat{2, 256};
    const auto at_rc = secondary_flow(d, kLambda, d.reynolds, 0.0, 2, lat);
    EXPECT_TRUE(at_rc.exists);
    EXPECT_LT(at_rc.amplitude, 1e-6);
    double prev = 0.0;
    for (double f : {1.01, 1.03, 1.05}) {
        const auto s = secondary_flow(d, kLambda, f * d.reynolds, 0.0, 1, lat);
        ASSERT_TRUE(s.exists);
        EXPECT_FALSE(s.large_amplitude);
        EXPECT_NEAR(s.amplitude * s.amplitude * d.landau, s.mu, 1e-14);
        EXPECT_GT(s.amplitude, prev);
        prev = s.amplitude;
        const cplx X = measured_amplitude(d, s.field);
        EXPECT_NEAR(std::abs(X), s.amplitude, 1e-9 * s.amplitude);
    }
}

TEST(SecondaryFlow, WrongSideAndValidation) {
    const auto& d = critical();
    const Lattice lat{2, 64};
    const auto s = secondary_flow(d, kLambda, 0.9 * d.reynolds, 0.0, 1, lat);
    EXPECT_FALSE(s.exists);
    EXPECT_FALSE(s.note.empty());
    EXPECT_THROW(secondary_flow(d, kLambda, d.reynolds, 0.0, 3, lat), ValidationError);
    EXPECT_THROW(secondary_flow(d, kLambda, -1.0, 0.0, 1, lat), ValidationError);
    const auto big = secondary_flow(d, kLambda, 1.03 * d.reynolds, 0.0, 1, lat, SecondaryOptions{0.005});
    EXPECT_TRUE(big.large_amplitude);
}

TEST(SecondaryFlow, R1810IsBelowThreshold) {
    const auto& d = critical();
    EXPECT_GT(d.reynolds, 1810.0);
    EXPECT_FALSE(secondary_flow(d, kLambda, 1810.0, 0.0, 1, Lattice{2, 64}).exists);
}

TEST(SecondaryFlow, FirstHarmonicDominatesNearThreshold) {
    const auto& d = critical();
    const auto s = secondary_flow(d, kLambda, 1.03 * d.reynolds, 0.0, 2, Lattice{2, 128});
    const auto split = energy_split(s.field, kLambda);
    ASSERT_GE(split.size(), 3u);
    EXPECT_GT(split[1], split[0]);
    EXPECT_GT(split[1], split[2]);
}

TEST(SecondaryFlow, SecondOrderResidualTenfoldSmaller) {
    const auto& d = critical();
    SimConfig cfg;
    cfg.phys = {kLambda, 1.03 * d.reynolds};
    cfg.geom = kRef;
    cfg.c_max = 128;
    const auto s1 = secondary_flow(d, kLambda, cfg.phys.reynolds, 0.0, 1, cfg.lattice());
    const auto s2 = secondary_flow(d, kLambda, cfg.phys.reynolds, 0.0, 2, cfg.lattice());
    const double r1 = steady_residual(cfg, s1.field), r2 = steady_residual(cfg, s2.field);
    EXPECT_LT(r2, r1);
    EXPECT_LE(10.0 * r2, r1) << "order-1 residual " << r1 << ", order-2 residual " << r2;
}
