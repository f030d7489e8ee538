#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kolmo/linstab.hpp"
#include "params.hpp"

using namespace kolmo;

namespace {

const GeometryParams kRef{0.7, 4, 1};

}  // namespace

TEST(ContinuedFractions, ConvergeAtCriticalParameters) {
    const PhysicalParams p{20.0, 1760.0};
    const auto cf = continued_fractions(p, kRef, 0.0, 8);
    EXPECT_TRUE(cf.converged);
    // partial denominators grow without bound
    double prev = 0.0;
    for (int n = 2; n < 200; ++n) {
        const double d = partial_denominator(p, kRef, 0.0, n);
        EXPECT_GT(d, prev);
        prev = d;
    }
    EXPECT_GT(prev, 1e3);
}

TEST(ContinuedFractions, DepthDifferencesShrink) {
    const PhysicalParams p{20.0, 1760.0};
    std::vector<double> heads;
    for (int depth = 8; depth <= 1024; depth *= 2) {
        std::vector<double> plus, minus;
        detail::sweep_fractions(p, kRef, 0.0 - sigma_floor(p, kRef), depth, plus, minus);
        heads.push_back(plus.front() - minus.front());
    }
    double last = std::fabs(heads[1] - heads[0]);
    for (std::size_t k = 2; k < heads.size(); ++k) {
        const double d = std::fabs(heads[k] - heads[k - 1]);
        EXPECT_LE(d, last);
        last = d;
    }
    EXPECT_LT(last, 1e-15);
}

TEST(ContinuedFractions, PartialDenominatorsIncreaseInSigma) {
    std::mt19937_64 rng(3);
    for (int it = 0; it < 200; ++it) {
        const auto d = draws::admissible(rng);
        const double lo = sigma_floor(d.phys, d.geom);
        std::uniform_real_distribution<double> u(0.0, 50.0);
        const double s1 = lo + u(rng), s2 = s1 + 1e-3 + u(rng);
        for (int n : {-7, -3, -1, 1, 2, 5, 11})
            EXPECT_LT(partial_denominator(d.phys, d.geom, s1, n), partial_denominator(d.phys, d.geom, s2, n));
    }
}

TEST(ContinuedFractions, RejectsSigmaBelowFloor) {
    const PhysicalParams p{20.0, 1760.0};
    EXPECT_THROW(continued_fractions(p, kRef, sigma_floor(p, kRef) - 1.0, 8), ValidationError);
    EXPECT_THROW(continued_fractions(p, kRef, 0.0, 0), ValidationError);
}

TEST(ContinuedFractions, NonconvergenceCarriesHeads) {
    const PhysicalParams p{20.0, 1760.0};
    LinstabOptions opt;
    opt.cf_tol = 0.0;
    opt.cf_depth_max = 64;
    try {
        continued_fractions(p, kRef, 0.0, 16, opt);
        // exact equality of heads also counts as settled
        SUCCEED();
    } catch (const ContinuedFractionError& e) {
        EXPECT_TRUE(std::isfinite(e.head_prev));
        EXPECT_TRUE(std::isfinite(e.head_last));
    }
    opt.cf_tol = 1e-300;
    opt.cf_depth_max = 4;
    EXPECT_THROW(continued_fractions(p, kRef, 0.0, 2, opt), ContinuedFractionError);
}

TEST(Dispersion, VanishesAtCriticalReynolds) {
    const double rc = critical_reynolds(20.0, kRef);
    EXPECT_NEAR(dispersion_residual(PhysicalParams{20.0, rc}, kRef, 0.0), 0.0, 1e-9);
}

TEST(Dispersion, FiniteNegativeLimitAtFloorAndPositiveAtLargeSigma) {
    const PhysicalParams p{20.0, 1000.0};
    const double at_floor = dispersion_residual_tau(p, kRef, 0.0);
    EXPECT_TRUE(std::isfinite(at_floor));
    EXPECT_LT(at_floor, 0.0);
    EXPECT_NEAR(dispersion_residual_tau(p, kRef, 1e-12), at_floor, 1e-9);
    EXPECT_GT(dispersion_residual(p, kRef, 100.0), 0.0);
}

TEST(Dispersion, SignAtZeroFlipsAcrossCritical) {
    const double rc = critical_reynolds(20.0, kRef);
    const double below = dispersion_residual(PhysicalParams{20.0, 0.95 * rc}, kRef, 0.0);
    const double above = dispersion_residual(PhysicalParams{20.0, 1.05 * rc}, kRef, 0.0);
    EXPECT_GT(below, 0.0);
    EXPECT_LT(above, 0.0);
    // the determinant route agrees about which side is unstable
    EXPECT_LT(sigma_determinant_converged(PhysicalParams{20.0, 0.95 * rc}, kRef), 0.0);
    EXPECT_GT(sigma_determinant_converged(PhysicalParams{20.0, 1.05 * rc}, kRef), 0.0);
}

TEST(SigmaOfR, MonotoneAtReferenceParameters) {
    double prev = -1e300;
    for (double R : {500.0, 1000.0, 1760.0, 2300.0}) {
        const auto e = sigma_of_R(PhysicalParams{20.0, R}, kRef);
        EXPECT_GT(e.sigma, prev);
        prev = e.sigma;
    }
}

TEST(SigmaOfR, SmallReynoldsApproachesFloor) {
    const PhysicalParams p{20.0, 1e-3};
    const auto e = sigma_of_R(p, kRef);
    EXPECT_NEAR(e.sigma, -20.505625, 1e-9);
    EXPECT_LT(e.sigma_shift, 1e-6 * (20.505625));
    EXPECT_GT(e.sigma_shift, 0.0);
}

TEST(SigmaOfR, EigenSolutionInvariants) {
    const auto e = sigma_of_R(PhysicalParams{20.0, 2000.0}, kRef);
    EXPECT_EQ(e.coeff(0), 1.0);
    EXPECT_GT(e.sigma, sigma_floor(PhysicalParams{20.0, 2000.0}, kRef));
    EXPECT_LT(e.recurrence_residual, 1e-9);
    EXPECT_LT(e.identity_residual, 1e-9);
    for (int n = -e.depth; n <= e.depth; ++n)
        EXPECT_DOUBLE_EQ(e.coeff_star(n), ((n % 2 == 0) ? 1.0 : -1.0) * (beta_eigen(kRef, n) - 1.0) * e.coeff(n));
    // tail decays monotonically beyond a short prefix
    for (int n = 3; n < e.depth; ++n) {
        EXPECT_LT(std::fabs(e.coeff(n + 1)), std::fabs(e.coeff(n)));
        EXPECT_LT(std::fabs(e.coeff(-n - 1)), std::fabs(e.coeff(-n)));
    }
    EXPECT_LE(e.depth, 128);
    EXPECT_LT(std::fabs(e.coeff(e.depth)), 1e-12);
    const auto s = pairing_sums(kRef, e);
    EXPECT_LT(s.laplacian_sum, 0.0);
    EXPECT_LT(s.plain_sum, 0.0);
}

TEST(SigmaOfR, RejectsInadmissibleGeometry) {
    EXPECT_THROW(sigma_of_R(PhysicalParams{20.0, 100.0}, GeometryParams{1.2, 4, 1}), ValidationError);
    EXPECT_THROW(sigma_of_R(PhysicalParams{20.0, -1.0}, kRef), ValidationError);
}

TEST(SigmaOfR, BracketCapReported) {
    LinstabOptions opt;
    opt.sigma_cap = 2.0;
    EXPECT_THROW(sigma_of_R(PhysicalParams{20.0, 1e5}, kRef, opt), NumericalError);
}

TEST(DeterminantOracle, AgreesAtR2000) {
    const PhysicalParams p{20.0, 2000.0};
    const double cf = sigma_of_R(p, kRef).sigma;
    const double det = sigma_determinant_converged(p, kRef);
    EXPECT_LE(std::fabs(cf - det), 1e-8 * std::fmax(1.0, std::fabs(cf)));
}

TEST(DeterminantOracle, StableUnderTruncationGrowth) {
    const PhysicalParams p{20.0, 2000.0};
    for (int M = 24; M <= 64; M += 8) {
        const double a = sigma_determinant_oracle(p, kRef, M);
        const double b = sigma_determinant_oracle(p, kRef, M + 8);
        EXPECT_LT(std::fabs(a - b), 1e-10);
    }
}

TEST(DeterminantOracle, RootVanishesAtCritical) {
    const double rc = critical_reynolds(20.0, kRef);
    EXPECT_NEAR(sigma_determinant_converged(PhysicalParams{20.0, rc}, kRef), 0.0, 1e-8);
    EXPECT_THROW(sigma_determinant_oracle(PhysicalParams{20.0, rc}, kRef, 4), ValidationError);
}

TEST(CriticalReynolds, NeutralCurveMinimumNearReferenceWavenumber) {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.4 + 0.05 * i);
    const auto nc = neutral_curve(20.0, kRef, grid);
    ASSERT_TRUE(nc.argmin.has_value());
    const double kmin = nc.points[*nc.argmin].kx;
    EXPECT_GE(kmin, 0.6 - 1e-12);
    EXPECT_LE(kmin, 0.7 + 1e-12);
    // inadmissible grid points are recorded, the sweep continues
    EXPECT_FALSE(nc.points[0].error.empty());
    EXPECT_TRUE(nc.points.back().error.empty());
}

TEST(CriticalReynolds, SinglePointGridAndRefinement) {
    const auto one = neutral_curve(20.0, kRef, {0.63});
    EXPECT_DOUBLE_EQ(one.points[0].reynolds_c, critical_reynolds(20.0, GeometryParams{0.63, 4, 1}));
    const auto coarse = neutral_curve(20.0, kRef, {0.5, 0.6, 0.7, 0.8});
    const auto fine = neutral_curve(20.0, kRef, {0.5, 0.55, 0.6, 0.62, 0.64, 0.66, 0.7, 0.8});
    EXPECT_LE(fine.points[*fine.argmin].reynolds_c, coarse.points[*coarse.argmin].reynolds_c);
    EXPECT_THROW(neutral_curve(20.0, kRef, {0.7, 0.6}), ValidationError);
}

TEST(CriticalReynolds, ClassicalLimitTrend) {
    // lambda = 0, alpha = 1/2N small and kx small: R_c decreases towards sqrt 2
    double prev = 1e300;
    for (int nw : {10, 40, 160}) {
        const double kx = 2.0 / std::sqrt(static_cast<double>(nw));
        const GeometryParams g{std::min(kx, 0.6), nw, 1};
        ASSERT_TRUE(check_admissible(g).ok);
        const double rc = critical_reynolds(0.0, g);
        EXPECT_GT(rc, std::sqrt(2.0));
        EXPECT_LT(rc, prev);
        prev = rc;
    }
    EXPECT_LT(prev, 1.6);
}

TEST(GrowthRate, SignsAroundCritical) {
    const double rc = critical_reynolds(20.0, kRef);
    EXPECT_NEAR(growth_rate(PhysicalParams{20.0, rc}, kRef), 0.0, 1e-12);
    EXPECT_GT(growth_rate(PhysicalParams{20.0, 1.001 * rc}, kRef), 0.0);
    EXPECT_LT(growth_rate(PhysicalParams{20.0, 0.9 * rc}, kRef), 0.0);
}

TEST(Properties, RandomDrawsIdentitiesSignsAndMonotonicity) {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 60; ++it) {
        const auto d = draws::admissible(rng);
        const auto e = sigma_of_R(d.phys, d.geom);
        EXPECT_LT(e.recurrence_residual, 1e-9);
        EXPECT_LT(e.identity_residual, 1e-9);
        const auto s = pairing_sums(d.geom, e);
        EXPECT_LT(s.laplacian_sum, 0.0);
        EXPECT_LT(s.plain_sum, 0.0);
        auto p2 = d.phys;
        p2.reynolds *= 1.0 + 0.5 * std::uniform_real_distribution<double>(0.01, 1.0)(rng);
        EXPECT_LT(e.sigma, sigma_of_R(p2, d.geom).sigma);
    }
}

TEST(Properties, OracleEquivalenceOnRandomDraws) {
    std::mt19937_64 rng(2024);
    for (int it = 0; it < 20; ++it) {
        const auto d = draws::admissible(rng);
        const double cf = sigma_of_R(d.phys, d.geom).sigma;
        const double det = sigma_determinant_converged(d.phys, d.geom);
        EXPECT_LE(std::fabs(cf - det), 1e-8 * std::fmax(1.0, std::fabs(cf)))
            << "lambda=" << d.phys.lambda << " R=" << d.phys.reynolds << " kx=" << d.geom.kx
            << " N=" << d.geom.n_walls << " j=" << d.geom.j_mode;
    }
}
