#pragma once

// Random admissible parameter draws shared by the property tests.

#include <cmath>
#include <random>

#include "kolmo/domain.hpp"

namespace draws {

struct Draw {
    kolmo::PhysicalParams phys;
    kolmo::GeometryParams geom;
};

/// lambda in [0, 40], N in [2, 8], j in [1, N-1], kx inside the admissible
/// window (shrunk by 2% at each end), R log-uniform in [r_lo, r_hi].
inline Draw admissible(std::mt19937_64& rng, double r_lo = 10.0, double r_hi = 1e5) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Draw d;
    d.phys.lambda = 40.0 * u(rng);
    d.phys.reynolds = std::exp(std::log(r_lo) + (std::log(r_hi) - std::log(r_lo)) * u(rng));
    d.geom.n_walls = 2 + static_cast<int>(rng() % 7);
    d.geom.j_mode = 1 + static_cast<int>(rng() % (d.geom.n_walls - 1));
    const double a = d.geom.alpha();
    const double kmin = std::sqrt(std::fmax(0.0, 1.0 - (1.0 - a) * (1.0 - a)));
    const double kmax = std::sqrt(1.0 - a * a);
    const double w = kmax - kmin;
    d.geom.kx = kmin + w * (0.02 + 0.96 * u(rng));
    return d;
}

}  // namespace draws
