#pragma once

// Bracketed scalar root finding: secant steps (Illinois-damped) guarded by
// bisection. Derivative-free; the bracket is always kept.

#include <cmath>
#include <limits>

namespace kolmo::detail {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Requires f(a) and f(b) of opposite sign (or one of them zero).
/// Stops when |f| <= ftol or the bracket has shrunk to a few ulps of x.
template <class F>
RootResult solve_bracketed(F&& f, double a, double b, double fa, double fb, double ftol, int max_iter = 400) {
    RootResult r;
    if (fa == 0.0) return {a, fa, a, a, 0, true};
    if (fb == 0.0) return {b, fb, b, b, 0, true};
    int side = 0;
    double best = a, fbest = fa;
    if (std::fabs(fb) < std::fabs(fa)) best = b, fbest = fb;
    for (int it = 1; it <= max_iter; ++it) {
        r.iterations = it;
        double x = (a * fb - b * fa) / (fb - fa);
        const double w = b - a;
        // fall back to bisection if the secant point hugs an end of the bracket
        if (!(x > a + 0.05 * w && x < b - 0.05 * w) || (it % 4 == 0)) x = 0.5 * (a + b);
        const double fx = f(x);
        if (std::fabs(fx) < std::fabs(fbest)) best = x, fbest = fx;
        if (fx == 0.0 || std::fabs(fx) <= ftol) {
            return {x, fx, a, b, it, true};
        }
        if ((fx > 0.0) == (fb > 0.0)) {
            b = x, fb = fx;
            if (side == 1) fa *= 0.5;
            side = 1;
        } else {
            a = x, fa = fx;
            if (side == -1) fb *= 0.5;
            side = -1;
        }
        const double scale = std::fmax(std::fabs(a), std::fabs(b));
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::fmax(scale, 1e-300)) {
            return {best, fbest, a, b, it, true};
        }
    }
    r.x = best;
    r.fx = fbest;
    r.lo = a;
    r.hi = b;
    r.converged = false;
    return r;
}

/// Pure bisection on the sign of f; used where only the sign is reliable.
template <class F>
double bisect_sign(F&& f, double a, double b, bool sign_a, int max_iter = 200) {
    for (int it = 0; it < max_iter; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if ((f(m) > 0.0) == sign_a)
            a = m;
        else
            b = m;
    }
    return 0.5 * (a + b);
}

}  // namespace kolmo::detail
