#pragma once

// Parameter objects, admissibility checks and the (m, c) mode lattice.
//
// Every field in this library is expanded on
//     e^{i m kx x} sin((c / 2N) y),   m in Z, c >= 1,
// so all wall-normal wavenumbers are integer multiples of 1/(2N). Products of
// modes never leave this lattice.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kolmo {

/// Bad input: a precondition of the caller was violated.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure did not reach its tolerance (or blew up).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PhysicalParams {
    double lambda = 20.0;   ///< friction number, >= 0
    double reynolds = 1.0;  ///< > 0

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw ValidationError("lambda must be finite and >= 0");
        if (!(reynolds > 0.0) || !std::isfinite(reynolds))
            throw ValidationError("reynolds must be finite and > 0");
    }
};

/// Duct 0 <= y <= 2N pi, streamwise period 2 pi / kx, eigen family j.
/// alpha = j / (2N) is kept as the integer pair (j, N).
struct GeometryParams {
    double kx = 0.7;
    int n_walls = 4;
    int j_mode = 1;

    int denom() const { return 2 * n_walls; }
    double alpha() const { return static_cast<double>(j_mode) / denom(); }

    void validate() const {
        if (!(kx > 0.0) || !std::isfinite(kx)) throw ValidationError("kx must be finite and > 0");
        if (n_walls < 2) throw ValidationError("N (walls) must be >= 2");
        if (j_mode < 1 || j_mode > n_walls - 1)
            throw ValidationError("j must satisfy 1 <= j <= N-1");
    }
};

/// Wall-normal wavenumber c / (2N) squared, from integers.
inline double kappa_sq(const GeometryParams& g, std::int64_t c) {
    const std::int64_t d = g.denom();
    return static_cast<double>(c * c) / static_cast<double>(d * d);
}

/// beta(m, c) = (m kx)^2 + (c / 2N)^2, the (negated) Laplacian symbol.
inline double beta(const GeometryParams& g, int m, std::int64_t c) {
    if (c <= 0) throw ValidationError("beta: lattice numerator c must be >= 1");
    const double mk = m * g.kx;
    return mk * mk + kappa_sq(g, c);
}

/// Beta of the eigen index n: kx^2 + (n + j/2N)^2.
inline double beta_eigen(const GeometryParams& g, int n) {
    const std::int64_t s = static_cast<std::int64_t>(g.denom()) * n + g.j_mode;
    return g.kx * g.kx + kappa_sq(g, s);
}

struct Admissibility {
    bool ok = false;
    double beta0 = 0.0;        ///< beta(1, j), must be < 1
    double beta_minus1 = 0.0;  ///< beta(1, 2N - j), must be > 1

    std::string diagnostic() const {
        std::ostringstream os;
        os.precision(17);
        os << "beta0=" << beta0 << (beta0 < 1.0 ? " (<1 ok)" : " (>=1 FAIL)") << ", beta_-1=" << beta_minus1
           << (beta_minus1 > 1.0 ? " (>1 ok)" : " (<=1 FAIL)");
        return os.str();
    }
};

inline Admissibility check_admissible(const GeometryParams& g) {
    Admissibility a;
    a.beta0 = beta(g, 1, g.j_mode);
    a.beta_minus1 = beta(g, 1, g.denom() - g.j_mode);
    a.ok = a.beta0 < 1.0 && a.beta_minus1 > 1.0;
    return a;
}

inline void require_admissible(const GeometryParams& g) {
    g.validate();
    const auto a = check_admissible(g);
    if (!a.ok) throw ValidationError("geometry not admissible: " + a.diagnostic());
}

struct ModeIndex {
    int m = 0;
    std::int64_t c = 1;
    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

/// Where eigen coefficient n lives on the lattice.
///
/// i^n phi_n sin((n + j/2N) y) = sign * i^quarter_turn * phi_n * sin((c/2N) y)
/// with c = |2N n + j| and quarter_turn = n mod 4 in [0, 4).
struct LatticeImage {
    ModeIndex mode;
    int sign = 1;
    int quarter_turn = 0;
};

inline LatticeImage eigen_to_lattice(int n, const GeometryParams& g) {
    const std::int64_t s = static_cast<std::int64_t>(g.denom()) * n + g.j_mode;
    LatticeImage img;
    img.mode = ModeIndex{1, s < 0 ? -s : s};
    img.sign = s < 0 ? -1 : 1;
    img.quarter_turn = ((n % 4) + 4) % 4;
    return img;
}

/// Inverse of eigen_to_lattice on the wall-normal numerator. Returns false
/// when c is not of the form |2N n + j|.
inline bool lattice_to_eigen(std::int64_t c, const GeometryParams& g, int& n_out) {
    const std::int64_t d = g.denom();
    if (c < 1) return false;
    if ((c - g.j_mode) % d == 0) {
        n_out = static_cast<int>((c - g.j_mode) / d);
        return true;
    }
    if ((c + g.j_mode) % d == 0) {
        n_out = -static_cast<int>((c + g.j_mode) / d);
        return true;
    }
    return false;
}

}  // namespace kolmo
