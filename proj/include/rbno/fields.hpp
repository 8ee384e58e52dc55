#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>

#include "rbno/fem.hpp"
#include "rbno/rng.hpp"
#include "rbno/tensor.hpp"

namespace rbno {

using ScalarField = std::function<double(Point)>;
using VectorField = std::function<Point(Point)>;

// ---------------------------------------------------------------------------
// Parameter samples
// ---------------------------------------------------------------------------

enum class SampleKind { MiniSquare, NodalField };

// One draw of the random parameter. MiniSquare holds the 16 exponents mu_i of
// the piecewise-constant conductivity on the 4x4 arrangement of mini-squares;
// NodalField holds CG1 coefficients of the latent Gaussian field m.
struct ParamSample {
    SampleKind kind = SampleKind::MiniSquare;
    std::uint64_t seed = 0;
    std::array<double, 16> mu{};  // MiniSquare
    Vec nodal;                    // NodalField (CG1 coefficients)
    const FunctionSpace* nodal_space = nullptr;

    Vec feature_raw() const {
        if (kind == SampleKind::MiniSquare) return Vec(mu.begin(), mu.end());
        return nodal;
    }
};

// Mini-square i covers [m/8 +- 1/16] x [n/8 +- 1/16] with m = 1+2*(i%4),
// n = 1+2*(i/4); conductivity is 10^mu_i there and 1 elsewhere.
inline int minisquare_index(Point p) {
    for (int i = 0; i < 16; ++i) {
        double cm = (1.0 + 2.0 * (i % 4)) / 8.0;
        double cn = (1.0 + 2.0 * (i / 4)) / 8.0;
        if (std::abs(p.x - cm) <= 1.0 / 16.0 && std::abs(p.y - cn) <= 1.0 / 16.0) return i;
    }
    return -1;
}

inline ParamSample sample_minisquares(std::uint64_t seed) {
    ParamSample s;
    s.kind = SampleKind::MiniSquare;
    s.seed = seed;
    Rng rng(seed);
    for (auto& m : s.mu) m = rng.uniform(-1.0, 1.0);
    return s;
}

inline ScalarField minisquare_conductivity(const ParamSample& s) {
    return [mu = s.mu](Point p) {
        int i = minisquare_index(p);
        return i < 0 ? 1.0 : std::pow(10.0, mu[static_cast<std::size_t>(i)]);
    };
}

inline ScalarField minisquare_indicator() {
    return [](Point p) { return minisquare_index(p) >= 0 ? 1.0 : 0.0; };
}

// ---------------------------------------------------------------------------
// Gaussian random fields via the elliptic covariance (delta I - gamma Lap)^-2
// ---------------------------------------------------------------------------

struct GrfConfig {
    double delta = 1.5;
    double gamma = 0.15;
    double alpha = 2.0;        // only alpha=2 supported
    double robin_coeff = 0.0;  // optional boundary mass term, default off
};

// Piecewise-linear evaluation of the latent field m.
inline ScalarField nodal_field_evaluator(const ParamSample& s) {
    if (s.kind != SampleKind::NodalField) throw Error("nodal_field_evaluator: wrong kind");
    FeFunction f(*s.nodal_space, s.nodal);
    return [f](Point p) { return f.eval(p); };
}

// ---------------------------------------------------------------------------
// Isotropic elasticity material
// ---------------------------------------------------------------------------

// Pointwise Lame parameters (mu, lambda).
using MaterialField = std::function<std::pair<double, double>(Point)>;

struct IsotropicStiffness {
    MaterialField lame;

    std::pair<double, double> at(Point p) const { return lame(p); }
};

inline IsotropicStiffness lame_from_young(const ScalarField& young, double nu) {
    if (!(nu > 0.0 && nu < 0.5)) throw Error("lame_from_young: nu must lie in (0, 1/2)");
    return {[young, nu](Point p) {
        double e = young(p);
        double mu = e / (2.0 * (1.0 + nu));
        double lam = nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        return std::make_pair(mu, lam);
    }};
}

// C^s tau for s in {-1, -1/2, 1/2, 1}: the trace part and trace-free part of a
// 2x2 tensor are invariant eigenspaces of C with eigenvalues (2mu + d*lambda)
// and 2mu, so powers act spectrally.
inline Tensor2 stiffness_pow(double mu, double lambda, double s, const Tensor2& tau) {
    constexpr double d = 2.0;
    double tr = tau.trace() / d;
    Tensor2 trace_part = tr * Tensor2::identity();
    Tensor2 dev = tau - trace_part;
    double ev_dev = std::pow(2.0 * mu, s);
    double ev_tr = std::pow(2.0 * mu + d * lambda, s);
    return ev_dev * dev + ev_tr * trace_part;
}

}  // namespace rbno
