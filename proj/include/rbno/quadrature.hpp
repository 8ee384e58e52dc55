#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rbno/linalg.hpp"

namespace rbno {

// Gauss-Legendre nodes/weights on [0,1], exact for polynomials of degree 2n-1.
struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(std::size_t n) {
    if (n == 0) throw Error("gauss_legendre: n must be positive");
    GaussRule r;
    r.points.resize(n);
    r.weights.resize(n);
    // Nodes on [-1,1] by Newton iteration on P_n, then mapped to [0,1].
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                double p2 = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 -
                             (static_cast<double>(k) - 1.0) * p0) /
                            static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            pp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.points[i] = 0.5 * (1.0 - x);  // descending x -> ascending points
        r.weights[i] = 1.0 / ((1.0 - x * x) * pp * pp);
    }
    return r;
}

// Quadrature rule on the reference triangle {(0,0),(1,0),(0,1)} built from a
// collapsed (Duffy) tensor Gauss rule: exact for total degree <= `degree`,
// weights summing to the reference area 1/2.
struct QuadratureRule {
    int degree = 0;
    std::vector<double> xi, eta, w;
    std::size_t size() const { return w.size(); }
};

inline QuadratureRule triangle_rule(int degree) {
    if (degree < 0) throw Error("triangle_rule: negative degree");
    // eta-direction integrand degree <= p, xi-direction <= p+1 (Duffy factor).
    std::size_t n_eta = static_cast<std::size_t>(degree / 2) + 1;
    std::size_t n_xi = static_cast<std::size_t>((degree + 1) / 2) + 1;
    GaussRule gx = gauss_legendre(n_xi);
    GaussRule ge = gauss_legendre(n_eta);
    QuadratureRule q;
    q.degree = degree;
    q.xi.reserve(n_xi * n_eta);
    q.eta.reserve(n_xi * n_eta);
    q.w.reserve(n_xi * n_eta);
    for (std::size_t a = 0; a < n_xi; ++a)
        for (std::size_t b = 0; b < n_eta; ++b) {
            double s = gx.points[a];
            double t = ge.points[b];
            q.xi.push_back(s);
            q.eta.push_back(t * (1.0 - s));
            q.w.push_back(gx.weights[a] * ge.weights[b] * (1.0 - s));
        }
    return q;
}

}  // namespace rbno
