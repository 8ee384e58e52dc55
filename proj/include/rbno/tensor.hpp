#pragma once

#include "rbno/mesh.hpp"

namespace rbno {

// Small 2x2 tensor for stress/strain algebra.
struct Tensor2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    double trace() const { return a11 + a22; }

    Tensor2 operator+(const Tensor2& o) const {
        return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
    }
    Tensor2 operator-(const Tensor2& o) const {
        return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
    }
    Tensor2 operator*(double s) const { return {s * a11, s * a12, s * a21, s * a22}; }

    static Tensor2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Tensor2 sym_grad(Point grad_u1, Point grad_u2) {
        return {grad_u1.x, 0.5 * (grad_u1.y + grad_u2.x), 0.5 * (grad_u1.y + grad_u2.x),
                grad_u2.y};
    }

    Point dot_rows() const { return {a11 + a12, a21 + a22}; }  // debug helper
};

inline Tensor2 operator*(double s, const Tensor2& t) { return t * s; }

inline double ddot(const Tensor2& a, const Tensor2& b) {
    return a.a11 * b.a11 + a.a12 * b.a12 + a.a21 * b.a21 + a.a22 * b.a22;
}

inline double frob2(const Tensor2& a) { return ddot(a, a); }

}  // namespace rbno
