#pragma once

#include <cstdint>

#include "rbno/fosls.hpp"

namespace rbno {

// X_h-orthonormal POD basis with the snapshot-correlation eigenvalues.
struct PodBasis {
    DenseMatrix Pi;    // N x r
    Vec eigenvalues;   // length N_s, descending, clipped at zero
    std::size_t n_snapshots = 0;

    std::size_t rank() const { return Pi.cols(); }
};

struct PodTarget {
    std::size_t rank = 0;   // take this rank if > 0 ...
    double tol = 0.0;       // ... else the smallest r with tail <= tol * total
};

// POD in the X_h inner product: C = S^T X S / N_s, eigenpairs (lambda_k, v_k),
// basis pi_k = S v_k / sqrt(N_s lambda_k). The 1/sqrt(N_s) factor keeps the
// columns X_h-orthonormal under C's 1/N_s normalization. Eigenvalues below
// 1e-13 * lambda_1 are excluded from the admissible rank range.
inline PodBasis pod(const DenseMatrix& S, const GramXh& X, PodTarget target) {
    const std::size_t N = S.rows();
    const std::size_t Ns = S.cols();
    if (Ns == 0) throw Error("pod: no snapshots");

    DenseMatrix XS(N, Ns);
    for (std::size_t j = 0; j < Ns; ++j) XS.set_col(j, spmv(X.X, S.col(j)));

    DenseMatrix C(Ns, Ns);
    for (std::size_t i = 0; i < Ns; ++i)
        for (std::size_t j = i; j < Ns; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < N; ++k) s += S(k, i) * XS(k, j);
            s /= static_cast<double>(Ns);
            C(i, j) = s;
            C(j, i) = s;
        }

    EigResult eig = sym_eig(C);
    Vec lambda = eig.eigenvalues;
    for (auto& l : lambda) l = std::max(l, 0.0);
    if (lambda[0] <= 0.0) throw Error("pod: all-zero snapshot set");

    std::size_t admissible = 0;
    while (admissible < Ns && lambda[admissible] > 1e-13 * lambda[0]) admissible++;

    std::size_t r;
    if (target.rank > 0) {
        r = std::min(target.rank, admissible);
    } else {
        double total = 0.0;
        for (double l : lambda) total += l;
        double tail = total;
        r = 0;
        while (r < admissible && tail > target.tol * total) tail -= lambda[r++];
    }
    if (r == 0) throw Error("pod: empty basis requested");

    PodBasis basis;
    basis.eigenvalues = lambda;
    basis.n_snapshots = Ns;
    basis.Pi = DenseMatrix(N, r);
    for (std::size_t k = 0; k < r; ++k) {
        double scale = 1.0 / std::sqrt(static_cast<double>(Ns) * lambda[k]);
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < Ns; ++j) s += S(i, j) * eig.eigenvectors(j, k);
            basis.Pi(i, k) = s * scale;
        }
    }
    return basis;
}

// s_r = Pi^T X s_h (coefficients of the X_h-orthogonal projection)
inline Vec project(const PodBasis& basis, const GramXh& X, const Vec& s_h) {
    if (s_h.size() != basis.Pi.rows()) throw DimensionError("project: size mismatch");
    Vec Xs = spmv(X.X, s_h);
    Vec out(basis.rank(), 0.0);
    for (std::size_t k = 0; k < basis.rank(); ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < basis.Pi.rows(); ++i) s += basis.Pi(i, k) * Xs[i];
        out[k] = s;
    }
    return out;
}

// s_h = Pi s_r
inline Vec expand(const PodBasis& basis, const Vec& s_r) {
    if (s_r.size() != basis.rank()) throw DimensionError("expand: size mismatch");
    Vec out(basis.Pi.rows(), 0.0);
    for (std::size_t k = 0; k < basis.rank(); ++k) {
        double c = s_r[k];
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < basis.Pi.rows(); ++i) out[i] += basis.Pi(i, k) * c;
    }
    return out;
}

// absolute and relative trailing eigenvalue sums beyond rank r
inline std::pair<double, double> pod_tail(const Vec& lambda, std::size_t r) {
    double total = 0.0, tail = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        total += lambda[k];
        if (k >= r) tail += lambda[k];
    }
    return {tail, total > 0.0 ? tail / total : 0.0};
}

// r-dimensional projection of the loss quadratic form; loss evaluation on
// reduced coefficients is O(r^2).
struct ReducedWeights {
    DenseMatrix Wr;  // r x r
    Vec alpha_r;
    double beta = 0.0;
    std::uint64_t sample_seed = 0;

    std::size_t rank() const { return alpha_r.size(); }
};

inline ReducedWeights reduce_weights(const LossWeights& lw, const PodBasis& basis) {
    const std::size_t N = basis.Pi.rows();
    const std::size_t r = basis.rank();
    if (lw.alpha.size() != N) throw DimensionError("reduce_weights: size mismatch");
    ReducedWeights rw;
    rw.sample_seed = lw.sample_seed;
    rw.beta = lw.beta;
    DenseMatrix WPi(N, r);
    for (std::size_t j = 0; j < r; ++j) WPi.set_col(j, spmv(lw.W, basis.Pi.col(j)));
    rw.Wr = DenseMatrix(r, r);
    rw.alpha_r.assign(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < N; ++k) s += basis.Pi(k, i) * WPi(k, j);
            rw.Wr(i, j) = s;
        }
        double a = 0.0;
        for (std::size_t k = 0; k < N; ++k) a += basis.Pi(k, i) * lw.alpha[k];
        rw.alpha_r[i] = a;
    }
    // enforce exact symmetry against roundoff in the two-sided product
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i + 1; j < r; ++j) {
            double s = 0.5 * (rw.Wr(i, j) + rw.Wr(j, i));
            rw.Wr(i, j) = s;
            rw.Wr(j, i) = s;
        }
    return rw;
}

inline double eval_reduced_loss(const ReducedWeights& rw, const Vec& s_r) {
    if (s_r.size() != rw.rank()) throw DimensionError("eval_reduced_loss: size mismatch");
    Vec Ws = matvec(rw.Wr, s_r);
    return dot(s_r, Ws) + 2.0 * dot(s_r, rw.alpha_r) + rw.beta;
}

// reduced normal equation W_r s_r = -alpha_r
inline Vec solve_rb(const ReducedWeights& rw) {
    Vec b(rw.rank());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = -rw.alpha_r[i];
    return cholesky_solve(rw.Wr, b);
}

}  // namespace rbno
