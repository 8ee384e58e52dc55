#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbno {

using Vec = std::vector<double>;

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

struct SolverError : Error {
    SolverError(const std::string& msg, double residual_, int iterations_)
        : Error(msg), residual(residual_), iterations(iterations_) {}
    double residual = 0.0;
    int iterations = 0;
};

struct NotSpdError : Error {
    explicit NotSpdError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Dense row-major matrix
// ---------------------------------------------------------------------------

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    Vec col(std::size_t j) const {
        Vec c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }
    void set_col(std::size_t j, const Vec& c) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
    }

    DenseMatrix transposed() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline Vec matvec(const DenseMatrix& A, const Vec& x) {
    if (x.size() != A.cols()) throw DimensionError("matvec: size mismatch");
    Vec y(A.rows(), 0.0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        const double* row = A.data() + i * A.cols();
        for (std::size_t j = 0; j < A.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// C = A * B, cache-friendly ikj order
inline DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.cols() != B.rows()) throw DimensionError("matmul: size mismatch");
    DenseMatrix C(A.rows(), B.cols(), 0.0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double* ci = C.data() + i * C.cols();
        for (std::size_t k = 0; k < A.cols(); ++k) {
            const double aik = A(i, k);
            if (aik == 0.0) continue;
            const double* bk = B.data() + k * B.cols();
            for (std::size_t j = 0; j < B.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return C;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// ---------------------------------------------------------------------------
// Compressed sparse row matrix
// ---------------------------------------------------------------------------

struct CsrMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr;  // size n_rows+1, monotone
    std::vector<std::size_t> col_idx;  // strictly increasing within each row
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    double max_asymmetry() const {
        // max |A_ij - A_ji|; assumes pattern may be asymmetric
        double m = 0.0;
        for (std::size_t i = 0; i < n_rows; ++i) {
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
                std::size_t j = col_idx[k];
                m = std::max(m, std::abs(values[k] - entry(j, i)));
            }
        }
        return m;
    }

    double entry(std::size_t i, std::size_t j) const {
        auto lo = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
        auto hi = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
        auto it = std::lower_bound(lo, hi, j);
        if (it != hi && *it == j) return values[static_cast<std::size_t>(it - col_idx.begin())];
        return 0.0;
    }

    DenseMatrix to_dense() const {
        DenseMatrix D(n_rows, n_cols, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) D(i, col_idx[k]) = values[k];
        return D;
    }
};

inline Vec spmv(const CsrMatrix& A, const Vec& x) {
    if (x.size() != A.n_cols) throw DimensionError("spmv: size mismatch");
    Vec y(A.n_rows, 0.0);
    for (std::size_t i = 0; i < A.n_rows; ++i) {
        double s = 0.0;
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
            s += A.values[k] * x[A.col_idx[k]];
        y[i] = s;
    }
    return y;
}

inline CsrMatrix csr_identity(std::size_t n) {
    CsrMatrix I;
    I.n_rows = I.n_cols = n;
    I.row_ptr.resize(n + 1);
    I.col_idx.resize(n);
    I.values.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        I.row_ptr[i] = i;
        I.col_idx[i] = i;
    }
    I.row_ptr[n] = n;
    return I;
}

// Accumulates (i,j,v) triplets; duplicate entries are summed on conversion.
class CooBuilder {
public:
    CooBuilder(std::size_t n_rows, std::size_t n_cols) : n_rows_(n_rows), n_cols_(n_cols) {}

    void add(std::size_t i, std::size_t j, double v) {
        if (v == 0.0) return;
        entries_.push_back({i, j, v});
    }

    CsrMatrix to_csr() {
        std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        CsrMatrix A;
        A.n_rows = n_rows_;
        A.n_cols = n_cols_;
        A.row_ptr.assign(n_rows_ + 1, 0);
        std::size_t k = 0;
        while (k < entries_.size()) {
            std::size_t i = entries_[k].i, j = entries_[k].j;
            double v = 0.0;
            while (k < entries_.size() && entries_[k].i == i && entries_[k].j == j)
                v += entries_[k++].v;
            A.col_idx.push_back(j);
            A.values.push_back(v);
            A.row_ptr[i + 1]++;
        }
        for (std::size_t i = 0; i < n_rows_; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
        return A;
    }

private:
    struct Entry {
        std::size_t i, j;
        double v;
    };
    std::size_t n_rows_, n_cols_;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

struct CgResult {
    Vec x;
    int iterations = 0;
    double residual = 0.0;  // final relative residual
};

// Conjugate gradients with Jacobi (diagonal) preconditioning. A must be SPD on
// the subspace excited by b (identity rows from eliminated constraints are fine).
inline CgResult solve_spd(const CsrMatrix& A, const Vec& b, double tol = 1e-10,
                          std::size_t max_iter = 0) {
    if (A.n_rows != A.n_cols || b.size() != A.n_rows)
        throw DimensionError("solve_spd: size mismatch");
    const std::size_t n = A.n_rows;
    if (max_iter == 0) max_iter = 20 * n;

    double bnorm = norm2(b);
    CgResult res;
    res.x.assign(n, 0.0);
    if (bnorm == 0.0) return res;  // x = 0 in 0 iterations

    Vec diag(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double d = A.entry(i, i);
        diag[i] = (d > 0.0) ? 1.0 / d : 1.0;
    }

    Vec r = b;                   // r = b - A*0
    Vec z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
    Vec p = z;
    double rz = dot(r, z);

    for (std::size_t it = 1; it <= max_iter; ++it) {
        Vec Ap = spmv(A, p);
        double pAp = dot(p, Ap);
        if (pAp <= 0.0) throw NotSpdError("solve_spd: non-positive curvature");
        double alpha = rz / pAp;
        axpy(alpha, p, res.x);
        axpy(-alpha, Ap, r);
        double rnorm = norm2(r);
        res.iterations = static_cast<int>(it);
        res.residual = rnorm / bnorm;
        if (res.residual <= tol) return res;
        for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
        double rz_new = dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError("solve_spd: no convergence within max_iter, residual=" +
                          std::to_string(res.residual),
                      res.residual, res.iterations);
}

// Dense symmetric eigendecomposition by cyclic Jacobi rotations.
// Returns eigenvalues sorted descending with matching eigenvector columns.
struct EigResult {
    Vec eigenvalues;
    DenseMatrix eigenvectors;  // column k pairs with eigenvalues[k]
};

inline EigResult sym_eig(const DenseMatrix& C, double sym_tol = 1e-10) {
    const std::size_t n = C.rows();
    if (C.cols() != n) throw DimensionError("sym_eig: matrix not square");
    double cnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cnorm = std::max(cnorm, std::abs(C(i, j)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(C(i, j) - C(j, i)) > sym_tol * std::max(1.0, cnorm))
                throw Error("sym_eig: input not symmetric");

    DenseMatrix A = C;
    DenseMatrix V(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;

    auto off_frob = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * A(i, j);
        return std::sqrt(s);
    };
    double frob = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) frob += A(i, j) * A(i, j);
    frob = std::sqrt(frob);
    const double stop = 1e-12 * std::max(frob, 1e-300);

    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps && off_frob() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = A(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                double app = A(p, p), aqq = A(q, q);
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return A(a, a) > A(b, b); });

    EigResult out;
    out.eigenvalues.resize(n);
    out.eigenvectors = DenseMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = A(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = V(i, order[k]);
    }
    return out;
}

// Dense Cholesky factorization; solves A X = B for SPD A with multiple RHS.
inline DenseMatrix cholesky_solve(const DenseMatrix& A, const DenseMatrix& B) {
    const std::size_t n = A.rows();
    if (A.cols() != n || B.rows() != n) throw DimensionError("cholesky_solve: size mismatch");
    DenseMatrix L(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = A(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d <= 0.0) throw NotSpdError("cholesky_solve: non-positive pivot at row " +
                                        std::to_string(j));
        L(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    DenseMatrix X = B;
    const std::size_t m = B.cols();
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {  // L y = b
            double s = X(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * X(k, c);
            X(i, c) = s / L(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {  // L^T x = y
            double s = X(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * X(k, c);
            X(ii, c) = s / L(ii, ii);
        }
    }
    return X;
}

inline Vec cholesky_solve(const DenseMatrix& A, const Vec& b) {
    DenseMatrix B(b.size(), 1);
    for (std::size_t i = 0; i < b.size(); ++i) B(i, 0) = b[i];
    DenseMatrix X = cholesky_solve(A, B);
    Vec x(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) x[i] = X(i, 0);
    return x;
}

// Small dense LU solve with partial pivoting (local element matrices).
inline void lu_solve_inplace(DenseMatrix& A, DenseMatrix& B) {
    const std::size_t n = A.rows();
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
        if (A(p, k) == 0.0) throw Error("lu_solve: singular local matrix");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
            for (std::size_t j = 0; j < B.cols(); ++j) std::swap(B(k, j), B(p, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = A(i, k) / A(k, k);
            A(i, k) = 0.0;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
            for (std::size_t j = 0; j < B.cols(); ++j) B(i, j) -= f * B(k, j);
        }
    }
    for (std::size_t c = 0; c < B.cols(); ++c)
        for (std::size_t ii = n; ii-- > 0;) {
            double s = B(ii, c);
            for (std::size_t j = ii + 1; j < n; ++j) s -= A(ii, j) * B(j, c);
            B(ii, c) = s / A(ii, ii);
        }
}

}  // namespace rbno
