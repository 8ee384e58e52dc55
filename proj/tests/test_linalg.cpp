#include <catch2/catch_amalgamated.hpp>

#include "rbno/io.hpp"
#include "rbno/linalg.hpp"
#include "rbno/rng.hpp"

using namespace rbno;

namespace {

CsrMatrix dense_to_csr(const DenseMatrix& D) {
    CooBuilder B(D.rows(), D.cols());
    for (std::size_t i = 0; i < D.rows(); ++i)
        for (std::size_t j = 0; j < D.cols(); ++j) B.add(i, j, D(i, j));
    return B.to_csr();
}

}  // namespace

TEST_CASE("spmv identity and zero") {
    CsrMatrix I = csr_identity(4);
    Vec x = {1.0, -2.0, 3.0, 0.5};
    REQUIRE(spmv(I, x) == x);

    CsrMatrix Z;
    Z.n_rows = Z.n_cols = 3;
    Z.row_ptr = {0, 0, 0, 0};
    Vec y = spmv(Z, {1.0, 2.0, 3.0});
    for (double v : y) REQUIRE(v == 0.0);
}

TEST_CASE("spmv matches dense multiply on random 5x5") {
    Rng rng(17);
    DenseMatrix D(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) D(i, j) = rng.uniform(-1.0, 1.0);
    Vec x(5);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    CsrMatrix A = dense_to_csr(D);
    Vec y1 = spmv(A, x);
    Vec y2 = matvec(D, x);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(std::abs(y1[i] - y2[i]) < 1e-14);
}

TEST_CASE("solve_spd basics") {
    CsrMatrix I = csr_identity(6);
    Rng rng(3);
    Vec b(6);
    for (auto& v : b) v = rng.uniform(-2.0, 2.0);
    CgResult r = solve_spd(I, b);
    for (std::size_t i = 0; i < 6; ++i) REQUIRE(std::abs(r.x[i] - b[i]) < 1e-12);

    CgResult r0 = solve_spd(I, Vec(6, 0.0));
    REQUIRE(r0.iterations == 0);
    for (double v : r0.x) REQUIRE(v == 0.0);
}

TEST_CASE("solve_spd agrees with dense Cholesky on random SPD 20x20") {
    Rng rng(11);
    DenseMatrix R(20, 20);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) R(i, j) = rng.uniform(-1.0, 1.0);
    DenseMatrix A = matmul(R.transposed(), R);
    for (std::size_t i = 0; i < 20; ++i) A(i, i) += 1.0;  // A = R^T R + I
    Vec b(20);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);

    Vec x_cg = solve_spd(dense_to_csr(A), b, 1e-12).x;
    Vec x_ch = cholesky_solve(A, b);
    for (std::size_t i = 0; i < 20; ++i) REQUIRE(std::abs(x_cg[i] - x_ch[i]) < 1e-8);
}

TEST_CASE("solve_spd converges within iteration budget and reports failure") {
    // property: CG on SPD size-n converges within n iterations in exact
    // arithmetic; test with generous max_iter = 10n
    Rng rng(5);
    const std::size_t n = 30;
    DenseMatrix R(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) R(i, j) = rng.uniform(-1.0, 1.0);
    DenseMatrix A = matmul(R.transposed(), R);
    for (std::size_t i = 0; i < n; ++i) A(i, i) += 0.5;
    Vec b(n);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    CgResult r = solve_spd(dense_to_csr(A), b, 1e-10, 10 * n);
    REQUIRE(r.residual <= 1e-10);

    REQUIRE_THROWS_AS(solve_spd(dense_to_csr(A), b, 1e-14, 2), SolverError);
}

TEST_CASE("sym_eig diagonal and rank-1") {
    DenseMatrix D(3, 3, 0.0);
    D(0, 0) = 3.0;
    D(1, 1) = 1.0;
    D(2, 2) = 2.0;
    EigResult e = sym_eig(D);
    REQUIRE(e.eigenvalues[0] == Catch::Approx(3.0));
    REQUIRE(e.eigenvalues[1] == Catch::Approx(2.0));
    REQUIRE(e.eigenvalues[2] == Catch::Approx(1.0));
    REQUIRE(std::abs(std::abs(e.eigenvectors(0, 0)) - 1.0) < 1e-12);

    Rng rng(7);
    Vec u(5);
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    DenseMatrix U(5, 5);
    double un2 = 0.0;
    for (double v : u) un2 += v * v;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) U(i, j) = u[i] * u[j];
    EigResult e2 = sym_eig(U);
    REQUIRE(e2.eigenvalues[0] == Catch::Approx(un2).margin(1e-12));
    for (std::size_t k = 1; k < 5; ++k) REQUIRE(std::abs(e2.eigenvalues[k]) < 1e-12);
}

TEST_CASE("sym_eig reconstructs random symmetric 8x8") {
    Rng rng(23);
    DenseMatrix C(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i; j < 8; ++j) {
            double v = rng.uniform(-1.0, 1.0);
            C(i, j) = v;
            C(j, i) = v;
        }
    EigResult e = sym_eig(C);
    // V Lambda V^T = C and V^T V = I
    double cnorm = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) cnorm = std::max(cnorm, std::abs(C(i, j)));
    double trace = 0.0, eigsum = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        trace += C(i, i);
        eigsum += e.eigenvalues[i];
    }
    REQUIRE(std::abs(trace - eigsum) < 1e-10 * std::max(1.0, std::abs(trace)));
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            double rec = 0.0, ortho = 0.0;
            for (std::size_t k = 0; k < 8; ++k) {
                rec += e.eigenvectors(i, k) * e.eigenvalues[k] * e.eigenvectors(j, k);
                ortho += e.eigenvectors(k, i) * e.eigenvectors(k, j);
            }
            REQUIRE(std::abs(rec - C(i, j)) < 1e-10 * std::max(1.0, cnorm));
            REQUIRE(std::abs(ortho - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
}

TEST_CASE("sym_eig rejects asymmetric input") {
    DenseMatrix C(2, 2, 0.0);
    C(0, 1) = 1.0;
    REQUIRE_THROWS_AS(sym_eig(C), Error);
}

TEST_CASE("cholesky_solve hand-computed 2x2 and SPD guard") {
    DenseMatrix A(2, 2);
    A(0, 0) = 4.0;
    A(0, 1) = 1.0;
    A(1, 0) = 1.0;
    A(1, 1) = 3.0;
    Vec x = cholesky_solve(A, Vec{1.0, 1.0});
    REQUIRE(x[0] == Catch::Approx(2.0 / 11.0).epsilon(1e-12));
    REQUIRE(x[1] == Catch::Approx(3.0 / 11.0).epsilon(1e-12));

    DenseMatrix N(2, 2);
    N(0, 0) = 1.0;
    N(0, 1) = 2.0;
    N(1, 0) = 2.0;
    N(1, 1) = 1.0;  // indefinite
    REQUIRE_THROWS_AS(cholesky_solve(N, Vec{1.0, 1.0}), NotSpdError);
}

TEST_CASE("rbno1 round trip") {
    Rng rng(29);
    DenseMatrix M(3, 7);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 7; ++j) M(i, j) = rng.uniform(-5.0, 5.0);
    auto path = std::filesystem::temp_directory_path() / "rbno1_roundtrip.bin";
    write_rbno1(path, M);
    DenseMatrix R = read_rbno1(path);
    REQUIRE(R.rows() == 3);
    REQUIRE(R.cols() == 7);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 7; ++j) REQUIRE(R(i, j) == M(i, j));
    std::filesystem::remove(path);
}
