#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "rbno/assemble.hpp"
#include "rbno/fem.hpp"
#include "rbno/quadrature.hpp"
#include "rbno/rng.hpp"

using namespace rbno;

namespace {

// single reference triangle {(0,0),(1,0),(0,1)} as a hand-built mesh
Mesh reference_triangle_mesh() {
    Mesh m;
    m.x0 = 0;
    m.y0 = 0;
    m.x1 = 1;
    m.y1 = 1;
    m.nx = m.ny = 1;
    m.vertices = {{0, 0}, {1, 0}, {0, 1}};
    m.cells = {{0, 1, 2}};
    m.edges = {{1, 2}, {0, 2}, {0, 1}};  // local edge a opposite vertex a
    m.cell_edges = {{0, 1, 2}};
    m.cell_edge_signs = {{1, 1, 1}};
    m.boundary_facets = {{0, BoundaryTag::Right},
                         {1, BoundaryTag::Left},
                         {2, BoundaryTag::Bottom}};
    return m;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST_CASE("triangle quadrature: weights sum to reference area, monomials exact") {
    for (int degree : {1, 2, 4, 6, 8, 12}) {
        QuadratureRule q = triangle_rule(degree);
        double wsum = 0.0;
        for (double w : q.w) wsum += w;
        REQUIRE(wsum == Catch::Approx(0.5).epsilon(1e-14));
        for (int a = 0; a + 0 <= degree; ++a)
            for (int b = 0; a + b <= degree; ++b) {
                double val = 0.0;
                for (std::size_t i = 0; i < q.size(); ++i)
                    val += q.w[i] * std::pow(q.xi[i], a) * std::pow(q.eta[i], b);
                double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                REQUIRE(val == Catch::Approx(exact).margin(1e-14));
            }
    }
}

TEST_CASE("gauss-legendre on [0,1] integrates polynomials") {
    GaussRule g = gauss_legendre(3);
    for (int p = 0; p <= 5; ++p) {
        double v = 0.0;
        for (std::size_t i = 0; i < g.points.size(); ++i)
            v += g.weights[i] * std::pow(g.points[i], p);
        REQUIRE(v == Catch::Approx(1.0 / (p + 1)).epsilon(1e-13));
    }
}

TEST_CASE("space dof counts") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 2, 2);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);
    REQUIRE(cg1.n_dofs == 9);
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    REQUIRE(rt0.n_dofs == 16);
    auto cg2 = FunctionSpace::build(m, Family::CG, 2, 1);
    REQUIRE(cg2.n_dofs == 9 + 16);
    auto rt1 = FunctionSpace::build(m, Family::RT, 1, 1);
    REQUIRE(rt1.n_dofs == 2 * 16 + 2 * 8);

    REQUIRE_THROWS_AS(FunctionSpace::build(m, Family::CG, 3, 1), Error);
    REQUIRE_THROWS_AS(FunctionSpace::build(m, Family::RT, 2, 1), Error);
}

TEST_CASE("paper-scale dof count for RT1 x CG2 on 128x128") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 128, 128);
    auto rt1 = FunctionSpace::build(m, Family::RT, 1, 1);
    auto cg2 = FunctionSpace::build(m, Family::CG, 2, 1);
    REQUIRE(rt1.n_dofs + cg2.n_dofs == 230401);
}

TEST_CASE("constrained dof sets follow boundary tags") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 2, 2);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1,
                                    {BoundaryTag::Left, BoundaryTag::Right});
    REQUIRE(cg1.n_constrained() == 6);  // 3 vertices each on x=0 and x=1
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1,
                                    {BoundaryTag::Top, BoundaryTag::Bottom});
    REQUIRE(rt0.n_constrained() == 4);  // 2 horizontal boundary edges each
}

TEST_CASE("CG1 partition of unity") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 3, 2);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);
    QuadratureRule q = triangle_rule(4);
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
        auto b = cg1.tabulate(c, q);
        for (std::size_t qi = 0; qi < q.size(); ++qi) {
            double s = 0.0;
            for (std::size_t a = 0; a < b.nloc; ++a) s += b.value[a * q.size() + qi];
            REQUIRE(s == Catch::Approx(1.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("RT0 edge flux moments are Kronecker") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 2, 2);
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    GaussRule eg = gauss_legendre(4);
    std::vector<std::size_t> dofs;
    for (std::size_t cell = 0; cell < m.n_cells(); ++cell) {
        rt0.cell_dofs(cell, dofs);
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            FeFunction f(rt0);
            f.coeffs[dofs[a]] = 1.0;
            for (std::size_t b = 0; b < dofs.size(); ++b) {
                std::size_t e = dofs[b];
                Point pa = m.vertices[m.edges[e][0]];
                Point pb = m.vertices[m.edges[e][1]];
                Point t = pb - pa;
                double len = norm(t);
                Point n{t.y / len, -t.x / len};
                double flux = 0.0;
                std::vector<Point> vec;
                std::vector<double> div;
                for (std::size_t qi = 0; qi < eg.points.size(); ++qi) {
                    Point p = pa + eg.points[qi] * t;
                    rt0.tabulate_rt_point(cell, p, vec, div);
                    flux += eg.weights[qi] * len * dot(vec[a], n);
                }
                REQUIRE(flux == Catch::Approx(b == a ? 1.0 : 0.0).margin(1e-12));
            }
        }
    }
}

TEST_CASE("RT0 basis divergence is +-1/|T|") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 2, 2);
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    QuadratureRule q = triangle_rule(2);
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
        CellGeometry g = cell_geometry(m, c);
        auto b = rt0.tabulate(c, q);
        for (std::size_t a = 0; a < b.nloc; ++a) {
            double d0 = b.div[a * q.size()];
            REQUIRE(std::abs(std::abs(d0) - 1.0 / g.area) < 1e-11);
            for (std::size_t qi = 1; qi < q.size(); ++qi)
                REQUIRE(b.div[a * q.size() + qi] == Catch::Approx(d0).margin(1e-11));
        }
    }
}

TEST_CASE("RT0 divdiv on reference triangle has entries +-1/|T|") {
    Mesh m = reference_triangle_mesh();
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    CsrMatrix A = assemble_matrix(rt0, rt0, FormKind::RtDivDiv);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(std::abs(std::abs(A.entry(i, j)) - 2.0) < 1e-12);  // 1/|T| = 2
}

TEST_CASE("CG1 mass and stiffness on reference triangle match closed forms") {
    Mesh m = reference_triangle_mesh();
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);
    CsrMatrix M = assemble_matrix(cg1, cg1, FormKind::Mass);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(M.entry(i, j) ==
                    Catch::Approx(i == j ? 1.0 / 12.0 : 1.0 / 24.0).epsilon(1e-12));

    CsrMatrix K = assemble_matrix(cg1, cg1, FormKind::Stiffness);
    double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(K.entry(i, j) == Catch::Approx(expected[i][j]).margin(1e-13));
}

TEST_CASE("symmetric forms assemble symmetric matrices") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 4, 3);
    auto cg2 = FunctionSpace::build(m, Family::CG, 2, 1);
    auto rt1 = FunctionSpace::build(m, Family::RT, 1, 1);
    ScalarField p = [](Point pt) { return 1.0 + 0.5 * pt.x + 0.25 * pt.y * pt.y; };
    REQUIRE(assemble_matrix(cg2, cg2, FormKind::Mass).max_asymmetry() <= 1e-12);
    REQUIRE(assemble_matrix(cg2, cg2, FormKind::Stiffness, p).max_asymmetry() <= 1e-12);
    REQUIRE(assemble_matrix(cg2, cg2, FormKind::WeightedGradMass, p).max_asymmetry() <= 1e-12);
    REQUIRE(assemble_matrix(rt1, rt1, FormKind::RtMass).max_asymmetry() <= 1e-12);
    REQUIRE(assemble_matrix(rt1, rt1, FormKind::RtDivDiv).max_asymmetry() <= 1e-12);
}

TEST_CASE("interpolation: constants, polynomials, divergence") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 3, 3);
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    FeFunction c10(rt0, rt0.interpolate_vector([](Point, int) { return Point{1.0, 0.0}; }));
    Rng rng(41);
    for (int t = 0; t < 20; ++t) {
        Point p{rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98)};
        REQUIRE(std::abs(c10.eval_div(p)) < 1e-12);
        Point v = c10.eval_vec(p);
        REQUIRE(v.x == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(std::abs(v.y) < 1e-12);
    }

    auto cg2 = FunctionSpace::build(m, Family::CG, 2, 1);
    FeFunction x2(cg2, cg2.interpolate_scalar([](Point p, int) { return p.x * p.x; }));
    for (int t = 0; t < 20; ++t) {
        Point p{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        REQUIRE(std::abs(x2.eval(p) - p.x * p.x) <= 1e-13);
    }

    auto rt1 = FunctionSpace::build(m, Family::RT, 1, 1);
    FeFunction xy(rt1, rt1.interpolate_vector([](Point p, int) { return Point{p.x, p.y}; }));
    for (int t = 0; t < 20; ++t) {
        Point p{rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98)};
        Point v = xy.eval_vec(p);
        REQUIRE(v.x == Catch::Approx(p.x).margin(1e-12));
        REQUIRE(v.y == Catch::Approx(p.y).margin(1e-12));
        REQUIRE(xy.eval_div(p) == Catch::Approx(2.0).margin(1e-12));
    }
}

TEST_CASE("RT spaces reproduce their full local polynomial space") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 3, 3);
    Rng rng(61);

    // RT0 contains constants + x * homogeneous degree 0
    auto rt0 = FunctionSpace::build(m, Family::RT, 0, 1);
    FeFunction f0(rt0, rt0.interpolate_vector([](Point p, int) {
        return Point{0.4 + 0.7 * p.x, -0.2 + 0.7 * p.y};
    }));
    for (int t = 0; t < 10; ++t) {
        Point p{rng.uniform(0.03, 0.97), rng.uniform(0.03, 0.97)};
        Point v = f0.eval_vec(p);
        REQUIRE(v.x == Catch::Approx(0.4 + 0.7 * p.x).margin(1e-12));
        REQUIRE(v.y == Catch::Approx(-0.2 + 0.7 * p.y).margin(1e-12));
    }

    // RT1 contains all of (P1)^2 plus x * homogeneous degree 1
    auto rt1 = FunctionSpace::build(m, Family::RT, 1, 1);
    auto field = [](Point p) {
        double h = 0.3 * p.x - 0.8 * p.y;  // x * P~1 contribution
        return Point{1.0 + 2.0 * p.x - 0.5 * p.y + p.x * h,
                     -0.7 + 0.25 * p.x + 1.5 * p.y + p.y * h};
    };
    FeFunction f1(rt1, rt1.interpolate_vector([&](Point p, int) { return field(p); }));
    for (int t = 0; t < 10; ++t) {
        Point p{rng.uniform(0.03, 0.97), rng.uniform(0.03, 0.97)};
        Point v = f1.eval_vec(p);
        Point e = field(p);
        REQUIRE(v.x == Catch::Approx(e.x).margin(1e-12));
        REQUIRE(v.y == Catch::Approx(e.y).margin(1e-12));
    }
}

TEST_CASE("RT normal continuity across interior edges (random coefficients)") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 3, 2);
    std::map<std::size_t, std::vector<std::size_t>> edge_cells;
    for (std::size_t c = 0; c < m.n_cells(); ++c)
        for (auto e : m.cell_edges[c]) edge_cells[e].push_back(c);

    for (int degree : {0, 1}) {
        auto rt = FunctionSpace::build(m, Family::RT, degree, 1);
        Rng rng(97 + degree);
        FeFunction f(rt);
        for (auto& v : f.coeffs) v = rng.uniform(-1.0, 1.0);
        GaussRule eg = gauss_legendre(3);
        std::vector<std::size_t> dofs;
        std::vector<Point> vec;
        std::vector<double> div;
        for (auto& [e, cells] : edge_cells) {
            if (cells.size() != 2) continue;
            Point pa = m.vertices[m.edges[e][0]];
            Point pb = m.vertices[m.edges[e][1]];
            Point t = pb - pa;
            Point n{t.y / norm(t), -t.x / norm(t)};
            for (std::size_t qi = 0; qi < eg.points.size(); ++qi) {
                Point p = pa + eg.points[qi] * t;
                double fluxes[2];
                for (int side = 0; side < 2; ++side) {
                    rt.tabulate_rt_point(cells[side], p, vec, div);
                    rt.cell_dofs(cells[side], dofs);
                    double s = 0.0;
                    for (std::size_t a = 0; a < dofs.size(); ++a)
                        s += f.coeffs[dofs[a]] * dot(vec[a], n);
                    fluxes[side] = s;
                }
                REQUIRE(std::abs(fluxes[0] - fluxes[1]) < 1e-12);
            }
        }
    }
}

TEST_CASE("vector loads: zero source, partition of unity, boundary length") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 4, 4);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);

    LoadData zero;
    zero.scalar = [](Point) { return 0.0; };
    Vec z = assemble_vector(cg1, VectorFormKind::DomainLoad, zero);
    for (double v : z) REQUIRE(v == 0.0);

    LoadData one;
    one.scalar = [](Point) { return 1.0; };
    Vec b = assemble_vector(cg1, VectorFormKind::DomainLoad, one);
    double sum = 0.0;
    for (double v : b) sum += v;
    REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));  // integral of 1 over unit square

    Vec t = assemble_vector(cg1, VectorFormKind::BoundaryLoad, one, {}, {BoundaryTag::Top});
    double tsum = 0.0;
    for (double v : t) tsum += v;
    REQUIRE(tsum == Catch::Approx(1.0).epsilon(1e-12));  // |Gamma_top| = 1
}

TEST_CASE("apply_essential_bc edge cases") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 2, 2);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);
    CsrMatrix K = assemble_matrix(cg1, cg1, FormKind::Stiffness);

    // no constraints: unchanged
    CsrMatrix K2 = K;
    Vec b(cg1.n_dofs, 1.0);
    Vec b2 = b;
    apply_essential_bc(K2, b2, std::vector<bool>(cg1.n_dofs, false));
    REQUIRE(K2.values == K.values);
    REQUIRE(b2 == b);

    // all constrained: identity system
    CsrMatrix K3 = K;
    Vec b3(cg1.n_dofs, 5.0);
    apply_essential_bc(K3, b3, std::vector<bool>(cg1.n_dofs, true));
    for (std::size_t i = 0; i < K3.n_rows; ++i)
        for (std::size_t k = K3.row_ptr[i]; k < K3.row_ptr[i + 1]; ++k)
            REQUIRE(K3.values[k] == (K3.col_idx[k] == i ? 1.0 : 0.0));
    for (double v : b3) REQUIRE(v == 0.0);
}

TEST_CASE("Poisson with full Dirichlet and f=1 peaks near 0.0737") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 64, 64);
    std::set<BoundaryTag> all = {BoundaryTag::Left, BoundaryTag::Right, BoundaryTag::Top,
                                 BoundaryTag::Bottom};
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1, all);
    CsrMatrix K = assemble_matrix(cg1, cg1, FormKind::Stiffness);
    LoadData one;
    one.scalar = [](Point) { return 1.0; };
    Vec b = assemble_vector(cg1, VectorFormKind::DomainLoad, one);
    Vec x = solve_constrained(std::move(K), std::move(b), cg1.constrained);
    double xmax = 0.0;
    for (double v : x) xmax = std::max(xmax, v);
    REQUIRE(xmax == Catch::Approx(0.07367).margin(5e-4));
    // constrained entries exactly zero
    for (std::size_t i = 0; i < cg1.n_dofs; ++i)
        if (cg1.constrained[i]) REQUIRE(x[i] == 0.0);
}
