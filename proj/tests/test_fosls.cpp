#include <catch2/catch_amalgamated.hpp>

#include "rbno/fosls.hpp"
#include "rbno/rng.hpp"

using namespace rbno;

namespace {

// Independent quadrature-loop evaluation of the diffusion fiber loss: FE
// fields are sampled through the generic point-evaluation path, not through
// the weight algebra under test.
double direct_diffusion_loss(const Discretization& d, const ScalarField& coeff,
                             const LiftData& lifts, const VectorField& f1,
                             const ScalarField& f2, const Vec& s, int quad_degree) {
    FeFunction sig = sigma_part(d, s);
    FeFunction u = u_part(d, s);
    QuadratureRule quad = triangle_rule(quad_degree);
    double loss = 0.0;
    for (std::size_t cell = 0; cell < d.mesh->n_cells(); ++cell) {
        CellGeometry g = cell_geometry(*d.mesh, cell);
        for (std::size_t q = 0; q < quad.size(); ++q) {
            Point x = g.map_to_physical(quad.xi[q], quad.eta[q]);
            double p = coeff(x);
            Point r1 = sig.eval_vec(x);
            Point gu = u.eval_grad(x);
            r1.x -= p * gu.x;
            r1.y -= p * gu.y;
            if (lifts.has_w()) {
                Point gw = lifts.w.eval_grad(x);
                r1.x -= p * gw.x;
                r1.y -= p * gw.y;
            }
            if (lifts.has_q()) {
                Point gq = lifts.q.eval_grad(x);
                r1.x += gq.x;
                r1.y += gq.y;
            }
            if (f1) {
                Point v = f1(x);
                r1.x -= v.x;
                r1.y -= v.y;
            }
            double r2 = sig.eval_div(x) + (f2 ? f2(x) : 0.0);
            loss += quad.w[q] * g.det * (r1.x * r1.x + r1.y * r1.y + r2 * r2);
        }
    }
    return loss;
}

Vec random_fe_vector(const Discretization& d, Rng& rng, double scale = 1.0) {
    Vec s(d.n_total(), 0.0);
    auto mask = d.constrained_mask();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!mask[i]) s[i] = scale * rng.uniform(-1.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("zero data gives zero weights and zero minimizer") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedDiffusion);
    p.f2 = {};  // wipe the source: no data at all
    Discretization d = make_discretization(p, 4, 4, 0);
    LiftData lifts;  // no lifts
    LossWeights lw = assemble_loss_weights(d, [](Point) { return 1.0; }, lifts, {}, {});
    REQUIRE(lw.beta == 0.0);
    for (double a : lw.alpha) REQUIRE(a == 0.0);
    SolutionPair sol = solve_fe_fosls(lw);
    for (double v : sol.s) REQUIRE(v == 0.0);
    REQUIRE(eval_loss(lw, sol.s) == 0.0);
}

TEST_CASE("eval_loss at zero returns beta; dimension mismatch rejected") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    LiftData lifts = compute_lifts(d);
    ParamSample s = sample_minisquares(7);
    LossWeights lw = assemble_problem_weights(d, s, lifts);
    REQUIRE(eval_loss(lw, Vec(d.n_total(), 0.0)) == lw.beta);
    REQUIRE(lw.beta > 0.0);
    REQUIRE_THROWS_AS(eval_loss(lw, Vec(3, 0.0)), DimensionError);
}

TEST_CASE("weight quadratic form matches independent quadrature evaluation") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    LiftData lifts = compute_lifts(d);
    ParamSample sample = sample_minisquares(3);
    ScalarField coeff = diffusion_coefficient(p, sample);
    LossWeights lw = assemble_loss_weights(d, coeff, lifts, p.f1, p.f2);

    Rng rng(13);
    SolutionPair sol = solve_fe_fosls(lw, 1e-12);
    Vec probe = random_fe_vector(d, rng, 0.3);
    for (const Vec* v : {&sol.s, &probe}) {
        double quick = eval_loss(lw, *v);
        double direct = direct_diffusion_loss(d, coeff, lifts, p.f1, p.f2, *v, 2 * d.m + 2);
        REQUIRE(std::abs(quick - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("W is symmetric and loss nonnegative at random probes") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    LiftData lifts = compute_lifts(d);
    LossWeights lw = assemble_problem_weights(d, sample_minisquares(21), lifts);
    REQUIRE(lw.W.max_asymmetry() <= 1e-12);
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        Vec s = random_fe_vector(d, rng);
        REQUIRE(eval_loss(lw, s) >= -1e-10 * lw.beta);
    }
}

TEST_CASE("Galerkin identity and minimal residual") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    LiftData lifts = compute_lifts(d);
    Rng rng(101);
    for (std::uint64_t seed : {11ull, 12ull}) {
        LossWeights lw = assemble_problem_weights(d, sample_minisquares(seed), lifts);
        SolutionPair star = solve_fe_fosls(lw, 1e-13);
        double loss_star = eval_loss(lw, star.s);
        for (int t = 0; t < 5; ++t) {
            Vec delta = random_fe_vector(d, rng, 0.5);
            Vec s(star.s.size());
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = star.s[i] + delta[i];
            double lhs = eval_loss(lw, s) - loss_star;
            double rhs = dot(delta, spmv(lw.W, delta));
            REQUIRE(std::abs(lhs - rhs) <= 1e-9 * std::max(std::abs(lhs), std::abs(rhs)));
            REQUIRE(eval_loss(lw, s) >= loss_star);
        }
    }
}

TEST_CASE("manufactured diffusion: loss decays at rate 2(k+1)") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedDiffusion);
    for (int k : {0, 1}) {
        std::vector<double> hs, losses;
        for (std::size_t n : {8u, 16u, 32u}) {
            Discretization d = make_discretization(p, n, n, k);
            LiftData lifts;  // zero boundary data
            LossWeights lw = assemble_problem_weights(d, ParamSample{}, lifts);
            SolutionPair sol = solve_fe_fosls(lw, 1e-12);
            hs.push_back(1.0 / static_cast<double>(n));
            losses.push_back(eval_loss(lw, sol.s));
        }
        // least-squares slope in log-log
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            double x = std::log(hs[i]), y = std::log(losses[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double n = static_cast<double>(hs.size());
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        REQUIRE(std::abs(slope - 2.0 * (k + 1)) <= 0.3);
    }
}

TEST_CASE("manufactured diffusion: FE solution approaches the exact fields") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedDiffusion);
    Discretization d = make_discretization(p, 32, 32, 1);
    LossWeights lw = assemble_problem_weights(d, ParamSample{}, LiftData{});
    SolutionPair sol = solve_fe_fosls(lw, 1e-12);
    FeFunction u = u_part(d, sol.s);
    FeFunction sig = sigma_part(d, sol.s);
    Rng rng(3);
    for (int t = 0; t < 25; ++t) {
        Point x{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
        REQUIRE(std::abs(u.eval(x) - manufactured_diffusion_u(x)) < 5e-4);
        Point se = manufactured_diffusion_sigma(x);
        Point sv = sig.eval_vec(x);
        REQUIRE(std::abs(sv.x - se.x) < 5e-3);
        REQUIRE(std::abs(sv.y - se.y) < 5e-3);
    }
}

TEST_CASE("quadrature doubling leaves smooth-problem losses unchanged") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedDiffusion);
    Discretization d = make_discretization(p, 16, 16, 1);
    LossWeights lw1 = assemble_problem_weights(d, ParamSample{}, LiftData{});
    LossWeights lw2 = assemble_problem_weights(d, ParamSample{}, LiftData{}, 2 * (2 * d.m + 2));
    SolutionPair sol = solve_fe_fosls(lw1, 1e-12);
    double l1 = eval_loss(lw1, sol.s);
    double l2 = eval_loss(lw2, sol.s);
    REQUIRE(std::abs(l1 - l2) <= 1e-6 * std::abs(l1));
}

TEST_CASE("gram matrix blocks behave like the component norms") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 8, 8, 0);  // no constraints touched below
    GramXh X = gram_xh(d);

    // pure-u vector: X-norm^2 equals H1 norm^2 of u = x (interior dofs only
    // via the unconstrained sub-block: use a function vanishing on Gamma_D)
    Vec s(d.n_total(), 0.0);
    Vec uc = d.u.interpolate_scalar([](Point x, int) { return x.x * (1.0 - x.x); });
    FeFunction uf(d.u, uc);
    uf.zero_constrained();
    for (std::size_t i = 0; i < d.n_u(); ++i) s[d.n_sigma() + i] = uf.coeffs[i];
    double xn2 = x_norm(X, s);
    CsrMatrix M = assemble_matrix(d.u, d.u, FormKind::Mass);
    CsrMatrix K = assemble_matrix(d.u, d.u, FormKind::Stiffness);
    double h1 = std::sqrt(dot(uf.coeffs, spmv(M, uf.coeffs)) +
                          dot(uf.coeffs, spmv(K, uf.coeffs)));
    REQUIRE(xn2 == Catch::Approx(h1).epsilon(1e-12));

    // RT0 interpolant of (1,0): norm 1 (unit L2 mass, zero divergence)
    Vec s2(d.n_total(), 0.0);
    Vec sc = d.sigma.interpolate_vector([](Point, int) { return Point{1.0, 0.0}; });
    FeFunction sf(d.sigma, sc);
    sf.zero_constrained();  // (1,0) has zero normal trace on top/bottom
    for (std::size_t i = 0; i < d.n_sigma(); ++i) s2[i] = sf.coeffs[i];
    REQUIRE(x_norm(X, s2) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("h_norm_error and residual_ratio basics") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    GramXh X = gram_xh(d);
    LiftData lifts = compute_lifts(d);
    LossWeights lw = assemble_problem_weights(d, sample_minisquares(2), lifts);
    SolutionPair sol = solve_fe_fosls(lw);

    REQUIRE(h_norm_error(X, sol.s, sol.s) == 0.0);
    REQUIRE(h_norm_error(X, sol.s, Vec(sol.s.size(), 0.0)) ==
            Catch::Approx(x_norm(X, sol.s)).epsilon(1e-13));
    REQUIRE(residual_ratio(lw, sol.s, sol.s, X) == 0.0);

    // a large random perturbation of the solution lands in [1/C, 1/c]
    EquivalenceConstants eq = norm_equivalence_constants(0.1, 10.0, std::sqrt(2.0) / M_PI);
    Rng rng(66);
    Vec probe = sol.s;
    auto mask = d.constrained_mask();
    for (std::size_t i = 0; i < probe.size(); ++i)
        if (!mask[i]) probe[i] += 20.0 * rng.uniform(-1.0, 1.0);
    double ratio = residual_ratio(lw, probe, sol.s, X);
    REQUIRE(ratio >= 1.0 / eq.C * 0.999);
    REQUIRE(ratio <= 1.0 / eq.c * 1.001);
}

TEST_CASE("norm equivalence constants bound the Rayleigh ratio") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    Discretization d = make_discretization(p, 16, 16, 0);
    GramXh X = gram_xh(d);
    LiftData lifts = compute_lifts(d);
    EquivalenceConstants eq =
        norm_equivalence_constants(0.1, 10.0, std::sqrt(2.0) / M_PI);
    Rng rng(77);
    for (std::uint64_t seed : {100ull, 101ull, 102ull}) {
        LossWeights lw = assemble_problem_weights(d, sample_minisquares(seed), lifts);
        for (int t = 0; t < 5; ++t) {
            Vec s = random_fe_vector(d, rng);
            double num = std::sqrt(dot(s, spmv(lw.W, s)));
            double den = x_norm(X, s);
            double ratio = num / den;
            REQUIRE(ratio >= eq.c);
            REQUIRE(ratio <= eq.C);
        }
    }
}

TEST_CASE("prolongation to the nested refinement preserves the function") {
    ProblemSetup p = make_problem(ProblemKind::HeatConduction);
    for (int k : {0, 1}) {
        Discretization dc = make_discretization(p, 8, 8, k);
        Discretization df = make_discretization(p, 16, 16, k);
        Rng rng(5 + k);
        Vec s = random_fe_vector(dc, rng);
        Vec sf = prolong(dc, df, s);
        GramXh Xc = gram_xh(dc);
        GramXh Xf = gram_xh(df);
        double nc = x_norm(Xc, s);
        double nf = x_norm(Xf, sf);
        REQUIRE(nf == Catch::Approx(nc).epsilon(1e-9));
    }
}

TEST_CASE("elasticity: zero data solve returns zero") {
    ProblemSetup p = make_problem(ProblemKind::Elasticity);
    p.traction = {};  // no data anywhere
    p.neumann = {BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Bottom};
    Discretization d = make_discretization(p, 8, 4, 0);
    LiftData lifts;  // u0 = 0, t = 0
    LossWeights lw =
        assemble_loss_weights_elasticity(d, mean_material(p), lifts, {});
    REQUIRE(lw.beta == 0.0);
    SolutionPair sol = solve_fe_fosls(lw);
    for (double v : sol.s) REQUIRE(v == 0.0);
}

TEST_CASE("manufactured elasticity: loss decays at rate 2(k+1)") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedElasticity);
    for (int k : {0, 1}) {
        std::vector<double> hs, losses;
        for (std::size_t n : {8u, 16u}) {
            Discretization d = make_discretization(p, n, n, k);
            LossWeights lw = assemble_problem_weights(d, ParamSample{}, LiftData{});
            SolutionPair sol = solve_fe_fosls(lw, 1e-12);
            hs.push_back(1.0 / static_cast<double>(n));
            losses.push_back(eval_loss(lw, sol.s));
        }
        double slope = std::log(losses[0] / losses[1]) / std::log(hs[0] / hs[1]);
        REQUIRE(std::abs(slope - 2.0 * (k + 1)) <= 0.35);
    }
}

TEST_CASE("elasticity weights match a direct tensor quadrature loop") {
    ProblemSetup p = make_problem(ProblemKind::ManufacturedElasticity);
    Discretization d = make_discretization(p, 6, 6, 0);
    LossWeights lw = assemble_problem_weights(d, ParamSample{}, LiftData{});
    SolutionPair sol = solve_fe_fosls(lw, 1e-12);

    // independent loop via point evaluation
    MaterialField mat = elasticity_material(p, ParamSample{});
    FeFunction sig = sigma_part(d, sol.s);
    FeFunction u = u_part(d, sol.s);
    QuadratureRule quad = triangle_rule(2 * d.m + 2);
    double loss = 0.0;
    for (std::size_t cell = 0; cell < d.mesh->n_cells(); ++cell) {
        CellGeometry g = cell_geometry(*d.mesh, cell);
        for (std::size_t q = 0; q < quad.size(); ++q) {
            Point x = g.map_to_physical(quad.xi[q], quad.eta[q]);
            auto [mu, lam] = mat(x);
            Point row0 = sig.eval_vec(x, 0), row1 = sig.eval_vec(x, 1);
            Tensor2 st{row0.x, row0.y, row1.x, row1.y};
            Tensor2 eps = Tensor2::sym_grad(u.eval_grad(x, 0), u.eval_grad(x, 1));
            Tensor2 r1 = stiffness_pow(mu, lam, -0.5, st) - stiffness_pow(mu, lam, 0.5, eps);
            Point r2{sig.eval_div(x, 0), sig.eval_div(x, 1)};
            Point f = p.body_force(x);
            r2.x += f.x;
            r2.y += f.y;
            loss += quad.w[q] * g.det * (frob2(r1) + dot(r2, r2));
        }
    }
    double quick = eval_loss(lw, sol.s);
    REQUIRE(std::abs(quick - loss) <= 1e-9 * std::max(1.0, std::abs(loss)));
}
