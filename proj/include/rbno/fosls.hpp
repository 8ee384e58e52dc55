#pragma once

#include <cmath>
#include <limits>

#include "rbno/assemble.hpp"
#include "rbno/lifts.hpp"
#include "rbno/problems.hpp"

namespace rbno {

// Quadratic form data of one fiber loss:
//   loss(s) = s^T W s + 2 s^T alpha + beta,
// with the stacked coefficient vector s = (sigma; u). Constrained dofs are
// eliminated symmetrically (identity rows in W, zeros in alpha).
struct LossWeights {
    CsrMatrix W;
    Vec alpha;
    double beta = 0.0;
    std::uint64_t sample_seed = 0;

    std::size_t size() const { return alpha.size(); }
};

inline double eval_loss(const LossWeights& lw, const Vec& s) {
    if (s.size() != lw.alpha.size()) throw DimensionError("eval_loss: size mismatch");
    Vec Ws = spmv(lw.W, s);
    return dot(s, Ws) + 2.0 * dot(s, lw.alpha) + lw.beta;
}

struct SolutionPair {
    Vec s;  // stacked (sigma; u), constrained entries zero
};

inline FeFunction sigma_part(const Discretization& d, const Vec& s) {
    Vec c(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(d.n_sigma()));
    return FeFunction(d.sigma, std::move(c));
}

inline FeFunction u_part(const Discretization& d, const Vec& s) {
    Vec c(s.begin() + static_cast<std::ptrdiff_t>(d.n_sigma()), s.end());
    return FeFunction(d.u, std::move(c));
}

// ---------------------------------------------------------------------------
// Weight assembly (diffusion)
// ---------------------------------------------------------------------------

// Residual blocks R1(s) = sigma - p grad u and R2(s) = div sigma against the
// data F = p grad w - z + f1 and f2:
//   loss(s) = ||R1(s) - F||^2 + ||R2(s) + f2||^2.
// W, alpha, beta are accumulated from one shared quadrature loop so the
// quadratic form reproduces the integral loss exactly.
inline LossWeights assemble_loss_weights(const Discretization& d, const ScalarField& coeff,
                                         const LiftData& lifts, const VectorField& f1,
                                         const ScalarField& f2, int quad_degree = -1) {
    if (d.problem.elasticity) throw Error("assemble_loss_weights: diffusion discretization expected");
    const Mesh& mesh = *d.mesh;
    if (quad_degree < 0) quad_degree = 2 * d.m + 2;
    QuadratureRule quad = triangle_rule(quad_degree);
    const std::size_t nq = quad.size();
    const std::size_t n_sigma = d.n_sigma();
    const std::size_t n_total = d.n_total();

    CooBuilder WB(n_total, n_total);
    Vec alpha(n_total, 0.0);
    double beta = 0.0;

    std::vector<std::size_t> sd, udofs;
    std::vector<Point> r1;    // per local dof x quad point
    std::vector<double> r2;

    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
        CellGeometry g = cell_geometry(mesh, cell);
        auto sb = d.sigma.tabulate(cell, quad);
        auto ub = d.u.tabulate(cell, quad);
        d.sigma.cell_dofs(cell, sd);
        d.u.cell_dofs(cell, udofs);
        const std::size_t ns = sd.size(), nu = udofs.size();
        const std::size_t nloc = ns + nu;

        r1.assign(nloc * nq, Point{});
        r2.assign(nloc * nq, 0.0);
        std::vector<Point> Fq(nq);
        std::vector<double> f2q(nq), wq(nq);

        for (std::size_t q = 0; q < nq; ++q) {
            Point x = g.map_to_physical(quad.xi[q], quad.eta[q]);
            double p = coeff(x);
            wq[q] = quad.w[q] * g.det;

            Point F{0.0, 0.0};
            if (lifts.has_w()) {
                Point gw{0.0, 0.0};
                for (std::size_t a = 0; a < nu; ++a) {
                    double c = lifts.w.coeffs[udofs[a]];
                    gw.x += c * ub.grad[a * nq + q].x;
                    gw.y += c * ub.grad[a * nq + q].y;
                }
                F.x += p * gw.x;
                F.y += p * gw.y;
            }
            if (lifts.has_q()) {
                for (std::size_t a = 0; a < nu; ++a) {
                    double c = lifts.q.coeffs[udofs[a]];
                    F.x -= c * ub.grad[a * nq + q].x;
                    F.y -= c * ub.grad[a * nq + q].y;
                }
            }
            if (f1) {
                Point v = f1(x);
                F.x += v.x;
                F.y += v.y;
            }
            Fq[q] = F;
            f2q[q] = f2 ? f2(x) : 0.0;

            for (std::size_t a = 0; a < ns; ++a) {
                r1[a * nq + q] = sb.vec[a * nq + q];
                r2[a * nq + q] = sb.div[a * nq + q];
            }
            for (std::size_t a = 0; a < nu; ++a) {
                Point gr = ub.grad[a * nq + q];
                r1[(ns + a) * nq + q] = {-p * gr.x, -p * gr.y};
            }
        }

        std::vector<double> local(nloc * nloc, 0.0);
        std::vector<double> local_alpha(nloc, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            double w = wq[q];
            for (std::size_t a = 0; a < nloc; ++a) {
                Point r1a = r1[a * nq + q];
                double r2a = r2[a * nq + q];
                local_alpha[a] += w * (-(r1a.x * Fq[q].x + r1a.y * Fq[q].y) + r2a * f2q[q]);
                for (std::size_t b = a; b < nloc; ++b) {
                    Point r1b = r1[b * nq + q];
                    local[a * nloc + b] +=
                        w * (r1a.x * r1b.x + r1a.y * r1b.y + r2a * r2[b * nq + q]);
                }
            }
            beta += w * (Fq[q].x * Fq[q].x + Fq[q].y * Fq[q].y + f2q[q] * f2q[q]);
        }

        auto global_dof = [&](std::size_t a) {
            return a < ns ? sd[a] : n_sigma + udofs[a - ns];
        };
        for (std::size_t a = 0; a < nloc; ++a) {
            std::size_t ga = global_dof(a);
            alpha[ga] += local_alpha[a];
            for (std::size_t b = a; b < nloc; ++b) {
                std::size_t gb = global_dof(b);
                WB.add(ga, gb, local[a * nloc + b]);
                if (b != a) WB.add(gb, ga, local[a * nloc + b]);
            }
        }
    }

    LossWeights lw;
    lw.W = WB.to_csr();
    lw.alpha = std::move(alpha);
    lw.beta = beta;
    apply_essential_bc(lw.W, lw.alpha, d.constrained_mask());
    return lw;
}

// ---------------------------------------------------------------------------
// Weight assembly (elasticity)
// ---------------------------------------------------------------------------

// Residual blocks R1(s) = C^{-1/2} sigma - C^{1/2} eps(u) (2x2 tensor) and
// R2(s) = div sigma (row-wise, 2-vector) against the data
// G = C^{1/2} eps(w) - C^{-1/2} z and the body force f:
//   loss(s) = ||R1(s) - G||^2 + ||R2(s) + f||^2.
inline LossWeights assemble_loss_weights_elasticity(const Discretization& d,
                                                    const MaterialField& material,
                                                    const LiftData& lifts,
                                                    const VectorField& body_force,
                                                    int quad_degree = -1) {
    if (!d.problem.elasticity)
        throw Error("assemble_loss_weights_elasticity: elasticity discretization expected");
    const Mesh& mesh = *d.mesh;
    if (quad_degree < 0) quad_degree = 2 * d.m + 2;
    QuadratureRule quad = triangle_rule(quad_degree);
    const std::size_t nq = quad.size();
    const std::size_t n_sigma = d.n_sigma();
    const std::size_t n_total = d.n_total();

    CooBuilder WB(n_total, n_total);
    Vec alpha(n_total, 0.0);
    double beta = 0.0;

    std::vector<std::size_t> sd, udofs;
    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
        CellGeometry g = cell_geometry(mesh, cell);
        auto sb = d.sigma.tabulate(cell, quad);
        auto ub = d.u.tabulate(cell, quad);
        d.sigma.cell_dofs(cell, sd);
        d.u.cell_dofs(cell, udofs);
        const std::size_t ns = sd.size(), nu = udofs.size();
        const std::size_t nloc = 2 * ns + 2 * nu;  // sigma rows then u components

        std::vector<Tensor2> r1(nloc * nq);
        std::vector<Point> r2(nloc * nq, Point{});
        std::vector<Tensor2> Gq(nq);
        std::vector<Point> fq(nq, Point{});
        std::vector<double> wq(nq);

        for (std::size_t q = 0; q < nq; ++q) {
            Point x = g.map_to_physical(quad.xi[q], quad.eta[q]);
            auto [mu, lam] = material(x);
            wq[q] = quad.w[q] * g.det;

            Tensor2 G{};
            if (lifts.has_w()) {
                Point gw0{0, 0}, gw1{0, 0};
                for (std::size_t a = 0; a < nu; ++a) {
                    Point gr = ub.grad[a * nq + q];
                    double c0 = lifts.w.coeffs[d.u.component_dof(udofs[a], 0)];
                    double c1 = lifts.w.coeffs[d.u.component_dof(udofs[a], 1)];
                    gw0.x += c0 * gr.x;
                    gw0.y += c0 * gr.y;
                    gw1.x += c1 * gr.x;
                    gw1.y += c1 * gr.y;
                }
                G = G + stiffness_pow(mu, lam, 0.5, Tensor2::sym_grad(gw0, gw1));
            }
            if (lifts.has_q()) {
                Point gq0{0, 0}, gq1{0, 0};
                for (std::size_t a = 0; a < nu; ++a) {
                    Point gr = ub.grad[a * nq + q];
                    double c0 = lifts.q.coeffs[d.u.component_dof(udofs[a], 0)];
                    double c1 = lifts.q.coeffs[d.u.component_dof(udofs[a], 1)];
                    gq0.x += c0 * gr.x;
                    gq0.y += c0 * gr.y;
                    gq1.x += c1 * gr.x;
                    gq1.y += c1 * gr.y;
                }
                // z = grad q with rows (grad q_1, grad q_2)
                Tensor2 z{gq0.x, gq0.y, gq1.x, gq1.y};
                G = G - stiffness_pow(mu, lam, -0.5, z);
            }
            Gq[q] = G;
            if (body_force) fq[q] = body_force(x);

            for (int row = 0; row < 2; ++row)
                for (std::size_t a = 0; a < ns; ++a) {
                    std::size_t loc = static_cast<std::size_t>(row) * ns + a;
                    r1[loc * nq + q] =
                        stiffness_pow(mu, lam, -0.5, basis_tensor(sb.vec[a * nq + q], row));
                    r2[loc * nq + q] =
                        row == 0 ? Point{sb.div[a * nq + q], 0.0} : Point{0.0, sb.div[a * nq + q]};
                }
            for (int comp = 0; comp < 2; ++comp)
                for (std::size_t a = 0; a < nu; ++a) {
                    std::size_t loc = 2 * ns + static_cast<std::size_t>(comp) * nu + a;
                    Tensor2 eps = basis_strain(ub.grad[a * nq + q], comp);
                    r1[loc * nq + q] = stiffness_pow(mu, lam, 0.5, eps) * (-1.0);
                }
        }

        std::vector<double> local(nloc * nloc, 0.0);
        std::vector<double> local_alpha(nloc, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            double w = wq[q];
            for (std::size_t a = 0; a < nloc; ++a) {
                const Tensor2& r1a = r1[a * nq + q];
                const Point& r2a = r2[a * nq + q];
                local_alpha[a] += w * (-ddot(r1a, Gq[q]) + dot(r2a, fq[q]));
                for (std::size_t b = a; b < nloc; ++b)
                    local[a * nloc + b] +=
                        w * (ddot(r1a, r1[b * nq + q]) + dot(r2a, r2[b * nq + q]));
            }
            beta += w * (frob2(Gq[q]) + dot(fq[q], fq[q]));
        }

        auto global_dof = [&](std::size_t a) -> std::size_t {
            if (a < 2 * ns) {
                int row = static_cast<int>(a / ns);
                return d.sigma.component_dof(sd[a % ns], row);
            }
            std::size_t ua = a - 2 * ns;
            int comp = static_cast<int>(ua / nu);
            return n_sigma + d.u.component_dof(udofs[ua % nu], comp);
        };
        for (std::size_t a = 0; a < nloc; ++a) {
            std::size_t ga = global_dof(a);
            alpha[ga] += local_alpha[a];
            for (std::size_t b = a; b < nloc; ++b) {
                std::size_t gb = global_dof(b);
                WB.add(ga, gb, local[a * nloc + b]);
                if (b != a) WB.add(gb, ga, local[a * nloc + b]);
            }
        }
    }

    LossWeights lw;
    lw.W = WB.to_csr();
    lw.alpha = std::move(alpha);
    lw.beta = beta;
    apply_essential_bc(lw.W, lw.alpha, d.constrained_mask());
    return lw;
}

inline LossWeights assemble_problem_weights(const Discretization& d, const ParamSample& s,
                                            const LiftData& lifts, int quad_degree = -1) {
    const ProblemSetup& p = d.problem;
    if (p.elasticity)
        return assemble_loss_weights_elasticity(d, elasticity_material(p, s), lifts,
                                                p.body_force, quad_degree);
    return assemble_loss_weights(d, diffusion_coefficient(p, s), lifts, p.f1, p.f2,
                                 quad_degree);
}

// ---------------------------------------------------------------------------
// Solves and norms
// ---------------------------------------------------------------------------

inline SolutionPair solve_fe_fosls(const LossWeights& lw, double tol = 1e-10,
                                   std::size_t max_iter = 0) {
    Vec b(lw.alpha.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = -lw.alpha[i];
    CgResult r = solve_spd(lw.W, b, tol, max_iter);
    return {std::move(r.x)};
}

// Discrete H(div) x H^1 Gram matrix (diffusion) or its stiffness-weighted
// analogue at the mean parameter (elasticity); identity rows at constrained
// dofs keep it SPD on the full index set.
struct GramXh {
    CsrMatrix X;
};

inline GramXh gram_xh(const Discretization& d) {
    const std::size_t n_sigma = d.n_sigma();
    CooBuilder B(d.n_total(), d.n_total());
    auto add_block = [&](const CsrMatrix& A, std::size_t ro, std::size_t co) {
        for (std::size_t i = 0; i < A.n_rows; ++i)
            for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
                B.add(ro + i, co + A.col_idx[k], A.values[k]);
    };
    if (!d.problem.elasticity) {
        add_block(assemble_matrix(d.sigma, d.sigma, FormKind::RtMass), 0, 0);
        add_block(assemble_matrix(d.sigma, d.sigma, FormKind::RtDivDiv), 0, 0);
        add_block(assemble_matrix(d.u, d.u, FormKind::Mass), n_sigma, n_sigma);
        add_block(assemble_matrix(d.u, d.u, FormKind::Stiffness), n_sigma, n_sigma);
    } else {
        MaterialField mean = mean_material(d.problem);
        add_block(assemble_matrix(d.sigma, d.sigma, FormKind::CinvRtMass, {}, mean), 0, 0);
        add_block(assemble_matrix(d.sigma, d.sigma, FormKind::RtDivDiv), 0, 0);
        add_block(assemble_matrix(d.u, d.u, FormKind::StrainEnergy, {}, mean), n_sigma,
                  n_sigma);
    }
    GramXh g;
    g.X = B.to_csr();
    Vec dummy(d.n_total(), 0.0);
    apply_essential_bc(g.X, dummy, d.constrained_mask());
    return g;
}

inline double x_norm(const GramXh& g, const Vec& v) {
    Vec Xv = spmv(g.X, v);
    return std::sqrt(std::max(0.0, dot(v, Xv)));
}

inline double h_norm_error(const GramXh& g, const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("h_norm_error: size mismatch");
    Vec d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return x_norm(g, d);
}

inline double residual_ratio(const LossWeights& lw, const Vec& s, const Vec& s_ref,
                             const GramXh& g) {
    double err = h_norm_error(g, s, s_ref);
    double loss = eval_loss(lw, s);
    if (loss <= 0.0)
        return err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return err / std::sqrt(loss);
}

// Norm-equivalence constants: C = sqrt(2 + beta^2) and the closed-form lower
// constant with Poincare constant C_P, for 0 < alpha <= p <= beta.
struct EquivalenceConstants {
    double c = 0.0;
    double C = 0.0;
};

inline EquivalenceConstants norm_equivalence_constants(double alpha_min, double beta_max,
                                                       double poincare) {
    double cp2 = 1.0 + poincare * poincare;
    double A = beta_max * std::sqrt(cp2) / alpha_min;
    double denom = (std::sqrt(2.0) + A) * (std::sqrt(2.0) + A) +
                   cp2 * cp2 / (alpha_min * alpha_min);
    return {1.0 / std::sqrt(denom), std::sqrt(2.0 + beta_max * beta_max)};
}

// ---------------------------------------------------------------------------
// Prolongation to a nested refinement (canonical interpolation is exact for
// nested meshes with the same element pair)
// ---------------------------------------------------------------------------

inline Vec prolong(const Discretization& coarse, const Discretization& fine,
                   const Vec& s_coarse) {
    if (s_coarse.size() != coarse.n_total()) throw DimensionError("prolong: size mismatch");
    FeFunction sc = sigma_part(coarse, s_coarse);
    FeFunction uc = u_part(coarse, s_coarse);
    Vec sig_f = fine.sigma.interpolate_vector(
        [&sc](Point p, int comp) { return sc.eval_vec(p, comp); });
    Vec u_f = fine.u.interpolate_scalar([&uc](Point p, int comp) { return uc.eval(p, comp); });
    Vec out(fine.n_total(), 0.0);
    for (std::size_t i = 0; i < sig_f.size(); ++i) out[i] = sig_f[i];
    for (std::size_t i = 0; i < u_f.size(); ++i) out[fine.n_sigma() + i] = u_f[i];
    auto mask = fine.constrained_mask();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (mask[i]) out[i] = 0.0;
    return out;
}

}  // namespace rbno
