#pragma once

#include <functional>
#include <set>
#include <vector>

#include "rbno/fem.hpp"
#include "rbno/fields.hpp"
#include "rbno/quadrature.hpp"
#include "rbno/tensor.hpp"

namespace rbno {

enum class FormKind {
    Mass,             // (u, v), CG scalar/vector
    Stiffness,        // (a grad u, grad v), optional scalar weight a
    WeightedGradMass, // (p grad u, p grad v), scalar CG
    RtMass,           // (sigma, tau)
    RtDivDiv,         // (div sigma, div tau)
    Mixed,            // (sigma, p grad v): test RT x trial CG (scalar)
    StrainEnergy,     // (C eps(u), eps(v)), vector CG with material
    CinvRtMass,       // (C^-1 sigma, tau), tensor RT with material
    BoundaryMass,     // <u, v> on tagged facets, CG
};

enum class VectorFormKind {
    DomainLoad,       // (f, v), CG
    WeightedGradLoad, // (F, p grad v), scalar CG
    RtLoad,           // (F, tau)
    DivLoad,          // (f2, div tau)
    BoundaryLoad,     // <g, v> on tagged facets, CG
};

inline int polynomial_degree(const FunctionSpace& s) {
    return s.family == Family::CG ? s.degree : s.degree + 1;
}

inline int default_quad_degree(const FunctionSpace& a, const FunctionSpace& b) {
    int m = std::max(polynomial_degree(a), polynomial_degree(b));
    return 2 * m + 2;
}

// strain of the vector-CG basis (phi in component comp)
inline Tensor2 basis_strain(Point grad_phi, int comp) {
    if (comp == 0) return {grad_phi.x, 0.5 * grad_phi.y, 0.5 * grad_phi.y, 0.0};
    return {0.0, 0.5 * grad_phi.x, 0.5 * grad_phi.x, grad_phi.y};
}

// tensor with RT basis vector phi as row `comp`
inline Tensor2 basis_tensor(Point phi, int comp) {
    if (comp == 0) return {phi.x, phi.y, 0.0, 0.0};
    return {0.0, 0.0, phi.x, phi.y};
}

// ---------------------------------------------------------------------------
// Matrix forms
// ---------------------------------------------------------------------------

inline CsrMatrix assemble_matrix(const FunctionSpace& test, const FunctionSpace& trial,
                                 FormKind kind, const ScalarField& coeff = {},
                                 const MaterialField& material = {},
                                 const std::set<BoundaryTag>& tags = {}, int quad_degree = -1) {
    if (test.mesh != trial.mesh) throw Error("assemble_matrix: spaces on different meshes");
    const Mesh& mesh = *test.mesh;
    CooBuilder B(test.n_dofs, trial.n_dofs);

    if (kind == FormKind::BoundaryMass) {
        if (test.family != Family::CG || trial.family != Family::CG)
            throw Error("assemble_matrix: BoundaryMass expects CG spaces");
        // facet integrals with 3-point Gauss; CG trace along an edge
        GaussRule gr = gauss_legendre(3);
        std::vector<std::size_t> td, ud;
        for (const auto& [edge, tag] : mesh.boundary_facets) {
            if (!tags.empty() && !tags.count(tag)) continue;
            Point pa = mesh.vertices[mesh.edges[edge][0]];
            Point pb = mesh.vertices[mesh.edges[edge][1]];
            double len = norm(pb - pa);
            // find adjacent cell
            std::size_t cell = mesh.locate_cell(0.5 * (pa + pb));
            CellGeometry g = cell_geometry(mesh, cell);
            test.cell_dofs(cell, td);
            trial.cell_dofs(cell, ud);
            for (std::size_t qi = 0; qi < gr.points.size(); ++qi) {
                Point p = pa + gr.points[qi] * (pb - pa);
                double w = gr.weights[qi] * len * (coeff ? coeff(p) : 1.0);
                Point d = p - g.v0;
                double xi = (g.jac[1][1] * d.x - g.jac[0][1] * d.y) / g.det;
                double eta = (-g.jac[1][0] * d.x + g.jac[0][0] * d.y) / g.det;
                std::array<double, 6> tv, uv;
                std::array<Point, 6> tg, ug;
                test.eval_cg_reference(xi, eta, tv, tg);
                trial.eval_cg_reference(xi, eta, uv, ug);
                for (int comp = 0; comp < test.components; ++comp)
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b)
                            B.add(test.component_dof(td[a], comp),
                                  trial.component_dof(ud[b], comp), w * tv[a] * uv[b]);
            }
        }
        return B.to_csr();
    }

    if (quad_degree < 0) quad_degree = default_quad_degree(test, trial);
    QuadratureRule quad = triangle_rule(quad_degree);
    std::vector<std::size_t> td, ud;

    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
        CellGeometry g = cell_geometry(mesh, cell);
        auto tb = test.tabulate(cell, quad);
        auto ub = (&test == &trial) ? tb : trial.tabulate(cell, quad);
        test.cell_dofs(cell, td);
        trial.cell_dofs(cell, ud);
        const std::size_t nq = quad.size();

        switch (kind) {
            case FormKind::Mass:
            case FormKind::Stiffness:
            case FormKind::WeightedGradMass: {
                // component-diagonal CG forms
                std::vector<double> local(td.size() * ud.size(), 0.0);
                for (std::size_t q = 0; q < nq; ++q) {
                    Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
                    double c = coeff ? coeff(p) : 1.0;
                    double w = quad.w[q] * g.det;
                    if (kind == FormKind::WeightedGradMass) w *= c * c;
                    else if (kind == FormKind::Stiffness) w *= c;
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b) {
                            double v;
                            if (kind == FormKind::Mass)
                                v = tb.value[a * nq + q] * ub.value[b * nq + q];
                            else
                                v = dot(tb.grad[a * nq + q], ub.grad[b * nq + q]);
                            local[a * ud.size() + b] += w * v;
                        }
                }
                for (int comp = 0; comp < test.components; ++comp)
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b)
                            B.add(test.component_dof(td[a], comp),
                                  trial.component_dof(ud[b], comp), local[a * ud.size() + b]);
                break;
            }
            case FormKind::RtMass:
            case FormKind::RtDivDiv: {
                std::vector<double> local(td.size() * ud.size(), 0.0);
                for (std::size_t q = 0; q < nq; ++q) {
                    double w = quad.w[q] * g.det;
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b) {
                            double v = (kind == FormKind::RtMass)
                                           ? dot(tb.vec[a * nq + q], ub.vec[b * nq + q])
                                           : tb.div[a * nq + q] * ub.div[b * nq + q];
                            local[a * ud.size() + b] += w * v;
                        }
                }
                for (int comp = 0; comp < test.components; ++comp)
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b)
                            B.add(test.component_dof(td[a], comp),
                                  trial.component_dof(ud[b], comp), local[a * ud.size() + b]);
                break;
            }
            case FormKind::Mixed: {
                // rows: RT test dofs; cols: scalar CG trial dofs
                for (std::size_t q = 0; q < nq; ++q) {
                    Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
                    double w = quad.w[q] * g.det * (coeff ? coeff(p) : 1.0);
                    for (std::size_t a = 0; a < td.size(); ++a)
                        for (std::size_t b = 0; b < ud.size(); ++b)
                            B.add(td[a], ud[b],
                                  w * dot(tb.vec[a * nq + q], ub.grad[b * nq + q]));
                }
                break;
            }
            case FormKind::StrainEnergy: {
                // (C eps(u), eps(v)) over 2-component CG; couples components
                if (test.components != 2) throw Error("StrainEnergy: 2-component CG expected");
                for (std::size_t q = 0; q < nq; ++q) {
                    Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
                    auto [mu, lam] = material(p);
                    double w = quad.w[q] * g.det;
                    for (int ca = 0; ca < 2; ++ca)
                        for (std::size_t a = 0; a < td.size(); ++a) {
                            Tensor2 ea = basis_strain(tb.grad[a * nq + q], ca);
                            Tensor2 cea = stiffness_pow(mu, lam, 1.0, ea);
                            for (int cb = 0; cb < 2; ++cb)
                                for (std::size_t b = 0; b < ud.size(); ++b) {
                                    Tensor2 eb = basis_strain(ub.grad[b * nq + q], cb);
                                    B.add(test.component_dof(td[a], ca),
                                          trial.component_dof(ud[b], cb), w * ddot(cea, eb));
                                }
                        }
                }
                break;
            }
            case FormKind::CinvRtMass: {
                // (C^-1 sigma, tau) over 2-row RT tensors; couples rows
                if (test.components != 2) throw Error("CinvRtMass: 2-component RT expected");
                for (std::size_t q = 0; q < nq; ++q) {
                    Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
                    auto [mu, lam] = material(p);
                    double w = quad.w[q] * g.det;
                    for (int ca = 0; ca < 2; ++ca)
                        for (std::size_t a = 0; a < td.size(); ++a) {
                            Tensor2 ta = basis_tensor(tb.vec[a * nq + q], ca);
                            Tensor2 cta = stiffness_pow(mu, lam, -1.0, ta);
                            for (int cb = 0; cb < 2; ++cb)
                                for (std::size_t b = 0; b < ud.size(); ++b) {
                                    Tensor2 ub2 = basis_tensor(ub.vec[b * nq + q], cb);
                                    B.add(test.component_dof(td[a], ca),
                                          trial.component_dof(ud[b], cb), w * ddot(cta, ub2));
                                }
                        }
                }
                break;
            }
            default:
                throw Error("assemble_matrix: unsupported form kind");
        }
    }
    return B.to_csr();
}

// ---------------------------------------------------------------------------
// Vector forms
// ---------------------------------------------------------------------------

struct LoadData {
    ScalarField scalar;                         // f2 or scalar load per component
    VectorField vector;                         // F for grad/rt loads, or (f_1,f_2) loads
    std::function<Point(Point)> vector_comp2;   // second RT row of a tensor field
};

inline Vec assemble_vector(const FunctionSpace& test, VectorFormKind kind, const LoadData& data,
                           const ScalarField& coeff = {}, const std::set<BoundaryTag>& tags = {},
                           int quad_degree = -1) {
    const Mesh& mesh = *test.mesh;
    Vec out(test.n_dofs, 0.0);

    if (kind == VectorFormKind::BoundaryLoad) {
        GaussRule gr = gauss_legendre(3);
        std::vector<std::size_t> td;
        for (const auto& [edge, tag] : mesh.boundary_facets) {
            if (!tags.empty() && !tags.count(tag)) continue;
            Point pa = mesh.vertices[mesh.edges[edge][0]];
            Point pb = mesh.vertices[mesh.edges[edge][1]];
            double len = norm(pb - pa);
            std::size_t cell = mesh.locate_cell(0.5 * (pa + pb));
            CellGeometry g = cell_geometry(mesh, cell);
            test.cell_dofs(cell, td);
            for (std::size_t qi = 0; qi < gr.points.size(); ++qi) {
                Point p = pa + gr.points[qi] * (pb - pa);
                double w = gr.weights[qi] * len;
                Point d = p - g.v0;
                double xi = (g.jac[1][1] * d.x - g.jac[0][1] * d.y) / g.det;
                double eta = (-g.jac[1][0] * d.x + g.jac[0][0] * d.y) / g.det;
                std::array<double, 6> tv;
                std::array<Point, 6> tg;
                test.eval_cg_reference(xi, eta, tv, tg);
                if (test.components == 1) {
                    double gval = data.scalar(p);
                    for (std::size_t a = 0; a < td.size(); ++a)
                        out[td[a]] += w * gval * tv[a];
                } else {
                    Point gval = data.vector(p);
                    for (std::size_t a = 0; a < td.size(); ++a) {
                        out[test.component_dof(td[a], 0)] += w * gval.x * tv[a];
                        out[test.component_dof(td[a], 1)] += w * gval.y * tv[a];
                    }
                }
            }
        }
        return out;
    }

    if (quad_degree < 0) quad_degree = default_quad_degree(test, test);
    QuadratureRule quad = triangle_rule(quad_degree);
    std::vector<std::size_t> td;
    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
        CellGeometry g = cell_geometry(mesh, cell);
        auto tb = test.tabulate(cell, quad);
        test.cell_dofs(cell, td);
        const std::size_t nq = quad.size();
        for (std::size_t q = 0; q < nq; ++q) {
            Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
            double w = quad.w[q] * g.det;
            switch (kind) {
                case VectorFormKind::DomainLoad: {
                    if (test.components == 1) {
                        double f = data.scalar(p);
                        for (std::size_t a = 0; a < td.size(); ++a)
                            out[td[a]] += w * f * tb.value[a * nq + q];
                    } else {
                        Point f = data.vector(p);
                        for (std::size_t a = 0; a < td.size(); ++a) {
                            out[test.component_dof(td[a], 0)] += w * f.x * tb.value[a * nq + q];
                            out[test.component_dof(td[a], 1)] += w * f.y * tb.value[a * nq + q];
                        }
                    }
                    break;
                }
                case VectorFormKind::WeightedGradLoad: {
                    Point F = data.vector(p);
                    double c = coeff ? coeff(p) : 1.0;
                    for (std::size_t a = 0; a < td.size(); ++a)
                        out[td[a]] += w * c * dot(F, tb.grad[a * nq + q]);
                    break;
                }
                case VectorFormKind::RtLoad: {
                    for (int comp = 0; comp < test.components; ++comp) {
                        Point F = comp == 0 ? data.vector(p) : data.vector_comp2(p);
                        for (std::size_t a = 0; a < td.size(); ++a)
                            out[test.component_dof(td[a], comp)] +=
                                w * dot(F, tb.vec[a * nq + q]);
                    }
                    break;
                }
                case VectorFormKind::DivLoad: {
                    if (test.components == 1) {
                        double f = data.scalar(p);
                        for (std::size_t a = 0; a < td.size(); ++a)
                            out[td[a]] += w * f * tb.div[a * nq + q];
                    } else {
                        Point f = data.vector(p);
                        for (std::size_t a = 0; a < td.size(); ++a) {
                            out[test.component_dof(td[a], 0)] += w * f.x * tb.div[a * nq + q];
                            out[test.component_dof(td[a], 1)] += w * f.y * tb.div[a * nq + q];
                        }
                    }
                    break;
                }
                default:
                    throw Error("assemble_vector: unsupported form kind");
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Essential boundary conditions (symmetric elimination)
// ---------------------------------------------------------------------------

// Replaces constrained rows/columns with identity rows/columns. For
// inhomogeneous values the right-hand side receives the usual -A_ic * x_c
// correction and b_c = x_c, so the solution carries the values exactly.
inline void apply_essential_bc(CsrMatrix& A, Vec& b, const std::vector<bool>& constrained,
                               const Vec* values = nullptr) {
    if (A.n_rows != constrained.size() || b.size() != constrained.size())
        throw DimensionError("apply_essential_bc: size mismatch");
    auto value_of = [&](std::size_t j) { return values ? (*values)[j] : 0.0; };
    for (std::size_t i = 0; i < A.n_rows; ++i) {
        for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) {
            std::size_t j = A.col_idx[k];
            if (constrained[i]) {
                A.values[k] = (i == j) ? 1.0 : 0.0;
            } else if (constrained[j]) {
                b[i] -= A.values[k] * value_of(j);
                A.values[k] = 0.0;
            }
        }
    }
    for (std::size_t i = 0; i < b.size(); ++i)
        if (constrained[i]) b[i] = value_of(i);
}

// Solves A x = b with the given essential values pinned. A is consumed.
inline Vec solve_constrained(CsrMatrix A, Vec b, const std::vector<bool>& constrained,
                             const Vec* values = nullptr, double tol = 1e-10) {
    apply_essential_bc(A, b, constrained, values);
    CgResult r = solve_spd(A, b, tol);
    return r.x;
}

// ---------------------------------------------------------------------------
// GRF helper operators (declared in fields.hpp)
// ---------------------------------------------------------------------------

inline CsrMatrix assemble_grf_operator(const FunctionSpace& cg1, const GrfConfig& cfg) {
    CsrMatrix M = assemble_matrix(cg1, cg1, FormKind::Mass);
    CsrMatrix K = assemble_matrix(cg1, cg1, FormKind::Stiffness);
    CooBuilder B(cg1.n_dofs, cg1.n_dofs);
    for (std::size_t i = 0; i < M.n_rows; ++i)
        for (std::size_t k = M.row_ptr[i]; k < M.row_ptr[i + 1]; ++k)
            B.add(i, M.col_idx[k], cfg.delta * M.values[k]);
    for (std::size_t i = 0; i < K.n_rows; ++i)
        for (std::size_t k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k)
            B.add(i, K.col_idx[k], cfg.gamma * K.values[k]);
    if (cfg.robin_coeff != 0.0) {
        CsrMatrix R = assemble_matrix(cg1, cg1, FormKind::BoundaryMass, {}, {},
                                      {BoundaryTag::Left, BoundaryTag::Right, BoundaryTag::Top,
                                       BoundaryTag::Bottom});
        for (std::size_t i = 0; i < R.n_rows; ++i)
            for (std::size_t k = R.row_ptr[i]; k < R.row_ptr[i + 1]; ++k)
                B.add(i, R.col_idx[k], cfg.robin_coeff * R.values[k]);
    }
    return B.to_csr();
}

inline Vec lumped_mass_sqrt(const FunctionSpace& cg1) {
    CsrMatrix M = assemble_matrix(cg1, cg1, FormKind::Mass);
    Vec L(cg1.n_dofs, 0.0);
    for (std::size_t i = 0; i < M.n_rows; ++i) {
        double s = 0.0;
        for (std::size_t k = M.row_ptr[i]; k < M.row_ptr[i + 1]; ++k) s += M.values[k];
        L[i] = std::sqrt(std::max(s, 0.0));
    }
    return L;
}

}  // namespace rbno
