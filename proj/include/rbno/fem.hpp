#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "rbno/linalg.hpp"
#include "rbno/mesh.hpp"
#include "rbno/quadrature.hpp"

namespace rbno {

enum class Family { CG, RT };

// Conforming finite element space on a structured triangle mesh.
//
//   CG_m (m=1,2): C0 Lagrange, scalar per copy; dofs at vertices (+ edge
//   midpoints for m=2).
//   RT_k (k=0,1): H(div) Raviart-Thomas, vector-valued per copy; dofs are
//   edge-normal-flux moments against Legendre polynomials on the globally
//   oriented edge (+ two interior moments per cell for k=1).
//
// `components` stacks independent copies in block layout (global dof =
// copy * n_scalar_dofs + copy-local dof): 2 copies of CG give a vector field,
// 2 copies of RT give a tensor field with one RT row per copy.
//
// RT bases are constructed per cell directly in physical coordinates by
// inverting the local moment matrix on a translation/scale-invariant monomial
// set; shared edge moments then make normal traces match across cells without
// any extra sign bookkeeping.
class FunctionSpace {
public:
    const Mesh* mesh = nullptr;
    Family family = Family::CG;
    int degree = 1;
    int components = 1;
    std::size_t n_scalar_dofs = 0;
    std::size_t n_dofs = 0;
    std::vector<bool> constrained;  // size n_dofs, all components

    static FunctionSpace build(const Mesh& mesh, Family family, int degree, int components,
                               const std::set<BoundaryTag>& essential_tags = {}) {
        FunctionSpace s;
        s.mesh = &mesh;
        s.family = family;
        s.degree = degree;
        s.components = components;
        if (family == Family::CG) {
            if (degree != 1 && degree != 2) throw Error("FunctionSpace: CG degree must be 1 or 2");
            s.n_scalar_dofs = mesh.n_vertices() + (degree == 2 ? mesh.n_edges() : 0);
        } else {
            if (degree != 0 && degree != 1) throw Error("FunctionSpace: RT degree must be 0 or 1");
            s.n_scalar_dofs = (degree == 0) ? mesh.n_edges()
                                            : 2 * mesh.n_edges() + 2 * mesh.n_cells();
        }
        s.n_dofs = s.n_scalar_dofs * static_cast<std::size_t>(components);
        s.constrained.assign(s.n_dofs, false);
        s.apply_essential(essential_tags);
        if (family == Family::RT) s.build_rt_coefficients();
        return s;
    }

    std::size_t local_dim() const {
        if (family == Family::CG) return degree == 1 ? 3 : 6;
        return degree == 0 ? 3 : 8;
    }

    // Copy-local global dofs of one cell (one component).
    void cell_dofs(std::size_t cell, std::vector<std::size_t>& out) const {
        out.clear();
        const auto& c = mesh->cells[cell];
        const auto& ce = mesh->cell_edges[cell];
        if (family == Family::CG) {
            out.push_back(c[0]);
            out.push_back(c[1]);
            out.push_back(c[2]);
            if (degree == 2)
                for (int a = 0; a < 3; ++a)
                    out.push_back(mesh->n_vertices() + ce[static_cast<std::size_t>(a)]);
        } else if (degree == 0) {
            for (int a = 0; a < 3; ++a) out.push_back(ce[static_cast<std::size_t>(a)]);
        } else {
            for (int a = 0; a < 3; ++a) {
                out.push_back(2 * ce[static_cast<std::size_t>(a)]);
                out.push_back(2 * ce[static_cast<std::size_t>(a)] + 1);
            }
            out.push_back(2 * mesh->n_edges() + 2 * cell);
            out.push_back(2 * mesh->n_edges() + 2 * cell + 1);
        }
    }

    std::size_t component_dof(std::size_t scalar_dof, int comp) const {
        return static_cast<std::size_t>(comp) * n_scalar_dofs + scalar_dof;
    }

    std::size_t n_constrained() const {
        std::size_t n = 0;
        for (bool b : constrained) n += b ? 1 : 0;
        return n;
    }

    // --- Tabulation -------------------------------------------------------

    struct CellBasis {
        std::size_t nloc = 0, nq = 0;
        // CG: value[a*nq+q], grad[a*nq+q]
        std::vector<double> value;
        std::vector<Point> grad;
        // RT: vec[a*nq+q], div[a*nq+q]
        std::vector<Point> vec;
        std::vector<double> div;
    };

    CellBasis tabulate(std::size_t cell, const QuadratureRule& quad) const {
        CellBasis b;
        b.nloc = local_dim();
        b.nq = quad.size();
        CellGeometry g = cell_geometry(*mesh, cell);
        if (family == Family::CG) {
            b.value.resize(b.nloc * b.nq);
            b.grad.resize(b.nloc * b.nq);
            for (std::size_t q = 0; q < b.nq; ++q) {
                double xi = quad.xi[q], eta = quad.eta[q];
                std::array<double, 6> val;
                std::array<Point, 6> grd;
                eval_cg_reference(xi, eta, val, grd);
                for (std::size_t a = 0; a < b.nloc; ++a) {
                    b.value[a * b.nq + q] = val[a];
                    b.grad[a * b.nq + q] = push_gradient(g, grd[a]);
                }
            }
        } else {
            b.vec.resize(b.nloc * b.nq);
            b.div.resize(b.nloc * b.nq);
            const DenseMatrix& coef = rt_coef_[cell];
            double ell = rt_scale_[cell];
            for (std::size_t q = 0; q < b.nq; ++q) {
                Point p = g.map_to_physical(quad.xi[q], quad.eta[q]);
                evaluate_rt_at(coef, g.centroid, ell, p, b, q);
            }
        }
        return b;
    }

    // RT basis evaluation at an arbitrary physical point of a given cell.
    void tabulate_rt_point(std::size_t cell, Point p, std::vector<Point>& vec,
                           std::vector<double>& div) const {
        CellGeometry g = cell_geometry(*mesh, cell);
        CellBasis tmp;
        tmp.nloc = local_dim();
        tmp.nq = 1;
        tmp.vec.resize(tmp.nloc);
        tmp.div.resize(tmp.nloc);
        evaluate_rt_at(rt_coef_[cell], g.centroid, rt_scale_[cell], p, tmp, 0);
        vec = tmp.vec;
        div = tmp.div;
    }

    static void eval_cg1_reference(double xi, double eta, std::array<double, 6>& val,
                                   std::array<Point, 6>& grd) {
        val[0] = 1.0 - xi - eta;
        val[1] = xi;
        val[2] = eta;
        grd[0] = {-1.0, -1.0};
        grd[1] = {1.0, 0.0};
        grd[2] = {0.0, 1.0};
    }

    void eval_cg_reference(double xi, double eta, std::array<double, 6>& val,
                           std::array<Point, 6>& grd) const {
        std::array<double, 6> lam_val;
        std::array<Point, 6> lam_grd;
        eval_cg1_reference(xi, eta, lam_val, lam_grd);
        if (degree == 1) {
            val = lam_val;
            grd = lam_grd;
            return;
        }
        const double l[3] = {lam_val[0], lam_val[1], lam_val[2]};
        const Point dl[3] = {lam_grd[0], lam_grd[1], lam_grd[2]};
        for (int i = 0; i < 3; ++i) {
            val[static_cast<std::size_t>(i)] = l[i] * (2.0 * l[i] - 1.0);
            grd[static_cast<std::size_t>(i)] = (4.0 * l[i] - 1.0) * dl[i];
        }
        for (int a = 0; a < 3; ++a) {
            int i = (a + 1) % 3, j = (a + 2) % 3;
            val[static_cast<std::size_t>(3 + a)] = 4.0 * l[i] * l[j];
            grd[static_cast<std::size_t>(3 + a)] = 4.0 * (l[i] * dl[j] + l[j] * dl[i]);
        }
    }

    static Point push_gradient(const CellGeometry& g, Point ref_grad) {
        return {g.inv_t[0][0] * ref_grad.x + g.inv_t[0][1] * ref_grad.y,
                g.inv_t[1][0] * ref_grad.x + g.inv_t[1][1] * ref_grad.y};
    }

private:
    std::vector<DenseMatrix> rt_coef_;  // per cell, local_dim x local_dim
    std::vector<double> rt_scale_;

    // Monomial basis in centered/scaled coordinates xh=(x-c)/ell.
    std::size_t n_monomials() const { return degree == 0 ? 3 : 8; }

    static Point rt_monomial(int i, double xh, double yh) {
        switch (i) {
            case 0: return {1.0, 0.0};
            case 1: return {0.0, 1.0};
            case 2: return {xh, 0.0};
            case 3: return {yh, 0.0};
            case 4: return {0.0, xh};
            case 5: return {0.0, yh};
            case 6: return {xh * xh, xh * yh};
            case 7: return {xh * yh, yh * yh};
        }
        return {0.0, 0.0};
    }
    // physical divergence; the 1/ell chain factor is applied by the caller
    static double rt_monomial_div(int i, double xh, double yh) {
        switch (i) {
            case 0: return 0.0;
            case 1: return 0.0;
            case 2: return 1.0;
            case 3: return 0.0;
            case 4: return 0.0;
            case 5: return 1.0;
            case 6: return 3.0 * xh;
            case 7: return 3.0 * yh;
        }
        return 0.0;
    }
    static Point rt0_monomial(int i, double xh, double yh) {
        switch (i) {
            case 0: return {1.0, 0.0};
            case 1: return {0.0, 1.0};
            case 2: return {xh, yh};
        }
        return {0.0, 0.0};
    }
    static double rt0_monomial_div(int i) { return i == 2 ? 2.0 : 0.0; }

    Point monomial(int i, double xh, double yh) const {
        return degree == 0 ? rt0_monomial(i, xh, yh) : rt_monomial(i, xh, yh);
    }
    double monomial_div(int i, double xh, double yh) const {
        return degree == 0 ? rt0_monomial_div(i) : rt_monomial_div(i, xh, yh);
    }

    void evaluate_rt_at(const DenseMatrix& coef, Point centroid, double ell, Point p,
                        CellBasis& b, std::size_t q) const {
        const std::size_t nm = n_monomials();
        double xh = (p.x - centroid.x) / ell, yh = (p.y - centroid.y) / ell;
        for (std::size_t a = 0; a < b.nloc; ++a) {
            Point v{0.0, 0.0};
            double d = 0.0;
            for (std::size_t i = 0; i < nm; ++i) {
                double c = coef(i, a);
                if (c == 0.0) continue;
                Point mv = monomial(static_cast<int>(i), xh, yh);
                v.x += c * mv.x;
                v.y += c * mv.y;
                d += c * monomial_div(static_cast<int>(i), xh, yh);
            }
            b.vec[a * b.nq + q] = v;
            b.div[a * b.nq + q] = d / ell;
        }
    }

    // Applies the edge/interior moment functionals of this cell to a vector
    // field callable; `out` receives one value per local dof.
    template <class Field>
    void apply_rt_moments(std::size_t cell, Field&& field, std::vector<double>& out) const {
        const GaussRule eg = gauss_legendre(3);
        const auto& ce = mesh->cell_edges[cell];
        out.assign(local_dim(), 0.0);
        std::size_t pos = 0;
        for (int a = 0; a < 3; ++a) {
            std::size_t e = ce[static_cast<std::size_t>(a)];
            Point pa = mesh->vertices[mesh->edges[e][0]];
            Point pb = mesh->vertices[mesh->edges[e][1]];
            Point t = pb - pa;
            double len = norm(t);
            Point n{t.y / len, -t.x / len};
            double m0 = 0.0, m1 = 0.0;
            for (std::size_t qi = 0; qi < eg.points.size(); ++qi) {
                double s = eg.points[qi];
                Point p = pa + s * t;
                Point v = field(p);
                double flux = dot(v, n);
                m0 += eg.weights[qi] * flux;
                m1 += eg.weights[qi] * flux * std::sqrt(3.0) * (2.0 * s - 1.0);
            }
            out[pos++] = len * m0;
            if (degree == 1) out[pos++] = len * m1;
        }
        if (degree == 1) {
            CellGeometry g = cell_geometry(*mesh, cell);
            QuadratureRule cq = triangle_rule(4);
            double ix = 0.0, iy = 0.0;
            for (std::size_t q = 0; q < cq.size(); ++q) {
                Point p = g.map_to_physical(cq.xi[q], cq.eta[q]);
                Point v = field(p);
                ix += cq.w[q] * g.det * v.x;
                iy += cq.w[q] * g.det * v.y;
            }
            out[pos++] = ix / g.area;
            out[pos++] = iy / g.area;
        }
    }

    void build_rt_coefficients() {
        const std::size_t nloc = local_dim();
        rt_coef_.resize(mesh->n_cells());
        rt_scale_.resize(mesh->n_cells());
        for (std::size_t cell = 0; cell < mesh->n_cells(); ++cell) {
            CellGeometry g = cell_geometry(*mesh, cell);
            double ell = std::sqrt(g.det);
            rt_scale_[cell] = ell;
            DenseMatrix lambda(nloc, nloc);
            std::vector<double> moments;
            for (std::size_t i = 0; i < nloc; ++i) {
                auto mono_field = [&](Point p) {
                    double xh = (p.x - g.centroid.x) / ell, yh = (p.y - g.centroid.y) / ell;
                    return monomial(static_cast<int>(i), xh, yh);
                };
                apply_rt_moments(cell, mono_field, moments);
                for (std::size_t a = 0; a < nloc; ++a) lambda(a, i) = moments[a];
            }
            DenseMatrix rhs(nloc, nloc, 0.0);
            for (std::size_t a = 0; a < nloc; ++a) rhs(a, a) = 1.0;
            lu_solve_inplace(lambda, rhs);  // rhs <- Lambda^{-1}
            rt_coef_[cell] = rhs;           // coef(i,a): monomial i weight of basis a
        }
    }

    void apply_essential(const std::set<BoundaryTag>& tags) {
        if (tags.empty()) return;
        for (const auto& [edge, tag] : mesh->boundary_facets) {
            if (!tags.count(tag)) continue;
            if (family == Family::CG) {
                for (int comp = 0; comp < components; ++comp) {
                    constrained[component_dof(mesh->edges[edge][0], comp)] = true;
                    constrained[component_dof(mesh->edges[edge][1], comp)] = true;
                    if (degree == 2)
                        constrained[component_dof(mesh->n_vertices() + edge, comp)] = true;
                }
            } else {
                for (int comp = 0; comp < components; ++comp) {
                    if (degree == 0) {
                        constrained[component_dof(edge, comp)] = true;
                    } else {
                        constrained[component_dof(2 * edge, comp)] = true;
                        constrained[component_dof(2 * edge + 1, comp)] = true;
                    }
                }
            }
        }
    }

public:
    // --- Interpolation and point evaluation --------------------------------

    // Canonical interpolation of a callable; CG uses nodal evaluation, RT uses
    // the moment functionals. `field(p, comp)` returns the scalar value of
    // component `comp` (CG) or `field(p, copy)` the vector value of RT row.
    Vec interpolate_scalar(const std::function<double(Point, int)>& field) const {
        if (family != Family::CG) throw Error("interpolate_scalar: CG spaces only");
        Vec coeffs(n_dofs, 0.0);
        for (int comp = 0; comp < components; ++comp) {
            for (std::size_t v = 0; v < mesh->n_vertices(); ++v)
                coeffs[component_dof(v, comp)] = field(mesh->vertices[v], comp);
            if (degree == 2)
                for (std::size_t e = 0; e < mesh->n_edges(); ++e) {
                    Point mid = 0.5 * (mesh->vertices[mesh->edges[e][0]] +
                                       mesh->vertices[mesh->edges[e][1]]);
                    coeffs[component_dof(mesh->n_vertices() + e, comp)] = field(mid, comp);
                }
        }
        return coeffs;
    }

    Vec interpolate_vector(const std::function<Point(Point, int)>& field) const {
        if (family != Family::RT) throw Error("interpolate_vector: RT spaces only");
        Vec coeffs(n_dofs, 0.0);
        std::vector<double> moments;
        std::vector<std::size_t> dofs;
        for (int comp = 0; comp < components; ++comp) {
            for (std::size_t cell = 0; cell < mesh->n_cells(); ++cell) {
                apply_rt_moments(cell, [&](Point p) { return field(p, comp); }, moments);
                cell_dofs(cell, dofs);
                for (std::size_t a = 0; a < dofs.size(); ++a)
                    coeffs[component_dof(dofs[a], comp)] = moments[a];
            }
        }
        return coeffs;
    }
};

// FE function: coefficient vector over a space. Constrained entries are kept
// identically zero by the operations that produce FeFunctions.
struct FeFunction {
    const FunctionSpace* space = nullptr;
    Vec coeffs;

    FeFunction() = default;
    explicit FeFunction(const FunctionSpace& s) : space(&s), coeffs(s.n_dofs, 0.0) {}
    FeFunction(const FunctionSpace& s, Vec c) : space(&s), coeffs(std::move(c)) {
        if (coeffs.size() != s.n_dofs) throw DimensionError("FeFunction: coefficient size");
    }

    void zero_constrained() {
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            if (space->constrained[i]) coeffs[i] = 0.0;
    }

    // CG evaluation
    double eval(Point p, int comp = 0) const {
        auto [cell, xi, eta] = locate(p);
        std::array<double, 6> val;
        std::array<Point, 6> grd;
        space->eval_cg_reference(xi, eta, val, grd);
        std::vector<std::size_t> dofs;
        space->cell_dofs(cell, dofs);
        double s = 0.0;
        for (std::size_t a = 0; a < dofs.size(); ++a)
            s += coeffs[space->component_dof(dofs[a], comp)] * val[a];
        return s;
    }

    Point eval_grad(Point p, int comp = 0) const {
        auto [cell, xi, eta] = locate(p);
        CellGeometry g = cell_geometry(*space->mesh, cell);
        std::array<double, 6> val;
        std::array<Point, 6> grd;
        space->eval_cg_reference(xi, eta, val, grd);
        std::vector<std::size_t> dofs;
        space->cell_dofs(cell, dofs);
        Point s{0.0, 0.0};
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            Point gphys = FunctionSpace::push_gradient(g, grd[a]);
            double c = coeffs[space->component_dof(dofs[a], comp)];
            s.x += c * gphys.x;
            s.y += c * gphys.y;
        }
        return s;
    }

    // RT evaluation (per copy/row)
    Point eval_vec(Point p, int comp = 0) const {
        std::size_t cell = space->mesh->locate_cell(p);
        std::vector<Point> vec;
        std::vector<double> div;
        space->tabulate_rt_point(cell, p, vec, div);
        std::vector<std::size_t> dofs;
        space->cell_dofs(cell, dofs);
        Point s{0.0, 0.0};
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            double c = coeffs[space->component_dof(dofs[a], comp)];
            s.x += c * vec[a].x;
            s.y += c * vec[a].y;
        }
        return s;
    }

    double eval_div(Point p, int comp = 0) const {
        std::size_t cell = space->mesh->locate_cell(p);
        std::vector<Point> vec;
        std::vector<double> div;
        space->tabulate_rt_point(cell, p, vec, div);
        std::vector<std::size_t> dofs;
        space->cell_dofs(cell, dofs);
        double s = 0.0;
        for (std::size_t a = 0; a < dofs.size(); ++a)
            s += coeffs[space->component_dof(dofs[a], comp)] * div[a];
        return s;
    }

private:
    std::tuple<std::size_t, double, double> locate(Point p) const {
        std::size_t cell = space->mesh->locate_cell(p);
        CellGeometry g = cell_geometry(*space->mesh, cell);
        Point d = p - g.v0;
        double xi = (g.jac[1][1] * d.x - g.jac[0][1] * d.y) / g.det;
        double eta = (-g.jac[1][0] * d.x + g.jac[0][0] * d.y) / g.det;
        return {cell, xi, eta};
    }
};

}  // namespace rbno
