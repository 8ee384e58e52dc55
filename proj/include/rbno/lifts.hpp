#pragma once

#include <functional>
#include <set>

#include "rbno/assemble.hpp"
#include "rbno/fem.hpp"

namespace rbno {

// Parameter-independent variational lifts of the boundary data. `w` carries
// the Dirichlet values (harmonic extension with natural conditions on the
// Neumann part), `q` the Neumann flux (z = grad q enters the loss data).
// Empty functions (space == nullptr) mean an identically-zero lift.
struct LiftData {
    FeFunction w;
    FeFunction q;

    bool has_w() const { return w.space != nullptr; }
    bool has_q() const { return q.space != nullptr; }
};

// Solves the discrete harmonic-extension problem on the unconstrained CG
// space: Dirichlet dofs on the tagged sides are pinned to interpolated u0,
// all other boundary parts get the natural condition.
inline FeFunction dirichlet_lift(const FunctionSpace& cg_free,
                                 const std::set<BoundaryTag>& dirichlet_tags,
                                 const std::function<double(Point, int)>& u0,
                                 double tol = 1e-12) {
    if (cg_free.family != Family::CG) throw Error("dirichlet_lift: CG space expected");
    if (dirichlet_tags.empty()) throw Error("dirichlet_lift: empty Dirichlet boundary");
    const Mesh& mesh = *cg_free.mesh;

    std::vector<bool> pinned(cg_free.n_dofs, false);
    for (const auto& [edge, tag] : mesh.boundary_facets) {
        if (!dirichlet_tags.count(tag)) continue;
        for (int comp = 0; comp < cg_free.components; ++comp) {
            pinned[cg_free.component_dof(mesh.edges[edge][0], comp)] = true;
            pinned[cg_free.component_dof(mesh.edges[edge][1], comp)] = true;
            if (cg_free.degree == 2)
                pinned[cg_free.component_dof(mesh.n_vertices() + edge, comp)] = true;
        }
    }
    Vec values = cg_free.interpolate_scalar(u0);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!pinned[i]) values[i] = 0.0;

    CsrMatrix K = assemble_matrix(cg_free, cg_free, FormKind::Stiffness);
    Vec b(cg_free.n_dofs, 0.0);
    Vec x = solve_constrained(std::move(K), std::move(b), pinned, &values, tol);
    return FeFunction(cg_free, std::move(x));
}

// Solves (grad q, grad v) = <g, v>_{Gamma_N} on the Gamma_D-constrained CG
// space. For vector spaces `g` is the traction (per-component via LoadData).
inline FeFunction neumann_lift(const FunctionSpace& cg_constrained,
                               const std::set<BoundaryTag>& neumann_tags, const LoadData& g,
                               double tol = 1e-12) {
    if (cg_constrained.family != Family::CG) throw Error("neumann_lift: CG space expected");
    CsrMatrix K = assemble_matrix(cg_constrained, cg_constrained, FormKind::Stiffness);
    Vec b = assemble_vector(cg_constrained, VectorFormKind::BoundaryLoad, g, {}, neumann_tags);
    Vec x = solve_constrained(std::move(K), std::move(b), cg_constrained.constrained, nullptr,
                              tol);
    FeFunction q(cg_constrained, std::move(x));
    q.zero_constrained();
    return q;
}

// Riesz decomposition of a functional f (given as the assembled load vector
// f_i = f(phi_i) over the constrained CG space): solve
// (grad r, grad v) + (r, v) = -f(v), then f2 = -r and f1 = grad r reproduce
// f(v) = (f2, v) - (f1, grad v) on the discrete space.
struct FluxFreeDecomposition {
    FeFunction riesz;  // r

    ScalarField f2() const {
        FeFunction r = riesz;
        return [r](Point p) { return -r.eval(p); };
    }
    VectorField f1() const {
        FeFunction r = riesz;
        return [r](Point p) { return r.eval_grad(p); };
    }
};

inline FluxFreeDecomposition flux_free_decomposition(const FunctionSpace& cg_constrained,
                                                     const Vec& f_vec, double tol = 1e-12) {
    if (f_vec.size() != cg_constrained.n_dofs)
        throw DimensionError("flux_free_decomposition: load vector size");
    CsrMatrix K = assemble_matrix(cg_constrained, cg_constrained, FormKind::Stiffness);
    CsrMatrix M = assemble_matrix(cg_constrained, cg_constrained, FormKind::Mass);
    CooBuilder B(K.n_rows, K.n_cols);
    for (std::size_t i = 0; i < K.n_rows; ++i)
        for (std::size_t k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k)
            B.add(i, K.col_idx[k], K.values[k]);
    for (std::size_t i = 0; i < M.n_rows; ++i)
        for (std::size_t k = M.row_ptr[i]; k < M.row_ptr[i + 1]; ++k)
            B.add(i, M.col_idx[k], M.values[k]);
    Vec rhs(f_vec.size());
    for (std::size_t i = 0; i < f_vec.size(); ++i) rhs[i] = -f_vec[i];
    Vec x = solve_constrained(B.to_csr(), std::move(rhs), cg_constrained.constrained, nullptr,
                              tol);
    FeFunction r(cg_constrained, std::move(x));
    r.zero_constrained();
    return {std::move(r)};
}

}  // namespace rbno
