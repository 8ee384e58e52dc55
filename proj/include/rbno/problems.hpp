#pragma once

#include <cmath>
#include <memory>
#include <set>
#include <string>

#include "rbno/fields.hpp"
#include "rbno/grf.hpp"
#include "rbno/lifts.hpp"

namespace rbno {

enum class ProblemKind {
    HeatConduction,
    Darcy,
    Elasticity,
    ManufacturedDiffusion,
    ManufacturedElasticity,
};

inline const char* to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::HeatConduction: return "heat_conduction";
        case ProblemKind::Darcy: return "darcy";
        case ProblemKind::Elasticity: return "elasticity";
        case ProblemKind::ManufacturedDiffusion: return "manufactured_diffusion";
        case ProblemKind::ManufacturedElasticity: return "manufactured_elasticity";
    }
    return "?";
}

inline ProblemKind problem_from_string(const std::string& s) {
    if (s == "heat_conduction") return ProblemKind::HeatConduction;
    if (s == "darcy") return ProblemKind::Darcy;
    if (s == "elasticity") return ProblemKind::Elasticity;
    if (s == "manufactured_diffusion") return ProblemKind::ManufacturedDiffusion;
    if (s == "manufactured_elasticity") return ProblemKind::ManufacturedElasticity;
    throw Error("unknown problem: " + s);
}

// Static description of a benchmark: domain, boundary split, data fields.
struct ProblemSetup {
    ProblemKind kind;
    bool elasticity = false;
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    std::set<BoundaryTag> dirichlet, neumann;
    double nu = 0.4;  // Poisson ratio (elasticity)
    GrfConfig grf;

    std::function<double(Point, int)> u0;  // Dirichlet data (component-wise)
    ScalarField g;                         // scalar Neumann flux (diffusion)
    VectorField traction;                  // Neumann traction (elasticity)
    ScalarField f2;                        // diffusion source, L2 part
    VectorField f1;                        // diffusion source, flux part
    VectorField body_force;                // elasticity source

    bool has_neumann_data() const { return !neumann.empty() && (g || traction); }
};

inline ProblemSetup make_problem(ProblemKind kind) {
    ProblemSetup p;
    p.kind = kind;
    switch (kind) {
        case ProblemKind::HeatConduction: {
            p.dirichlet = {BoundaryTag::Left, BoundaryTag::Right};
            p.neumann = {BoundaryTag::Top, BoundaryTag::Bottom};
            p.u0 = [](Point x, int) { return 0.1 * (1.0 - x.x) * std::sin(4.0 * M_PI * x.y); };
            p.g = [](Point x) { return 0.1 * (1.0 - x.y) * std::cos(2.0 * M_PI * x.x); };
            auto ind = minisquare_indicator();
            p.f1 = [ind](Point x) { return Point{0.5 * ind(x), -0.5 * ind(x)}; };
            p.f2 = [](Point) { return 1.0; };
            break;
        }
        case ProblemKind::Darcy: {
            p.dirichlet = {BoundaryTag::Left, BoundaryTag::Right};
            p.neumann = {BoundaryTag::Top, BoundaryTag::Bottom};
            p.u0 = [](Point x, int) { return 1.0 - x.x; };
            p.g = [](Point) { return 0.0; };
            p.f2 = [](Point x) {
                // nine extraction wells on the interior 3x3 lattice
                double s = 0.0;
                const double w = 1.0 / 32.0;
                for (int m = 1; m <= 3; ++m)
                    for (int n = 1; n <= 3; ++n) {
                        double dx = x.x - 0.25 * m, dy = x.y - 0.25 * n;
                        s += 100.0 * std::exp(-(dx * dx + dy * dy) / (w * w));
                    }
                return s;
            };
            break;
        }
        case ProblemKind::Elasticity: {
            p.elasticity = true;
            p.x1 = 2.0;
            p.dirichlet = {BoundaryTag::Left};
            p.neumann = {BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Bottom};
            p.u0 = [](Point, int) { return 0.0; };
            p.traction = [](Point x) {
                if (std::abs(x.x - 2.0) > 1e-9) return Point{0.0, 0.0};
                double t1 = 0.6 * std::exp(-(x.y - 0.5) * (x.y - 0.5) / 4.0);
                double t2 = 0.3 * (1.0 + x.y / 10.0);
                return Point{t1, t2};
            };
            break;
        }
        case ProblemKind::ManufacturedDiffusion: {
            // p = 1, u = sin(pi x) sin(pi y), full Dirichlet (u0 = 0)
            p.dirichlet = {BoundaryTag::Left, BoundaryTag::Right, BoundaryTag::Top,
                           BoundaryTag::Bottom};
            p.u0 = [](Point, int) { return 0.0; };
            p.f2 = [](Point x) {
                return 2.0 * M_PI * M_PI * std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
            };
            break;
        }
        case ProblemKind::ManufacturedElasticity: {
            // E = 2 (the elasticity mean), nu = 0.4, full Dirichlet,
            // u1 = u2 = sin(pi x) sin(pi y)
            p.elasticity = true;
            p.dirichlet = {BoundaryTag::Left, BoundaryTag::Right, BoundaryTag::Top,
                           BoundaryTag::Bottom};
            p.u0 = [](Point, int) { return 0.0; };
            const double E = 2.0, nu = 0.4;
            const double mu = E / (2.0 * (1.0 + nu));
            const double lam = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu));
            p.body_force = [mu, lam](Point x) {
                double s = std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
                double c = std::cos(M_PI * x.x) * std::cos(M_PI * x.y);
                double v = (3.0 * mu + lam) * M_PI * M_PI * s - (lam + mu) * M_PI * M_PI * c;
                return Point{v, v};
            };
            break;
        }
    }
    return p;
}

// Manufactured-diffusion exact fields, used by convergence oracles.
inline double manufactured_diffusion_u(Point x) {
    return std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
}
inline Point manufactured_diffusion_sigma(Point x) {
    return {M_PI * std::cos(M_PI * x.x) * std::sin(M_PI * x.y),
            M_PI * std::sin(M_PI * x.x) * std::cos(M_PI * x.y)};
}

// One mesh + the FOSLS space pair (and the CG1 parameter space). Owns the
// mesh so spaces keep stable pointers; move-only.
struct Discretization {
    std::unique_ptr<Mesh> mesh;
    FunctionSpace sigma;  // RT_k^o, (RT_k^o)^2 for elasticity
    FunctionSpace u;      // CG_m^o, (CG_m^o)^2 for elasticity
    FunctionSpace cg_free;  // unconstrained CG_m (Dirichlet lift), same components as u
    FunctionSpace cg1;      // scalar CG1 (parameter fields, features)
    ProblemSetup problem;
    int k = 0, m = 1;

    std::size_t n_sigma() const { return sigma.n_dofs; }
    std::size_t n_u() const { return u.n_dofs; }
    std::size_t n_total() const { return sigma.n_dofs + u.n_dofs; }

    std::vector<bool> constrained_mask() const {
        std::vector<bool> mask(n_total(), false);
        for (std::size_t i = 0; i < sigma.n_dofs; ++i) mask[i] = sigma.constrained[i];
        for (std::size_t i = 0; i < u.n_dofs; ++i) mask[sigma.n_dofs + i] = u.constrained[i];
        return mask;
    }
};

inline Discretization make_discretization(const ProblemSetup& problem, std::size_t nx,
                                          std::size_t ny, int k) {
    Discretization d;
    d.problem = problem;
    d.k = k;
    d.m = k + 1;  // balanced pair
    d.mesh = std::make_unique<Mesh>(
        build_rect_mesh(problem.x0, problem.y0, problem.x1, problem.y1, nx, ny));
    int comps = problem.elasticity ? 2 : 1;
    d.sigma = FunctionSpace::build(*d.mesh, Family::RT, k, comps, problem.neumann);
    d.u = FunctionSpace::build(*d.mesh, Family::CG, d.m, comps, problem.dirichlet);
    d.cg_free = FunctionSpace::build(*d.mesh, Family::CG, d.m, comps);
    d.cg1 = FunctionSpace::build(*d.mesh, Family::CG, 1, 1);
    return d;
}

// Precomputes the problem's lifts on a discretization. The Dirichlet lift is
// skipped when u0 is identically zero on Gamma_D (elasticity, manufactured
// cases); the Neumann lift is skipped without Neumann data.
inline LiftData compute_lifts(const Discretization& d, double tol = 1e-12) {
    LiftData lifts;
    const ProblemSetup& p = d.problem;
    bool u0_nonzero = false;
    if (!p.dirichlet.empty() && p.u0) {
        for (const auto& [edge, tag] : d.mesh->boundary_facets) {
            if (!p.dirichlet.count(tag)) continue;
            for (auto v : d.mesh->edges[edge])
                for (int comp = 0; comp < d.u.components; ++comp)
                    if (p.u0(d.mesh->vertices[v], comp) != 0.0) u0_nonzero = true;
            Point mid = 0.5 * (d.mesh->vertices[d.mesh->edges[edge][0]] +
                               d.mesh->vertices[d.mesh->edges[edge][1]]);
            for (int comp = 0; comp < d.u.components; ++comp)
                if (p.u0(mid, comp) != 0.0) u0_nonzero = true;
        }
    }
    if (u0_nonzero) lifts.w = dirichlet_lift(d.cg_free, p.dirichlet, p.u0, tol);

    if (p.has_neumann_data()) {
        LoadData g;
        if (p.elasticity)
            g.vector = p.traction;
        else
            g.scalar = p.g;
        lifts.q = neumann_lift(d.u, p.neumann, g, tol);
    }
    return lifts;
}

// Parameter evaluators for one sample of a given problem.
inline ScalarField diffusion_coefficient(const ProblemSetup& p, const ParamSample& s) {
    switch (p.kind) {
        case ProblemKind::HeatConduction: return minisquare_conductivity(s);
        case ProblemKind::Darcy: {
            auto m = nodal_field_evaluator(s);
            return [m](Point x) { return 0.01 + std::exp(m(x)); };
        }
        case ProblemKind::ManufacturedDiffusion: return [](Point) { return 1.0; };
        default: throw Error("diffusion_coefficient: not a diffusion problem");
    }
}

inline MaterialField elasticity_material(const ProblemSetup& p, const ParamSample& s) {
    if (p.kind == ProblemKind::Elasticity) {
        auto m = nodal_field_evaluator(s);
        return lame_from_young([m](Point x) { return std::exp(m(x)) + 1.0; }, p.nu).lame;
    }
    if (p.kind == ProblemKind::ManufacturedElasticity)
        return lame_from_young([](Point) { return 2.0; }, p.nu).lame;
    throw Error("elasticity_material: not an elasticity problem");
}

// mean-parameter material (p-bar = 0 -> E = 2) for the X_h norm
inline MaterialField mean_material(const ProblemSetup& p) {
    return lame_from_young([](Point) { return 2.0; }, p.nu).lame;
}

// Draws the parameter sample with the per-sample seed convention
// seed = master_seed + index. GRF-based problems reuse a shared sampler.
struct SampleDraw {
    const ProblemSetup* problem;
    std::unique_ptr<GrfSampler> grf;

    SampleDraw(const ProblemSetup& p, const Discretization& d) : problem(&p) {
        if (p.kind == ProblemKind::Darcy || p.kind == ProblemKind::Elasticity)
            grf = std::make_unique<GrfSampler>(d.cg1, p.grf);
    }

    ParamSample draw(std::uint64_t master_seed, std::uint64_t index) const {
        std::uint64_t seed = master_seed + index;
        switch (problem->kind) {
            case ProblemKind::HeatConduction: return sample_minisquares(seed);
            case ProblemKind::Darcy:
            case ProblemKind::Elasticity: return grf->draw(seed);
            default: {
                ParamSample s;  // manufactured problems are parameter-free
                s.kind = SampleKind::MiniSquare;
                s.seed = seed;
                s.mu.fill(0.0);
                return s;
            }
        }
    }
};

}  // namespace rbno
