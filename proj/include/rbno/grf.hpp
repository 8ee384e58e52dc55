#pragma once

#include "rbno/assemble.hpp"
#include "rbno/fields.hpp"
#include "rbno/rng.hpp"

namespace rbno {

// Draws m ~ N(0, A^{-1} M A^{-1}) with A = delta*M + gamma*K assembled on CG1
// with natural boundary conditions: solve A m = L xi, L = diag(sqrt(lumped
// mass)), xi ~ N(0, I). This realizes the covariance (delta I - gamma Lap)^-2.
inline ParamSample sample_grf(std::uint64_t seed, const GrfConfig& cfg,
                              const FunctionSpace& cg1_space) {
    if (cfg.alpha != 2.0) throw Error("sample_grf: only alpha = 2 is supported");
    CsrMatrix A = assemble_grf_operator(cg1_space, cfg);
    Vec L = lumped_mass_sqrt(cg1_space);
    Rng rng(seed);
    Vec b(cg1_space.n_dofs);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = L[i] * rng.normal();
    CgResult res = solve_spd(A, b, 1e-10);
    ParamSample s;
    s.kind = SampleKind::NodalField;
    s.seed = seed;
    s.nodal = std::move(res.x);
    s.nodal_space = &cg1_space;
    return s;
}

// Shared-operator variant for drawing many samples without re-assembly.
struct GrfSampler {
    const FunctionSpace* space;
    CsrMatrix op;
    Vec lumped_sqrt;

    GrfSampler(const FunctionSpace& cg1, const GrfConfig& cfg)
        : space(&cg1), op(assemble_grf_operator(cg1, cfg)), lumped_sqrt(lumped_mass_sqrt(cg1)) {
        if (cfg.alpha != 2.0) throw Error("GrfSampler: only alpha = 2 is supported");
    }

    ParamSample draw(std::uint64_t seed) const {
        Rng rng(seed);
        Vec b(space->n_dofs);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = lumped_sqrt[i] * rng.normal();
        CgResult res = solve_spd(op, b, 1e-10);
        ParamSample s;
        s.kind = SampleKind::NodalField;
        s.seed = seed;
        s.nodal = std::move(res.x);
        s.nodal_space = space;
        return s;
    }
};

}  // namespace rbno
