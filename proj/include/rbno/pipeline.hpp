#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rbno/features.hpp"
#include "rbno/io.hpp"
#include "rbno/mlp.hpp"
#include "rbno/rom.hpp"

namespace rbno {

using json = nlohmann::json;

// Seed layout: every stage derives per-sample seeds as
// master + stage offset + sample index, so runs are reproducible and stages
// stay decoupled.
constexpr std::uint64_t kSeedSnapshots = 1000000;
constexpr std::uint64_t kSeedTrain = 2000000;
constexpr std::uint64_t kSeedTest = 3000000;
constexpr std::uint64_t kSeedHoldout = 4000000;

struct ExperimentConfig {
    ProblemKind problem = ProblemKind::HeatConduction;
    std::size_t nx = 32, ny = 32;
    int k = 0;
    GrfConfig grf;
    std::size_t n_pod = 128;
    PodTarget pod{.rank = 32, .tol = 0.0};
    TrainConfig train;
    std::size_t n_train = 256, n_val = 64, n_test = 128;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    int workers = 2;
    double solver_tol = 1e-10;
    std::size_t feature_dim = 64;
    int reference_refine = 2;  // mesh factor for eval references (0 = same mesh)

    void validate() const {
        if (problem == ProblemKind::HeatConduction && (nx % 16 != 0 || ny % 16 != 0))
            throw Error("config: heat conduction requires nx, ny multiples of 16");
        if (k != 0 && k != 1) throw Error("config: k must be 0 or 1");
        if (n_pod == 0) throw Error("config: n_pod must be positive");
    }

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        if (j.contains("problem")) c.problem = problem_from_string(j.at("problem"));
        if (c.problem == ProblemKind::Elasticity) {
            c.nx = 64;
            c.ny = 32;
        }
        if (j.contains("mesh")) {
            const auto& m = j.at("mesh");
            if (m.contains("nx")) c.nx = m.at("nx").get<std::size_t>();
            if (m.contains("ny")) c.ny = m.at("ny").get<std::size_t>();
        }
        if (j.contains("fe") && j.at("fe").contains("k")) c.k = j.at("fe").at("k").get<int>();
        if (j.contains("grf")) {
            const auto& g = j.at("grf");
            if (g.contains("delta")) c.grf.delta = g.at("delta").get<double>();
            if (g.contains("gamma")) c.grf.gamma = g.at("gamma").get<double>();
            if (g.contains("alpha")) c.grf.alpha = g.at("alpha").get<double>();
            if (g.contains("robin_coeff")) c.grf.robin_coeff = g.at("robin_coeff").get<double>();
        }
        if (j.contains("pod")) {
            const auto& p = j.at("pod");
            if (p.contains("n_pod")) c.n_pod = p.at("n_pod").get<std::size_t>();
            if (p.contains("rank")) c.pod.rank = p.at("rank").get<std::size_t>();
            if (p.contains("tol")) c.pod.tol = p.at("tol").get<double>();
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            if (t.contains("mode")) c.train.mode = loss_mode_from_string(t.at("mode"));
            if (t.contains("w_mse")) c.train.w_mse = t.at("w_mse").get<double>();
            if (t.contains("hidden"))
                c.train.hidden = t.at("hidden").get<std::vector<std::size_t>>();
            if (t.contains("lr")) c.train.lr = t.at("lr").get<double>();
            if (t.contains("weight_decay"))
                c.train.weight_decay = t.at("weight_decay").get<double>();
            if (t.contains("step_gamma")) c.train.step_gamma = t.at("step_gamma").get<double>();
            if (t.contains("step_size")) c.train.step_size = t.at("step_size").get<int>();
            if (t.contains("max_iters")) c.train.max_iters = t.at("max_iters").get<int>();
            if (t.contains("batch_size"))
                c.train.batch_size = t.at("batch_size").get<std::size_t>();
            if (t.contains("clip_bound")) c.train.clip_bound = t.at("clip_bound").get<double>();
        }
        if (j.contains("counts")) {
            const auto& n = j.at("counts");
            if (n.contains("n_train")) c.n_train = n.at("n_train").get<std::size_t>();
            if (n.contains("n_val")) c.n_val = n.at("n_val").get<std::size_t>();
            if (n.contains("n_test")) c.n_test = n.at("n_test").get<std::size_t>();
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
        if (j.contains("workers")) c.workers = j.at("workers").get<int>();
        if (j.contains("solver_tol")) c.solver_tol = j.at("solver_tol").get<double>();
        if (j.contains("feature_dim")) c.feature_dim = j.at("feature_dim").get<std::size_t>();
        if (j.contains("reference_refine"))
            c.reference_refine = j.at("reference_refine").get<int>();
        c.validate();
        return c;
    }

    json to_json() const {
        json t;
        t["mode"] = train.mode == LossMode::Residual
                        ? "residual"
                        : (train.mode == LossMode::CoefMse ? "coef_mse" : "both");
        t["w_mse"] = train.w_mse;
        t["hidden"] = train.hidden;
        t["lr"] = train.lr;
        t["weight_decay"] = train.weight_decay;
        t["step_gamma"] = train.step_gamma;
        t["step_size"] = train.step_size;
        t["max_iters"] = train.max_iters;
        t["batch_size"] = train.batch_size;
        t["clip_bound"] = train.clip_bound;
        return json{
            {"problem", to_string(problem)},
            {"mesh", {{"nx", nx}, {"ny", ny}}},
            {"fe", {{"k", k}, {"m", k + 1}}},
            {"grf",
             {{"delta", grf.delta},
              {"gamma", grf.gamma},
              {"alpha", grf.alpha},
              {"robin_coeff", grf.robin_coeff}}},
            {"pod", {{"n_pod", n_pod}, {"rank", pod.rank}, {"tol", pod.tol}}},
            {"train", t},
            {"counts", {{"n_train", n_train}, {"n_val", n_val}, {"n_test", n_test}}},
            {"seed", seed},
            {"out", out_dir.string()},
            {"workers", workers},
            {"solver_tol", solver_tol},
            {"feature_dim", feature_dim},
            {"reference_refine", reference_refine},
        };
    }
};

// Deterministic sample-parallel map: slot i is computed by exactly one worker
// and written into caller-owned storage; reductions happen afterwards in
// index order.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            f(i);
        }
    };
    std::vector<std::thread> pool;
    int nthreads = std::min<int>(workers, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
}

// All per-run immutable state: mesh, spaces, lifts, Gram matrix, sampler.
struct Workbench {
    ExperimentConfig cfg;
    ProblemSetup problem;
    Discretization disc;
    LiftData lifts;
    GramXh X;
    std::unique_ptr<SampleDraw> drawer;

    Workbench(const Workbench&) = delete;
    Workbench& operator=(const Workbench&) = delete;
    Workbench(Workbench&&) = default;

    explicit Workbench(const ExperimentConfig& config)
        : cfg(config),
          problem(make_problem(config.problem)),
          disc(make_discretization(problem, config.nx, config.ny, config.k)),
          lifts(compute_lifts(disc)),
          X(gram_xh(disc)) {
        drawer = std::make_unique<SampleDraw>(problem, disc);
    }

    // refined copy for reference solutions (nested mesh, same element pair)
    Workbench refined(int factor) const {
        ExperimentConfig rc = cfg;
        rc.nx *= static_cast<std::size_t>(factor);
        rc.ny *= static_cast<std::size_t>(factor);
        return Workbench(rc);
    }
};

inline std::vector<ParamSample> draw_samples(const Workbench& wb, std::uint64_t stage_offset,
                                             std::size_t n) {
    std::vector<ParamSample> out(n);
    parallel_for(n, wb.cfg.workers, [&](std::size_t i) {
        out[i] = wb.drawer->draw(wb.cfg.seed + stage_offset, i);
    });
    return out;
}

struct SampleSolve {
    Vec s;
    double loss = 0.0;
};

inline SampleSolve solve_sample(const Workbench& wb, const ParamSample& sample, double tol) {
    LossWeights lw = assemble_problem_weights(wb.disc, sample, wb.lifts);
    lw.sample_seed = sample.seed;
    SolutionPair sol = solve_fe_fosls(lw, tol);
    double loss = eval_loss(lw, sol.s);
    return {std::move(sol.s), loss};
}

// Snapshot matrix: column i is the stacked FOSLS solution of samples[i].
inline DenseMatrix compute_snapshots(const Workbench& wb,
                                     const std::vector<ParamSample>& samples, double tol) {
    if (samples.empty()) throw Error("compute_snapshots: no samples");
    DenseMatrix S(wb.disc.n_total(), samples.size());
    std::string failure;
    std::mutex fail_mutex;
    parallel_for(samples.size(), wb.cfg.workers, [&](std::size_t i) {
        try {
            SampleSolve sol = solve_sample(wb, samples[i], tol);
            S.set_col(i, sol.s);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (failure.empty())
                failure = "snapshot sample " + std::to_string(i) + ": " + e.what();
        }
    });
    if (!failure.empty()) throw Error(failure);
    return S;
}

// Per-sample reduced data, plus full-order diagnostics when requested.
struct ReducedSet {
    std::vector<ReducedWeights> reduced;
    std::vector<Vec> rb_coef;   // solve_rb output per sample
    Vec rb_loss;
    Vec fe_loss;                // only with diagnostics
    std::vector<Vec> fe_sol;    // only with diagnostics
};

inline ReducedSet reduce_samples(const Workbench& wb, const PodBasis& basis,
                                 const std::vector<ParamSample>& samples, bool with_fe,
                                 double tol) {
    ReducedSet out;
    out.reduced.resize(samples.size());
    out.rb_coef.resize(samples.size());
    out.rb_loss.assign(samples.size(), 0.0);
    if (with_fe) {
        out.fe_loss.assign(samples.size(), 0.0);
        out.fe_sol.resize(samples.size());
    }
    std::string failure;
    std::mutex fail_mutex;
    parallel_for(samples.size(), wb.cfg.workers, [&](std::size_t i) {
        try {
            LossWeights lw = assemble_problem_weights(wb.disc, samples[i], wb.lifts);
            lw.sample_seed = samples[i].seed;
            out.reduced[i] = reduce_weights(lw, basis);
            out.rb_coef[i] = solve_rb(out.reduced[i]);
            out.rb_loss[i] = eval_reduced_loss(out.reduced[i], out.rb_coef[i]);
            if (with_fe) {
                SolutionPair sol = solve_fe_fosls(lw, tol);
                out.fe_loss[i] = eval_loss(lw, sol.s);
                out.fe_sol[i] = std::move(sol.s);
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (failure.empty())
                failure = "sample " + std::to_string(i) + ": " + e.what();
        }
    });
    if (!failure.empty()) throw Error(failure);
    return out;
}

// L2 x L2 block Gram (no derivative terms), for the relative L-norm metric.
inline GramXh gram_l(const Discretization& d) {
    CooBuilder B(d.n_total(), d.n_total());
    auto add_block = [&](const CsrMatrix& A, std::size_t o) {
        for (std::size_t i = 0; i < A.n_rows; ++i)
            for (std::size_t k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
                B.add(o + i, o + A.col_idx[k], A.values[k]);
    };
    add_block(assemble_matrix(d.sigma, d.sigma, FormKind::RtMass), 0);
    add_block(assemble_matrix(d.u, d.u, FormKind::Mass), d.n_sigma());
    GramXh g;
    g.X = B.to_csr();
    Vec dummy(d.n_total(), 0.0);
    apply_essential_bc(g.X, dummy, d.constrained_mask());
    return g;
}

struct EvalRecord {
    std::uint64_t seed = 0;
    double model_loss = 0.0;
    double rb_loss = 0.0;
    double fe_loss = 0.0;
    double err_vs_rb = 0.0;   // X_h distance to the RB-optimal solution
    double err_vs_fe = 0.0;   // X_h distance to the same-mesh FE solution
    double rel_l = 0.0;       // relative L2-block error vs FE
    double rel_h = 0.0;       // relative X_h error vs FE
    double err_vs_ref = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();  // err_vs_ref / sqrt(loss)
};

// Evaluates the trained coefficient map on a test set. When `fine` is given,
// per-sample references are solved on the refined mesh and predictions are
// prolonged there for the a-posteriori ratio.
inline std::vector<EvalRecord> evaluate_model(const Workbench& wb, const PodBasis& basis,
                                              const FeatureCodec& codec, const Mlp& model,
                                              const std::vector<ParamSample>& samples,
                                              const ReducedSet& red, const Workbench* fine) {
    DenseMatrix F = input_features(codec, samples);
    DenseMatrix Y = mlp_forward(model, F);
    GramXh XL = gram_l(wb.disc);
    std::unique_ptr<GramXh> Xfine;
    if (fine) Xfine = std::make_unique<GramXh>(gram_xh(fine->disc));

    std::vector<EvalRecord> records(samples.size());
    std::string failure;
    std::mutex fail_mutex;
    parallel_for(samples.size(), wb.cfg.workers, [&](std::size_t i) {
        try {
            EvalRecord r;
            r.seed = samples[i].seed;
            Vec y(basis.rank());
            for (std::size_t j = 0; j < y.size(); ++j) y[j] = Y(i, j);
            r.model_loss = eval_reduced_loss(red.reduced[i], y);
            r.rb_loss = red.rb_loss[i];
            Vec dy(y.size());
            for (std::size_t j = 0; j < y.size(); ++j) dy[j] = y[j] - red.rb_coef[i][j];
            r.err_vs_rb = norm2(dy);  // X_h-orthonormal basis: reduced metric is Euclidean

            Vec pred = expand(basis, y);
            if (!red.fe_sol.empty()) {
                r.fe_loss = red.fe_loss[i];
                const Vec& fe = red.fe_sol[i];
                r.err_vs_fe = h_norm_error(wb.X, pred, fe);
                double fe_h = x_norm(wb.X, fe);
                double fe_l = x_norm(XL, fe);
                r.rel_h = fe_h > 0 ? r.err_vs_fe / fe_h : 0.0;
                r.rel_l = fe_l > 0 ? h_norm_error(XL, pred, fe) / fe_l : 0.0;
            }
            if (fine) {
                SampleSolve ref = solve_sample(*fine, samples[i], wb.cfg.solver_tol);
                Vec pred_f = prolong(wb.disc, fine->disc, pred);
                r.err_vs_ref = h_norm_error(*Xfine, pred_f, ref.s);
                r.ratio = r.model_loss > 0
                              ? r.err_vs_ref / std::sqrt(r.model_loss)
                              : std::numeric_limits<double>::infinity();
            }
            records[i] = r;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (failure.empty()) failure = "eval sample " + std::to_string(i) + ": " + e.what();
        }
    });
    if (!failure.empty()) throw Error(failure);
    return records;
}

struct Histogram {
    Vec edges;               // size bins+1
    std::vector<int> counts; // size bins+2 with under/overflow at ends
};

inline Histogram ratio_histogram(const std::vector<double>& ratios, double lo = 0.1,
                                 double hi = 10.0, std::size_t bins = 20) {
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(bins));
    h.counts.assign(bins + 2, 0);
    for (double r : ratios) {
        if (!(r >= lo)) {
            h.counts.front()++;
        } else if (r >= hi) {
            h.counts.back()++;
        } else {
            std::size_t b = static_cast<std::size_t>(std::floor(
                std::log(r / lo) / std::log(hi / lo) * static_cast<double>(bins)));
            h.counts[std::min(b, bins - 1) + 1]++;
        }
    }
    return h;
}

}  // namespace rbno
