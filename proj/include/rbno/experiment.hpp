#pragma once

#include <chrono>
#include <fstream>

#include "rbno/pipeline.hpp"

namespace rbno {

// File-emitting drivers behind the CLI subcommands. Every emitted CSV is
// byte-reproducible for a fixed config+seed; wall-clock measurements go to a
// separate timings.csv that is excluded from that guarantee.

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void ensure_dir(const std::filesystem::path& p) {
    std::filesystem::create_directories(p);
}

inline void echo_config(const ExperimentConfig& cfg) {
    ensure_dir(cfg.out_dir);
    std::ofstream f(cfg.out_dir / "config_echo.json", std::ios::trunc);
    f << cfg.to_json().dump(2) << "\n";
}

}  // namespace detail

// hash of the pieces the lifts depend on: problem, domain, mesh, degree
inline std::uint64_t problem_config_hash(const ExperimentConfig& cfg) {
    std::string key = std::string(to_string(cfg.problem)) + ":" + std::to_string(cfg.nx) + "x" +
                      std::to_string(cfg.ny) + ":k" + std::to_string(cfg.k);
    return fnv1a(key);
}

// Lift coefficient vectors in RBNO1 format, keyed by the problem config hash.
inline void persist_lifts(const ExperimentConfig& cfg, const Workbench& wb) {
    detail::ensure_dir(cfg.out_dir);
    std::string tag = std::to_string(problem_config_hash(cfg));
    if (wb.lifts.has_w()) write_rbno1(cfg.out_dir / ("lift_w_" + tag + ".rbno1"), wb.lifts.w.coeffs);
    if (wb.lifts.has_q()) write_rbno1(cfg.out_dir / ("lift_q_" + tag + ".rbno1"), wb.lifts.q.coeffs);
}

// Sample sets as one-row-per-sample RBNO1 matrices plus a JSON sidecar with
// the seeds and the sampler configuration.
inline void persist_samples(const ExperimentConfig& cfg, const std::string& name,
                            const std::vector<ParamSample>& samples) {
    if (samples.empty()) return;
    detail::ensure_dir(cfg.out_dir);
    Vec first = samples.front().feature_raw();
    DenseMatrix M(samples.size(), first.size());
    json seeds = json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Vec raw = samples[i].feature_raw();
        for (std::size_t j = 0; j < raw.size(); ++j) M(i, j) = raw[j];
        seeds.push_back(samples[i].seed);
    }
    write_rbno1(cfg.out_dir / (name + "_samples.rbno1"), M);
    json sidecar = {{"seeds", seeds},
                    {"kind", samples.front().kind == SampleKind::MiniSquare ? "mini_square"
                                                                            : "nodal_field"},
                    {"config", cfg.to_json()}};
    std::ofstream f(cfg.out_dir / (name + "_samples.json"), std::ios::trunc);
    f << sidecar.dump(2) << "\n";
}

// Per-sample loss weights: alpha as an RBNO1 vector, the CSR matrix as three
// RBNO1 arrays, beta and sizes in a JSON sidecar.
inline void save_loss_weights(const std::filesystem::path& dir, const LossWeights& lw) {
    detail::ensure_dir(dir);
    auto as_matrix = [](const auto& v) {
        DenseMatrix m(1, v.size());
        for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = static_cast<double>(v[i]);
        return m;
    };
    write_rbno1(dir / "W_row_ptr.rbno1", as_matrix(lw.W.row_ptr));
    write_rbno1(dir / "W_col_idx.rbno1", as_matrix(lw.W.col_idx));
    write_rbno1(dir / "W_values.rbno1", as_matrix(lw.W.values));
    write_rbno1(dir / "alpha.rbno1", lw.alpha);
    json sidecar = {{"beta", lw.beta},
                    {"n", lw.alpha.size()},
                    {"sample_seed", lw.sample_seed}};
    std::ofstream f(dir / "weights.json", std::ios::trunc);
    f << sidecar.dump(2) << "\n";
}

inline LossWeights load_loss_weights(const std::filesystem::path& dir) {
    LossWeights lw;
    Vec rp = read_rbno1_vec(dir / "W_row_ptr.rbno1");
    Vec ci = read_rbno1_vec(dir / "W_col_idx.rbno1");
    lw.W.values = read_rbno1_vec(dir / "W_values.rbno1");
    lw.alpha = read_rbno1_vec(dir / "alpha.rbno1");
    lw.W.n_rows = lw.W.n_cols = lw.alpha.size();
    lw.W.row_ptr.resize(rp.size());
    for (std::size_t i = 0; i < rp.size(); ++i)
        lw.W.row_ptr[i] = static_cast<std::size_t>(rp[i]);
    lw.W.col_idx.resize(ci.size());
    for (std::size_t i = 0; i < ci.size(); ++i)
        lw.W.col_idx[i] = static_cast<std::size_t>(ci[i]);
    std::ifstream f(dir / "weights.json");
    if (!f) throw Error("load_loss_weights: missing sidecar in " + dir.string());
    json sidecar;
    f >> sidecar;
    lw.beta = sidecar.at("beta").get<double>();
    lw.sample_seed = sidecar.at("sample_seed").get<std::uint64_t>();
    return lw;
}

// Model checkpoint: one RBNO1 array per tensor plus the JSON manifest.
inline void save_model(const std::filesystem::path& dir, const Mlp& m, const FeatureCodec& codec,
                       const json& extra = json::object()) {
    detail::ensure_dir(dir);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        write_rbno1(dir / ("layer" + std::to_string(l) + "_W.rbno1"), m.W[l]);
        write_rbno1(dir / ("layer" + std::to_string(l) + "_b.rbno1"), m.b[l]);
    }
    if (!codec.identity) {
        write_rbno1(dir / "codec_mean.rbno1", codec.mean);
        write_rbno1(dir / "codec_basis.rbno1", codec.basis);
    }
    json manifest = {{"widths", m.widths},
                     {"leaky_slope", m.leaky_slope},
                     {"clip_bound", m.clip_bound},
                     {"codec_identity", codec.identity},
                     {"codec_dim", codec.dim_in}};
    manifest.update(extra);
    std::ofstream f(dir / "model.json", std::ios::trunc);
    f << manifest.dump(2) << "\n";
}

struct LoadedModel {
    Mlp model;
    FeatureCodec codec;
    json manifest;
};

inline LoadedModel load_model(const std::filesystem::path& dir) {
    std::ifstream f(dir / "model.json");
    if (!f) throw Error("load_model: missing manifest in " + dir.string());
    LoadedModel out;
    f >> out.manifest;
    out.model.widths = out.manifest.at("widths").get<std::vector<std::size_t>>();
    out.model.leaky_slope = out.manifest.at("leaky_slope").get<double>();
    out.model.clip_bound = out.manifest.at("clip_bound").get<double>();
    for (std::size_t l = 0; l + 1 < out.model.widths.size(); ++l) {
        out.model.W.push_back(read_rbno1(dir / ("layer" + std::to_string(l) + "_W.rbno1")));
        out.model.b.push_back(read_rbno1_vec(dir / ("layer" + std::to_string(l) + "_b.rbno1")));
    }
    out.codec.identity = out.manifest.at("codec_identity").get<bool>();
    out.codec.dim_in = out.manifest.at("codec_dim").get<std::size_t>();
    if (!out.codec.identity) {
        out.codec.mean = read_rbno1_vec(dir / "codec_mean.rbno1");
        out.codec.basis = read_rbno1(dir / "codec_basis.rbno1");
    }
    return out;
}

// --- solve: full-order sweep ------------------------------------------------

struct SolveSummary {
    std::size_t n_samples = 0;
    double mean_loss = 0.0;
    double mean_err2 = 0.0;  // squared X_h error vs refined reference (if enabled)
};

inline SolveSummary run_solve(const ExperimentConfig& cfg, std::size_t n_samples) {
    detail::echo_config(cfg);
    Workbench wb(cfg);
    std::unique_ptr<Workbench> fine;
    std::unique_ptr<GramXh> Xfine;
    if (cfg.reference_refine > 1) {
        fine = std::make_unique<Workbench>(wb.refined(cfg.reference_refine));
        Xfine = std::make_unique<GramXh>(gram_xh(fine->disc));
    }

    std::vector<ParamSample> samples = draw_samples(wb, kSeedSnapshots, n_samples);
    Vec losses(n_samples, 0.0), errs2(n_samples, 0.0);
    Vec t_assemble(n_samples, 0.0), t_solve(n_samples, 0.0);
    std::string failure;
    std::mutex fail_mutex;
    parallel_for(n_samples, cfg.workers, [&](std::size_t i) {
        try {
            auto t0 = std::chrono::steady_clock::now();
            LossWeights lw = assemble_problem_weights(wb.disc, samples[i], wb.lifts);
            t_assemble[i] = detail::seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            SolutionPair sol = solve_fe_fosls(lw, cfg.solver_tol);
            t_solve[i] = detail::seconds_since(t0);
            losses[i] = eval_loss(lw, sol.s);
            if (fine) {
                SampleSolve ref = solve_sample(*fine, samples[i], cfg.solver_tol);
                double e = h_norm_error(*Xfine, prolong(wb.disc, fine->disc, sol.s), ref.s);
                errs2[i] = e * e;
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (failure.empty()) failure = "sample " + std::to_string(i) + ": " + e.what();
        }
    });
    if (!failure.empty()) throw Error(failure);

    CsvWriter csv(cfg.out_dir / "solve.csv");
    csv.header({"sample", "seed", "loss", "err2_vs_ref", "n_dofs"});
    for (std::size_t i = 0; i < n_samples; ++i)
        csv.row_strings({CsvWriter::fmt(i), CsvWriter::fmt(samples[i].seed),
                         CsvWriter::fmt(losses[i]),
                         fine ? CsvWriter::fmt(errs2[i]) : std::string(""),
                         CsvWriter::fmt(wb.disc.n_total())});
    CsvWriter tcsv(cfg.out_dir / "timings.csv");
    tcsv.header({"sample", "assemble_seconds", "solve_seconds"});
    for (std::size_t i = 0; i < n_samples; ++i)
        tcsv.row_strings({CsvWriter::fmt(i), CsvWriter::fmt(t_assemble[i]),
                          CsvWriter::fmt(t_solve[i])});

    // sampled coefficient extremes for random-field problems
    if (n_samples > 0 && samples.front().kind == SampleKind::NodalField) {
        CsvWriter fcsv(cfg.out_dir / "field_stats.csv");
        fcsv.header({"sample", "min_coeff", "max_coeff"});
        for (std::size_t i = 0; i < n_samples; ++i) {
            ScalarField coeff;
            if (wb.problem.elasticity) {
                auto m = nodal_field_evaluator(samples[i]);
                coeff = [m](Point p) { return std::exp(m(p)) + 1.0; };
            } else {
                coeff = diffusion_coefficient(wb.problem, samples[i]);
            }
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (std::size_t v = 0; v < wb.disc.mesh->n_vertices(); ++v) {
                double c = coeff(wb.disc.mesh->vertices[v]);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            fcsv.row_strings({CsvWriter::fmt(i), CsvWriter::fmt(lo), CsvWriter::fmt(hi)});
        }
    }

    SolveSummary s;
    s.n_samples = n_samples;
    for (std::size_t i = 0; i < n_samples; ++i) {
        s.mean_loss += losses[i];
        s.mean_err2 += errs2[i];
    }
    if (n_samples > 0) {
        s.mean_loss /= static_cast<double>(n_samples);
        s.mean_err2 /= static_cast<double>(n_samples);
    }
    return s;
}

// --- pod: snapshots, basis, eigenvalue diagnostics ---------------------------

struct PodArtifacts {
    PodBasis basis;
};

inline std::filesystem::path basis_path(const ExperimentConfig& cfg) {
    return cfg.out_dir / "basis.rbno1";
}

inline PodArtifacts run_pod(const ExperimentConfig& cfg, bool force_recompute = false) {
    detail::echo_config(cfg);
    Workbench wb(cfg);
    if (!force_recompute && std::filesystem::exists(basis_path(cfg)) &&
        std::filesystem::exists(cfg.out_dir / "eigenvalues.rbno1")) {
        PodArtifacts art;
        art.basis.Pi = read_rbno1(basis_path(cfg));
        art.basis.eigenvalues = read_rbno1_vec(cfg.out_dir / "eigenvalues.rbno1");
        art.basis.n_snapshots = art.basis.eigenvalues.size();
        return art;
    }

    std::vector<ParamSample> samples = draw_samples(wb, kSeedSnapshots, cfg.n_pod);
    DenseMatrix S = compute_snapshots(wb, samples, cfg.solver_tol);
    PodArtifacts art;
    art.basis = pod(S, wb.X, cfg.pod);

    persist_lifts(cfg, wb);
    persist_samples(cfg, "pod", samples);
    write_rbno1(cfg.out_dir / "snapshots.rbno1", S);
    write_rbno1(basis_path(cfg), art.basis.Pi);
    write_rbno1(cfg.out_dir / "eigenvalues.rbno1", art.basis.eigenvalues);
    {
        json sidecar = {{"n_snapshots", cfg.n_pod},
                        {"rank", art.basis.rank()},
                        {"seed_offset", kSeedSnapshots},
                        {"master_seed", cfg.seed}};
        std::ofstream f(cfg.out_dir / "pod.json", std::ios::trunc);
        f << sidecar.dump(2) << "\n";
    }

    CsvWriter csv(cfg.out_dir / "eigenvalues.csv");
    csv.header({"k", "lambda", "tail_abs", "tail_rel"});
    for (std::size_t k = 0; k < art.basis.eigenvalues.size(); ++k) {
        auto [abs_tail, rel_tail] = pod_tail(art.basis.eigenvalues, k + 1);
        csv.row_strings({CsvWriter::fmt(k), CsvWriter::fmt(art.basis.eigenvalues[k]),
                         CsvWriter::fmt(abs_tail), CsvWriter::fmt(rel_tail)});
    }

    // held-out projection error vs eigenvalue tail
    std::size_t n_holdout = std::max<std::size_t>(16, cfg.n_pod / 4);
    std::vector<ParamSample> held = draw_samples(wb, kSeedHoldout, n_holdout);
    DenseMatrix H = compute_snapshots(wb, held, cfg.solver_tol);
    CsvWriter hcsv(cfg.out_dir / "pod_holdout.csv");
    hcsv.header({"r", "mean_proj_err2", "tail_estimate"});
    for (std::size_t r = 2; r <= art.basis.rank(); r *= 2) {
        PodBasis sub;
        sub.Pi = DenseMatrix(art.basis.Pi.rows(), r);
        for (std::size_t j = 0; j < r; ++j) sub.Pi.set_col(j, art.basis.Pi.col(j));
        sub.eigenvalues = art.basis.eigenvalues;
        double err2 = 0.0;
        for (std::size_t i = 0; i < n_holdout; ++i) {
            Vec s = H.col(i);
            Vec p = expand(sub, project(sub, wb.X, s));
            double e = h_norm_error(wb.X, s, p);
            err2 += e * e;
        }
        err2 /= static_cast<double>(n_holdout);
        auto [tail, rel] = pod_tail(art.basis.eigenvalues, r);
        hcsv.row_strings({CsvWriter::fmt(r), CsvWriter::fmt(err2), CsvWriter::fmt(tail)});
    }
    return art;
}

// --- reduce: per-sample reduced weights + RB diagnostics ----------------------

inline void save_reduced_set(const std::filesystem::path& dir, const std::string& name,
                             const std::vector<ParamSample>& samples, const ReducedSet& set) {
    detail::ensure_dir(dir);
    const std::size_t n = set.reduced.size();
    const std::size_t r = n ? set.reduced.front().rank() : 0;
    DenseMatrix Wr(n * r, r), alpha(n, r), meta(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < r; ++a)
            for (std::size_t b = 0; b < r; ++b) Wr(i * r + a, b) = set.reduced[i].Wr(a, b);
        for (std::size_t a = 0; a < r; ++a) alpha(i, a) = set.reduced[i].alpha_r[a];
        meta(i, 0) = static_cast<double>(samples[i].seed);
        meta(i, 1) = set.reduced[i].beta;
    }
    write_rbno1(dir / (name + "_Wr.rbno1"), Wr);
    write_rbno1(dir / (name + "_alpha.rbno1"), alpha);
    write_rbno1(dir / (name + "_meta.rbno1"), meta);
}

struct ReduceSummary {
    double mean_rb_loss = 0.0;
    double mean_fe_loss = 0.0;
};

inline ReduceSummary run_reduce(const ExperimentConfig& cfg) {
    detail::echo_config(cfg);
    PodArtifacts art = run_pod(cfg);
    Workbench wb(cfg);
    std::vector<ParamSample> samples = draw_samples(wb, kSeedTest, cfg.n_test);
    ReducedSet set = reduce_samples(wb, art.basis, samples, true, cfg.solver_tol);
    save_reduced_set(cfg.out_dir / "reduced", "test", samples, set);

    CsvWriter csv(cfg.out_dir / "rb.csv");
    csv.header({"sample", "seed", "rb_loss", "fe_loss", "err_rb_vs_fe"});
    ReduceSummary sum;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double err = h_norm_error(wb.X, expand(art.basis, set.rb_coef[i]), set.fe_sol[i]);
        csv.row_strings({CsvWriter::fmt(i), CsvWriter::fmt(samples[i].seed),
                         CsvWriter::fmt(set.rb_loss[i]), CsvWriter::fmt(set.fe_loss[i]),
                         CsvWriter::fmt(err)});
        sum.mean_rb_loss += set.rb_loss[i];
        sum.mean_fe_loss += set.fe_loss[i];
    }
    sum.mean_rb_loss /= static_cast<double>(samples.size());
    sum.mean_fe_loss /= static_cast<double>(samples.size());

    // rank sweep: mean loss gap vs mean squared projection distance vs tail
    CsvWriter rcsv(cfg.out_dir / "rsweep.csv");
    rcsv.header({"r", "mean_loss_diff", "mean_sq_err_vs_fe", "tail_estimate"});
    for (std::size_t r = 8; r <= art.basis.rank(); r *= 2) {
        PodBasis sub;
        sub.Pi = DenseMatrix(art.basis.Pi.rows(), r);
        for (std::size_t j = 0; j < r; ++j) sub.Pi.set_col(j, art.basis.Pi.col(j));
        sub.eigenvalues = art.basis.eigenvalues;
        double loss_diff = 0.0, sq_err = 0.0;
        parallel_for(samples.size(), 1, [&](std::size_t i) {
            ReducedWeights rw;
            {
                LossWeights lw = assemble_problem_weights(wb.disc, samples[i], wb.lifts);
                rw = reduce_weights(lw, sub);
            }
            Vec coef = solve_rb(rw);
            loss_diff += eval_reduced_loss(rw, coef) - set.fe_loss[i];
            double e = h_norm_error(wb.X, expand(sub, coef), set.fe_sol[i]);
            sq_err += e * e;
        });
        loss_diff /= static_cast<double>(samples.size());
        sq_err /= static_cast<double>(samples.size());
        auto [tail, rel] = pod_tail(art.basis.eigenvalues, r);
        rcsv.row_strings({CsvWriter::fmt(r), CsvWriter::fmt(loss_diff), CsvWriter::fmt(sq_err),
                          CsvWriter::fmt(tail)});
    }
    return sum;
}

// --- train ------------------------------------------------------------------

struct TrainArtifacts {
    FeatureCodec codec;
    TrainedModel trained;
    PodBasis basis;
};

inline TrainArtifacts run_train(const ExperimentConfig& cfg) {
    detail::echo_config(cfg);
    PodArtifacts art = run_pod(cfg);
    Workbench wb(cfg);

    std::size_t n_data = cfg.n_train + cfg.n_val;
    std::vector<ParamSample> samples = draw_samples(wb, kSeedTrain, n_data);
    ReducedSet set = reduce_samples(wb, art.basis, samples, false, cfg.solver_tol);
    save_reduced_set(cfg.out_dir / "reduced", "train", samples, set);

    FeatureCodec codec = fit_feature_codec(samples, cfg.feature_dim);
    Dataset data;
    data.features = input_features(codec, samples);
    data.reduced = std::move(set.reduced);
    data.labels = DenseMatrix(n_data, art.basis.rank());
    for (std::size_t i = 0; i < n_data; ++i)
        for (std::size_t j = 0; j < art.basis.rank(); ++j)
            data.labels(i, j) = set.rb_coef[i][j];
    data.has_labels = true;

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.val_fraction =
        n_data > 0 ? static_cast<double>(cfg.n_val) / static_cast<double>(n_data) : 0.0;
    if (tc.clip_bound < 0.0) {
        // negative setting: derive B = 2 * max ||s_r|| over training RB optima
        double smax = 0.0;
        for (const auto& c : set.rb_coef) smax = std::max(smax, norm2(c));
        tc.clip_bound = 2.0 * smax;
    }
    TrainArtifacts out;
    out.trained = train(data, tc);
    out.codec = std::move(codec);
    out.basis = std::move(art.basis);

    std::uint64_t basis_hash = fnv1a(out.basis.Pi.data(),
                                     sizeof(double) * out.basis.Pi.rows() * out.basis.Pi.cols());
    save_model(cfg.out_dir / "model", out.trained.model, out.codec,
               json{{"best_iteration", out.trained.best_iteration},
                    {"best_val_loss", out.trained.best_val_loss},
                    {"basis_rank", out.basis.rank()},
                    {"basis_hash", basis_hash},
                    {"master_seed", cfg.seed}});
    CsvWriter hist(cfg.out_dir / "history.csv");
    hist.header({"iteration", "train_loss", "val_loss"});
    for (std::size_t i = 0; i < out.trained.train_history.size(); ++i)
        hist.row_strings({CsvWriter::fmt(i + 1), CsvWriter::fmt(out.trained.train_history[i]),
                          CsvWriter::fmt(out.trained.val_history[i])});
    return out;
}

// --- eval + ratios ------------------------------------------------------------

struct EvalSummary {
    double mean_model_loss = 0.0;
    double mean_rb_loss = 0.0;
    double mean_rel_l = 0.0, std_rel_l = 0.0;
    double mean_rel_h = 0.0, std_rel_h = 0.0;
    double ratio_in_band = 0.0;  // fraction of ratios in [0.3, 3]
    std::vector<EvalRecord> records;
};

inline EvalSummary evaluate_and_emit(const ExperimentConfig& cfg, const Workbench& wb,
                                     const TrainArtifacts& art,
                                     const std::vector<ParamSample>& samples,
                                     const ReducedSet& set) {
    std::unique_ptr<Workbench> fine;
    if (cfg.reference_refine > 1)
        fine = std::make_unique<Workbench>(wb.refined(cfg.reference_refine));
    std::vector<EvalRecord> rec = evaluate_model(wb, art.basis, art.codec, art.trained.model,
                                                 samples, set, fine.get());

    CsvWriter csv(cfg.out_dir / "metrics.csv");
    csv.header({"sample", "seed", "model_loss", "rb_loss", "fe_loss", "err_vs_rb", "err_vs_fe",
                "rel_l", "rel_h", "err_vs_ref", "ratio"});
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const EvalRecord& r = rec[i];
        csv.row_strings({CsvWriter::fmt(i), CsvWriter::fmt(r.seed),
                         CsvWriter::fmt(r.model_loss), CsvWriter::fmt(r.rb_loss),
                         CsvWriter::fmt(r.fe_loss), CsvWriter::fmt(r.err_vs_rb),
                         CsvWriter::fmt(r.err_vs_fe), CsvWriter::fmt(r.rel_l),
                         CsvWriter::fmt(r.rel_h), CsvWriter::fmt(r.err_vs_ref),
                         CsvWriter::fmt(r.ratio)});
    }

    EvalSummary s;
    s.records = rec;
    auto mean_std = [&](auto get) {
        double m = 0.0, v = 0.0;
        for (const auto& r : rec) m += get(r);
        m /= static_cast<double>(rec.size());
        for (const auto& r : rec) v += (get(r) - m) * (get(r) - m);
        v = std::sqrt(v / static_cast<double>(rec.size()));
        return std::pair<double, double>(m, v);
    };
    std::tie(s.mean_rel_l, s.std_rel_l) = mean_std([](const EvalRecord& r) { return r.rel_l; });
    std::tie(s.mean_rel_h, s.std_rel_h) = mean_std([](const EvalRecord& r) { return r.rel_h; });
    auto [loss_mean, loss_std] = mean_std([](const EvalRecord& r) { return r.model_loss; });
    auto [rb_mean, rb_std] = mean_std([](const EvalRecord& r) { return r.rb_loss; });
    s.mean_model_loss = loss_mean;
    s.mean_rb_loss = rb_mean;

    CsvWriter sumcsv(cfg.out_dir / "metrics_summary.csv");
    sumcsv.header({"metric", "mean", "std"});
    sumcsv.row_strings({"rel_l", CsvWriter::fmt(s.mean_rel_l), CsvWriter::fmt(s.std_rel_l)});
    sumcsv.row_strings({"rel_h", CsvWriter::fmt(s.mean_rel_h), CsvWriter::fmt(s.std_rel_h)});
    sumcsv.row_strings({"model_loss", CsvWriter::fmt(loss_mean), CsvWriter::fmt(loss_std)});
    sumcsv.row_strings({"rb_loss", CsvWriter::fmt(rb_mean), CsvWriter::fmt(rb_std)});

    std::vector<double> ratios;
    int in_band = 0, with_ratio = 0;
    for (const auto& r : rec)
        if (std::isfinite(r.ratio)) {
            ratios.push_back(r.ratio);
            with_ratio++;
            if (r.ratio >= 0.3 && r.ratio <= 3.0) in_band++;
        }
    s.ratio_in_band = with_ratio ? static_cast<double>(in_band) / with_ratio : 0.0;
    Histogram h = ratio_histogram(ratios);
    CsvWriter rcsv(cfg.out_dir / "ratios.csv");
    rcsv.header({"bin_lo", "bin_hi", "count"});
    rcsv.row_strings({"-inf", CsvWriter::fmt(h.edges.front()), CsvWriter::fmt(h.counts.front())});
    for (std::size_t b = 0; b + 1 < h.edges.size(); ++b)
        rcsv.row_strings({CsvWriter::fmt(h.edges[b]), CsvWriter::fmt(h.edges[b + 1]),
                          CsvWriter::fmt(h.counts[b + 1])});
    rcsv.row_strings({CsvWriter::fmt(h.edges.back()), "+inf", CsvWriter::fmt(h.counts.back())});
    return s;
}

inline EvalSummary run_eval(const ExperimentConfig& cfg) {
    TrainArtifacts art = run_train(cfg);
    Workbench wb(cfg);
    std::vector<ParamSample> samples = draw_samples(wb, kSeedTest, cfg.n_test);
    ReducedSet set = reduce_samples(wb, art.basis, samples, true, cfg.solver_tol);
    return evaluate_and_emit(cfg, wb, art, samples, set);
}

// --- rates: manufactured convergence study ------------------------------------

struct RatesSummary {
    double slope_k0 = 0.0;
    double slope_k1 = 0.0;
};

inline RatesSummary run_rates(const ExperimentConfig& cfg,
                              std::vector<std::size_t> levels = {8, 16, 32, 64}) {
    detail::echo_config(cfg);
    ProblemKind kind = cfg.problem;
    if (kind != ProblemKind::ManufacturedDiffusion && kind != ProblemKind::ManufacturedElasticity)
        throw Error("run_rates: manufactured problems only");
    CsvWriter csv(cfg.out_dir / "rates.csv");
    csv.header({"k", "n", "h", "loss", "slope_fit"});
    RatesSummary out;
    for (int k : {0, 1}) {
        std::vector<double> hs, losses;
        for (std::size_t n : levels) {
            ExperimentConfig c = cfg;
            c.k = k;
            c.nx = c.ny = n;
            Workbench wb(c);
            LossWeights lw = assemble_problem_weights(wb.disc, ParamSample{}, wb.lifts);
            SolutionPair sol = solve_fe_fosls(lw, cfg.solver_tol);
            hs.push_back(wb.disc.mesh->h());
            losses.push_back(eval_loss(lw, sol.s));
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            double x = std::log(hs[i]), y = std::log(losses[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double nn = static_cast<double>(hs.size());
        double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
        (k == 0 ? out.slope_k0 : out.slope_k1) = slope;
        for (std::size_t i = 0; i < hs.size(); ++i)
            csv.row_strings({CsvWriter::fmt(k), CsvWriter::fmt(levels[i]),
                             CsvWriter::fmt(hs[i]), CsvWriter::fmt(losses[i]),
                             CsvWriter::fmt(slope)});
    }
    return out;
}

inline EvalSummary run_ratios(const ExperimentConfig& cfg) { return run_eval(cfg); }

}  // namespace rbno
