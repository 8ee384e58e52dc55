// Experiment driver: reproducible FOSLS / reduced-basis / operator-learning
// runs driven by a JSON config. Subcommands mirror the pipeline stages; all
// randomness flows from the master seed via fixed per-stage offsets, and every
// emitted CSV is byte-stable for a fixed config (timings.csv excepted).

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rbno/experiment.hpp"

using namespace rbno;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    std::size_t samples = 100;
};

ExperimentConfig load_config(const CommonArgs& args) {
    json j = json::object();
    if (!args.config_path.empty()) {
        std::ifstream f(args.config_path);
        if (!f) throw Error("cannot open config: " + args.config_path);
        f >> j;
    }
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;
    if (args.workers > 0) cfg.workers = args.workers;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--out", args.out_override, "output directory override");
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--workers", args.workers, "worker pool size override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FOSLS reduced-basis operator-learning experiments"};
    app.require_subcommand(1);
    CommonArgs args;

    auto* solve = app.add_subcommand("solve", "full-order FOSLS sweep -> solve.csv");
    solve->add_option("--samples", args.samples, "number of parameter samples");
    auto* pod = app.add_subcommand("pod", "snapshots + POD basis -> basis.rbno1, eigenvalues.csv");
    auto* reduce = app.add_subcommand("reduce", "reduced weights + RB diagnostics -> rb.csv");
    auto* train = app.add_subcommand("train", "train the coefficient map -> model/, history.csv");
    auto* eval = app.add_subcommand("eval", "test-set metrics -> metrics.csv, ratios.csv");
    auto* rates = app.add_subcommand("rates", "manufactured convergence study -> rates.csv");
    auto* ratios = app.add_subcommand("ratios", "a-posteriori ratio histogram -> ratios.csv");
    for (CLI::App* cmd : {solve, pod, reduce, train, eval, rates, ratios})
        add_common(cmd, args);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(args);
        if (solve->parsed()) {
            SolveSummary s = run_solve(cfg, args.samples);
            std::printf("solve: %zu samples, mean loss %.6e\n", s.n_samples, s.mean_loss);
        } else if (pod->parsed()) {
            PodArtifacts art = run_pod(cfg, true);
            std::printf("pod: rank %zu basis written to %s\n", art.basis.rank(),
                        cfg.out_dir.string().c_str());
        } else if (reduce->parsed()) {
            ReduceSummary s = run_reduce(cfg);
            std::printf("reduce: mean RB loss %.6e, mean FE loss %.6e\n", s.mean_rb_loss,
                        s.mean_fe_loss);
        } else if (train->parsed()) {
            TrainArtifacts art = run_train(cfg);
            std::printf("train: best val loss %.6e at iteration %d\n",
                        art.trained.best_val_loss, art.trained.best_iteration);
        } else if (eval->parsed() || ratios->parsed()) {
            EvalSummary s = run_eval(cfg);
            std::printf("eval: mean model loss %.6e, mean RB loss %.6e, rel H %.4e, "
                        "ratio-in-band %.2f\n",
                        s.mean_model_loss, s.mean_rb_loss, s.mean_rel_h, s.ratio_in_band);
        } else if (rates->parsed()) {
            if (cfg.problem != ProblemKind::ManufacturedDiffusion &&
                cfg.problem != ProblemKind::ManufacturedElasticity)
                cfg.problem = ProblemKind::ManufacturedDiffusion;
            RatesSummary s = run_rates(cfg);
            std::printf("rates: k=0 slope %.3f, k=1 slope %.3f\n", s.slope_k0, s.slope_k1);
        }
        return 0;
    } catch (const std::exception& e) {
        json err = {{"error", e.what()}};
        std::cout << err.dump() << "\n";
        return 1;
    }
}
