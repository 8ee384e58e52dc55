#include <catch2/catch_amalgamated.hpp>

#include "rbno/features.hpp"
#include "rbno/mlp.hpp"

using namespace rbno;

namespace {

ReducedWeights random_reduced(std::size_t r, Rng& rng, double scale = 1.0) {
    DenseMatrix R(r, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) R(i, j) = rng.uniform(-1.0, 1.0);
    ReducedWeights rw;
    rw.Wr = matmul(R.transposed(), R);
    for (std::size_t i = 0; i < r; ++i) rw.Wr(i, i) += 0.5;
    for (auto& v : rw.Wr.values()) v *= scale;
    rw.alpha_r.resize(r);
    for (auto& v : rw.alpha_r) v = scale * rng.uniform(-1.0, 1.0);
    rw.beta = scale * rng.uniform(0.5, 2.0);
    return rw;
}

double numerical_loss(const Mlp& m, const DenseMatrix& X,
                      const std::vector<const ReducedWeights*>& rw, const DenseMatrix* labels,
                      LossMode mode, double w_mse) {
    return batch_loss(m, X, rw, labels, mode, w_mse);
}

// central finite differences over every parameter entry
double max_grad_rel_error(Mlp m, const DenseMatrix& X,
                          const std::vector<const ReducedWeights*>& rw,
                          const DenseMatrix* labels, LossMode mode, double w_mse) {
    MlpGradients g;
    loss_and_grad(m, X, rw, labels, mode, w_mse, g);
    const double eps = 1e-6;
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
        double save = param;
        param = save + eps;
        double lp = numerical_loss(m, X, rw, labels, mode, w_mse);
        param = save - eps;
        double lm = numerical_loss(m, X, rw, labels, mode, w_mse);
        param = save;
        double fd = (lp - lm) / (2.0 * eps);
        double denom = std::max({1e-6, std::abs(fd), std::abs(analytic)});
        worst = std::max(worst, std::abs(fd - analytic) / denom);
    };
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        for (std::size_t i = 0; i < m.W[l].values().size(); ++i)
            check(m.W[l].values()[i], g.dW[l].values()[i]);
        for (std::size_t i = 0; i < m.b[l].size(); ++i) check(m.b[l][i], g.db[l][i]);
    }
    return worst;
}

}  // namespace

TEST_CASE("forward basics: zero output layer, positive passthrough, batch determinism") {
    Mlp m = Mlp::xavier({3, 4, 2}, 5);
    for (auto& v : m.W.back().values()) v = 0.0;
    for (auto& v : m.b.back()) v = 0.0;
    DenseMatrix X(2, 3);
    X(0, 0) = 1.0;
    X(1, 2) = -2.0;
    DenseMatrix Y = mlp_forward(m, X);
    for (double v : Y.values()) REQUIRE(v == 0.0);

    // single layer with identity weights passes positive inputs through
    Mlp id;
    id.widths = {3, 3};
    id.W.emplace_back(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) id.W[0](i, i) = 1.0;
    id.b.emplace_back(3, 0.0);
    DenseMatrix P(1, 3);
    P(0, 0) = 0.3;
    P(0, 1) = 1.7;
    P(0, 2) = 2.9;
    DenseMatrix PY = mlp_forward(id, P);
    for (int j = 0; j < 3; ++j) REQUIRE(PY(0, j) == P(0, j));

    // duplicated rows give duplicated outputs
    Mlp m2 = Mlp::xavier({3, 8, 2}, 9);
    DenseMatrix D(2, 3);
    for (int j = 0; j < 3; ++j) D(0, j) = D(1, j) = 0.1 * (j + 1);
    DenseMatrix DY = mlp_forward(m2, D);
    for (int j = 0; j < 2; ++j) REQUIRE(DY(0, j) == DY(1, j));
}

TEST_CASE("xavier initialization is seeded and in range") {
    Mlp a = Mlp::xavier({4, 6, 3}, 123);
    Mlp b = Mlp::xavier({4, 6, 3}, 123);
    Mlp c = Mlp::xavier({4, 6, 3}, 124);
    REQUIRE(a.W[0].values() == b.W[0].values());
    REQUIRE(a.W[0].values() != c.W[0].values());
    double bound0 = std::sqrt(6.0 / (4 + 6));
    for (double v : a.W[0].values()) REQUIRE(std::abs(v) <= bound0);
    for (double v : a.b[0]) REQUIRE(v == 0.0);
}

TEST_CASE("backprop matches central finite differences") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        const std::size_t r = 4, din = 5, n = 3;
        std::vector<ReducedWeights> rws;
        for (std::size_t i = 0; i < n; ++i) rws.push_back(random_reduced(r, rng));
        std::vector<const ReducedWeights*> rwp;
        for (auto& w : rws) rwp.push_back(&w);
        DenseMatrix X(n, din), L(n, r);
        for (auto& v : X.values()) v = rng.uniform(-1.0, 1.0);
        for (auto& v : L.values()) v = rng.uniform(-1.0, 1.0);
        Mlp m = Mlp::xavier({din, 8, r}, 100 + seed);

        REQUIRE(max_grad_rel_error(m, X, rwp, nullptr, LossMode::Residual, 0.0) <= 1e-5);
        REQUIRE(max_grad_rel_error(m, X, rwp, &L, LossMode::Both, 0.7) <= 1e-5);
        REQUIRE(max_grad_rel_error(m, X, rwp, &L, LossMode::CoefMse, 0.0) <= 1e-5);
    }
}

TEST_CASE("stationarity at the RB-optimal output and beta floor") {
    Rng rng(9);
    const std::size_t r = 5;
    ReducedWeights rw = random_reduced(r, rng);
    Vec star = solve_rb(rw);
    double opt = eval_reduced_loss(rw, star);

    // affine model that outputs exactly the optimum
    Mlp m;
    m.widths = {2, r};
    m.W.emplace_back(r, 2, 0.0);
    m.b.push_back(star);
    DenseMatrix X(1, 2);
    std::vector<const ReducedWeights*> rwp = {&rw};
    MlpGradients g;
    double loss = loss_and_grad(m, X, rwp, nullptr, LossMode::Residual, 0.0, g);
    REQUIRE(loss == Catch::Approx(opt).epsilon(1e-12));
    for (double v : g.db.back()) REQUIRE(std::abs(v) <= 1e-10);

    // zero-output model sees the mean beta
    Mlp z;
    z.widths = {2, r};
    z.W.emplace_back(r, 2, 0.0);
    z.b.emplace_back(r, 0.0);
    ReducedWeights rw2 = random_reduced(r, rng);
    std::vector<const ReducedWeights*> both = {&rw, &rw2};
    DenseMatrix X2(2, 2);
    double lz = batch_loss(z, X2, both, nullptr, LossMode::Residual, 0.0);
    REQUIRE(lz == Catch::Approx(0.5 * (rw.beta + rw2.beta)).epsilon(1e-12));
}

TEST_CASE("range clipping caps the output norm and keeps gradients consistent") {
    Rng rng(15);
    Mlp m = Mlp::xavier({3, 16, 4}, 44);
    m.clip_bound = 0.05;  // small enough that clipping is active
    DenseMatrix X(6, 3);
    for (auto& v : X.values()) v = rng.uniform(-2.0, 2.0);
    DenseMatrix Y = mlp_forward(m, X);
    for (std::size_t i = 0; i < Y.rows(); ++i) {
        double n2 = 0.0;
        for (std::size_t j = 0; j < Y.cols(); ++j) n2 += Y(i, j) * Y(i, j);
        REQUIRE(std::sqrt(n2) <= m.clip_bound + 1e-12);
    }
    std::vector<ReducedWeights> rws;
    for (int i = 0; i < 6; ++i) rws.push_back(random_reduced(4, rng));
    std::vector<const ReducedWeights*> rwp;
    for (auto& w : rws) rwp.push_back(&w);
    REQUIRE(max_grad_rel_error(m, X, rwp, nullptr, LossMode::Residual, 0.0) <= 1e-5);
}

TEST_CASE("training is deterministic and honors early stopping") {
    Rng rng(21);
    const std::size_t r = 3, n = 12;
    Dataset data;
    data.features = DenseMatrix(n, 4);
    for (auto& v : data.features.values()) v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) data.reduced.push_back(random_reduced(r, rng));

    TrainConfig cfg;
    cfg.hidden = {16};
    cfg.max_iters = 40;
    cfg.seed = 7;
    TrainedModel a = train(data, cfg);
    TrainedModel b = train(data, cfg);
    REQUIRE(a.train_history == b.train_history);
    REQUIRE(a.val_history == b.val_history);
    REQUIRE(a.best_iteration == b.best_iteration);
    REQUIRE(a.best_val_loss <= a.val_history.front());

    // returned snapshot really is the argmin over recorded validation losses
    double vmin = *std::min_element(a.val_history.begin(), a.val_history.end());
    REQUIRE(a.best_val_loss <= vmin + 1e-15);
}

TEST_CASE("single-sample training approaches the RB optimum") {
    Rng rng(33);
    const std::size_t r = 4;
    Dataset data;
    data.features = DenseMatrix(1, 3);
    for (auto& v : data.features.values()) v = rng.uniform(-1.0, 1.0);
    data.reduced.push_back(random_reduced(r, rng));
    double opt = eval_reduced_loss(data.reduced[0], solve_rb(data.reduced[0]));

    TrainConfig cfg;
    cfg.hidden = {32};
    cfg.max_iters = 3000;
    cfg.lr = 1e-2;
    cfg.weight_decay = 0.0;
    cfg.step_gamma = 0.97;
    cfg.step_size = 200;
    cfg.val_fraction = 0.0;
    cfg.seed = 5;
    TrainedModel tm = train(data, cfg);
    REQUIRE(tm.best_val_loss <= opt + 1e-6);
}

TEST_CASE("feature codec: identity for mini-squares, centered PCA for fields") {
    std::vector<ParamSample> mini;
    for (int i = 0; i < 4; ++i) mini.push_back(sample_minisquares(10 + i));
    FeatureCodec idc = fit_feature_codec(mini);
    REQUIRE(idc.identity);
    REQUIRE(idc.dim_in == 16);
    DenseMatrix F = input_features(idc, mini);
    REQUIRE(F.rows() == 4);
    REQUIRE(F.cols() == 16);
    for (int j = 0; j < 16; ++j) REQUIRE(F(0, j) == mini[0].mu[j]);

    // synthetic nodal samples: mean feature encodes to zero
    std::vector<ParamSample> nodal(6);
    Rng rng(3);
    for (auto& s : nodal) {
        s.kind = SampleKind::NodalField;
        s.nodal.resize(20);
        for (auto& v : s.nodal) v = rng.uniform(-1.0, 1.0);
    }
    FeatureCodec pc = fit_feature_codec(nodal, 4);
    REQUIRE_FALSE(pc.identity);
    ParamSample meansample;
    meansample.kind = SampleKind::NodalField;
    meansample.nodal = pc.mean;
    Vec f = pc.encode(meansample.feature_raw());
    for (double v : f) REQUIRE(std::abs(v) < 1e-12);
    REQUIRE(pc.retained_variance(pc.dim_in) <= 1.0 + 1e-12);
    REQUIRE(pc.retained_variance(pc.dim_in) >
            pc.retained_variance(1) - 1e-12);

    REQUIRE_THROWS_AS(fit_feature_codec(nodal, 10), Error);  // dim_in > n
}

TEST_CASE("PCA codec retains over 99 percent variance for the smooth GRF") {
    Mesh m = build_rect_mesh(0, 0, 1, 1, 32, 32);
    auto cg1 = FunctionSpace::build(m, Family::CG, 1, 1);
    GrfSampler gs(cg1, GrfConfig{});  // delta = 1.5, gamma = 0.15
    std::vector<ParamSample> samples;
    for (std::uint64_t i = 0; i < 128; ++i) samples.push_back(gs.draw(40000 + i));
    FeatureCodec codec = fit_feature_codec(samples, 64);
    REQUIRE_FALSE(codec.identity);
    REQUIRE(codec.dim_in == 64);
    REQUIRE(codec.retained_variance(64) >= 0.99);
}

TEST_CASE("divergence guard trips on absurd learning rates") {
    Rng rng(55);
    Dataset data;
    data.features = DenseMatrix(4, 2);
    for (auto& v : data.features.values()) v = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 4; ++i) data.reduced.push_back(random_reduced(3, rng, 100.0));
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.max_iters = 4000;
    cfg.lr = 1e6;
    cfg.step_gamma = 1.0;
    cfg.divergence_guard = 1e3;
    cfg.val_fraction = 0.25;
    cfg.seed = 2;
    REQUIRE_THROWS_AS(train(data, cfg), SolverError);
}
