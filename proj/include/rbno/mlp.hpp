#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "rbno/linalg.hpp"
#include "rbno/rng.hpp"
#include "rbno/rom.hpp"

namespace rbno {

// Feedforward network: affine layers with LeakyReLU on the hidden ones and an
// affine output, optionally followed by Euclidean range clipping to norm B.
struct Mlp {
    std::vector<std::size_t> widths;  // [d_in, h1, ..., hL, r]
    std::vector<DenseMatrix> W;      // W[l]: widths[l+1] x widths[l]
    std::vector<Vec> b;
    double leaky_slope = 0.01;
    double clip_bound = 0.0;  // 0 disables clipping

    std::size_t n_layers() const { return W.size(); }
    std::size_t dim_in() const { return widths.front(); }
    std::size_t dim_out() const { return widths.back(); }

    static Mlp xavier(std::vector<std::size_t> widths, std::uint64_t seed,
                      double slope = 0.01) {
        if (widths.size() < 2) throw Error("Mlp: need at least input and output widths");
        Mlp m;
        m.widths = std::move(widths);
        m.leaky_slope = slope;
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
            std::size_t fan_in = m.widths[l], fan_out = m.widths[l + 1];
            double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            DenseMatrix w(fan_out, fan_in);
            for (std::size_t i = 0; i < fan_out; ++i)
                for (std::size_t j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-a, a);
            m.W.push_back(std::move(w));
            m.b.emplace_back(fan_out, 0.0);
        }
        return m;
    }
};

// Forward/backward scratch: activations A[l] (A[0] = input) and pre-clip
// output; all batch-major (n x width).
struct MlpTrace {
    std::vector<DenseMatrix> A;
    DenseMatrix raw_out;  // before clipping
    std::vector<double> clip_scale;
};

inline DenseMatrix mlp_forward(const Mlp& m, const DenseMatrix& X, MlpTrace* trace = nullptr) {
    if (X.cols() != m.dim_in()) throw DimensionError("mlp_forward: input width");
    const std::size_t n = X.rows();
    DenseMatrix A = X;
    if (trace) {
        trace->A.clear();
        trace->A.push_back(A);
    }
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        const DenseMatrix& Wl = m.W[l];
        DenseMatrix Z(n, Wl.rows());
        for (std::size_t i = 0; i < n; ++i) {
            const double* ai = A.data() + i * A.cols();
            double* zi = Z.data() + i * Z.cols();
            for (std::size_t o = 0; o < Wl.rows(); ++o) {
                const double* wo = Wl.data() + o * Wl.cols();
                double s = m.b[l][o];
                for (std::size_t k = 0; k < Wl.cols(); ++k) s += wo[k] * ai[k];
                zi[o] = s;
            }
        }
        if (l + 1 < m.n_layers()) {
            for (auto& v : Z.values())
                if (v < 0.0) v *= m.leaky_slope;
        }
        A = std::move(Z);
        if (trace) trace->A.push_back(A);
    }
    if (m.clip_bound > 0.0) {
        if (trace) {
            trace->raw_out = A;
            trace->clip_scale.assign(n, 1.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double* yi = A.data() + i * A.cols();
            double nrm = 0.0;
            for (std::size_t j = 0; j < A.cols(); ++j) nrm += yi[j] * yi[j];
            nrm = std::sqrt(nrm);
            if (nrm > m.clip_bound) {
                double s = m.clip_bound / nrm;
                for (std::size_t j = 0; j < A.cols(); ++j) yi[j] *= s;
                if (trace) trace->clip_scale[i] = s;
            }
        }
    }
    return A;
}

enum class LossMode { Residual, CoefMse, Both };

inline LossMode loss_mode_from_string(const std::string& s) {
    if (s == "residual") return LossMode::Residual;
    if (s == "coef_mse") return LossMode::CoefMse;
    if (s == "both") return LossMode::Both;
    throw Error("unknown loss mode: " + s);
}

struct MlpGradients {
    std::vector<DenseMatrix> dW;
    std::vector<Vec> db;

    static MlpGradients zeros_like(const Mlp& m) {
        MlpGradients g;
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            g.dW.emplace_back(m.W[l].rows(), m.W[l].cols(), 0.0);
            g.db.emplace_back(m.b[l].size(), 0.0);
        }
        return g;
    }
};

// Batch loss and parameter gradients. Residual mode: per-sample quadratic
// s^T W_r s + 2 s^T alpha_r + beta through the reduced weights; coef_mse:
// squared distance to the RB-optimal coefficients; both: residual +
// w_mse * coef_mse. Losses and gradients are averaged over the batch.
inline double loss_and_grad(const Mlp& m, const DenseMatrix& X,
                            const std::vector<const ReducedWeights*>& rw,
                            const DenseMatrix* labels, LossMode mode, double w_mse,
                            MlpGradients& grads) {
    const std::size_t n = X.rows();
    const std::size_t r = m.dim_out();
    if (mode != LossMode::Residual && labels == nullptr)
        throw Error("loss_and_grad: coef labels required for this mode");
    if (mode != LossMode::CoefMse && rw.size() != n)
        throw Error("loss_and_grad: reduced weights required per batch sample");

    MlpTrace trace;
    DenseMatrix Y = mlp_forward(m, X, &trace);

    double total = 0.0;
    DenseMatrix G(n, r, 0.0);  // dLoss/dY (post-clip)
    Vec y(r), gy(r);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < r; ++j) y[j] = Y(i, j);
        std::fill(gy.begin(), gy.end(), 0.0);
        if (mode != LossMode::CoefMse) {
            const ReducedWeights& w = *rw[i];
            Vec Wy = matvec(w.Wr, y);
            total += dot(y, Wy) + 2.0 * dot(y, w.alpha_r) + w.beta;
            for (std::size_t j = 0; j < r; ++j) gy[j] += 2.0 * (Wy[j] + w.alpha_r[j]);
        }
        if (mode != LossMode::Residual) {
            double scale = (mode == LossMode::Both) ? w_mse : 1.0;
            for (std::size_t j = 0; j < r; ++j) {
                double d = y[j] - (*labels)(i, j);
                total += scale * d * d;
                gy[j] += scale * 2.0 * d;
            }
        }
        for (std::size_t j = 0; j < r; ++j) G(i, j) = gy[j];
    }
    total /= static_cast<double>(n);
    for (auto& v : G.values()) v /= static_cast<double>(n);

    // backprop through the optional clip: y = s * z with s = B/|z| when
    // |z| > B, so dL/dz = s (I - zhat zhat^T) dL/dy
    if (m.clip_bound > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = trace.clip_scale[i];
            if (s >= 1.0) continue;
            double nrm = 0.0, gz = 0.0;
            const double* zi = trace.raw_out.data() + i * r;
            double* gi = G.data() + i * r;
            for (std::size_t j = 0; j < r; ++j) nrm += zi[j] * zi[j];
            nrm = std::sqrt(nrm);
            for (std::size_t j = 0; j < r; ++j) gz += gi[j] * zi[j] / nrm;
            for (std::size_t j = 0; j < r; ++j) gi[j] = s * (gi[j] - gz * zi[j] / nrm);
        }
    }

    grads = MlpGradients::zeros_like(m);
    DenseMatrix delta = std::move(G);
    for (std::size_t l = m.n_layers(); l-- > 0;) {
        const DenseMatrix& A_prev = trace.A[l];
        DenseMatrix& dW = grads.dW[l];
        Vec& db = grads.db[l];
        for (std::size_t i = 0; i < n; ++i) {
            const double* di = delta.data() + i * delta.cols();
            const double* ai = A_prev.data() + i * A_prev.cols();
            for (std::size_t o = 0; o < dW.rows(); ++o) {
                double d = di[o];
                if (d == 0.0) continue;
                db[o] += d;
                double* dwo = dW.data() + o * dW.cols();
                for (std::size_t k = 0; k < dW.cols(); ++k) dwo[k] += d * ai[k];
            }
        }
        if (l == 0) break;
        const DenseMatrix& Wl = m.W[l];
        DenseMatrix prev(n, Wl.cols(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* di = delta.data() + i * delta.cols();
            double* pi = prev.data() + i * prev.cols();
            for (std::size_t o = 0; o < Wl.rows(); ++o) {
                double d = di[o];
                if (d == 0.0) continue;
                const double* wo = Wl.data() + o * Wl.cols();
                for (std::size_t k = 0; k < Wl.cols(); ++k) pi[k] += d * wo[k];
            }
            // LeakyReLU derivative uses the activation sign (slope > 0)
            const double* act = trace.A[l].data() + i * trace.A[l].cols();
            for (std::size_t k = 0; k < prev.cols(); ++k)
                if (act[k] < 0.0) pi[k] *= m.leaky_slope;
        }
        delta = std::move(prev);
    }
    return total;
}

// Plain batch loss without gradients (validation / reporting).
inline double batch_loss(const Mlp& m, const DenseMatrix& X,
                         const std::vector<const ReducedWeights*>& rw,
                         const DenseMatrix* labels, LossMode mode, double w_mse) {
    const std::size_t n = X.rows();
    DenseMatrix Y = mlp_forward(m, X);
    double total = 0.0;
    Vec y(m.dim_out());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = Y(i, j);
        if (mode != LossMode::CoefMse) total += eval_reduced_loss(*rw[i], y);
        if (mode != LossMode::Residual) {
            double scale = (mode == LossMode::Both) ? w_mse : 1.0;
            for (std::size_t j = 0; j < y.size(); ++j) {
                double d = y[j] - (*labels)(i, j);
                total += scale * d * d;
            }
        }
    }
    return total / static_cast<double>(n);
}

struct TrainConfig {
    LossMode mode = LossMode::Residual;
    double w_mse = 1.0;
    std::vector<std::size_t> hidden = {256, 256};
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-2;
    double step_gamma = 0.9;
    int step_size = 50;
    int max_iters = 1500;
    std::size_t batch_size = 0;  // 0: full batch (always full when n <= 4096)
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    double clip_bound = 0.0;
    double divergence_guard = 1e6;
};

struct Dataset {
    DenseMatrix features;                 // n x d_in
    std::vector<ReducedWeights> reduced;  // per sample (residual/both modes)
    DenseMatrix labels;                   // n x r RB-optimal coefficients
    bool has_labels = false;

    std::size_t size() const { return features.rows(); }
};

struct TrainedModel {
    Mlp model;  // best-validation snapshot
    Vec train_history;
    Vec val_history;
    int best_iteration = 0;
    double best_val_loss = 0.0;
};

namespace detail {

inline DenseMatrix gather_rows(const DenseMatrix& M, const std::vector<std::size_t>& idx) {
    DenseMatrix out(idx.size(), M.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < M.cols(); ++j) out(i, j) = M(idx[i], j);
    return out;
}

struct AdamState {
    std::vector<DenseMatrix> mW, vW;
    std::vector<Vec> mb, vb;
    long t = 0;

    static AdamState zeros_like(const Mlp& m) {
        AdamState s;
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            s.mW.emplace_back(m.W[l].rows(), m.W[l].cols(), 0.0);
            s.vW.emplace_back(m.W[l].rows(), m.W[l].cols(), 0.0);
            s.mb.emplace_back(m.b[l].size(), 0.0);
            s.vb.emplace_back(m.b[l].size(), 0.0);
        }
        return s;
    }
};

// Adam with decoupled weight decay; biases are not decayed.
inline void adamw_step(Mlp& m, const MlpGradients& g, AdamState& st, const TrainConfig& cfg,
                       double lr) {
    st.t++;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        auto& W = m.W[l].values();
        auto& dW = g.dW[l].values();
        auto& mW = st.mW[l].values();
        auto& vW = st.vW[l].values();
        for (std::size_t i = 0; i < W.size(); ++i) {
            mW[i] = cfg.beta1 * mW[i] + (1.0 - cfg.beta1) * dW[i];
            vW[i] = cfg.beta2 * vW[i] + (1.0 - cfg.beta2) * dW[i] * dW[i];
            double mhat = mW[i] / bc1, vhat = vW[i] / bc2;
            W[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * W[i]);
        }
        for (std::size_t i = 0; i < m.b[l].size(); ++i) {
            st.mb[l][i] = cfg.beta1 * st.mb[l][i] + (1.0 - cfg.beta1) * g.db[l][i];
            st.vb[l][i] = cfg.beta2 * st.vb[l][i] + (1.0 - cfg.beta2) * g.db[l][i] * g.db[l][i];
            double mhat = st.mb[l][i] / bc1, vhat = st.vb[l][i] / bc2;
            m.b[l][i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace detail

// Trains on the dataset with a seeded train/validation split, AdamW steps and
// a step-decay schedule; returns the snapshot with the lowest validation loss.
// Deterministic given (dataset, config).
inline TrainedModel train(const Dataset& data, const TrainConfig& cfg) {
    const std::size_t n = data.size();
    if (n == 0) throw Error("train: empty dataset");
    if (cfg.mode != LossMode::Residual && !data.has_labels)
        throw Error("train: labels required for coef_mse/both modes");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(cfg.seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    std::size_t n_val = static_cast<std::size_t>(std::round(cfg.val_fraction * n));
    if (n_val >= n) n_val = n - 1;
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + n_val);
    std::vector<std::size_t> train_idx(perm.begin() + n_val, perm.end());
    if (val_idx.empty()) val_idx = train_idx;  // degenerate split: validate on train

    DenseMatrix Xtr = detail::gather_rows(data.features, train_idx);
    DenseMatrix Xval = detail::gather_rows(data.features, val_idx);
    DenseMatrix Ltr, Lval;
    if (data.has_labels) {
        Ltr = detail::gather_rows(data.labels, train_idx);
        Lval = detail::gather_rows(data.labels, val_idx);
    }
    auto gather_rw = [&](const std::vector<std::size_t>& idx) {
        std::vector<const ReducedWeights*> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = &data.reduced[idx[i]];
        return out;
    };
    std::vector<const ReducedWeights*> rw_tr = gather_rw(train_idx);
    std::vector<const ReducedWeights*> rw_val = gather_rw(val_idx);

    std::size_t r = (cfg.mode == LossMode::CoefMse) ? data.labels.cols()
                                                    : data.reduced.front().rank();
    std::vector<std::size_t> widths;
    widths.push_back(data.features.cols());
    for (auto h : cfg.hidden) widths.push_back(h);
    widths.push_back(r);
    Mlp model = Mlp::xavier(widths, cfg.seed + 0x9e3779b9ull);
    model.clip_bound = cfg.clip_bound;

    detail::AdamState adam = detail::AdamState::zeros_like(model);
    MlpGradients grads;

    TrainedModel out;
    out.model = model;
    out.best_val_loss = batch_loss(model, Xval, rw_val, data.has_labels ? &Lval : nullptr,
                                   cfg.mode, cfg.w_mse);
    out.best_iteration = 0;
    double initial_train = -1.0;

    const std::size_t ntr = train_idx.size();
    // full batch whenever it fits (<= 4096) unless an explicit smaller batch
    // size is configured; larger datasets fall back to fixed mini-batches
    std::size_t batch = cfg.batch_size == 0 ? std::min<std::size_t>(ntr, 4096)
                                            : std::min(cfg.batch_size, ntr);
    bool full_batch = batch == ntr;
    std::vector<std::size_t> order(ntr);
    std::iota(order.begin(), order.end(), 0);
    Rng batch_rng(cfg.seed + 1);

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        double lr = cfg.lr * std::pow(cfg.step_gamma, static_cast<double>((iter - 1) / cfg.step_size));
        double train_loss;
        if (full_batch) {
            train_loss = loss_and_grad(model, Xtr, rw_tr, data.has_labels ? &Ltr : nullptr,
                                       cfg.mode, cfg.w_mse, grads);
            detail::adamw_step(model, grads, adam, cfg, lr);
        } else {
            for (std::size_t i = ntr; i > 1; --i)
                std::swap(order[i - 1], order[batch_rng.next_u64() % i]);
            std::vector<std::size_t> picks(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(batch));
            DenseMatrix Xb = detail::gather_rows(Xtr, picks);
            DenseMatrix Lb;
            if (data.has_labels) Lb = detail::gather_rows(Ltr, picks);
            std::vector<const ReducedWeights*> rwb(picks.size());
            for (std::size_t i = 0; i < picks.size(); ++i) rwb[i] = rw_tr[picks[i]];
            train_loss = loss_and_grad(model, Xb, rwb, data.has_labels ? &Lb : nullptr,
                                       cfg.mode, cfg.w_mse, grads);
            detail::adamw_step(model, grads, adam, cfg, lr);
        }
        if (initial_train < 0.0) initial_train = std::abs(train_loss) + 1e-30;
        if (std::abs(train_loss) > cfg.divergence_guard * initial_train)
            throw SolverError("train: divergence guard tripped", train_loss, iter);

        double val_loss = batch_loss(model, Xval, rw_val, data.has_labels ? &Lval : nullptr,
                                     cfg.mode, cfg.w_mse);
        out.train_history.push_back(train_loss);
        out.val_history.push_back(val_loss);
        if (val_loss < out.best_val_loss) {
            out.best_val_loss = val_loss;
            out.best_iteration = iter;
            out.model = model;
        }
    }
    return out;
}

}  // namespace rbno
