#pragma once

#include "rbno/fields.hpp"
#include "rbno/linalg.hpp"

namespace rbno {

// Maps raw sample parameters to network inputs. MiniSquare samples pass the
// 16 exponents through unchanged; nodal fields are compressed with a centered
// Euclidean PCA fitted on the training set (Gram trick, eigenvalues kept for
// the retained-variance report).
struct FeatureCodec {
    bool identity = true;
    std::size_t dim_in = 0;
    Vec mean;            // nodal mean (PCA)
    DenseMatrix basis;   // n_raw x dim_in, orthonormal columns
    Vec eigenvalues;     // all PCA eigenvalues, descending

    Vec encode(const Vec& raw) const {
        if (identity) return raw;
        if (raw.size() != mean.size()) throw DimensionError("FeatureCodec: raw size");
        Vec centered(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) centered[i] = raw[i] - mean[i];
        Vec out(dim_in, 0.0);
        for (std::size_t k = 0; k < dim_in; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < centered.size(); ++i) s += basis(i, k) * centered[i];
            out[k] = s;
        }
        return out;
    }

    double retained_variance(std::size_t d) const {
        if (identity) return 1.0;
        double total = 0.0, kept = 0.0;
        for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
            total += eigenvalues[k];
            if (k < d) kept += eigenvalues[k];
        }
        return total > 0.0 ? kept / total : 1.0;
    }
};

inline FeatureCodec fit_feature_codec(const std::vector<ParamSample>& samples,
                                      std::size_t dim_in = 64) {
    if (samples.empty()) throw Error("fit_feature_codec: no samples");
    FeatureCodec codec;
    if (samples.front().kind == SampleKind::MiniSquare) {
        codec.identity = true;
        codec.dim_in = 16;
        return codec;
    }
    const std::size_t n = samples.size();
    const std::size_t d = samples.front().nodal.size();
    if (dim_in > n) throw Error("fit_feature_codec: dim_in exceeds sample count");

    codec.identity = false;
    codec.mean.assign(d, 0.0);
    for (const auto& s : samples)
        for (std::size_t i = 0; i < d; ++i) codec.mean[i] += s.nodal[i];
    for (auto& v : codec.mean) v /= static_cast<double>(n);

    // Gram trick: G = Yc Yc^T / n over centered rows
    DenseMatrix Yc(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) Yc(r, i) = samples[r].nodal[i] - codec.mean[i];
    DenseMatrix G(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += Yc(a, i) * Yc(b, i);
            s /= static_cast<double>(n);
            G(a, b) = s;
            G(b, a) = s;
        }
    EigResult eig = sym_eig(G);
    codec.eigenvalues = eig.eigenvalues;
    for (auto& l : codec.eigenvalues) l = std::max(l, 0.0);

    std::size_t usable = 0;
    while (usable < n && codec.eigenvalues[usable] > 1e-13 * codec.eigenvalues[0]) usable++;
    codec.dim_in = std::min(dim_in, usable);

    codec.basis = DenseMatrix(d, codec.dim_in);
    for (std::size_t k = 0; k < codec.dim_in; ++k) {
        double scale = 1.0 / std::sqrt(static_cast<double>(n) * codec.eigenvalues[k]);
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += Yc(r, i) * eig.eigenvectors(r, k);
            codec.basis(i, k) = s * scale;
        }
    }
    return codec;
}

inline DenseMatrix input_features(const FeatureCodec& codec,
                                  const std::vector<ParamSample>& samples) {
    if (samples.empty()) return {};
    Vec first = codec.encode(samples.front().feature_raw());
    DenseMatrix F(samples.size(), first.size());
    for (std::size_t r = 0; r < samples.size(); ++r) {
        Vec f = codec.encode(samples[r].feature_raw());
        for (std::size_t j = 0; j < f.size(); ++j) F(r, j) = f[j];
    }
    return F;
}

}  // namespace rbno
