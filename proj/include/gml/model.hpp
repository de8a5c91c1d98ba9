#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gml/errors.hpp"
#include "gml/grid.hpp"

namespace gml {

// Trainable weights of one site's model: a per-voxel linear classifier with
// one weight per feature channel plus a bias, squashed through a sigmoid.
struct ModelParams {
    std::vector<double> weights;
    double bias = 0.0;

    std::size_t scalar_count() const { return weights.size() + 1; }

    bool operator==(const ModelParams&) const = default;

    bool finite() const {
        if (!std::isfinite(bias)) return false;
        for (double w : weights) {
            if (!std::isfinite(w)) return false;
        }
        return true;
    }
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

inline void require_same_shape(const ModelParams& a, const ModelParams& b, const char* where) {
    if (a.weights.size() != b.weights.size()) {
        throw InvalidInputError(std::string(where) + ": parameter shape mismatch, " +
                                std::to_string(a.weights.size()) + " vs " +
                                std::to_string(b.weights.size()) + " weights");
    }
}

// Raw linear responses w.x + b, one per voxel.
inline std::vector<double> compute_logits(const ModelParams& params, const FeatureVolume& volume) {
    if (static_cast<std::size_t>(volume.dims.channels) != params.weights.size()) {
        throw InvalidInputError("compute_logits: volume has " +
                                std::to_string(volume.dims.channels) + " channels but model has " +
                                std::to_string(params.weights.size()) + " weights");
    }
    const std::size_t n = volume.dims.voxels();
    std::vector<double> logits(n, params.bias);
    for (int c = 0; c < volume.dims.channels; ++c) {
        const double w = params.weights[static_cast<std::size_t>(c)];
        const float* x = volume.values.data() + static_cast<std::size_t>(c) * n;
        for (std::size_t v = 0; v < n; ++v) logits[v] += w * static_cast<double>(x[v]);
    }
    return logits;
}

inline ProbField probs_from_logits(const std::vector<double>& logits, const GridDims& dims) {
    ProbField field;
    field.dims = dims;
    field.probs.resize(logits.size());
    for (std::size_t v = 0; v < logits.size(); ++v) field.probs[v] = clamp_prob(sigmoid(logits[v]));
    return field;
}

inline ProbField predict(const ModelParams& params, const FeatureVolume& volume) {
    return probs_from_logits(compute_logits(params, volume), volume.dims);
}

// Threshold rule: probability exactly equal to the threshold maps to 1.
inline Mask binarize(const ProbField& field, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InvalidInputError("binarize: threshold must be in (0,1)");
    }
    Mask mask;
    mask.dims = field.dims;
    mask.bits.resize(field.probs.size());
    for (std::size_t v = 0; v < field.probs.size(); ++v) {
        mask.bits[v] = field.probs[v] >= threshold ? 1 : 0;
    }
    return mask;
}

inline ModelParams weighted_average(const ModelParams& a, const ModelParams& b, double alpha) {
    require_same_shape(a, b, "weighted_average");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidInputError("weighted_average: alpha must be in [0,1]");
    }
    ModelParams out;
    out.weights.resize(a.weights.size());
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        out.weights[i] = alpha * a.weights[i] + (1.0 - alpha) * b.weights[i];
    }
    out.bias = alpha * a.bias + (1.0 - alpha) * b.bias;
    return out;
}

inline ModelParams sgd_step(const ModelParams& params, const ModelParams& grad, double lr) {
    require_same_shape(params, grad, "sgd_step");
    if (!(lr > 0.0)) throw InvalidInputError("sgd_step: lr must be > 0");
    if (!grad.finite()) throw NumericError("sgd_step: non-finite gradient");
    ModelParams out;
    out.weights.resize(params.weights.size());
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        out.weights[i] = params.weights[i] - lr * grad.weights[i];
    }
    out.bias = params.bias - lr * grad.bias;
    return out;
}

} // namespace gml
