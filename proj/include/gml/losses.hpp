#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gml/errors.hpp"
#include "gml/grid.hpp"
#include "gml/model.hpp"

namespace gml {

// Two readings of the regional KLD summand. FullDistribution sums the
// per-voxel KL over both classes and is a true divergence (>= 0);
// LiteralTumorTerm keeps only the tumor-class term and can go negative.
enum class KldForm {
    FullDistribution,
    LiteralTumorTerm,
};

struct MutualLossConfig {
    double lambda = 0.9;
    KldForm kld_form = KldForm::FullDistribution;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw InvalidInputError("MutualLossConfig: lambda must be in [0,1]");
        }
    }
};

// Soft Jaccard distance between a probability field and a binary ground
// truth: 1 - sum(p*t) / (sum(p) + sum(t) - sum(p*t)). Returns 0 when both
// sums vanish.
inline double soft_jaccard_distance(const ProbField& pred, const Mask& truth) {
    require_same_voxel_grid(pred.dims, truth.dims, "soft_jaccard_distance");
    double intersection = 0.0;
    double pred_sum = 0.0;
    std::size_t truth_sum = 0;
    for (std::size_t v = 0; v < pred.probs.size(); ++v) {
        pred_sum += pred.probs[v];
        if (truth.bits[v]) {
            intersection += pred.probs[v];
            ++truth_sum;
        }
    }
    const double uni = pred_sum + static_cast<double>(truth_sum) - intersection;
    if (uni == 0.0) return 0.0;
    return 1.0 - intersection / uni;
}

inline double kld_term(double p1, double p2, KldForm form) {
    double term = p1 * std::log(p1 / p2);
    if (form == KldForm::FullDistribution) {
        term += (1.0 - p1) * std::log((1.0 - p1) / (1.0 - p2));
    }
    return term;
}

// Regional KLD restricted to masked voxels; unnormalized sum. Normalization
// by region size happens in rkld_mixed.
inline double rkld_masked(const ProbField& p1, const ProbField& p2, const Mask& mask,
                          KldForm form = KldForm::FullDistribution) {
    require_same_voxel_grid(p1.dims, p2.dims, "rkld_masked");
    require_same_voxel_grid(p1.dims, mask.dims, "rkld_masked");
    double total = 0.0;
    for (std::size_t v = 0; v < p1.probs.size(); ++v) {
        if (mask.bits[v]) total += kld_term(p1.probs[v], p2.probs[v], form);
    }
    return total;
}

// Mixed regional KLD: sums over the true and the predicted region, divided by
// the combined region size. Zero when neither region has any voxel.
inline double rkld_mixed(const ProbField& p1, const ProbField& p2, const MaskPair& pair,
                         KldForm form = KldForm::FullDistribution) {
    require_same_voxel_grid(p1.dims, pair.truth.dims, "rkld_mixed");
    require_same_voxel_grid(p1.dims, pair.predicted.dims, "rkld_mixed");
    const std::size_t denom = pair.truth.count() + pair.predicted.count();
    if (denom == 0) return 0.0;
    const double numer =
        rkld_masked(p1, p2, pair.truth, form) + rkld_masked(p1, p2, pair.predicted, form);
    return numer / static_cast<double>(denom);
}

// Composite mutual-learning loss for the model producing `updating`:
// (1-lambda) * JD(updating, truth) + lambda * rKLD(updating, peer | M) with
// M = (truth, binarize(updating, 0.5)). Peer probabilities are constants.
inline double mutual_loss(const ProbField& updating, const ProbField& peer, const Mask& truth,
                          const MutualLossConfig& cfg = {}) {
    cfg.validate();
    require_same_voxel_grid(updating.dims, peer.dims, "mutual_loss");
    require_same_voxel_grid(updating.dims, truth.dims, "mutual_loss");
    const double jd = soft_jaccard_distance(updating, truth);
    if (cfg.lambda == 0.0) return jd;
    MaskPair region{truth, binarize(updating, 0.5)};
    const double rkld = rkld_mixed(updating, peer, region, cfg.kld_form);
    return (1.0 - cfg.lambda) * jd + cfg.lambda * rkld;
}

namespace detail {

// Chain rule from per-voxel logit partials to (weights, bias).
inline ModelParams grad_from_dlogit(const std::vector<double>& dloss_dlogit,
                                    const FeatureVolume& volume, std::size_t n_weights) {
    const std::size_t n = volume.dims.voxels();
    ModelParams grad;
    grad.weights.assign(n_weights, 0.0);
    for (int c = 0; c < volume.dims.channels; ++c) {
        const float* x = volume.values.data() + static_cast<std::size_t>(c) * n;
        double acc = 0.0;
        for (std::size_t v = 0; v < n; ++v) acc += dloss_dlogit[v] * static_cast<double>(x[v]);
        grad.weights[static_cast<std::size_t>(c)] = acc;
    }
    double bias_acc = 0.0;
    for (std::size_t v = 0; v < n; ++v) bias_acc += dloss_dlogit[v];
    grad.bias = bias_acc;
    return grad;
}

} // namespace detail

// Gradient of soft_jaccard_distance(sigmoid(logits), truth) with respect to
// the linear model's parameters.
inline ModelParams jaccard_grad(const std::vector<double>& logits, const Mask& truth,
                                const FeatureVolume& volume, const ModelParams& params) {
    require_same_voxel_grid(volume.dims, truth.dims, "jaccard_grad");
    const std::size_t n = volume.dims.voxels();
    if (logits.size() != n) {
        throw InvalidInputError("jaccard_grad: logits length does not match voxel count");
    }
    std::vector<double> p(n);
    double intersection = 0.0;
    double pred_sum = 0.0;
    std::size_t truth_sum = 0;
    for (std::size_t v = 0; v < n; ++v) {
        p[v] = clamp_prob(sigmoid(logits[v]));
        pred_sum += p[v];
        if (truth.bits[v]) {
            intersection += p[v];
            ++truth_sum;
        }
    }
    const double uni = pred_sum + static_cast<double>(truth_sum) - intersection;
    const double uni_sq = uni * uni;
    std::vector<double> dloss_dlogit(n, 0.0);
    if (uni > 0.0) {
        for (std::size_t v = 0; v < n; ++v) {
            const double t = truth.bits[v] ? 1.0 : 0.0;
            const double djd_dp = (intersection * (1.0 - t) - t * uni) / uni_sq;
            dloss_dlogit[v] = djd_dp * p[v] * (1.0 - p[v]);
        }
    }
    ModelParams grad = detail::grad_from_dlogit(dloss_dlogit, volume, params.weights.size());
    if (!grad.finite()) throw NumericError("jaccard_grad: non-finite gradient");
    return grad;
}

// Analytic gradient of mutual_loss with respect to the updating model's
// weights and bias. The predicted mask is a stop-gradient region indicator
// fixed by the current forward pass; peer probabilities are constants.
inline ModelParams mutual_loss_grad(const std::vector<double>& updating_logits,
                                    const ProbField& peer, const Mask& truth,
                                    const FeatureVolume& volume, const ModelParams& params,
                                    const MutualLossConfig& cfg = {}) {
    cfg.validate();
    require_same_voxel_grid(volume.dims, peer.dims, "mutual_loss_grad");
    require_same_voxel_grid(volume.dims, truth.dims, "mutual_loss_grad");
    if (static_cast<std::size_t>(volume.dims.channels) != params.weights.size()) {
        throw InvalidInputError("mutual_loss_grad: channel count does not match weights");
    }
    const std::size_t n = volume.dims.voxels();
    if (updating_logits.size() != n) {
        throw InvalidInputError("mutual_loss_grad: logits length does not match voxel count");
    }

    std::vector<double> p1(n);
    for (std::size_t v = 0; v < n; ++v) p1[v] = clamp_prob(sigmoid(updating_logits[v]));

    // Jaccard pieces.
    double intersection = 0.0;
    double pred_sum = 0.0;
    std::size_t truth_sum = 0;
    for (std::size_t v = 0; v < n; ++v) {
        pred_sum += p1[v];
        if (truth.bits[v]) {
            intersection += p1[v];
            ++truth_sum;
        }
    }
    const double uni = pred_sum + static_cast<double>(truth_sum) - intersection;
    const double uni_sq = uni * uni;

    // Region size for the rKLD normalizer: |T| + |T'| with T' = p1 >= 0.5.
    std::size_t pred_mask_sum = 0;
    for (std::size_t v = 0; v < n; ++v) pred_mask_sum += p1[v] >= 0.5 ? 1 : 0;
    const std::size_t region = truth_sum + pred_mask_sum;
    const double region_scale =
        (cfg.lambda > 0.0 && region > 0) ? cfg.lambda / static_cast<double>(region) : 0.0;

    std::vector<double> dloss_dlogit(n);
    for (std::size_t v = 0; v < n; ++v) {
        const double p = p1[v];
        const double t = truth.bits[v] ? 1.0 : 0.0;
        double djd_dp = 0.0;
        if (uni > 0.0) djd_dp = (intersection * (1.0 - t) - t * uni) / uni_sq;
        double dkl_dp = 0.0;
        if (region_scale != 0.0) {
            const double weight = t + (p >= 0.5 ? 1.0 : 0.0);
            if (weight != 0.0) {
                const double q = peer.probs[v];
                double d = std::log(p / q) + 1.0;
                if (cfg.kld_form == KldForm::FullDistribution) {
                    d = std::log(p / q) - std::log((1.0 - p) / (1.0 - q));
                }
                dkl_dp = weight * d;
            }
        }
        const double dloss_dp = (1.0 - cfg.lambda) * djd_dp + region_scale * dkl_dp;
        dloss_dlogit[v] = dloss_dp * p * (1.0 - p);
    }

    ModelParams grad = detail::grad_from_dlogit(dloss_dlogit, volume, params.weights.size());
    if (!grad.finite()) throw NumericError("mutual_loss_grad: non-finite gradient");
    return grad;
}

} // namespace gml
