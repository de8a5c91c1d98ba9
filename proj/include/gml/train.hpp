#pragma once

#include <cstddef>
#include <vector>

#include "gml/errors.hpp"
#include "gml/losses.hpp"
#include "gml/model.hpp"
#include "gml/rng.hpp"
#include "gml/synthdata.hpp"

namespace gml {

inline std::vector<const Case*> case_pointers(const std::vector<Case>& cases) {
    std::vector<const Case*> out;
    out.reserve(cases.size());
    for (const Case& c : cases) out.push_back(&c);
    return out;
}

inline void append_case_pointers(std::vector<const Case*>& out, const std::vector<Case>& cases) {
    for (const Case& c : cases) out.push_back(&c);
}

inline void accumulate_scaled(ModelParams& acc, const ModelParams& g, double scale) {
    for (std::size_t i = 0; i < acc.weights.size(); ++i) acc.weights[i] += scale * g.weights[i];
    acc.bias += scale * g.bias;
}

// Mean Jaccard-distance gradient over a batch of cases.
inline ModelParams jd_batch_grad(const ModelParams& params,
                                 const std::vector<const Case*>& batch) {
    ModelParams acc;
    acc.weights.assign(params.weights.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Case* c : batch) {
        const auto logits = compute_logits(params, c->volume);
        accumulate_scaled(acc, jaccard_grad(logits, c->truth, c->volume, params), scale);
    }
    return acc;
}

inline std::vector<const Case*> sample_batch(const std::vector<const Case*>& pool, int batch,
                                             RngStream& rng) {
    std::vector<const Case*> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
        out.push_back(pool[static_cast<std::size_t>(rng.uniform_index(pool.size()))]);
    }
    return out;
}

// `steps` SGD steps with pure Jaccard-distance loss, batches drawn uniformly
// with replacement from the pool.
inline void local_jd_steps(ModelParams& params, const std::vector<const Case*>& pool, int steps,
                           int batch, double lr, RngStream& rng) {
    if (pool.empty()) throw ConfigError("local training: empty training split");
    if (batch < 1) throw ConfigError("local training: batch must be >= 1");
    for (int step = 0; step < steps; ++step) {
        const auto cases = sample_batch(pool, batch, rng);
        params = sgd_step(params, jd_batch_grad(params, cases), lr);
    }
}

} // namespace gml
