#pragma once

// Independent brute-force reference implementations of the loss formulas,
// written over plain vectors with deliberately different arithmetic from the
// library (multiply-by-indicator instead of branch, log differences instead
// of ratio logs). Used to cross-check the production code.

#include <cmath>
#include <cstddef>
#include <vector>

#include "gml/rng.hpp"

namespace oracle {

inline double rel_err(double a, double b) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    if (scale == 0.0) return 0.0;
    return std::fabs(a - b) / scale;
}

inline double jaccard(const std::vector<double>& p, const std::vector<int>& t) {
    double inter = 0.0;
    double p_sum = 0.0;
    double t_sum = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) {
        const double tv = static_cast<double>(t[v]);
        inter += p[v] * tv;
        p_sum += p[v];
        t_sum += tv;
    }
    const double uni = p_sum + t_sum - inter;
    if (uni == 0.0) return 0.0;
    return 1.0 - inter / uni;
}

inline double kld_summand(double p1, double p2, bool full) {
    double term = p1 * (std::log(p1) - std::log(p2));
    if (full) term += (1.0 - p1) * (std::log(1.0 - p1) - std::log(1.0 - p2));
    return term;
}

inline double rkld_masked(const std::vector<double>& p1, const std::vector<double>& p2,
                          const std::vector<int>& mask, bool full) {
    double total = 0.0;
    for (std::size_t v = 0; v < p1.size(); ++v) {
        total += static_cast<double>(mask[v]) * kld_summand(p1[v], p2[v], full);
    }
    return total;
}

inline double rkld_mixed(const std::vector<double>& p1, const std::vector<double>& p2,
                         const std::vector<int>& truth, const std::vector<int>& predicted,
                         bool full) {
    double denom = 0.0;
    for (int b : truth) denom += static_cast<double>(b);
    for (int b : predicted) denom += static_cast<double>(b);
    if (denom == 0.0) return 0.0;
    const double numer = rkld_masked(p1, p2, truth, full) + rkld_masked(p1, p2, predicted, full);
    return numer / denom;
}

// Recomputes the predicted region from the updating probabilities, matching
// the stop-gradient region definition (p >= 0.5 -> in region).
inline double mutual(const std::vector<double>& updating, const std::vector<double>& peer,
                     const std::vector<int>& truth, double lambda, bool full) {
    std::vector<int> predicted(updating.size());
    for (std::size_t v = 0; v < updating.size(); ++v) predicted[v] = updating[v] >= 0.5 ? 1 : 0;
    const double jd = jaccard(updating, truth);
    const double mixed = rkld_mixed(updating, peer, truth, predicted, full);
    return (1.0 - lambda) * jd + lambda * mixed;
}

inline double dsc(const std::vector<int>& a, const std::vector<int>& b) {
    double inter = 0.0;
    double a_sum = 0.0;
    double b_sum = 0.0;
    for (std::size_t v = 0; v < a.size(); ++v) {
        inter += static_cast<double>(a[v]) * static_cast<double>(b[v]);
        a_sum += static_cast<double>(a[v]);
        b_sum += static_cast<double>(b[v]);
    }
    if (a_sum + b_sum == 0.0) return 1.0;
    return 2.0 * inter / (a_sum + b_sum);
}

// Random loss instance: probability vectors away from the clamp boundary and
// a truth mask with roughly 40% tumor voxels.
struct LossInstance {
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<int> truth;
};

inline LossInstance random_loss_instance(gml::RngStream& rng, std::size_t min_voxels = 1,
                                         std::size_t max_voxels = 24) {
    const std::size_t n =
        min_voxels + rng.uniform_index(max_voxels - min_voxels + 1);
    LossInstance inst;
    inst.p1.resize(n);
    inst.p2.resize(n);
    inst.truth.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        inst.p1[v] = 0.02 + 0.96 * rng.uniform01();
        inst.p2[v] = 0.02 + 0.96 * rng.uniform01();
        inst.truth[v] = rng.uniform01() < 0.4 ? 1 : 0;
    }
    return inst;
}

} // namespace oracle
