#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gml/errors.hpp"
#include "gml/eval.hpp"
#include "gml/ledger.hpp"
#include "gml/model.hpp"
#include "gml/parallel.hpp"
#include "gml/rng.hpp"
#include "gml/synthdata.hpp"
#include "gml/train.hpp"

namespace gml {

// Shared trainer settings for the three comparison methods. All of them use
// the same model and Jaccard-distance loss as the protocol, so differences in
// the results come from the training scheme alone.
struct BaselineConfig {
    int rounds = 55;
    int local_steps_per_round = 10;
    double lr = 0.05;
    int batch = 1;

    void validate() const {
        if (rounds < 0) throw ConfigError("baselines: rounds must be >= 0");
        if (local_steps_per_round < 1) {
            throw ConfigError("baselines: local_steps_per_round must be >= 1");
        }
        if (!(lr > 0.0)) throw ConfigError("baselines: lr must be > 0");
        if (batch < 1) throw ConfigError("baselines: batch must be >= 1");
    }
};

namespace detail {

inline ModelParams init_params(int channels, RngStream& rng) {
    ModelParams params;
    params.weights.resize(static_cast<std::size_t>(channels));
    for (double& w : params.weights) w = rng.normal(0.0, 0.1);
    params.bias = 0.0;
    return params;
}

inline int channel_count(const SiteDataset& site) {
    if (site.train.empty()) {
        throw ConfigError("baselines: site " + std::to_string(site.site_id) +
                          " has an empty training split");
    }
    return site.train.front().volume.dims.channels;
}

} // namespace detail

// Pooled model: one model trained on the concatenation of every site's
// training split.
inline ModelParams run_pooled(const std::vector<SiteDataset>& sites, const BaselineConfig& cfg,
                              std::uint64_t seed, std::vector<HistoryRow>* history = nullptr) {
    cfg.validate();
    if (sites.empty()) throw ConfigError("run_pooled: no sites");
    std::vector<const Case*> pool;
    for (const SiteDataset& site : sites) append_case_pointers(pool, site.train);
    if (pool.empty()) throw ConfigError("run_pooled: no training data");

    RngStream rng(derive_seed(seed, seed_tag::kPooled));
    ModelParams params = detail::init_params(detail::channel_count(sites.front()), rng);
    for (int round = 1; round <= cfg.rounds; ++round) {
        local_jd_steps(params, pool, cfg.local_steps_per_round, cfg.batch, cfg.lr, rng);
        if (history) {
            for (const SiteDataset& site : sites) {
                history->push_back(
                    {round, site.site_id, "validation", mean_case_dsc(params, site.validation)});
            }
        }
    }
    return params;
}

// Individual model: trained on one site's own data only; never exchanges
// anything, so no ledger is ever written.
inline ModelParams run_individual(const SiteDataset& site, const BaselineConfig& cfg,
                                  std::uint64_t seed, std::vector<HistoryRow>* history = nullptr) {
    cfg.validate();
    RngStream rng(
        derive_seed(seed, seed_tag::kIndividual, static_cast<std::uint64_t>(site.site_id)));
    ModelParams params = detail::init_params(detail::channel_count(site), rng);
    const auto pool = case_pointers(site.train);
    for (int round = 1; round <= cfg.rounds; ++round) {
        local_jd_steps(params, pool, cfg.local_steps_per_round, cfg.batch, cfg.lr, rng);
        if (history) {
            history->push_back(
                {round, site.site_id, "validation", mean_case_dsc(params, site.validation)});
        }
    }
    return params;
}

// FedAvg: per round every site trains a copy of the global model locally and
// uploads it (one ledger entry per site); the server averages weighted by
// training-set size and broadcasts (one more entry per site).
inline ModelParams run_fedavg(const std::vector<SiteDataset>& sites, const BaselineConfig& cfg,
                              std::uint64_t seed, CommunicationLedger& ledger,
                              std::vector<HistoryRow>* history = nullptr, int n_threads = 1) {
    cfg.validate();
    if (sites.size() < 2) throw ConfigError("run_fedavg: need at least 2 sites");
    const int channels = detail::channel_count(sites.front());
    for (const SiteDataset& site : sites) {
        if (detail::channel_count(site) != channels) {
            throw ConfigError("run_fedavg: sites disagree on channel count");
        }
    }

    RngStream global_rng(derive_seed(seed, seed_tag::kFedavg));
    ModelParams global = detail::init_params(channels, global_rng);

    std::vector<RngStream> site_rngs;
    std::vector<std::vector<const Case*>> pools;
    double total_cases = 0.0;
    for (const SiteDataset& site : sites) {
        site_rngs.emplace_back(
            derive_seed(seed, seed_tag::kFedavgSite, static_cast<std::uint64_t>(site.site_id)));
        pools.push_back(case_pointers(site.train));
        total_cases += static_cast<double>(site.train.size());
    }

    std::vector<ModelParams> locals(sites.size());
    for (int round = 1; round <= cfg.rounds; ++round) {
        std::vector<std::function<void()>> tasks;
        for (std::size_t k = 0; k < sites.size(); ++k) {
            tasks.push_back([&, k] {
                locals[k] = global;
                local_jd_steps(locals[k], pools[k], cfg.local_steps_per_round, cfg.batch, cfg.lr,
                               site_rngs[k]);
            });
        }
        run_tasks(tasks, n_threads);

        for (std::size_t k = 0; k < sites.size(); ++k) {
            ledger.record(round, sites[k].site_id, kServerId, PayloadKind::FedavgUpload,
                          locals[k].scalar_count());
        }
        ModelParams aggregate;
        aggregate.weights.assign(static_cast<std::size_t>(channels), 0.0);
        aggregate.bias = 0.0;
        for (std::size_t k = 0; k < sites.size(); ++k) {
            accumulate_scaled(aggregate, locals[k],
                              static_cast<double>(sites[k].train.size()) / total_cases);
        }
        global = aggregate;
        if (!global.finite()) {
            throw NumericError("run_fedavg: non-finite global model after round " +
                               std::to_string(round));
        }
        for (std::size_t k = 0; k < sites.size(); ++k) {
            ledger.record(round, kServerId, sites[k].site_id, PayloadKind::FedavgBroadcast,
                          global.scalar_count());
        }
        if (history) {
            for (const SiteDataset& site : sites) {
                history->push_back(
                    {round, site.site_id, "validation", mean_case_dsc(global, site.validation)});
            }
        }
    }
    return global;
}

} // namespace gml
