#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gml/errors.hpp"
#include "gml/eval.hpp"
#include "gml/ledger.hpp"
#include "gml/losses.hpp"
#include "gml/model.hpp"
#include "gml/parallel.hpp"
#include "gml/rng.hpp"
#include "gml/synthdata.hpp"
#include "gml/train.hpp"

namespace gml {

enum class PairingMode {
    PerfectMatching,       // random shuffle split into disjoint sender/receiver pairs
    ProbabilisticReceiver, // each site becomes a receiver with probability p
};

inline const char* pairing_mode_name(PairingMode mode) {
    return mode == PairingMode::PerfectMatching ? "perfect_matching" : "probabilistic_receiver";
}

struct GossipHyperparams {
    int warmup_steps = 100;
    int rounds = 40;
    int local_steps_per_round = 10;
    double lr = 0.05;
    double alpha = 0.5; // merge weight on the receiver's updated model
    double lambda = 0.9;
    KldForm kld_form = KldForm::FullDistribution;
    PairingMode pairing_mode = PairingMode::PerfectMatching;
    double receiver_probability = 0.5; // only for ProbabilisticReceiver
    int batch = 1;
    bool idle_local_training = true;

    MutualLossConfig loss_config() const { return {lambda, kld_form}; }

    void validate() const {
        if (warmup_steps < 0) throw ConfigError("gossip: warmup_steps must be >= 0");
        if (rounds < 0) throw ConfigError("gossip: rounds must be >= 0");
        if (local_steps_per_round < 0) {
            throw ConfigError("gossip: local_steps_per_round must be >= 0");
        }
        if (!(lr > 0.0)) throw ConfigError("gossip: lr must be > 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("gossip: alpha must be in [0,1]");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("gossip: lambda must be in [0,1]");
        if (!(receiver_probability >= 0.0 && receiver_probability <= 1.0)) {
            throw ConfigError("gossip: receiver_probability must be in [0,1]");
        }
        if (batch < 1) throw ConfigError("gossip: batch must be >= 1");
    }
};

struct SiteState {
    int site_id = 0;
    ModelParams params;
    const SiteDataset* dataset = nullptr;
    RngStream rng;

    SiteState(int id, const SiteDataset* data, std::uint64_t seed)
        : site_id(id), dataset(data), rng(seed) {}
};

// One round's sender/receiver assignment plus the sites left out of it.
struct Pairing {
    std::vector<std::pair<int, int>> pairs; // (sender, receiver)
    std::vector<int> idle;
};

// Weight init: weights ~ N(0, 0.01) i.e. stddev 0.1, bias 0, one stream per
// site derived from (master_seed, site_id).
inline std::vector<SiteState> init_site_states(const std::vector<SiteDataset>& sites,
                                               std::uint64_t master_seed) {
    if (sites.empty()) throw ConfigError("init_site_states: no sites");
    std::vector<SiteState> states;
    states.reserve(sites.size());
    for (const SiteDataset& site : sites) {
        if (site.train.empty()) {
            throw ConfigError("init_site_states: site " + std::to_string(site.site_id) +
                              " has an empty training split");
        }
        const int channels = site.train.front().volume.dims.channels;
        states.emplace_back(site.site_id, &site,
                            derive_seed(master_seed, seed_tag::kSite,
                                        static_cast<std::uint64_t>(site.site_id)));
        SiteState& state = states.back();
        state.params.weights.resize(static_cast<std::size_t>(channels));
        for (double& w : state.params.weights) w = state.rng.normal(0.0, 0.1);
        state.params.bias = 0.0;
    }
    return states;
}

// Local-only training before any exchange: pure Jaccard-distance loss on each
// site's own data.
inline void warmup(std::vector<SiteState>& states, const GossipHyperparams& hp,
                   int n_threads = 1) {
    hp.validate();
    std::vector<std::function<void()>> tasks;
    for (SiteState& state : states) {
        tasks.push_back([&state, &hp] {
            const auto pool = case_pointers(state.dataset->train);
            local_jd_steps(state.params, pool, hp.warmup_steps, hp.batch, hp.lr, state.rng);
        });
    }
    run_tasks(tasks, n_threads);
}

inline Pairing pair_sites(const std::vector<int>& site_ids, PairingMode mode,
                          double receiver_probability, RngStream& rng) {
    if (site_ids.size() < 2) throw ConfigError("pair_sites: need at least 2 sites");
    Pairing pairing;
    if (mode == PairingMode::PerfectMatching) {
        std::vector<int> order = site_ids;
        rng.shuffle(order);
        std::size_t i = 0;
        for (; i + 1 < order.size(); i += 2) pairing.pairs.emplace_back(order[i], order[i + 1]);
        if (i < order.size()) pairing.idle.push_back(order[i]);
        return pairing;
    }
    // ProbabilisticReceiver: receivers drawn independently, then each receiver
    // takes one sender from the remaining non-receivers; senders serve at most
    // one receiver, unmatched receivers idle this round.
    std::vector<int> receivers;
    std::vector<int> pool;
    for (int id : site_ids) {
        if (rng.uniform01() < receiver_probability) {
            receivers.push_back(id);
        } else {
            pool.push_back(id);
        }
    }
    std::vector<int> matched_senders;
    for (int r : receivers) {
        if (pool.empty()) {
            pairing.idle.push_back(r);
            continue;
        }
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_index(pool.size()));
        pairing.pairs.emplace_back(pool[pick], r);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    pairing.idle.insert(pairing.idle.end(), pool.begin(), pool.end());
    return pairing;
}

// Regionalized mutual learning on the receiver's data: paired SGD steps where
// each model's loss mixes Jaccard distance to the receiver's truth with the
// regional KLD toward the other model's (detached) predictions. Returns the
// updated (receiver, sender) models, pre-merge.
inline std::pair<ModelParams, ModelParams> mutual_update(ModelParams receiver, ModelParams sender,
                                                         const std::vector<const Case*>& pool,
                                                         const GossipHyperparams& hp,
                                                         RngStream& rng) {
    if (pool.empty()) throw ConfigError("mutual_update: empty training split");
    const MutualLossConfig cfg = hp.loss_config();
    const double scale = 1.0 / static_cast<double>(hp.batch);
    for (int step = 0; step < hp.local_steps_per_round; ++step) {
        const auto batch = sample_batch(pool, hp.batch, rng);
        ModelParams grad_r, grad_s;
        grad_r.weights.assign(receiver.weights.size(), 0.0);
        grad_s.weights.assign(sender.weights.size(), 0.0);
        for (const Case* c : batch) {
            const auto logits_r = compute_logits(receiver, c->volume);
            const auto logits_s = compute_logits(sender, c->volume);
            const ProbField probs_r = probs_from_logits(logits_r, c->volume.dims);
            const ProbField probs_s = probs_from_logits(logits_s, c->volume.dims);
            accumulate_scaled(
                grad_r, mutual_loss_grad(logits_r, probs_s, c->truth, c->volume, receiver, cfg),
                scale);
            accumulate_scaled(
                grad_s, mutual_loss_grad(logits_s, probs_r, c->truth, c->volume, sender, cfg),
                scale);
        }
        receiver = sgd_step(receiver, grad_r, hp.lr);
        sender = sgd_step(sender, grad_s, hp.lr);
    }
    return {std::move(receiver), std::move(sender)};
}

// One gossip round: ledger the transfers, run mutual learning per pair, merge
// on the receiver, and let idle sites train locally. Senders keep their
// stored model untouched (transfer has copy semantics), and the updated
// sender-side model is discarded after the merge.
inline void gml_round(std::vector<SiteState>& states, const Pairing& pairing,
                      const GossipHyperparams& hp, int round, CommunicationLedger& ledger,
                      int n_threads = 1) {
    hp.validate();
    std::map<int, SiteState*> by_id;
    for (SiteState& s : states) by_id[s.site_id] = &s;
    auto lookup = [&](int id) -> SiteState& {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw InvalidInputError("gml_round: pairing references unknown site " +
                                    std::to_string(id));
        }
        return *it->second;
    };

    for (const auto& [sender_id, receiver_id] : pairing.pairs) {
        ledger.record(round, sender_id, receiver_id, PayloadKind::GossipModel,
                      lookup(sender_id).params.scalar_count());
    }

    std::vector<std::function<void()>> tasks;
    for (const auto& [sender_id, receiver_id] : pairing.pairs) {
        SiteState& receiver = lookup(receiver_id);
        const ModelParams sender_params = lookup(sender_id).params; // snapshot
        tasks.push_back([&receiver, sender_params, &hp] {
            const auto pool = case_pointers(receiver.dataset->train);
            auto [updated_r, updated_s] =
                mutual_update(receiver.params, sender_params, pool, hp, receiver.rng);
            receiver.params = weighted_average(updated_r, updated_s, hp.alpha);
        });
    }
    if (hp.idle_local_training) {
        for (int id : pairing.idle) {
            SiteState& idle = lookup(id);
            tasks.push_back([&idle, &hp] {
                const auto pool = case_pointers(idle.dataset->train);
                local_jd_steps(idle.params, pool, hp.local_steps_per_round, hp.batch, hp.lr,
                               idle.rng);
            });
        }
    }
    run_tasks(tasks, n_threads);

    for (const SiteState& s : states) {
        if (!s.params.finite()) {
            throw NumericError("gml_round: site " + std::to_string(s.site_id) +
                               " has non-finite params after round " + std::to_string(round));
        }
    }
}

struct GmlRunResult {
    std::vector<std::pair<int, ModelParams>> site_params; // sorted by site id
    std::vector<HistoryRow> history;
    CommunicationLedger ledger;
};

// Full protocol run: init, warm-up, then `rounds` gossip rounds. History row
// per (round, site) with the site's own validation DSC; round 0 is
// post-warm-up. Pure function of (sites, hp, master_seed) for any n_threads.
inline GmlRunResult run_gml(const std::vector<SiteDataset>& sites, const GossipHyperparams& hp,
                            std::uint64_t master_seed, int n_threads = 1) {
    hp.validate();
    std::vector<SiteState> states = init_site_states(sites, master_seed);
    RngStream pairing_rng(derive_seed(master_seed, seed_tag::kPairing));

    GmlRunResult result;
    warmup(states, hp, n_threads);
    auto record_history = [&](int round) {
        for (const SiteState& s : states) {
            result.history.push_back(
                {round, s.site_id, "validation", mean_case_dsc(s.params, s.dataset->validation)});
        }
    };
    record_history(0);

    std::vector<int> site_ids;
    for (const SiteState& s : states) site_ids.push_back(s.site_id);

    for (int round = 1; round <= hp.rounds; ++round) {
        const Pairing pairing =
            pair_sites(site_ids, hp.pairing_mode, hp.receiver_probability, pairing_rng);
        gml_round(states, pairing, hp, round, result.ledger, n_threads);
        record_history(round);
    }

    for (const SiteState& s : states) result.site_params.emplace_back(s.site_id, s.params);
    std::sort(result.site_params.begin(), result.site_params.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return result;
}

// Total scalars moved by GML divided by total scalars moved by FedAvg.
inline double overhead_ratio(const CommunicationLedger& ledger_gml,
                             const CommunicationLedger& ledger_fedavg) {
    const std::size_t denom = ledger_fedavg.total_scalars();
    if (denom == 0) throw InvalidInputError("overhead_ratio: empty fedavg ledger");
    return static_cast<double>(ledger_gml.total_scalars()) / static_cast<double>(denom);
}

} // namespace gml
