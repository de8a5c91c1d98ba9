#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include "gml/baselines.hpp"
#include "gml/errors.hpp"
#include "gml/gossip.hpp"
#include "gml/ledger.hpp"
#include "gml/losses.hpp"
#include "gml/model.hpp"
#include "gml/rng.hpp"
#include "gml/synthdata.hpp"

namespace {

std::vector<gml::SiteDataset> make_sites(int n_sites, std::uint64_t seed = 1000) {
    std::vector<gml::SiteDataset> sites;
    for (int id = 1; id <= n_sites; ++id) {
        gml::SiteSpec spec;
        spec.site_id = id;
        spec.n_cases = 8;
        spec.splits = gml::SplitCounts{6, 1, 1};
        spec.feature_shift = {0.2 * id, -0.1 * id};
        spec.noise_scale = 0.4;
        spec.tumor_radius_range = {1.5, 2.5};
        spec.grid = {8, 8, 8, 2};
        sites.push_back(gml::generate_site_dataset(
            spec, gml::derive_seed(seed, static_cast<std::uint64_t>(id))));
    }
    return sites;
}

gml::GossipHyperparams quick_hp() {
    gml::GossipHyperparams hp;
    hp.warmup_steps = 8;
    hp.rounds = 4;
    hp.local_steps_per_round = 3;
    hp.batch = 2;
    return hp;
}

bool same_params(const gml::ModelParams& a, const gml::ModelParams& b) { return a == b; }

} // namespace

TEST_CASE("GossipHyperparams validation rejects out-of-range settings") {
    gml::GossipHyperparams hp;
    CHECK_NOTHROW(hp.validate());

    auto bad = hp;
    bad.warmup_steps = -1;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);
    bad = hp;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);
    bad = hp;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);
    bad = hp;
    bad.lambda = -0.1;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);
    bad = hp;
    bad.receiver_probability = 2.0;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);
    bad = hp;
    bad.batch = 0;
    CHECK_THROWS_AS(bad.validate(), gml::ConfigError);

    // Zero rounds and zero per-round steps are legitimate boundary settings.
    auto boundary = hp;
    boundary.rounds = 0;
    boundary.local_steps_per_round = 0;
    CHECK_NOTHROW(boundary.validate());
}

TEST_CASE("perfect matching splits every site into disjoint pairs") {
    gml::RngStream rng(7);
    const std::vector<int> four{1, 2, 3, 4};
    for (int round = 0; round < 100; ++round) {
        auto pairing = gml::pair_sites(four, gml::PairingMode::PerfectMatching, 0.5, rng);
        CHECK(pairing.pairs.size() == 2);
        CHECK(pairing.idle.empty());
        std::set<int> seen;
        for (auto [s, r] : pairing.pairs) {
            seen.insert(s);
            seen.insert(r);
        }
        CHECK(seen == std::set<int>{1, 2, 3, 4});
    }

    const std::vector<int> five{1, 2, 3, 4, 5};
    for (int round = 0; round < 100; ++round) {
        auto pairing = gml::pair_sites(five, gml::PairingMode::PerfectMatching, 0.5, rng);
        CHECK(pairing.pairs.size() == 2);
        CHECK(pairing.idle.size() == 1);
    }

    CHECK_THROWS_AS(gml::pair_sites({1}, gml::PairingMode::PerfectMatching, 0.5, rng),
                    gml::ConfigError);
}

TEST_CASE("pairing is deterministic per rng seed") {
    const std::vector<int> ids{1, 2, 3, 4, 5, 6};
    for (auto mode :
         {gml::PairingMode::PerfectMatching, gml::PairingMode::ProbabilisticReceiver}) {
        gml::RngStream a(99), b(99);
        for (int round = 0; round < 20; ++round) {
            auto pa = gml::pair_sites(ids, mode, 0.5, a);
            auto pb = gml::pair_sites(ids, mode, 0.5, b);
            CHECK(pa.pairs == pb.pairs);
            CHECK(pa.idle == pb.idle);
        }
    }
}

TEST_CASE("probabilistic receiver pairing partitions the sites") {
    gml::RngStream rng(13);
    const std::vector<int> ids{1, 2, 3, 4, 5};
    bool saw_pair = false, saw_idle = false;
    for (int round = 0; round < 300; ++round) {
        auto pairing = gml::pair_sites(ids, gml::PairingMode::ProbabilisticReceiver, 0.5, rng);
        std::multiset<int> seen(pairing.idle.begin(), pairing.idle.end());
        for (auto [s, r] : pairing.pairs) {
            CHECK(s != r);
            seen.insert(s);
            seen.insert(r);
        }
        CHECK(std::set<int>(seen.begin(), seen.end()) == std::set<int>(ids.begin(), ids.end()));
        CHECK(seen.size() == ids.size()); // each site exactly once
        saw_pair = saw_pair || !pairing.pairs.empty();
        saw_idle = saw_idle || !pairing.idle.empty();
    }
    CHECK(saw_pair);
    CHECK(saw_idle);

    // Boundary probabilities: nobody receives, or everybody wants to receive
    // and no sender is left, so no transfer happens either way.
    auto none = gml::pair_sites(ids, gml::PairingMode::ProbabilisticReceiver, 0.0, rng);
    CHECK(none.pairs.empty());
    CHECK(none.idle.size() == ids.size());
    auto all = gml::pair_sites(ids, gml::PairingMode::ProbabilisticReceiver, 1.0, rng);
    CHECK(all.pairs.empty());
    CHECK(all.idle.size() == ids.size());
}

TEST_CASE("init_site_states draws per-site gaussian weights and zero bias") {
    auto sites = make_sites(3);
    auto states = gml::init_site_states(sites, 2024);
    REQUIRE(states.size() == 3);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& state = states[i];
        CHECK(state.site_id == sites[i].site_id);
        CHECK(state.params.weights.size() == 2);
        CHECK(state.params.bias == 0.0);

        // Replicate the documented stream derivation.
        gml::RngStream replica(gml::derive_seed(2024, gml::seed_tag::kSite,
                                                static_cast<std::uint64_t>(state.site_id)));
        CHECK(state.params.weights[0] == replica.normal(0.0, 0.1));
        CHECK(state.params.weights[1] == replica.normal(0.0, 0.1));
    }

    CHECK_THROWS_AS(gml::init_site_states({}, 1), gml::ConfigError);
}

TEST_CASE("mutual_update keeps identical models identical") {
    auto sites = make_sites(2);
    auto states = gml::init_site_states(sites, 5);
    auto hp = quick_hp();
    hp.local_steps_per_round = 5;

    const auto pool = gml::case_pointers(sites[0].train);
    gml::RngStream rng(31);
    auto [u_r, u_s] = gml::mutual_update(states[0].params, states[0].params, pool, hp, rng);
    CHECK(same_params(u_r, u_s));

    // Merging two identical models at alpha 0.5 is exact.
    CHECK(gml::weighted_average(u_r, u_s, 0.5) == u_r);

    CHECK_THROWS_AS(gml::mutual_update(states[0].params, states[1].params, {}, hp, rng),
                    gml::ConfigError);
}

TEST_CASE("zero mutual steps reduce a round to pure model blending") {
    auto sites = make_sites(2);
    auto hp = quick_hp();
    hp.local_steps_per_round = 0;
    hp.idle_local_training = false;

    // alpha 0: receiver adopts the sender's model outright.
    hp.alpha = 0.0;
    {
        auto states = gml::init_site_states(sites, 5);
        const auto sender_before = states[0].params;
        const auto receiver_before = states[1].params;
        REQUIRE_FALSE(same_params(sender_before, receiver_before));
        gml::Pairing pairing;
        pairing.pairs = {{1, 2}};
        gml::CommunicationLedger ledger;
        gml::gml_round(states, pairing, hp, 1, ledger);
        CHECK(same_params(states[1].params, sender_before));
        CHECK(same_params(states[0].params, sender_before));
    }

    // alpha 1: the transfer is recorded but the receiver keeps its own model.
    hp.alpha = 1.0;
    {
        auto states = gml::init_site_states(sites, 5);
        const auto receiver_before = states[1].params;
        gml::Pairing pairing;
        pairing.pairs = {{1, 2}};
        gml::CommunicationLedger ledger;
        gml::gml_round(states, pairing, hp, 1, ledger);
        CHECK(same_params(states[1].params, receiver_before));
        CHECK(ledger.size() == 1);
    }
}

TEST_CASE("gml_round ledgers the transfer and leaves the sender untouched") {
    auto sites = make_sites(2);
    auto states = gml::init_site_states(sites, 17);
    const auto sender_before = states[0].params;
    const auto receiver_before = states[1].params;

    gml::Pairing pairing;
    pairing.pairs = {{1, 2}};
    gml::CommunicationLedger ledger;
    auto hp = quick_hp();
    gml::gml_round(states, pairing, hp, 1, ledger);

    REQUIRE(ledger.size() == 1);
    const auto& entry = ledger.entries()[0];
    CHECK(entry.round == 1);
    CHECK(entry.from_site == 1);
    CHECK(entry.to_site == 2);
    CHECK(entry.kind == gml::PayloadKind::GossipModel);
    CHECK(entry.scalars == 3); // 2 weights + bias

    CHECK(same_params(states[0].params, sender_before)); // copy semantics
    CHECK_FALSE(same_params(states[1].params, receiver_before));

    gml::Pairing unknown;
    unknown.pairs = {{1, 9}};
    CHECK_THROWS_AS(gml::gml_round(states, unknown, hp, 2, ledger), gml::InvalidInputError);
}

TEST_CASE("gml_round reproduces the documented receiver update rule") {
    auto sites = make_sites(2);
    const std::uint64_t master = 4242;
    auto states = gml::init_site_states(sites, master);
    const auto receiver_before = states[1].params;
    const auto sender_snapshot = states[0].params;

    auto hp = quick_hp();
    hp.local_steps_per_round = 4;
    gml::Pairing pairing;
    pairing.pairs = {{1, 2}};
    gml::CommunicationLedger ledger;
    gml::gml_round(states, pairing, hp, 3, ledger);

    // Replay the receiver's stream: init consumed exactly one normal() per
    // weight, so a replica stream advanced past those draws matches the
    // round's sampling. No warmup ran in this test.
    gml::RngStream replica(gml::derive_seed(master, gml::seed_tag::kSite, 2));
    replica.normal(0.0, 0.1);
    replica.normal(0.0, 0.1);
    const auto pool = gml::case_pointers(sites[1].train);
    auto [u_r, u_s] = gml::mutual_update(receiver_before, sender_snapshot, pool, hp, replica);
    const auto expected = gml::weighted_average(u_r, u_s, hp.alpha);
    CHECK(same_params(states[1].params, expected));
}

TEST_CASE("gml_round reports which site went non-finite in which round") {
    gml::SiteDataset unused;
    std::vector<gml::SiteState> states;
    states.emplace_back(7, &unused, 1);
    states.back().params.bias = std::numeric_limits<double>::infinity();

    gml::Pairing pairing; // nothing paired, nothing idle
    gml::CommunicationLedger ledger;
    auto hp = quick_hp();
    hp.idle_local_training = false;
    CHECK_THROWS_MATCHES(gml::gml_round(states, pairing, hp, 3, ledger), gml::NumericError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("site 7") &&
                             Catch::Matchers::ContainsSubstring("round 3")));
}

TEST_CASE("run_gml is deterministic and thread-count invariant") {
    auto sites = make_sites(4);
    auto hp = quick_hp();

    auto a = gml::run_gml(sites, hp, 99, 1);
    auto b = gml::run_gml(sites, hp, 99, 1);
    auto c = gml::run_gml(sites, hp, 99, 4);

    REQUIRE(a.site_params.size() == 4);
    for (std::size_t i = 0; i < a.site_params.size(); ++i) {
        CHECK(a.site_params[i].first == b.site_params[i].first);
        CHECK(same_params(a.site_params[i].second, b.site_params[i].second));
        CHECK(same_params(a.site_params[i].second, c.site_params[i].second));
    }
    CHECK(a.ledger.entries() == b.ledger.entries());
    CHECK(a.ledger.entries() == c.ledger.entries());
    REQUIRE(a.history.size() == c.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].dsc == c.history[i].dsc);
    }

    auto d = gml::run_gml(sites, hp, 100, 1);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.site_params.size(); ++i) {
        any_diff = any_diff || !same_params(a.site_params[i].second, d.site_params[i].second);
    }
    CHECK(any_diff);
}

TEST_CASE("run_gml produces the expected history and ledger shapes") {
    auto sites = make_sites(4);
    auto hp = quick_hp();
    auto result = gml::run_gml(sites, hp, 321);

    // Round 0 is post-warm-up, then one row per (round, site).
    CHECK(result.history.size() == static_cast<std::size_t>((hp.rounds + 1) * 4));
    CHECK(result.history.front().round == 0);
    CHECK(result.history.back().round == hp.rounds);
    for (const auto& row : result.history) {
        CHECK(row.split == "validation");
        CHECK(row.dsc >= 0.0);
        CHECK(row.dsc <= 1.0);
    }

    // Perfect matching on 4 sites: exactly two transfers per round.
    CHECK(result.ledger.size() == static_cast<std::size_t>(2 * hp.rounds));
    for (const auto& e : result.ledger.entries()) {
        CHECK(e.kind == gml::PayloadKind::GossipModel);
        CHECK(e.scalars == 3);
    }
}

TEST_CASE("run_gml with zero rounds stops after warm-up") {
    auto sites = make_sites(2);
    auto hp = quick_hp();
    hp.rounds = 0;
    auto result = gml::run_gml(sites, hp, 55);
    CHECK(result.ledger.empty());
    CHECK(result.history.size() == 2);
    CHECK(result.history.front().round == 0);
}

TEST_CASE("overhead_ratio divides total gossip scalars by total fedavg scalars") {
    gml::CommunicationLedger gossip, fedavg;
    gossip.record(1, 1, 2, gml::PayloadKind::GossipModel, 12);
    gossip.record(1, 3, 4, gml::PayloadKind::GossipModel, 12);
    for (int site = 1; site <= 4; ++site) {
        fedavg.record(1, site, gml::kServerId, gml::PayloadKind::FedavgUpload, 12);
        fedavg.record(1, gml::kServerId, site, gml::PayloadKind::FedavgBroadcast, 12);
    }
    CHECK(gml::overhead_ratio(gossip, fedavg) == 0.25);

    gml::CommunicationLedger empty;
    CHECK_THROWS_AS(gml::overhead_ratio(gossip, empty), gml::InvalidInputError);
}

TEST_CASE("communication ledger enforces ordering and round-trips through csv") {
    gml::CommunicationLedger ledger;
    ledger.record(1, 1, 2, gml::PayloadKind::GossipModel, 3);
    ledger.record(2, 2, 1, gml::PayloadKind::GossipModel, 3);
    CHECK_THROWS_AS(ledger.record(1, 1, 2, gml::PayloadKind::GossipModel, 3),
                    gml::InvalidInputError);

    std::stringstream buf;
    gml::write_ledger_csv(ledger, buf);
    auto back = gml::read_ledger_csv(buf);
    CHECK(back.entries() == ledger.entries());

    std::stringstream bad("round,from,scalars\n");
    CHECK_THROWS_AS(gml::read_ledger_csv(bad), gml::FormatError);
}

TEST_CASE("zero warm-up steps leave the initial draws untouched") {
    auto sites = make_sites(3);
    const auto before = gml::init_site_states(sites, 77);
    auto states = gml::init_site_states(sites, 77);
    auto hp = quick_hp();
    hp.warmup_steps = 0;
    gml::warmup(states, hp);
    REQUIRE(states.size() == before.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        CHECK(same_params(states[i].params, before[i].params));
    }
}

TEST_CASE("warm-up lowers mean training loss on most seeds") {
    auto mean_train_jd = [](const std::vector<gml::SiteState>& states) {
        double total = 0.0;
        int n = 0;
        for (const auto& state : states) {
            for (const auto& c : state.dataset->train) {
                total += gml::soft_jaccard_distance(gml::predict(state.params, c.volume),
                                                    c.truth);
                ++n;
            }
        }
        return total / n;
    };

    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 7; ++seed) {
        auto sites = make_sites(2, 3000 + seed);
        auto states = gml::init_site_states(sites, seed);
        auto hp = quick_hp();
        hp.warmup_steps = 60;
        hp.lr = 0.5;
        const double before = mean_train_jd(states);
        gml::warmup(states, hp);
        if (mean_train_jd(states) < before) ++improved;
    }
    CHECK(improved >= 5);
}

TEST_CASE("gossip uses a quarter of fedavg's traffic at matched rounds") {
    for (int n_sites : {2, 6}) {
        auto sites = make_sites(n_sites);
        auto hp = quick_hp();
        gml::BaselineConfig cfg;
        cfg.rounds = hp.rounds;
        cfg.local_steps_per_round = 2;
        auto gossip = gml::run_gml(sites, hp, 9);
        gml::CommunicationLedger fedavg;
        gml::run_fedavg(sites, cfg, 9, fedavg);
        INFO("n_sites=" << n_sites);
        CHECK(gml::overhead_ratio(gossip.ledger, fedavg) == 0.25);
    }
}
