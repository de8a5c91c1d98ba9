#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gml/baselines.hpp"
#include "gml/errors.hpp"
#include "gml/gossip.hpp"
#include "gml/losses.hpp"
#include "gml/synthdata.hpp"

namespace gml {

inline constexpr const char* kConfigFormatName = "gml-experiment";
inline constexpr int kConfigFormatVersion = 1;

inline const std::set<std::string>& known_methods() {
    static const std::set<std::string> methods{"gml", "fedavg", "pooled", "individual"};
    return methods;
}

// One experiment end to end: which sites exist, how each method trains, and
// where artifacts land. Everything except output_dir feeds the config hash, so
// two runs with equal hashes are guaranteed to be reruns of the same
// experiment.
struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    std::vector<SiteSpec> sites;
    GossipHyperparams gossip;
    BaselineConfig baselines;
    std::set<std::string> methods = known_methods();
    std::string output_dir = "runs/default";

    void validate() const {
        if (sites.size() < 2) throw ConfigError("config: need at least 2 sites");
        std::set<int> ids;
        for (const SiteSpec& spec : sites) {
            try {
                spec.validate();
            } catch (const InvalidInputError& e) {
                throw ConfigError("config: site " + std::to_string(spec.site_id) + ": " +
                                  e.what());
            }
            if (!ids.insert(spec.site_id).second) {
                throw ConfigError("config: duplicate site_id " + std::to_string(spec.site_id));
            }
            if (spec.grid.channels != sites.front().grid.channels) {
                throw ConfigError("config: all sites must share a channel count");
            }
        }
        gossip.validate();
        baselines.validate();
        if (methods.empty()) throw ConfigError("config: methods must not be empty");
        for (const std::string& m : methods) {
            if (!known_methods().count(m)) throw ConfigError("config: unknown method '" + m + "'");
        }
        if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
    }
};

// The default benchmark: four sites with fixed per-site case counts and
// train/validation/test splits, equal grids, and noise high enough that
// no method saturates. Site shifts share a common background level and the
// per-site deviations (+s, -2s, 0) are chosen orthogonal to the channel
// contrasts (1, 1/2, 1/3), so every site's optimal model is the same and
// averaging peers is never unfair to a site; what differs across sites is
// only the data they were dealt. Training knobs are longer than the struct
// defaults: the warm-up runs each site to convergence before any exchange,
// and the gossip and baseline round counts are equal so a default run gives
// every method the same training budget. This is the configuration the
// acceptance experiments run.
inline ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    const int counts[4] = {47, 34, 30, 35};
    const SplitCounts splits[4] = {{32, 5, 10}, {23, 4, 7}, {21, 3, 6}, {23, 4, 8}};
    const double shifts[4] = {0.0, 0.4, -0.4, 0.8};
    for (int k = 0; k < 4; ++k) {
        SiteSpec spec;
        spec.site_id = k + 1;
        spec.n_cases = counts[k];
        spec.splits = splits[k];
        spec.feature_shift = {1.0 + shifts[k], 1.0 - 2.0 * shifts[k], 1.0};
        spec.noise_scale = 0.7;
        cfg.sites.push_back(spec);
    }
    cfg.gossip.lr = 0.6;
    cfg.gossip.warmup_steps = 600;
    cfg.gossip.local_steps_per_round = 50;
    cfg.gossip.rounds = 60;
    cfg.baselines.lr = 0.6;
    cfg.baselines.rounds = 60;
    return cfg;
}

inline const char* kld_form_name(KldForm form) {
    return form == KldForm::FullDistribution ? "full_distribution" : "literal_tumor_term";
}

namespace detail {

inline KldForm parse_kld_form(const std::string& name, const std::string& where) {
    if (name == "full_distribution") return KldForm::FullDistribution;
    if (name == "literal_tumor_term") return KldForm::LiteralTumorTerm;
    throw ConfigError(where + ": unknown kld_form '" + name + "'");
}

inline PairingMode parse_pairing_mode(const std::string& name, const std::string& where) {
    if (name == "perfect_matching") return PairingMode::PerfectMatching;
    if (name == "probabilistic_receiver") return PairingMode::ProbabilisticReceiver;
    throw ConfigError(where + ": unknown pairing_mode '" + name + "'");
}

// Unknown keys are configuration bugs, not extensions; reject them by name so
// a typo like "lamda" cannot silently fall back to a default.
inline void require_known_keys(const nlohmann::json& obj,
                               std::initializer_list<const char*> allowed,
                               const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_field(const nlohmann::json& obj, const char* key, T fallback, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": field '" + std::string(key) + "' has the wrong type");
    }
}

inline GridDims parse_grid(const nlohmann::json& obj, const GridDims& fallback,
                           const std::string& where) {
    require_known_keys(obj, {"depth", "height", "width", "channels"}, where);
    GridDims g = fallback;
    g.depth = get_field<int>(obj, "depth", g.depth, where);
    g.height = get_field<int>(obj, "height", g.height, where);
    g.width = get_field<int>(obj, "width", g.width, where);
    g.channels = get_field<int>(obj, "channels", g.channels, where);
    return g;
}

inline SiteSpec parse_site_spec(const nlohmann::json& obj, const std::string& where) {
    require_known_keys(obj,
                       {"site_id", "n_cases", "feature_shift", "noise_scale", "tumor_radius_min",
                        "tumor_radius_max", "grid", "splits"},
                       where);
    SiteSpec spec;
    spec.site_id = get_field<int>(obj, "site_id", spec.site_id, where);
    spec.n_cases = get_field<int>(obj, "n_cases", spec.n_cases, where);
    spec.noise_scale = get_field<double>(obj, "noise_scale", spec.noise_scale, where);
    spec.tumor_radius_range.first =
        get_field<double>(obj, "tumor_radius_min", spec.tumor_radius_range.first, where);
    spec.tumor_radius_range.second =
        get_field<double>(obj, "tumor_radius_max", spec.tumor_radius_range.second, where);
    if (obj.contains("grid")) spec.grid = parse_grid(obj.at("grid"), spec.grid, where + ".grid");
    spec.feature_shift = get_field<std::vector<double>>(
        obj, "feature_shift", std::vector<double>(static_cast<std::size_t>(spec.grid.channels), 0.0),
        where);
    if (obj.contains("splits")) {
        const std::string sw = where + ".splits";
        const nlohmann::json& s = obj.at("splits");
        require_known_keys(s, {"train", "validation", "test"}, sw);
        SplitCounts counts;
        counts.train = get_field<int>(s, "train", 0, sw);
        counts.validation = get_field<int>(s, "validation", 0, sw);
        counts.test = get_field<int>(s, "test", 0, sw);
        spec.splits = counts;
    }
    return spec;
}

inline GossipHyperparams parse_gossip(const nlohmann::json& obj, GossipHyperparams hp,
                                      const std::string& where) {
    require_known_keys(obj,
                       {"warmup_steps", "rounds", "local_steps_per_round", "lr", "alpha", "lambda",
                        "kld_form", "pairing_mode", "receiver_probability", "batch",
                        "idle_local_training"},
                       where);
    hp.warmup_steps = get_field<int>(obj, "warmup_steps", hp.warmup_steps, where);
    hp.rounds = get_field<int>(obj, "rounds", hp.rounds, where);
    hp.local_steps_per_round =
        get_field<int>(obj, "local_steps_per_round", hp.local_steps_per_round, where);
    hp.lr = get_field<double>(obj, "lr", hp.lr, where);
    hp.alpha = get_field<double>(obj, "alpha", hp.alpha, where);
    hp.lambda = get_field<double>(obj, "lambda", hp.lambda, where);
    if (obj.contains("kld_form")) {
        hp.kld_form = parse_kld_form(get_field<std::string>(obj, "kld_form", "", where), where);
    }
    if (obj.contains("pairing_mode")) {
        hp.pairing_mode =
            parse_pairing_mode(get_field<std::string>(obj, "pairing_mode", "", where), where);
    }
    hp.receiver_probability =
        get_field<double>(obj, "receiver_probability", hp.receiver_probability, where);
    hp.batch = get_field<int>(obj, "batch", hp.batch, where);
    hp.idle_local_training =
        get_field<bool>(obj, "idle_local_training", hp.idle_local_training, where);
    return hp;
}

inline BaselineConfig parse_baselines(const nlohmann::json& obj, BaselineConfig cfg,
                                      const std::string& where) {
    require_known_keys(obj, {"rounds", "local_steps_per_round", "lr", "batch"}, where);
    cfg.rounds = get_field<int>(obj, "rounds", cfg.rounds, where);
    cfg.local_steps_per_round =
        get_field<int>(obj, "local_steps_per_round", cfg.local_steps_per_round, where);
    cfg.lr = get_field<double>(obj, "lr", cfg.lr, where);
    cfg.batch = get_field<int>(obj, "batch", cfg.batch, where);
    return cfg;
}

inline std::string fnv1a64_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace detail

// Parses a config document. Fields not present keep the defaults of
// default_experiment_config() (including its four sites unless "sites" is
// given); unknown keys anywhere are errors.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    const std::string where = "config";
    detail::require_known_keys(doc,
                               {"format", "version", "master_seed", "sites", "gossip", "baselines",
                                "methods", "output_dir"},
                               where);
    if (detail::get_field<std::string>(doc, "format", "", where) != kConfigFormatName) {
        throw ConfigError("config: format must be '" + std::string(kConfigFormatName) + "'");
    }
    const int version = detail::get_field<int>(doc, "version", -1, where);
    if (version != kConfigFormatVersion) {
        throw VersionError("config: unsupported version " + std::to_string(version) +
                           " (expected " + std::to_string(kConfigFormatVersion) + ")");
    }

    ExperimentConfig cfg = default_experiment_config();
    cfg.master_seed = detail::get_field<std::uint64_t>(doc, "master_seed", cfg.master_seed, where);
    if (doc.contains("sites")) {
        const nlohmann::json& sites = doc.at("sites");
        if (!sites.is_array()) throw ConfigError("config: 'sites' must be an array");
        cfg.sites.clear();
        for (std::size_t i = 0; i < sites.size(); ++i) {
            cfg.sites.push_back(
                detail::parse_site_spec(sites[i], "config.sites[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("gossip")) {
        cfg.gossip = detail::parse_gossip(doc.at("gossip"), cfg.gossip, "config.gossip");
    }
    if (doc.contains("baselines")) {
        cfg.baselines =
            detail::parse_baselines(doc.at("baselines"), cfg.baselines, "config.baselines");
    }
    if (doc.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : doc.at("methods")) {
            if (!m.is_string()) throw ConfigError("config: 'methods' entries must be strings");
            cfg.methods.insert(m.get<std::string>());
        }
    }
    cfg.output_dir = detail::get_field<std::string>(doc, "output_dir", cfg.output_dir, where);
    cfg.validate();
    return cfg;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    doc["format"] = kConfigFormatName;
    doc["version"] = kConfigFormatVersion;
    doc["master_seed"] = cfg.master_seed;
    doc["sites"] = nlohmann::json::array();
    for (const SiteSpec& spec : cfg.sites) {
        nlohmann::json s;
        s["site_id"] = spec.site_id;
        s["n_cases"] = spec.n_cases;
        s["feature_shift"] = spec.feature_shift;
        s["noise_scale"] = spec.noise_scale;
        s["tumor_radius_min"] = spec.tumor_radius_range.first;
        s["tumor_radius_max"] = spec.tumor_radius_range.second;
        s["grid"] = {{"depth", spec.grid.depth},
                     {"height", spec.grid.height},
                     {"width", spec.grid.width},
                     {"channels", spec.grid.channels}};
        if (spec.splits) {
            s["splits"] = {{"train", spec.splits->train},
                           {"validation", spec.splits->validation},
                           {"test", spec.splits->test}};
        }
        doc["sites"].push_back(s);
    }
    doc["gossip"] = {{"warmup_steps", cfg.gossip.warmup_steps},
                     {"rounds", cfg.gossip.rounds},
                     {"local_steps_per_round", cfg.gossip.local_steps_per_round},
                     {"lr", cfg.gossip.lr},
                     {"alpha", cfg.gossip.alpha},
                     {"lambda", cfg.gossip.lambda},
                     {"kld_form", kld_form_name(cfg.gossip.kld_form)},
                     {"pairing_mode", pairing_mode_name(cfg.gossip.pairing_mode)},
                     {"receiver_probability", cfg.gossip.receiver_probability},
                     {"batch", cfg.gossip.batch},
                     {"idle_local_training", cfg.gossip.idle_local_training}};
    doc["baselines"] = {{"rounds", cfg.baselines.rounds},
                        {"local_steps_per_round", cfg.baselines.local_steps_per_round},
                        {"lr", cfg.baselines.lr},
                        {"batch", cfg.baselines.batch}};
    doc["methods"] = cfg.methods;
    doc["output_dir"] = cfg.output_dir;
    return doc;
}

// 64-bit FNV-1a over the canonical serialization with output_dir removed:
// where artifacts land must not change what the experiment is.
inline std::string config_hash(const ExperimentConfig& cfg) {
    nlohmann::json doc = experiment_config_to_json(cfg);
    doc.erase("output_dir");
    return detail::fnv1a64_hex(doc.dump());
}

// Hash over only the fields that determine the generated datasets
// (master_seed + site specs), so changing trainer settings does not force a
// regeneration but changing the data story always invalidates old files.
inline std::string dataset_hash(const ExperimentConfig& cfg) {
    const nlohmann::json full = experiment_config_to_json(cfg);
    nlohmann::json doc;
    doc["master_seed"] = full.at("master_seed");
    doc["sites"] = full.at("sites");
    return detail::fnv1a64_hex(doc.dump());
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_experiment_config(doc);
}

} // namespace gml
