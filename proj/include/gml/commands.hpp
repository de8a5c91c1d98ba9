#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gml/artifacts.hpp"
#include "gml/baselines.hpp"
#include "gml/config.hpp"
#include "gml/dataset_io.hpp"
#include "gml/errors.hpp"
#include "gml/eval.hpp"
#include "gml/gossip.hpp"
#include "gml/rng.hpp"
#include "gml/synthdata.hpp"

namespace gml {

inline constexpr const char* kOutputRootEnvVar = "GML_OUTPUT_ROOT";
inline constexpr const char* kDatasetRootFormatName = "gml-dataset-root";
inline constexpr int kDatasetRootFormatVersion = 1;

// Resolution order for where artifacts live: explicit flag, then the
// environment override, then the config's own output_dir.
inline std::filesystem::path resolve_output_root(const ExperimentConfig& cfg,
                                                 const std::string& flag_value = "") {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(kOutputRootEnvVar); env && *env) return env;
    return cfg.output_dir;
}

// Fixed layout under one run directory; every command addresses files only
// through this so the pieces always find each other.
struct OutputPaths {
    std::filesystem::path root;

    explicit OutputPaths(std::filesystem::path r) : root(std::move(r)) {}

    std::filesystem::path config_copy() const { return root / "config.json"; }
    std::filesystem::path data_dir() const { return root / "data"; }
    std::filesystem::path data_manifest() const { return data_dir() / "manifest.json"; }
    std::filesystem::path site_dir(int site_id) const {
        return data_dir() / ("site" + std::to_string(site_id));
    }
    std::filesystem::path models_dir() const { return root / "models"; }
    std::filesystem::path global_model(const std::string& method) const {
        return models_dir() / (method + ".json");
    }
    std::filesystem::path site_model(const std::string& method, int site_id) const {
        return models_dir() / (method + "_site" + std::to_string(site_id) + ".json");
    }
    std::filesystem::path ledger_csv(const std::string& method) const {
        return root / ("ledger_" + method + ".csv");
    }
    std::filesystem::path history_csv(const std::string& method) const {
        return root / ("history_" + method + ".csv");
    }
    std::filesystem::path report_json() const { return root / "report.json"; }
    std::filesystem::path report_text() const { return root / "report.txt"; }
};

namespace detail {

inline std::uint64_t site_dataset_seed(const ExperimentConfig& cfg, int site_id) {
    return derive_seed(cfg.master_seed, seed_tag::kDataset, static_cast<std::uint64_t>(site_id));
}

inline void require_method_enabled(const ExperimentConfig& cfg, const std::string& method) {
    if (!known_methods().count(method)) {
        throw ConfigError("train: unknown method '" + method + "'");
    }
    if (!cfg.methods.count(method)) {
        throw ConfigError("train: method '" + method +
                          "' is not enabled in this config's 'methods' list");
    }
}

inline void sort_history(std::vector<HistoryRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const HistoryRow& a, const HistoryRow& b) {
        return a.round != b.round ? a.round < b.round : a.site < b.site;
    });
}

} // namespace detail

// Generates every site's dataset in memory first, then writes; an invalid
// site spec therefore fails the command before any file is touched.
inline void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_root) {
    cfg.validate();
    std::vector<SiteDataset> datasets;
    for (const SiteSpec& spec : cfg.sites) {
        datasets.push_back(generate_site_dataset(spec, detail::site_dataset_seed(cfg, spec.site_id)));
    }

    const OutputPaths paths(out_root);
    std::filesystem::create_directories(paths.data_dir());
    nlohmann::json manifest;
    manifest["format"] = kDatasetRootFormatName;
    manifest["version"] = kDatasetRootFormatVersion;
    manifest["master_seed"] = cfg.master_seed;
    manifest["dataset_hash"] = dataset_hash(cfg);
    manifest["sites"] = nlohmann::json::array();
    for (const SiteDataset& ds : datasets) {
        save_dataset(ds, paths.site_dir(ds.site_id));
        manifest["sites"].push_back({{"site_id", ds.site_id},
                                     {"dir", "site" + std::to_string(ds.site_id)},
                                     {"cases", ds.train.size() + ds.validation.size() +
                                                   ds.test.size()}});
    }
    detail::write_text_file(paths.data_manifest(), manifest.dump(2) + "\n");
    detail::write_text_file(paths.config_copy(),
                            experiment_config_to_json(cfg).dump(2) + "\n");
}

// Loads the datasets a run directory holds and checks they were generated
// from this config's seed and site specs.
inline std::vector<SiteDataset> load_all_sites(const ExperimentConfig& cfg,
                                               const std::filesystem::path& out_root) {
    const OutputPaths paths(out_root);
    if (!std::filesystem::exists(paths.data_manifest())) {
        throw ConfigError("missing dataset manifest '" + paths.data_manifest().string() +
                          "' — run generate-data first");
    }
    const nlohmann::json manifest = detail::read_json_file(paths.data_manifest(), "dataset root");
    detail::check_format(manifest, kDatasetRootFormatName, kDatasetRootFormatVersion,
                         "dataset root");
    const std::string expected = dataset_hash(cfg);
    const std::string actual = manifest.value("dataset_hash", std::string());
    if (actual != expected) {
        throw ConfigError("dataset at '" + paths.data_dir().string() +
                          "' was generated from a different seed or site layout — rerun "
                          "generate-data");
    }

    std::vector<SiteDataset> sites;
    std::set<int> loaded_ids;
    for (const auto& entry : manifest.at("sites")) {
        const std::filesystem::path dir = paths.data_dir() / entry.at("dir").get<std::string>();
        sites.push_back(load_dataset(dir));
        loaded_ids.insert(sites.back().site_id);
    }
    std::set<int> expected_ids;
    for (const SiteSpec& spec : cfg.sites) expected_ids.insert(spec.site_id);
    if (loaded_ids != expected_ids) {
        throw ConfigError("dataset site ids do not match the config — rerun generate-data");
    }
    return sites;
}

// Trains one method and writes its models, ledger, and history. Methods that
// never communicate still get a ledger file (header only) so downstream
// tooling can treat every method uniformly.
inline void cmd_train(const ExperimentConfig& cfg, const std::string& method,
                      const std::filesystem::path& out_root, int n_threads = 1) {
    cfg.validate();
    detail::require_method_enabled(cfg, method);
    const std::vector<SiteDataset> sites = load_all_sites(cfg, out_root);

    const OutputPaths paths(out_root);
    std::filesystem::create_directories(paths.models_dir());

    CommunicationLedger ledger;
    std::vector<HistoryRow> history;
    if (method == "gml") {
        GmlRunResult result = run_gml(sites, cfg.gossip, cfg.master_seed, n_threads);
        for (const auto& [site_id, params] : result.site_params) {
            save_model_json(params, paths.site_model("gml", site_id));
        }
        ledger = std::move(result.ledger);
        history = std::move(result.history);
    } else if (method == "fedavg") {
        const ModelParams global =
            run_fedavg(sites, cfg.baselines, cfg.master_seed, ledger, &history, n_threads);
        save_model_json(global, paths.global_model("fedavg"));
    } else if (method == "pooled") {
        const ModelParams pooled = run_pooled(sites, cfg.baselines, cfg.master_seed, &history);
        save_model_json(pooled, paths.global_model("pooled"));
    } else { // individual
        for (const SiteDataset& site : sites) {
            const ModelParams params =
                run_individual(site, cfg.baselines, cfg.master_seed, &history);
            save_model_json(params, paths.site_model("individual", site.site_id));
        }
        detail::sort_history(history);
    }
    save_ledger_csv(ledger, paths.ledger_csv(method));
    save_history_csv(history, paths.history_csv(method));
}

namespace detail {

inline ModelParams load_required_model(const std::filesystem::path& path,
                                       const std::string& method) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("missing model artifact '" + path.string() + "' — run train --method " +
                          method + " first");
    }
    return load_model_json(path);
}

} // namespace detail

// Evaluates every enabled method on the test splits and writes the report
// pair (JSON + text table). The communication overhead ratio is attached
// when both the gossip and FedAvg ledgers are present.
inline EvalReport cmd_evaluate(const ExperimentConfig& cfg,
                               const std::filesystem::path& out_root) {
    cfg.validate();
    const std::vector<SiteDataset> sites = load_all_sites(cfg, out_root);
    const OutputPaths paths(out_root);

    MethodModels models;
    if (cfg.methods.count("pooled")) {
        models.pooled = detail::load_required_model(paths.global_model("pooled"), "pooled");
    }
    if (cfg.methods.count("fedavg")) {
        models.fedavg = detail::load_required_model(paths.global_model("fedavg"), "fedavg");
    }
    if (cfg.methods.count("individual")) {
        for (const SiteDataset& site : sites) {
            models.individual[site.site_id] = detail::load_required_model(
                paths.site_model("individual", site.site_id), "individual");
        }
    }
    if (cfg.methods.count("gml")) {
        for (const SiteDataset& site : sites) {
            models.gml[site.site_id] =
                detail::load_required_model(paths.site_model("gml", site.site_id), "gml");
        }
    }

    EvalReport report = evaluate(models, sites, cfg.methods, cfg.master_seed, config_hash(cfg));
    if (std::filesystem::exists(paths.ledger_csv("gml")) &&
        std::filesystem::exists(paths.ledger_csv("fedavg"))) {
        const CommunicationLedger gml_ledger = load_ledger_csv(paths.ledger_csv("gml"));
        const CommunicationLedger fedavg_ledger = load_ledger_csv(paths.ledger_csv("fedavg"));
        if (!gml_ledger.empty() && !fedavg_ledger.empty()) {
            report.overhead_ratio = overhead_ratio(gml_ledger, fedavg_ledger);
        }
    }

    save_report_json(report, paths.report_json());
    detail::write_text_file(paths.report_text(), render_report_text(report));
    return report;
}

// Re-renders the stored report; evaluation is not repeated.
inline std::string cmd_report(const std::filesystem::path& out_root) {
    const OutputPaths paths(out_root);
    if (!std::filesystem::exists(paths.report_json())) {
        throw ConfigError("missing report '" + paths.report_json().string() +
                          "' — run evaluate first");
    }
    return render_report_text(load_report_json(paths.report_json()));
}

} // namespace gml
