#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gml/errors.hpp"
#include "gml/grid.hpp"
#include "gml/model.hpp"
#include "gml/synthdata.hpp"

namespace gml {

// Dice similarity coefficient between binary masks. Two empty masks score 1:
// a correct "no tumor" prediction counts as perfect agreement.
inline double dsc(const Mask& pred, const Mask& truth) {
    require_same_voxel_grid(pred.dims, truth.dims, "dsc");
    std::size_t inter = 0, pred_sum = 0, truth_sum = 0;
    for (std::size_t v = 0; v < pred.bits.size(); ++v) {
        pred_sum += pred.bits[v];
        truth_sum += truth.bits[v];
        inter += pred.bits[v] & truth.bits[v];
    }
    if (pred_sum + truth_sum == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(pred_sum + truth_sum);
}

enum class EnsembleMode {
    SoftVote,     // average per-voxel probabilities, then threshold
    MajorityVote, // threshold each model, then majority of masks
};

// Bagging-style aggregation of site-specific models on one volume.
inline Mask ensemble_predict(const std::vector<ModelParams>& models, const FeatureVolume& volume,
                             double threshold = 0.5, EnsembleMode mode = EnsembleMode::SoftVote) {
    if (models.empty()) throw InvalidInputError("ensemble_predict: empty model list");
    if (mode == EnsembleMode::SoftVote) {
        ProbField mean;
        mean.dims = volume.dims;
        mean.probs.assign(volume.dims.voxels(), 0.0);
        const double scale = 1.0 / static_cast<double>(models.size());
        for (const ModelParams& m : models) {
            const ProbField p = predict(m, volume);
            for (std::size_t v = 0; v < mean.probs.size(); ++v) mean.probs[v] += scale * p.probs[v];
        }
        return binarize(mean, threshold);
    }
    Mask out;
    out.dims = volume.dims;
    out.bits.assign(volume.dims.voxels(), 0);
    std::vector<std::size_t> votes(volume.dims.voxels(), 0);
    for (const ModelParams& m : models) {
        const Mask mask = binarize(predict(m, volume), threshold);
        for (std::size_t v = 0; v < votes.size(); ++v) votes[v] += mask.bits[v];
    }
    for (std::size_t v = 0; v < votes.size(); ++v) {
        out.bits[v] = 2 * votes[v] >= models.size() ? 1 : 0;
    }
    return out;
}

// Per-case DSC, then averaged over cases.
inline double mean_case_dsc(const ModelParams& model, const std::vector<Case>& cases,
                            double threshold = 0.5) {
    if (cases.empty()) throw InvalidInputError("mean_case_dsc: empty case list");
    double total = 0.0;
    for (const Case& c : cases) {
        total += dsc(binarize(predict(model, c.volume), threshold), c.truth);
    }
    return total / static_cast<double>(cases.size());
}

inline double mean_case_dsc_ensemble(const std::vector<ModelParams>& models,
                                     const std::vector<Case>& cases, double threshold = 0.5) {
    if (cases.empty()) throw InvalidInputError("mean_case_dsc_ensemble: empty case list");
    double total = 0.0;
    for (const Case& c : cases) {
        total += dsc(ensemble_predict(models, c.volume, threshold), c.truth);
    }
    return total / static_cast<double>(cases.size());
}

struct EvalReport {
    std::uint64_t master_seed = 0;
    std::string config_hash;
    // site -> method -> mean DSC on that site's test split
    std::map<int, std::map<std::string, double>> per_site;
    // method -> mean DSC over the union of all test splits
    std::map<std::string, double> combined;
    std::optional<double> overhead_ratio;
};

// Trained models available for evaluation; global methods hold one model,
// site-personalized methods one per site.
struct MethodModels {
    std::optional<ModelParams> pooled;
    std::optional<ModelParams> fedavg;
    std::map<int, ModelParams> individual;
    std::map<int, ModelParams> gml;
};

namespace detail {

inline const ModelParams& site_model(const std::map<int, ModelParams>& models,
                                     const std::string& method, int site_id) {
    auto it = models.find(site_id);
    if (it == models.end()) {
        throw ConfigError("evaluate: missing model for method '" + method + "', site " +
                          std::to_string(site_id));
    }
    return it->second;
}

} // namespace detail

// Fills the per-site table (every requested method) and the combined row
// (global methods plus the gml ensemble), mirroring a site-local and a
// combined evaluation pass.
inline EvalReport evaluate(const MethodModels& models, const std::vector<SiteDataset>& sites,
                           const std::set<std::string>& methods, std::uint64_t master_seed,
                           const std::string& config_hash) {
    if (sites.empty()) throw InvalidInputError("evaluate: no datasets");
    for (const std::string& m : methods) {
        if (m != "pooled" && m != "fedavg" && m != "individual" && m != "gml") {
            throw ConfigError("evaluate: unknown method '" + m + "'");
        }
    }
    EvalReport report;
    report.master_seed = master_seed;
    report.config_hash = config_hash;

    std::vector<Case> combined_cases;
    for (const SiteDataset& site : sites) {
        combined_cases.insert(combined_cases.end(), site.test.begin(), site.test.end());
    }

    if (methods.count("pooled")) {
        if (!models.pooled) throw ConfigError("evaluate: missing model for method 'pooled'");
        for (const SiteDataset& site : sites) {
            report.per_site[site.site_id]["pooled"] = mean_case_dsc(*models.pooled, site.test);
        }
        report.combined["pooled"] = mean_case_dsc(*models.pooled, combined_cases);
    }
    if (methods.count("fedavg")) {
        if (!models.fedavg) throw ConfigError("evaluate: missing model for method 'fedavg'");
        for (const SiteDataset& site : sites) {
            report.per_site[site.site_id]["fedavg"] = mean_case_dsc(*models.fedavg, site.test);
        }
        report.combined["fedavg"] = mean_case_dsc(*models.fedavg, combined_cases);
    }
    if (methods.count("individual")) {
        for (const SiteDataset& site : sites) {
            const ModelParams& m = detail::site_model(models.individual, "individual", site.site_id);
            report.per_site[site.site_id]["individual"] = mean_case_dsc(m, site.test);
        }
    }
    if (methods.count("gml")) {
        std::vector<ModelParams> ensemble;
        for (const SiteDataset& site : sites) {
            const ModelParams& m = detail::site_model(models.gml, "gml", site.site_id);
            report.per_site[site.site_id]["gml"] = mean_case_dsc(m, site.test);
            ensemble.push_back(m);
        }
        report.combined["gml_ensemble"] = mean_case_dsc_ensemble(ensemble, combined_cases);
    }
    return report;
}

// Plain-text rendering: a per-site table and a combined table.
inline std::string render_report_text(const EvalReport& report) {
    char buf[64];
    std::string out;
    out += "Gossip mutual learning evaluation report\n";
    out += "master_seed: " + std::to_string(report.master_seed) + "\n";
    out += "config_hash: " + report.config_hash + "\n";
    out += "dsc convention: both-empty masks score 1\n";
    if (report.overhead_ratio) {
        std::snprintf(buf, sizeof(buf), "%g", *report.overhead_ratio);
        out += "overhead ratio (gml/fedavg): ";
        out += buf;
        out += "\n";
    }

    const char* method_order[] = {"pooled", "fedavg", "individual", "gml"};
    out += "\nMean test DSC per site\n";
    out += "method      ";
    for (const auto& [site_id, row] : report.per_site) {
        std::snprintf(buf, sizeof(buf), " site_%-3d", site_id);
        out += buf;
    }
    out += "\n";
    for (const char* method : method_order) {
        bool any = false;
        for (const auto& [site_id, row] : report.per_site) any = any || row.count(method);
        if (!any) continue;
        std::snprintf(buf, sizeof(buf), "%-12s", method);
        out += buf;
        for (const auto& [site_id, row] : report.per_site) {
            auto it = row.find(method);
            if (it == row.end()) {
                out += "        -";
            } else {
                std::snprintf(buf, sizeof(buf), "   %.4f", it->second);
                out += buf;
            }
        }
        out += "\n";
    }

    const char* combined_order[] = {"pooled", "fedavg", "gml_ensemble"};
    out += "\nMean test DSC, all sites combined\n";
    for (const char* method : combined_order) {
        auto it = report.combined.find(method);
        if (it == report.combined.end()) continue;
        std::snprintf(buf, sizeof(buf), "%-14s %.4f\n", method, it->second);
        out += buf;
    }
    return out;
}

} // namespace gml
