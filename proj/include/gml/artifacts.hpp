#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gml/errors.hpp"
#include "gml/eval.hpp"
#include "gml/ledger.hpp"
#include "gml/model.hpp"

namespace gml {

inline constexpr const char* kModelFormatName = "gml-model";
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kReportFormatName = "gml-report";
inline constexpr int kReportFormatVersion = 1;

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(std::string(what) + ": cannot open '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": '" + path.string() + "' is not valid JSON: " +
                          e.what());
    }
    return doc;
}

inline void check_format(const nlohmann::json& doc, const char* name, int version,
                         const char* what) {
    if (!doc.is_object() || !doc.contains("format") || doc.at("format") != name) {
        throw FormatError(std::string(what) + ": missing or wrong format marker (expected '" +
                          name + "')");
    }
    if (!doc.contains("version") || !doc.at("version").is_number_integer() ||
        doc.at("version").get<int>() != version) {
        throw VersionError(std::string(what) + ": unsupported version (expected " +
                           std::to_string(version) + ")");
    }
}

} // namespace detail

// Model parameters as JSON; doubles survive the round trip bit-exactly
// because serialization uses shortest-round-trip formatting.
inline void save_model_json(const ModelParams& params, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format"] = kModelFormatName;
    doc["version"] = kModelFormatVersion;
    doc["weights"] = params.weights;
    doc["bias"] = params.bias;
    detail::write_text_file(path, doc.dump(2) + "\n");
}

inline ModelParams load_model_json(const std::filesystem::path& path) {
    const nlohmann::json doc = detail::read_json_file(path, "model");
    detail::check_format(doc, kModelFormatName, kModelFormatVersion, "model");
    ModelParams params;
    try {
        params.weights = doc.at("weights").get<std::vector<double>>();
        params.bias = doc.at("bias").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model: '" + path.string() + "': " + e.what());
    }
    if (params.weights.empty()) throw FormatError("model: '" + path.string() + "' has no weights");
    if (!params.finite()) throw FormatError("model: '" + path.string() + "' has non-finite values");
    return params;
}

inline void save_ledger_csv(const CommunicationLedger& ledger, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    write_ledger_csv(ledger, out);
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

inline CommunicationLedger load_ledger_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("ledger: cannot open '" + path.string() + "'");
    return read_ledger_csv(in);
}

inline void save_history_csv(const std::vector<HistoryRow>& rows,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    write_history_csv(rows, out);
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json doc;
    doc["format"] = kReportFormatName;
    doc["version"] = kReportFormatVersion;
    doc["master_seed"] = report.master_seed;
    doc["config_hash"] = report.config_hash;
    nlohmann::json per_site = nlohmann::json::object();
    for (const auto& [site, row] : report.per_site) {
        per_site[std::to_string(site)] = row;
    }
    doc["per_site"] = per_site;
    doc["combined"] = report.combined;
    if (report.overhead_ratio) doc["overhead_ratio"] = *report.overhead_ratio;
    return doc;
}

inline EvalReport report_from_json(const nlohmann::json& doc) {
    detail::check_format(doc, kReportFormatName, kReportFormatVersion, "report");
    EvalReport report;
    try {
        report.master_seed = doc.at("master_seed").get<std::uint64_t>();
        report.config_hash = doc.at("config_hash").get<std::string>();
        for (const auto& [key, row] : doc.at("per_site").items()) {
            report.per_site[std::stoi(key)] = row.get<std::map<std::string, double>>();
        }
        report.combined = doc.at("combined").get<std::map<std::string, double>>();
        if (doc.contains("overhead_ratio")) {
            report.overhead_ratio = doc.at("overhead_ratio").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return report;
}

inline void save_report_json(const EvalReport& report, const std::filesystem::path& path) {
    detail::write_text_file(path, report_to_json(report).dump(2) + "\n");
}

inline EvalReport load_report_json(const std::filesystem::path& path) {
    return report_from_json(detail::read_json_file(path, "report"));
}

} // namespace gml
