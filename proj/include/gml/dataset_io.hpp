#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gml/errors.hpp"
#include "gml/synthdata.hpp"

namespace gml {

inline constexpr int kDatasetFormatVersion = 1;

namespace detail {

inline void append_f32le(std::string& out, float f) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    out.push_back(static_cast<char>(u & 0xFF));
    out.push_back(static_cast<char>((u >> 8) & 0xFF));
    out.push_back(static_cast<char>((u >> 16) & 0xFF));
    out.push_back(static_cast<char>((u >> 24) & 0xFF));
}

inline float read_f32le(const unsigned char* p) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                            (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(u);
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace detail

// Case blob layout: little-endian IEEE-754 float32 features in
// [channel, depth, height, width] order, then one byte per voxel for the mask.
inline std::string encode_case_blob(const Case& c) {
    std::string bytes;
    bytes.reserve(c.volume.values.size() * 4 + c.truth.bits.size());
    for (float f : c.volume.values) detail::append_f32le(bytes, f);
    for (std::uint8_t b : c.truth.bits) bytes.push_back(static_cast<char>(b));
    return bytes;
}

inline Case decode_case_blob(const std::string& bytes, const GridDims& dims,
                             const std::string& case_id) {
    const std::size_t feature_bytes = dims.feature_count() * 4;
    const std::size_t expected = feature_bytes + dims.voxels();
    if (bytes.size() != expected) {
        throw FormatError("case blob '" + case_id + "': expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    Case c;
    c.case_id = case_id;
    c.volume.dims = dims;
    c.volume.values.resize(dims.feature_count());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < c.volume.values.size(); ++i) {
        c.volume.values[i] = detail::read_f32le(p + i * 4);
    }
    c.truth.dims = dims;
    c.truth.bits.resize(dims.voxels());
    for (std::size_t v = 0; v < c.truth.bits.size(); ++v) {
        const unsigned char b = p[feature_bytes + v];
        if (b > 1) throw FormatError("case blob '" + case_id + "': mask byte out of range");
        c.truth.bits[v] = b;
    }
    return c;
}

namespace detail {

inline const nlohmann::json& manifest_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("manifest: missing field '") + key + "'");
    return *it;
}

inline void collect_split(const SiteDataset& ds, nlohmann::json& splits, nlohmann::json& cases) {
    auto add = [&](const char* name, const std::vector<Case>& list) {
        auto ids = nlohmann::json::array();
        for (const Case& c : list) {
            ids.push_back(c.case_id);
            cases.push_back({{"id", c.case_id}, {"file", "cases/" + c.case_id + ".bin"}});
        }
        splits[name] = std::move(ids);
    };
    add("train", ds.train);
    add("validation", ds.validation);
    add("test", ds.test);
}

} // namespace detail

// Writes <dir>/manifest.json plus one blob per case under <dir>/cases/.
inline void save_dataset(const SiteDataset& ds, const std::filesystem::path& dir) {
    if (ds.train.empty() || ds.validation.empty() || ds.test.empty()) {
        throw InvalidInputError("save_dataset: every split must be non-empty");
    }
    const GridDims dims = ds.train.front().volume.dims;
    auto check = [&](const std::vector<Case>& list) {
        for (const Case& c : list) {
            if (!(c.volume.dims == dims) || !(c.truth.dims == dims)) {
                throw InvalidInputError("save_dataset: case '" + c.case_id +
                                        "' has mismatched dims");
            }
        }
    };
    check(ds.train);
    check(ds.validation);
    check(ds.test);

    std::filesystem::create_directories(dir / "cases");

    nlohmann::json manifest;
    manifest["format"] = "gml-dataset";
    manifest["version"] = kDatasetFormatVersion;
    manifest["site_id"] = ds.site_id;
    manifest["seed"] = ds.seed;
    manifest["grid"] = {{"depth", dims.depth},
                        {"height", dims.height},
                        {"width", dims.width},
                        {"channels", dims.channels}};
    nlohmann::json splits = nlohmann::json::object();
    nlohmann::json cases = nlohmann::json::array();
    detail::collect_split(ds, splits, cases);
    manifest["splits"] = std::move(splits);
    manifest["cases"] = std::move(cases);
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    auto dump_cases = [&](const std::vector<Case>& list) {
        for (const Case& c : list) {
            detail::write_file(dir / "cases" / (c.case_id + ".bin"), encode_case_blob(c));
        }
    };
    dump_cases(ds.train);
    dump_cases(ds.validation);
    dump_cases(ds.test);
}

inline SiteDataset load_dataset(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("manifest: invalid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object()) throw FormatError("manifest: expected a JSON object");
    const auto& format = detail::manifest_field(manifest, "format");
    if (!format.is_string() || format.get<std::string>() != "gml-dataset") {
        throw FormatError("manifest: field 'format' must be \"gml-dataset\"");
    }
    const auto& version = detail::manifest_field(manifest, "version");
    if (!version.is_number_integer() || version.get<int>() != kDatasetFormatVersion) {
        throw VersionError("manifest: unsupported version " + version.dump() + ", expected " +
                           std::to_string(kDatasetFormatVersion));
    }

    const auto& grid = detail::manifest_field(manifest, "grid");
    GridDims dims;
    dims.depth = detail::manifest_field(grid, "depth").get<int>();
    dims.height = detail::manifest_field(grid, "height").get<int>();
    dims.width = detail::manifest_field(grid, "width").get<int>();
    dims.channels = detail::manifest_field(grid, "channels").get<int>();
    dims.validate();

    std::map<std::string, std::string> files;
    for (const auto& entry : detail::manifest_field(manifest, "cases")) {
        files[detail::manifest_field(entry, "id").get<std::string>()] =
            detail::manifest_field(entry, "file").get<std::string>();
    }

    SiteDataset ds;
    ds.site_id = detail::manifest_field(manifest, "site_id").get<int>();
    ds.seed = detail::manifest_field(manifest, "seed").get<std::uint64_t>();
    const auto& splits = detail::manifest_field(manifest, "splits");
    auto load_split = [&](const char* name, std::vector<Case>& out) {
        for (const auto& id_json : detail::manifest_field(splits, name)) {
            const std::string id = id_json.get<std::string>();
            auto it = files.find(id);
            if (it == files.end()) {
                throw FormatError("manifest: split '" + std::string(name) + "' references '" + id +
                                  "' which is not in 'cases'");
            }
            out.push_back(decode_case_blob(detail::read_file(dir / it->second), dims, id));
        }
    };
    load_split("train", ds.train);
    load_split("validation", ds.validation);
    load_split("test", ds.test);
    if (ds.train.empty() || ds.validation.empty() || ds.test.empty()) {
        throw FormatError("manifest: every split must be non-empty");
    }
    return ds;
}

} // namespace gml
