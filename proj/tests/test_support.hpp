#pragma once

// Shared test helpers: a self-cleaning temp directory and compact builders
// for the small grids, fields, and masks the unit tests work with.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "gml/grid.hpp"

namespace testutil {

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gml_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// 1x1xN grid: handy for writing voxel examples as flat lists.
inline gml::GridDims flat_dims(int voxels, int channels = 1) {
    return {1, 1, voxels, channels};
}

inline gml::ProbField make_probs(const std::vector<double>& probs) {
    gml::ProbField f;
    f.dims = flat_dims(static_cast<int>(probs.size()));
    f.probs = probs;
    return f;
}

inline gml::Mask make_mask(const std::vector<int>& bits) {
    gml::Mask m;
    m.dims = flat_dims(static_cast<int>(bits.size()));
    for (int b : bits) m.bits.push_back(static_cast<std::uint8_t>(b));
    return m;
}

inline gml::FeatureVolume make_volume(const gml::GridDims& dims,
                                      const std::vector<float>& values) {
    gml::FeatureVolume v;
    v.dims = dims;
    v.values = values;
    return v;
}

} // namespace testutil
