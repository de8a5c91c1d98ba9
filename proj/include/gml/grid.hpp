#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gml/errors.hpp"

namespace gml {

// Probabilities are kept inside [kProbEps, 1 - kProbEps] so that every
// downstream log and ratio stays finite.
inline constexpr double kProbEps = 1e-7;

struct GridDims {
    int depth = 0;
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t voxels() const {
        return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    std::size_t feature_count() const { return voxels() * static_cast<std::size_t>(channels); }

    bool operator==(const GridDims&) const = default;

    void validate() const {
        if (depth < 1 || height < 1 || width < 1 || channels < 1) {
            throw InvalidInputError("GridDims: all dimensions must be >= 1, got " + describe());
        }
    }

    std::string describe() const {
        return std::to_string(depth) + "x" + std::to_string(height) + "x" +
               std::to_string(width) + "c" + std::to_string(channels);
    }
};

// Per-case multi-channel voxel features, flat in [channel, depth, height, width]
// order. Stored as 32-bit floats so the on-disk format is lossless.
struct FeatureVolume {
    GridDims dims;
    std::vector<float> values;

    float at(int channel, std::size_t voxel) const {
        return values[static_cast<std::size_t>(channel) * dims.voxels() + voxel];
    }

    bool operator==(const FeatureVolume&) const = default;

    void validate() const {
        dims.validate();
        if (values.size() != dims.feature_count()) {
            throw InvalidInputError("FeatureVolume: expected " +
                                    std::to_string(dims.feature_count()) + " values, got " +
                                    std::to_string(values.size()));
        }
        for (float v : values) {
            if (!std::isfinite(v)) throw InvalidInputError("FeatureVolume: non-finite value");
        }
    }
};

// Per-voxel tumor probability field; channel count of dims is ignored.
struct ProbField {
    GridDims dims;
    std::vector<double> probs;

    bool operator==(const ProbField&) const = default;

    void validate() const {
        dims.validate();
        if (probs.size() != dims.voxels()) {
            throw InvalidInputError("ProbField: expected " + std::to_string(dims.voxels()) +
                                    " probabilities, got " + std::to_string(probs.size()));
        }
        for (double p : probs) {
            if (!(p >= kProbEps && p <= 1.0 - kProbEps)) {
                throw InvalidInputError("ProbField: probability outside [eps, 1-eps]");
            }
        }
    }
};

// Binary voxel labels (0 = background, 1 = tumor).
struct Mask {
    GridDims dims;
    std::vector<std::uint8_t> bits;

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    bool operator==(const Mask&) const = default;

    void validate() const {
        dims.validate();
        if (bits.size() != dims.voxels()) {
            throw InvalidInputError("Mask: expected " + std::to_string(dims.voxels()) +
                                    " bits, got " + std::to_string(bits.size()));
        }
        for (auto b : bits) {
            if (b > 1) throw InvalidInputError("Mask: entries must be 0 or 1");
        }
    }
};

// Ground-truth mask together with a model's predicted mask over the same grid.
struct MaskPair {
    Mask truth;
    Mask predicted;

    void validate() const {
        truth.validate();
        predicted.validate();
        if (!(truth.dims == predicted.dims)) {
            throw InvalidInputError("MaskPair: truth dims " + truth.dims.describe() +
                                    " != predicted dims " + predicted.dims.describe());
        }
    }
};

inline void require_same_voxel_grid(const GridDims& a, const GridDims& b, const char* where) {
    if (a.depth != b.depth || a.height != b.height || a.width != b.width) {
        throw InvalidInputError(std::string(where) + ": voxel grid mismatch, " + a.describe() +
                                " vs " + b.describe());
    }
}

} // namespace gml
