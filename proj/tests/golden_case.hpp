#pragma once

// A tiny hand-constructed case together with its expected on-disk bytes,
// worked out from the serialization rules by hand: channel-major float32
// little-endian feature values followed by one byte per voxel of mask bits.
// Shared between the unit tests and the acceptance checks.

#include <string>

#include "gml/dataset_io.hpp"
#include "gml/grid.hpp"
#include "gml/synthdata.hpp"

namespace golden {

inline gml::Case make_case() {
    gml::Case c;
    c.case_id = "golden_case";
    c.volume.dims = {1, 2, 2, 2};
    c.volume.values = {0.0f, 1.0f, -1.0f, 0.5f, 2.0f, -0.25f, 3.5f, -2.0f};
    c.truth.dims = c.volume.dims;
    c.truth.bits = {1, 0, 0, 1};
    return c;
}

inline std::string expected_bytes() {
    static const unsigned char raw[] = {
        // channel 0: 0.0f, 1.0f, -1.0f, 0.5f
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F,
        0x00, 0x00, 0x80, 0xBF, 0x00, 0x00, 0x00, 0x3F,
        // channel 1: 2.0f, -0.25f, 3.5f, -2.0f
        0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x80, 0xBE,
        0x00, 0x00, 0x60, 0x40, 0x00, 0x00, 0x00, 0xC0,
        // mask bits
        0x01, 0x00, 0x00, 0x01,
    };
    return std::string(reinterpret_cast<const char*>(raw), sizeof(raw));
}

} // namespace golden
