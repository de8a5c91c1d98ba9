#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gml/errors.hpp"
#include "gml/grid.hpp"
#include "gml/rng.hpp"

namespace gml {

struct SplitCounts {
    int train = 0;
    int validation = 0;
    int test = 0;

    int total() const { return train + validation + test; }
    bool operator==(const SplitCounts&) const = default;
};

// Default split rule: test = round(0.2 n), validation = round(0.1 n), train
// the remainder. Explicit counts (e.g. the 4-site benchmark pinning its
// per-site case numbers) override the rule.
inline SplitCounts default_split_counts(int n_cases) {
    SplitCounts s;
    s.test = static_cast<int>(std::lround(0.2 * n_cases));
    s.validation = static_cast<int>(std::lround(0.1 * n_cases));
    s.train = n_cases - s.test - s.validation;
    return s;
}

// Generation recipe for one site's private dataset. Distinct feature shifts
// across sites produce the non-IID setting the protocol is aimed at: shifts of
// magnitude >= 1.0 per channel (at noise_scale <= 0.5) measurably degrade
// cross-site transfer of a model trained on another site.
struct SiteSpec {
    int site_id = 0;
    int n_cases = 0;
    std::vector<double> feature_shift;
    double noise_scale = 0.5;
    std::pair<double, double> tumor_radius_range{3.0, 5.0};
    GridDims grid{16, 16, 16, 3};
    std::optional<SplitCounts> splits;

    SplitCounts effective_splits() const {
        return splits ? *splits : default_split_counts(n_cases);
    }

    void validate() const {
        grid.validate();
        if (n_cases < 3) throw InvalidInputError("SiteSpec: n_cases must be >= 3");
        if (feature_shift.size() != static_cast<std::size_t>(grid.channels)) {
            throw InvalidInputError("SiteSpec: feature_shift length must equal channel count");
        }
        if (noise_scale < 0.0) throw InvalidInputError("SiteSpec: noise_scale must be >= 0");
        const auto [rmin, rmax] = tumor_radius_range;
        if (!(rmin > 0.0) || rmin > rmax) {
            throw InvalidInputError("SiteSpec: tumor radius range must satisfy 0 < min <= max");
        }
        const int min_extent = std::min({grid.depth, grid.height, grid.width});
        if (2.0 * rmax > static_cast<double>(min_extent - 1)) {
            throw InvalidInputError("SiteSpec: max tumor radius does not fit inside the grid");
        }
        const SplitCounts s = effective_splits();
        if (s.total() != n_cases) {
            throw InvalidInputError("SiteSpec: split counts must sum to n_cases");
        }
        if (s.train < 1 || s.validation < 1 || s.test < 1) {
            throw InvalidInputError("SiteSpec: every split must be non-empty");
        }
    }
};

struct Case {
    FeatureVolume volume;
    Mask truth;
    std::string case_id;

    bool operator==(const Case&) const = default;
};

struct SiteDataset {
    int site_id = 0;
    std::uint64_t seed = 0;
    std::vector<Case> train;
    std::vector<Case> validation;
    std::vector<Case> test;

    bool operator==(const SiteDataset&) const = default;
};

// In-tumor signal added on top of the background per channel; later channels
// carry progressively weaker contrast, like modalities of unequal quality.
inline double channel_contrast(int channel) { return 1.0 / (1.0 + channel); }

namespace detail {

inline Case synthesize_case(const SiteSpec& spec, std::uint64_t seed, int case_index) {
    RngStream rng(derive_seed(seed, seed_tag::kCase, static_cast<std::uint64_t>(case_index)));
    const GridDims& g = spec.grid;
    const std::size_t n = g.voxels();

    const auto [rmin, rmax] = spec.tumor_radius_range;
    const double rz = rng.uniform(rmin, rmax);
    const double ry = rng.uniform(rmin, rmax);
    const double rx = rng.uniform(rmin, rmax);
    const double cz = rng.uniform(rz, static_cast<double>(g.depth - 1) - rz);
    const double cy = rng.uniform(ry, static_cast<double>(g.height - 1) - ry);
    const double cx = rng.uniform(rx, static_cast<double>(g.width - 1) - rx);

    Case c;
    c.truth.dims = g;
    c.truth.bits.resize(n);
    std::size_t v = 0;
    for (int z = 0; z < g.depth; ++z) {
        const double dz = (z - cz) / rz;
        for (int y = 0; y < g.height; ++y) {
            const double dy = (y - cy) / ry;
            for (int x = 0; x < g.width; ++x, ++v) {
                const double dx = (x - cx) / rx;
                c.truth.bits[v] = dz * dz + dy * dy + dx * dx <= 1.0 ? 1 : 0;
            }
        }
    }

    c.volume.dims = g;
    c.volume.values.resize(g.feature_count());
    for (int ch = 0; ch < g.channels; ++ch) {
        const double base = spec.feature_shift[static_cast<std::size_t>(ch)];
        const double contrast = channel_contrast(ch);
        float* out = c.volume.values.data() + static_cast<std::size_t>(ch) * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double signal = base + (c.truth.bits[i] ? contrast : 0.0);
            out[i] = static_cast<float>(signal + spec.noise_scale * rng.normal());
        }
    }

    c.case_id = "site" + std::to_string(spec.site_id) + "_case";
    std::string idx = std::to_string(case_index);
    c.case_id.append(3 - std::min<std::size_t>(3, idx.size()), '0');
    c.case_id += idx;
    return c;
}

} // namespace detail

// Fully determined by (spec, seed): same inputs give byte-identical datasets
// on any platform. Cases are shuffled once and partitioned in
// [train | validation | test] order.
inline SiteDataset generate_site_dataset(const SiteSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<Case> cases;
    cases.reserve(static_cast<std::size_t>(spec.n_cases));
    for (int i = 0; i < spec.n_cases; ++i) cases.push_back(detail::synthesize_case(spec, seed, i));

    std::vector<int> order(cases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    RngStream split_rng(derive_seed(seed, seed_tag::kSplit));
    split_rng.shuffle(order);

    const SplitCounts s = spec.effective_splits();
    SiteDataset ds;
    ds.site_id = spec.site_id;
    ds.seed = seed;
    for (int i = 0; i < s.train; ++i) ds.train.push_back(std::move(cases[order[i]]));
    for (int i = 0; i < s.validation; ++i) {
        ds.validation.push_back(std::move(cases[order[s.train + i]]));
    }
    for (int i = 0; i < s.test; ++i) {
        ds.test.push_back(std::move(cases[order[s.train + s.validation + i]]));
    }
    return ds;
}

} // namespace gml
