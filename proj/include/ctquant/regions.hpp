#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

struct RegionBounds {
    Label label = 0;
    Box box;
    std::uint64_t count = 0;
};

/// Tight bounding box and voxel count for every nonzero label, ascending.
[[nodiscard]] inline std::vector<RegionBounds> extract_bounding_regions(const LabelVolume& labels) {
    constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
    constexpr auto kMin = std::numeric_limits<std::int64_t>::min();
    std::vector<RegionBounds> by_label;
    const Dims d = labels.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                const Label l = labels(z, y, x);
                if (l == 0) continue;
                if (l >= by_label.size()) {
                    by_label.resize(std::size_t{l} + 1, RegionBounds{0, {{kMax, kMax, kMax}, {kMin, kMin, kMin}}, 0});
                }
                auto& r = by_label[l];
                r.label = l;
                ++r.count;
                const Index3 p{static_cast<std::int64_t>(z), static_cast<std::int64_t>(y), static_cast<std::int64_t>(x)};
                r.box.lo = {std::min(r.box.lo.z, p.z), std::min(r.box.lo.y, p.y), std::min(r.box.lo.x, p.x)};
                r.box.hi = {std::max(r.box.hi.z, p.z), std::max(r.box.hi.y, p.y), std::max(r.box.hi.x, p.x)};
            }
        }
    }
    std::vector<RegionBounds> out;
    for (const auto& r : by_label) {
        if (r.count > 0) out.push_back(r);
    }
    return out;
}

/// One region cut out of the volume with a one-voxel background margin.
/// Local index (z, y, x) corresponds to global `origin + (z, y, x)`.
struct RegionData {
    Label label = 0;
    Box box;  // tight, global coordinates
    Index3 origin;
    BinaryMask mask;
    Volume<GrayValue> gray;
    std::uint64_t count = 0;
};

[[nodiscard]] inline RegionData crop_region(const Volume<GrayValue>& gray, const LabelVolume& labels,
                                            const RegionBounds& bounds) {
    const Box padded{{bounds.box.lo.z - 1, bounds.box.lo.y - 1, bounds.box.lo.x - 1},
                     {bounds.box.hi.z + 1, bounds.box.hi.y + 1, bounds.box.hi.x + 1}};
    RegionData r{bounds.label, bounds.box, padded.lo, BinaryMask(padded.dims()), crop(gray, padded), bounds.count};
    const Dims d = padded.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                const bool in = labels.get_or(padded.lo.z + static_cast<std::int64_t>(z),
                                              padded.lo.y + static_cast<std::int64_t>(y),
                                              padded.lo.x + static_cast<std::int64_t>(x), 0) == bounds.label;
                r.mask(z, y, x) = in ? 1 : 0;
                if (!in) r.gray(z, y, x) = 0;
            }
        }
    }
    return r;
}

/// Wraps a standalone mask and gray volume of the same shape as a region.
[[nodiscard]] inline RegionData region_from_mask(const BinaryMask& mask, const Volume<GrayValue>& gray, Label label = 1) {
    if (mask.dims() != gray.dims()) throw Error(ErrorCode::shape_mismatch, "mask and gray differ in shape");
    LabelVolume labels(mask.dims());
    for (std::size_t i = 0; i < mask.size(); ++i) labels[i] = mask[i] ? label : 0;
    const auto bounds = extract_bounding_regions(labels);
    if (bounds.empty()) throw Error(ErrorCode::empty_region, "region is empty");
    return crop_region(gray, labels, bounds.front());
}

}  // namespace ctquant
