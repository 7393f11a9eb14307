#pragma once

#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/parallel.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

/// Foreground iff gray >= t.
[[nodiscard]] inline BinaryMask threshold_segment(const Volume<GrayValue>& vol, std::int64_t t) {
    if (t < 0 || t > 65535) throw Error(ErrorCode::range, "threshold must lie in [0, 65535]", {"manual_thresholding"});
    BinaryMask mask(vol.dims());
    const auto src = vol.values();
    auto dst = mask.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= t ? 1 : 0;
    return mask;
}

namespace detail {

inline constexpr std::array<std::array<int, 3>, 6> kFaceNeighbors{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

}  // namespace detail

/// 6-connected dilation by one voxel.
[[nodiscard]] inline BinaryMask dilate6(const BinaryMask& in) {
    const Dims d = in.dims();
    BinaryMask out(d);
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                bool on = in(z, y, x) != 0;
                for (std::size_t k = 0; k < 6 && !on; ++k) {
                    const auto& n = detail::kFaceNeighbors[k];
                    on = in.get_or(static_cast<std::int64_t>(z) + n[0], static_cast<std::int64_t>(y) + n[1],
                                   static_cast<std::int64_t>(x) + n[2], 0) != 0;
                }
                out(z, y, x) = on ? 1 : 0;
            }
        }
    }
    return out;
}

/// 6-connected erosion by one voxel; outside the volume counts as background.
[[nodiscard]] inline BinaryMask erode6(const BinaryMask& in) {
    const Dims d = in.dims();
    BinaryMask out(d);
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                bool on = in(z, y, x) != 0;
                for (std::size_t k = 0; k < 6 && on; ++k) {
                    const auto& n = detail::kFaceNeighbors[k];
                    on = in.get_or(static_cast<std::int64_t>(z) + n[0], static_cast<std::int64_t>(y) + n[1],
                                   static_cast<std::int64_t>(x) + n[2], 0) != 0;
                }
                out(z, y, x) = on ? 1 : 0;
            }
        }
    }
    return out;
}

/// Applies 1 = dilation, 2 = erosion in sequence.
[[nodiscard]] inline BinaryMask apply_morphology(BinaryMask mask, const std::vector<int>& ops) {
    for (int op : ops) {
        if (op == 1) mask = dilate6(mask);
        else if (op == 2) mask = erode6(mask);
        else throw Error(ErrorCode::validation, "morphology codes must be 1 or 2", {"dilation_erosion_operations"});
    }
    return mask;
}

namespace detail {

struct UnionFind {
    std::vector<Label> parent;

    Label make() {
        parent.push_back(static_cast<Label>(parent.size()));
        return parent.back();
    }
    Label find(Label a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(Label a, Label b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

}  // namespace detail

/// 26-connected components numbered 1..K in order of each component's first
/// voxel in (z, y, x) scan order.
[[nodiscard]] inline LabelVolume label_components(const BinaryMask& mask) {
    const Dims d = mask.dims();
    LabelVolume provisional(d);
    detail::UnionFind uf;
    uf.make();  // 0 = background
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                Label current = 0;
                // the 13 neighbors already visited in scan order
                for (int dz = -1; dz <= 0; ++dz) {
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
                            const Label n = provisional.get_or(static_cast<std::int64_t>(z) + dz,
                                                               static_cast<std::int64_t>(y) + dy,
                                                               static_cast<std::int64_t>(x) + dx, 0);
                            if (n == 0) continue;
                            if (current == 0) current = n;
                            else uf.unite(current, n);
                        }
                    }
                }
                provisional(z, y, x) = current != 0 ? current : uf.make();
            }
        }
    }
    std::vector<Label> final_label(uf.parent.size(), 0);
    Label next = 0;
    auto vals = provisional.values();
    for (auto& v : vals) {
        if (v == 0) continue;
        const Label root = uf.find(v);
        if (final_label[root] == 0) final_label[root] = ++next;
        v = final_label[root];
    }
    return provisional;
}

/// Voxel count per label, indexed by label.
[[nodiscard]] inline std::vector<std::uint64_t> label_counts(const LabelVolume& labels) {
    Label max_label = 0;
    for (Label v : labels.values()) max_label = std::max(max_label, v);
    std::vector<std::uint64_t> counts(std::size_t{max_label} + 1, 0);
    for (Label v : labels.values()) ++counts[v];
    return counts;
}

/// Zeroes labels with fewer than `min_voxels` voxels; surviving ids are kept.
[[nodiscard]] inline LabelVolume remove_small(LabelVolume labels, std::int64_t min_voxels) {
    if (min_voxels < 0) throw Error(ErrorCode::validation, "remove_small must be >= 0", {"remove_small"});
    if (min_voxels == 0) return labels;
    const auto counts = label_counts(labels);
    for (auto& v : labels.values()) {
        if (v != 0 && counts[v] < static_cast<std::uint64_t>(min_voxels)) v = 0;
    }
    return labels;
}

/// Zeroes every label with a voxel on one of the six faces of the volume.
[[nodiscard]] inline LabelVolume remove_border_regions(LabelVolume labels) {
    const Dims d = labels.dims();
    if (d.voxels() == 0) return labels;
    std::vector<std::uint8_t> touching(label_counts(labels).size(), 0);
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            const bool face = z == 0 || z + 1 == d.z || y == 0 || y + 1 == d.y;
            if (face) {
                for (std::size_t x = 0; x < d.x; ++x) touching[labels(z, y, x)] = 1;
            } else {
                touching[labels(z, y, 0)] = 1;
                touching[labels(z, y, d.x - 1)] = 1;
            }
        }
    }
    for (auto& v : labels.values()) {
        if (touching[v]) v = 0;
    }
    return labels;
}

/// Resolved [begin, end) z-range for start/end slice parameters (-1 = open).
struct SliceRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

[[nodiscard]] inline SliceRange resolve_slice_range(std::size_t depth, std::int64_t start, std::int64_t end) {
    const auto n = static_cast<std::int64_t>(depth);
    const std::int64_t s = start == -1 ? 0 : start;
    const std::int64_t e = end == -1 ? n - 1 : end;
    std::vector<std::string> bad;
    if (start < -1 || s >= n) bad.push_back("start_slice");
    if (end < -1 || e >= n) bad.push_back("end_slice");
    if (bad.empty() && s > e) bad = {"start_slice", "end_slice"};
    if (!bad.empty()) {
        throw Error(ErrorCode::range,
                    "slice range [" + std::to_string(start) + ", " + std::to_string(end) + "] outside 0.." +
                        std::to_string(n - 1),
                    bad);
    }
    return {static_cast<std::size_t>(s), static_cast<std::size_t>(e) + 1};
}

template <class T>
[[nodiscard]] Volume<T> slice_z(const Volume<T>& vol, SliceRange r) {
    if (r.begin == 0 && r.end == vol.dims().z) return vol;
    const Box box{{static_cast<std::int64_t>(r.begin), 0, 0},
                  {static_cast<std::int64_t>(r.end) - 1, static_cast<std::int64_t>(vol.dims().y) - 1,
                   static_cast<std::int64_t>(vol.dims().x) - 1}};
    return crop(vol, box);
}

/// z-crops a gray volume and its label volume to [start_slice, end_slice].
[[nodiscard]] inline std::pair<GrayVolume, LabelVolume> restrict_slices(const GrayVolume& vol, const LabelVolume& labels,
                                                                      std::int64_t start_slice, std::int64_t end_slice) {
    if (vol.dims() != labels.dims()) throw Error(ErrorCode::shape_mismatch, "labels and volume differ in shape");
    const SliceRange r = resolve_slice_range(vol.dims().z, start_slice, end_slice);
    return {GrayVolume{slice_z(vol.voxels, r), vol.voxel_size}, slice_z(labels, r)};
}

/// Threshold, morphology, labeling and small-object removal.
[[nodiscard]] inline LabelVolume segment_volume(const Volume<GrayValue>& vol, const SegmentationParams& p) {
    BinaryMask mask = threshold_segment(vol, p.manual_thresholding);
    mask = apply_morphology(std::move(mask), p.dilation_erosion_operations);
    return remove_small(label_components(mask), p.remove_small);
}

/// Single-slice preview used for interactive threshold tuning; z-neighbors
/// are ignored so the result is a 2D segmentation of plane `z`.
[[nodiscard]] inline LabelVolume segment_preview(const Volume<GrayValue>& vol, const SegmentationParams& p,
                                                 std::int64_t z) {
    if (z < 0 || static_cast<std::size_t>(z) >= vol.dims().z) {
        throw Error(ErrorCode::range, "apply_to_slice outside the volume", {"apply_to_slice"});
    }
    const SliceRange r{static_cast<std::size_t>(z), static_cast<std::size_t>(z) + 1};
    return segment_volume(slice_z(vol, r), p);
}

/// Replaces a binary (0/1) mask by its connected components; a labeled mask
/// is returned unchanged.
[[nodiscard]] inline LabelVolume ensure_labeled(LabelVolume labels) {
    for (Label v : labels.values()) {
        if (v > 1) return labels;
    }
    BinaryMask mask(labels.dims());
    for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] != 0 ? 1 : 0;
    return label_components(mask);
}

/// 16-bit view of a label volume for TIFF export.
[[nodiscard]] inline Volume<GrayValue> labels_to_u16(const LabelVolume& labels) {
    Volume<GrayValue> out(labels.dims());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 65535) {
            throw Error(ErrorCode::range, "label " + std::to_string(labels[i]) + " does not fit a 16-bit TIFF");
        }
        out[i] = static_cast<GrayValue>(labels[i]);
    }
    return out;
}

[[nodiscard]] inline LabelVolume labels_from_u16(const Volume<GrayValue>& vol) {
    LabelVolume out(vol.dims());
    for (std::size_t i = 0; i < vol.size(); ++i) out[i] = vol[i];
    return out;
}

}  // namespace ctquant
