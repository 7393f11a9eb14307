#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/project.hpp"
#include "ctquant/regions.hpp"
#include "ctquant/segmentation.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

/// Sparse unbinned gray-value counts of one region.
struct RegionHistogram {
    Label label = 0;
    std::map<GrayValue, std::uint64_t> counts;

    [[nodiscard]] std::uint64_t total() const noexcept {
        std::uint64_t n = 0;
        for (const auto& [g, c] : counts) n += c;
        return n;
    }
    friend bool operator==(const RegionHistogram&, const RegionHistogram&) = default;
};

struct GradientLayer {
    int depth = 0;
    double mean_gray = 0.0;
    std::uint64_t voxel_count = 0;
    std::uint64_t gray_sum = 0;
};

struct GradientProfile {
    Label label = 0;
    std::vector<GradientLayer> layers;
};

inline constexpr int kMaxGradientDepth = 7;
inline constexpr int kFallbackOuterDepth = 3;
inline constexpr double kDepthStabilization = 0.10;

[[nodiscard]] inline RegionHistogram histogram_of(const RegionData& r, const BinaryMask& select) {
    RegionHistogram h{r.label, {}};
    for (std::size_t i = 0; i < select.size(); ++i) {
        if (select[i]) ++h.counts[r.gray[i]];
    }
    return h;
}

[[nodiscard]] inline RegionHistogram bulk_histogram(const RegionData& r) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    return histogram_of(r, r.mask);
}

/// Voxels of the region removed by its 6-connected erosion.
[[nodiscard]] inline BinaryMask surface_shell(const BinaryMask& mask) {
    BinaryMask eroded = erode6(mask);
    for (std::size_t i = 0; i < mask.size(); ++i) eroded[i] = mask[i] && !eroded[i] ? 1 : 0;
    return eroded;
}

[[nodiscard]] inline RegionHistogram surface_histogram(const RegionData& r) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    return histogram_of(r, surface_shell(r.mask));
}

/// Layer k (1-based) holds the voxels removed by the k-th successive
/// erosion. Layers stop when the region is exhausted or at `max_depth`.
[[nodiscard]] inline std::vector<BinaryMask> erosion_layers(const BinaryMask& mask, int max_depth) {
    std::vector<BinaryMask> layers;
    BinaryMask current = mask;
    while (static_cast<int>(layers.size()) < max_depth) {
        BinaryMask next = erode6(current);
        BinaryMask layer(mask.dims());
        bool any = false;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            layer[i] = current[i] && !next[i] ? 1 : 0;
            any = any || layer[i];
        }
        if (!any) break;
        layers.push_back(std::move(layer));
        current = std::move(next);
    }
    return layers;
}

[[nodiscard]] inline GradientProfile gradient_profile(const RegionData& r, int max_depth = kMaxGradientDepth) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    GradientProfile p{r.label, {}};
    const auto layers = erosion_layers(r.mask, max_depth);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        GradientLayer layer{static_cast<int>(k) + 1, 0.0, 0, 0};
        for (std::size_t i = 0; i < r.mask.size(); ++i) {
            if (!layers[k][i]) continue;
            ++layer.voxel_count;
            layer.gray_sum += r.gray[i];
        }
        layer.mean_gray = static_cast<double>(layer.gray_sum) / static_cast<double>(layer.voxel_count);
        p.layers.push_back(layer);
    }
    return p;
}

/// Number of outer layers: the smallest k whose next mean step is within
/// 10% of the first step, else min(3, available depth); clamped to [1, 7].
/// Mean differences are compared exactly on integer sums.
[[nodiscard]] inline int outer_depth(const GradientProfile& profile) {
    const auto& L = profile.layers;
    if (L.empty()) throw Error(ErrorCode::empty_region, "empty gradient profile");
    const auto available = static_cast<int>(L.size());
    const auto clamp = [](int n) { return std::clamp(n, 1, kMaxGradientDepth); };
    if (available < 2) return clamp(std::min(kFallbackOuterDepth, available));
    // step k: mean(k+1) - mean(k) = num / (n_k * n_{k+1})
    const auto num = [&](std::size_t k) -> __int128 {
        return static_cast<__int128>(L[k + 1].gray_sum) * L[k].voxel_count -
               static_cast<__int128>(L[k].gray_sum) * L[k + 1].voxel_count;
    };
    const auto den = [&](std::size_t k) -> __int128 {
        return static_cast<__int128>(L[k].voxel_count) * L[k + 1].voxel_count;
    };
    const auto abs128 = [](__int128 v) { return v < 0 ? -v : v; };
    const __int128 first_num = abs128(num(0));
    const __int128 first_den = den(0);
    for (std::size_t k = 0; k + 1 < L.size(); ++k) {
        // |num_k / den_k| <= 0.1 * |first_num / first_den|
        if (abs128(num(k)) * first_den * 10 <= first_num * den(k)) return clamp(static_cast<int>(k) + 1);
    }
    return clamp(std::min(kFallbackOuterDepth, available));
}

/// Outer = union of layers 1..n, inner = bulk minus outer.
struct OuterInner {
    RegionHistogram outer;
    RegionHistogram inner;
};

[[nodiscard]] inline OuterInner outer_inner_histograms(const RegionData& r, int n) {
    if (n < 1) throw Error(ErrorCode::validation, "outer depth must be >= 1");
    const auto layers = erosion_layers(r.mask, n);
    BinaryMask outer(r.mask.dims());
    for (const auto& layer : layers) {
        for (std::size_t i = 0; i < outer.size(); ++i) outer[i] = outer[i] || layer[i];
    }
    BinaryMask inner(r.mask.dims());
    for (std::size_t i = 0; i < inner.size(); ++i) inner[i] = r.mask[i] && !outer[i] ? 1 : 0;
    return {histogram_of(r, outer), histogram_of(r, inner)};
}

struct RegionHistograms {
    RegionHistogram bulk;
    RegionHistogram surface;
    RegionHistogram outer;
    RegionHistogram inner;
    GradientProfile profile;
    int outer_n = 1;
};

/// All four variants plus the gradient profile from at most seven erosions.
[[nodiscard]] inline RegionHistograms compute_region_histograms(const RegionData& r) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    RegionHistograms out;
    const auto layers = erosion_layers(r.mask, kMaxGradientDepth);
    out.profile.label = r.label;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        GradientLayer layer{static_cast<int>(k) + 1, 0.0, 0, 0};
        for (std::size_t i = 0; i < r.mask.size(); ++i) {
            if (!layers[k][i]) continue;
            ++layer.voxel_count;
            layer.gray_sum += r.gray[i];
        }
        layer.mean_gray = static_cast<double>(layer.gray_sum) / static_cast<double>(layer.voxel_count);
        out.profile.layers.push_back(layer);
    }
    out.outer_n = std::min(outer_depth(out.profile), static_cast<int>(layers.size()));
    BinaryMask outer(r.mask.dims());
    for (int k = 0; k < out.outer_n; ++k) {
        for (std::size_t i = 0; i < outer.size(); ++i) outer[i] = outer[i] || layers[static_cast<std::size_t>(k)][i];
    }
    out.bulk = RegionHistogram{r.label, {}};
    out.surface = RegionHistogram{r.label, {}};
    out.outer = RegionHistogram{r.label, {}};
    out.inner = RegionHistogram{r.label, {}};
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
        if (!r.mask[i]) continue;
        const GrayValue g = r.gray[i];
        ++out.bulk.counts[g];
        if (layers[0][i]) ++out.surface.counts[g];
        if (outer[i]) ++out.outer.counts[g];
        else ++out.inner.counts[g];
    }
    return out;
}

}  // namespace ctquant
