#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/histograms.hpp"
#include "ctquant/parallel.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/peaks.hpp"

namespace ctquant {

using ClassFractions = std::array<double, 5>;

/// Share of one voxel of gray `g` given to each class under the linear
/// two-anchor rule. Anchors are background_q and the detected class peaks.
[[nodiscard]] inline ClassFractions pvb_fractions(double g, const ClassPeaks& peaks, double background_q) {
    ClassFractions f{};
    std::vector<std::pair<int, double>> anchors;
    for (int c = 0; c < 5; ++c) {
        if (peaks[static_cast<std::size_t>(c)]) anchors.emplace_back(c, *peaks[static_cast<std::size_t>(c)]);
    }
    if (anchors.empty() || g <= background_q) return f;
    const auto [c1, g1] = anchors.front();
    if (g < g1) {
        f[static_cast<std::size_t>(c1)] = (g - background_q) / (g1 - background_q);
        return f;
    }
    for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
        const auto [ca, ga] = anchors[i];
        const auto [cb, gb] = anchors[i + 1];
        if (g >= ga && g < gb) {
            f[static_cast<std::size_t>(ca)] = (gb - g) / (gb - ga);
            f[static_cast<std::size_t>(cb)] = (g - ga) / (gb - ga);
            return f;
        }
    }
    f[static_cast<std::size_t>(anchors.back().first)] = 1.0;
    return f;
}

/// Threshold assignment: the whole voxel goes to the class whose interval
/// holds g, provided that class was detected in the region.
[[nodiscard]] inline ClassFractions threshold_fractions(double g, const ClassPeaks& peaks, const ClassTable& classes) {
    ClassFractions f{};
    const int c = classes.class_of(g);
    if (c >= 0 && peaks[static_cast<std::size_t>(c)]) f[static_cast<std::size_t>(c)] = 1.0;
    return f;
}

struct QuantResult {
    Label label = 0;
    bool analyzed = false;
    double region_volume = 0.0;
    ClassFractions volume{};  // µm³
    ClassFractions volume_fraction{};
    ClassFractions mass_fraction{};
    ClassFractions surface_fraction{};
    ClassPeaks peak_gray;
    std::vector<Peak> peaks;
    int n_phases = 0;
    double volume_analyzed_fraction = 0.0;
};

namespace detail {

inline ClassFractions accumulate(const std::map<GrayValue, std::uint64_t>& counts, const ClassPeaks& peaks,
                                 const ClassTable& classes) {
    ClassFractions v{};
    for (const auto& [g, n] : counts) {
        const auto f = classes.enable_pvb ? pvb_fractions(g, peaks, classes.background_q)
                                          : threshold_fractions(g, peaks, classes);
        for (std::size_t c = 0; c < 5; ++c) v[c] += static_cast<double>(n) * f[c];
    }
    return v;
}

inline ClassFractions normalized(const ClassFractions& v) {
    double total = 0.0;
    for (double x : v) total += x;
    ClassFractions out{};
    if (total > 0.0) {
        for (std::size_t c = 0; c < 5; ++c) out[c] = v[c] / total;
    }
    return out;
}

}  // namespace detail

/// Per-class volumes and fractions of one region. Surface fractions reuse
/// the bulk anchors. A region without class peaks is returned unanalyzed.
[[nodiscard]] inline QuantResult quantify_region(const RegionHistogram& bulk, const RegionHistogram& surface,
                                                 const ClassPeaks& class_peaks, const ClassTable& classes,
                                                 double voxel_size) {
    QuantResult q;
    q.label = bulk.label;
    q.peak_gray = class_peaks;
    const double voxel_volume = voxel_size * voxel_size * voxel_size;
    const auto total_voxels = bulk.total();
    q.region_volume = static_cast<double>(total_voxels) * voxel_volume;
    for (const auto& p : class_peaks) q.n_phases += p ? 1 : 0;
    if (q.n_phases == 0 || total_voxels == 0) {
        q.n_phases = 0;
        return q;
    }
    q.analyzed = true;
    const auto counts = detail::accumulate(bulk.counts, class_peaks, classes);
    double assigned = 0.0;
    ClassFractions mass{};
    for (std::size_t c = 0; c < 5; ++c) {
        q.volume[c] = counts[c] * voxel_volume;
        assigned += counts[c];
        mass[c] = q.volume[c] * classes.density[c];
    }
    q.volume_fraction = detail::normalized(counts);
    q.mass_fraction = detail::normalized(mass);
    q.surface_fraction = detail::normalized(detail::accumulate(surface.counts, class_peaks, classes));
    q.volume_analyzed_fraction = assigned / static_cast<double>(total_voxels);
    return q;
}

struct ClassSummary {
    double volume = 0.0;
    double volume_fraction = 0.0;
    double mass_fraction = 0.0;
};

struct Report {
    std::array<std::optional<ClassSummary>, 5> classes;  // present iff some volume was assigned
    std::array<double, 5> density{1.0, 1.0, 1.0, 1.0, 1.0};
    std::uint64_t regions_total = 0;
    std::uint64_t regions_analyzed = 0;
    std::uint64_t regions_with_1_phase = 0;
    std::uint64_t regions_with_2_phases = 0;
    double mean_volume_analyzed_fraction = 0.0;
    double global_volume_analyzed_fraction = 0.0;
};

/// Aggregates region results: class volumes are summed over analyzed
/// regions and normalized; volume-analyzed is reported as the mean over
/// analyzed regions and as the volume-weighted global value.
[[nodiscard]] inline Report build_report(const std::vector<QuantResult>& results, const std::array<double, 5>& density) {
    Report r;
    r.density = density;
    r.regions_total = results.size();
    ClassFractions volume{};
    double analyzed_volume = 0.0;
    double assigned_volume = 0.0;
    double fraction_sum = 0.0;
    for (const auto& q : results) {
        if (!q.analyzed) continue;
        ++r.regions_analyzed;
        if (q.n_phases == 1) ++r.regions_with_1_phase;
        if (q.n_phases == 2) ++r.regions_with_2_phases;
        fraction_sum += q.volume_analyzed_fraction;
        analyzed_volume += q.region_volume;
        for (std::size_t c = 0; c < 5; ++c) {
            volume[c] += q.volume[c];
            assigned_volume += q.volume[c];
        }
    }
    if (r.regions_analyzed > 0) {
        r.mean_volume_analyzed_fraction = fraction_sum / static_cast<double>(r.regions_analyzed);
    }
    if (analyzed_volume > 0.0) r.global_volume_analyzed_fraction = assigned_volume / analyzed_volume;
    ClassFractions mass{};
    for (std::size_t c = 0; c < 5; ++c) mass[c] = volume[c] * density[c];
    const auto vf = detail::normalized(volume);
    const auto mf = detail::normalized(mass);
    for (std::size_t c = 0; c < 5; ++c) {
        if (volume[c] > 0.0) r.classes[c] = ClassSummary{volume[c], vf[c], mf[c]};
    }
    return r;
}

/// Peaks and class anchors of one region under the mineralogy parameters.
struct RegionPeaks {
    std::vector<Peak> peaks;
    ClassPeaks class_peaks;
};

[[nodiscard]] inline RegionPeaks analyze_peaks(const RegionHistogram& bulk, const MineralogyParams& m) {
    RegionPeaks r;
    r.peaks = detect_peaks(bulk.counts, m);
    r.class_peaks = assign_classes(r.peaks, ClassTable::from(m));
    return r;
}

/// Full per-region chain (peaks → classes → quantification) over paired
/// bulk and surface histograms, region-parallel, ascending label order.
[[nodiscard]] inline std::vector<QuantResult> quantify_all(const std::vector<RegionHistogram>& bulk,
                                                           const std::vector<RegionHistogram>& surface,
                                                           const MineralogyParams& m, double voxel_size,
                                                           int threads = 1) {
    std::map<Label, const RegionHistogram*> surface_of;
    for (const auto& s : surface) surface_of[s.label] = &s;
    std::vector<const RegionHistogram*> order;
    for (const auto& b : bulk) order.push_back(&b);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->label < b->label; });
    const ClassTable classes = ClassTable::from(m);
    std::vector<QuantResult> out(order.size());
    parallel_for(order.size(), threads, [&](std::size_t i) {
        const RegionHistogram& b = *order[i];
        const auto it = surface_of.find(b.label);
        const RegionHistogram empty{b.label, {}};
        const RegionPeaks rp = analyze_peaks(b, m);
        out[i] = quantify_region(b, it == surface_of.end() ? empty : *it->second, rp.class_peaks, classes, voxel_size);
        out[i].peaks = rp.peaks;
    });
    return out;
}

}  // namespace ctquant
