#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/histograms.hpp"
#include "ctquant/parameters.hpp"

namespace ctquant {

/// Equal-width bins over [0, 65535] with normalized frequencies. Bin i
/// covers the integer gray-values [ceil(i·65536/b), ceil((i+1)·65536/b) - 1]
/// and is reported at the midpoint of that range.
struct BinnedHistogram {
    std::vector<double> centers;
    std::vector<double> freq;
};

[[nodiscard]] inline std::uint32_t bin_lower_edge(std::size_t i, std::size_t bins) noexcept {
    return static_cast<std::uint32_t>((i * kGrayLevels + bins - 1) / bins);
}

[[nodiscard]] inline std::size_t bin_of(GrayValue g, std::size_t bins) noexcept {
    // largest i with ceil(i·65536/b) <= g
    return (static_cast<std::size_t>(g) * bins) / kGrayLevels;
}

[[nodiscard]] inline BinnedHistogram rebin(const std::map<GrayValue, std::uint64_t>& counts, std::size_t bins) {
    if (bins < 2 || bins > kGrayLevels) throw Error(ErrorCode::validation, "binInput must lie in [2, 65536]", {"binInput"});
    BinnedHistogram h;
    h.centers.resize(bins);
    h.freq.assign(bins, 0.0);
    for (std::size_t i = 0; i < bins; ++i) {
        const double lo = bin_lower_edge(i, bins);
        const double hi = static_cast<double>(bin_lower_edge(i + 1, bins)) - 1.0;
        h.centers[i] = 0.5 * (lo + hi);
    }
    std::vector<std::uint64_t> raw(bins, 0);
    std::uint64_t total = 0;
    for (const auto& [g, c] : counts) {
        raw[bin_of(g, bins)] += c;
        total += c;
    }
    if (total > 0) {
        for (std::size_t i = 0; i < bins; ++i) h.freq[i] = static_cast<double>(raw[i]) / static_cast<double>(total);
    }
    return h;
}

/// Least-squares Savitzky-Golay smoothing coefficients for the window center.
[[nodiscard]] inline std::vector<double> savgol_coefficients(int window, int order) {
    if (window < 1 || window % 2 == 0) throw Error(ErrorCode::validation, "Savitzky-Golay window must be odd");
    if (order < 0 || order >= window) throw Error(ErrorCode::validation, "polynomial order must be < window");
    const int half = window / 2;
    Eigen::MatrixXd a(window, order + 1);
    for (int i = 0; i < window; ++i) {
        double v = 1.0;
        for (int k = 0; k <= order; ++k) {
            a(i, k) = v;
            v *= static_cast<double>(i - half);
        }
    }
    // first row of pinv(a): coefficients that evaluate the fit at offset 0
    const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
    std::vector<double> c(static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i) c[static_cast<std::size_t>(i)] = pinv(0, i);
    return c;
}

struct SavgolWindow {
    int window = 1;
    int order = 0;
};

/// Window max(5, 2·intensity + 1), order min(3, w - 2), shrunk to the
/// largest odd length that fits the series.
[[nodiscard]] inline SavgolWindow savgol_window(int intensity, std::size_t length) {
    int w = std::max(5, 2 * intensity + 1);
    const int n = static_cast<int>(std::min<std::size_t>(length, 1u << 30));
    if (w > n) w = n % 2 == 1 ? n : n - 1;
    return {std::max(w, 1), std::max(0, std::min(3, w - 2))};
}

/// Smooths with mirror boundary extension (x[-k] = x[k]); negative outputs
/// are clamped to 0. Intensity 0 returns the input unchanged.
[[nodiscard]] inline std::vector<double> savgol_smooth(const std::vector<double>& x, int intensity) {
    if (intensity < 0) throw Error(ErrorCode::validation, "savgolInput must be >= 0", {"savgolInput"});
    if (intensity == 0 || x.size() < 3) return x;
    const auto [w, order] = savgol_window(intensity, x.size());
    if (w < 3) return x;
    const auto coeff = savgol_coefficients(w, order);
    const auto n = static_cast<std::int64_t>(x.size());
    const std::int64_t half = w / 2;
    const auto mirror = [n](std::int64_t i) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * (n - 1) - i;
        }
        return i;
    };
    std::vector<double> y(x.size());
    for (std::int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::int64_t k = -half; k <= half; ++k) {
            acc += coeff[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(mirror(i + k))];
        }
        y[static_cast<std::size_t>(i)] = std::max(acc, 0.0);
    }
    return y;
}

/// Peak-finder thresholds. Distances and widths are in samples, the rest in
/// normalized frequency.
struct PeakParams {
    double min_frequency = 0.0;
    double vert_distance = 0.0;
    double horiz_distance = 0.0;
    double prominence = 0.0;
    double width = 0.0;

    static PeakParams from(const MineralogyParams& m) {
        return {m.min_frequency, m.vert_distance, m.horiz_distance, m.prominence, m.gray_value_width};
    }
};

struct PeakIndex {
    std::size_t index = 0;
    double height = 0.0;
    double prominence = 0.0;
    std::size_t left_base = 0;
    std::size_t right_base = 0;
    double width = 0.0;
};

/// Local maxima (plateaus reported at their left-biased midpoint, edges
/// excluded), then filtered in order by height, neighbor threshold,
/// distance (higher peak wins, ties keep the rightmost), prominence and
/// width at half prominence. Ascending index order.
[[nodiscard]] inline std::vector<PeakIndex> find_peak_indices(const std::vector<double>& x, const PeakParams& p) {
    std::vector<std::size_t> peaks;
    const std::size_t n = x.size();
    if (n < 3) return {};
    for (std::size_t i = 1; i + 1 < n;) {
        if (x[i - 1] < x[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
            if (x[ahead] < x[i]) {
                peaks.push_back((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        ++i;
    }

    std::erase_if(peaks, [&](std::size_t i) { return !(x[i] >= p.min_frequency); });
    std::erase_if(peaks, [&](std::size_t i) {
        return !(x[i] - x[i - 1] >= p.vert_distance && x[i] - x[i + 1] >= p.vert_distance);
    });

    if (p.horiz_distance > 0.0 && peaks.size() > 1) {
        const auto dist = static_cast<std::size_t>(std::ceil(p.horiz_distance));
        std::vector<std::size_t> order(peaks.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return x[peaks[a]] != x[peaks[b]] ? x[peaks[a]] > x[peaks[b]] : a > b;
        });
        std::vector<std::uint8_t> keep(peaks.size(), 1);
        for (std::size_t j : order) {
            if (!keep[j]) continue;
            for (std::size_t k = j; k-- > 0 && peaks[j] - peaks[k] < dist;) keep[k] = 0;
            for (std::size_t k = j + 1; k < peaks.size() && peaks[k] - peaks[j] < dist; ++k) keep[k] = 0;
        }
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < peaks.size(); ++i) {
            if (keep[i]) kept.push_back(peaks[i]);
        }
        peaks = std::move(kept);
    }

    std::vector<PeakIndex> out;
    for (std::size_t pk : peaks) {
        PeakIndex r{pk, x[pk], 0.0, pk, pk, 0.0};
        double left_min = x[pk];
        for (std::size_t i = pk + 1; i-- > 0 && x[i] <= x[pk];) {
            if (x[i] < left_min) {
                left_min = x[i];
                r.left_base = i;
            }
        }
        double right_min = x[pk];
        for (std::size_t i = pk; i < n && x[i] <= x[pk]; ++i) {
            if (x[i] < right_min) {
                right_min = x[i];
                r.right_base = i;
            }
        }
        r.prominence = x[pk] - std::max(left_min, right_min);
        if (!(r.prominence >= p.prominence)) continue;

        const double h = x[pk] - 0.5 * r.prominence;
        std::size_t i = pk;
        while (r.left_base < i && h < x[i]) --i;
        double left_ip = static_cast<double>(i);
        if (x[i] < h) left_ip += (h - x[i]) / (x[i + 1] - x[i]);
        i = pk;
        while (i < r.right_base && h < x[i]) ++i;
        double right_ip = static_cast<double>(i);
        if (x[i] < h) right_ip -= (h - x[i]) / (x[i - 1] - x[i]);
        r.width = right_ip - left_ip;
        if (!(r.width >= p.width)) continue;
        out.push_back(r);
    }
    return out;
}

/// A detected peak on the native gray scale. `assigned_class` is 0..4 for
/// A..E, or -1.
struct Peak {
    double gray = 0.0;
    double height = 0.0;
    double prominence = 0.0;
    int assigned_class = -1;
};

[[nodiscard]] inline std::vector<Peak> find_peaks(const BinnedHistogram& h, const PeakParams& p) {
    std::vector<Peak> out;
    for (const auto& r : find_peak_indices(h.freq, p)) out.push_back({h.centers[r.index], r.height, r.prominence, -1});
    return out;
}

/// Per-class thresholds and densities; classes with no MaxGreyValue are absent.
struct ClassTable {
    std::array<std::optional<double>, 5> max_gray;
    std::array<double, 5> density{1.0, 1.0, 1.0, 1.0, 1.0};
    double background_q = 0.0;
    bool enable_pvb = true;

    static ClassTable from(const MineralogyParams& m) { return {m.max_grey, m.density, m.background_q, m.enable_pvb}; }

    /// Class whose interval (previous max, max] holds g, or -1.
    [[nodiscard]] int class_of(double g) const noexcept {
        double lower = background_q;
        for (int c = 0; c < 5; ++c) {
            if (!max_gray[static_cast<std::size_t>(c)]) continue;
            const double upper = *max_gray[static_cast<std::size_t>(c)];
            if (g > lower && g <= upper) return c;
            lower = upper;
        }
        return -1;
    }
};

/// Representative peak gray per class (highest peak in the class interval).
using ClassPeaks = std::array<std::optional<double>, 5>;

/// Labels each peak with its class; only the highest peak per class keeps
/// the label (earlier peak on equal height).
[[nodiscard]] inline ClassPeaks assign_classes(std::vector<Peak>& peaks, const ClassTable& classes) {
    ClassPeaks reps;
    std::array<int, 5> best{-1, -1, -1, -1, -1};
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const int c = classes.class_of(peaks[i].gray);
        peaks[i].assigned_class = -1;
        if (c < 0) continue;
        auto& b = best[static_cast<std::size_t>(c)];
        if (b < 0 || peaks[i].height > peaks[static_cast<std::size_t>(b)].height) b = static_cast<int>(i);
    }
    for (std::size_t c = 0; c < 5; ++c) {
        if (best[c] < 0) continue;
        peaks[static_cast<std::size_t>(best[c])].assigned_class = static_cast<int>(c);
        reps[c] = peaks[static_cast<std::size_t>(best[c])].gray;
    }
    return reps;
}

/// rebin → optional smoothing → find_peaks, as configured by `m`. The series
/// is padded with one empty bin on each side so a class sitting at gray 0
/// or 65535 can still form a peak.
[[nodiscard]] inline std::vector<Peak> detect_peaks(const std::map<GrayValue, std::uint64_t>& counts,
                                                    const MineralogyParams& m) {
    BinnedHistogram h = rebin(counts, static_cast<std::size_t>(m.bin_input));
    if (m.enable_savgol) h.freq = savgol_smooth(h.freq, m.savgol_input);
    const double step = h.centers.size() > 1 ? h.centers[1] - h.centers[0] : 1.0;
    h.freq.insert(h.freq.begin(), 0.0);
    h.freq.push_back(0.0);
    h.centers.insert(h.centers.begin(), h.centers.front() - step);
    h.centers.push_back(h.centers.back() + step);
    return find_peaks(h, PeakParams::from(m));
}

}  // namespace ctquant
