#pragma once

// Brute-force reference implementations used only by the tests. They are
// written for clarity over speed and share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ctquant/volume.hpp"

namespace oracle {

using ctquant::BinaryMask;
using ctquant::Dims;
using ctquant::Label;
using ctquant::LabelVolume;

/// 26-connected components by breadth-first search.
inline LabelVolume bfs_components(const BinaryMask& mask) {
    const Dims d = mask.dims();
    LabelVolume out(d);
    Label next = 0;
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x) || out(z, y, x)) continue;
                ++next;
                std::deque<std::array<std::int64_t, 3>> queue{{static_cast<std::int64_t>(z), static_cast<std::int64_t>(y),
                                                               static_cast<std::int64_t>(x)}};
                out(z, y, x) = next;
                while (!queue.empty()) {
                    const auto [cz, cy, cx] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz) {
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                const std::int64_t nz = cz + dz, ny = cy + dy, nx = cx + dx;
                                if (!mask.contains(nz, ny, nx)) continue;
                                const auto uz = static_cast<std::size_t>(nz), uy = static_cast<std::size_t>(ny),
                                           ux = static_cast<std::size_t>(nx);
                                if (!mask(uz, uy, ux) || out(uz, uy, ux)) continue;
                                out(uz, uy, ux) = next;
                                queue.push_back({nz, ny, nx});
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// True when both label volumes induce the same partition of the voxels
/// (same background, and a bijection between label values).
inline bool same_partition(const LabelVolume& a, const LabelVolume& b) {
    if (a.dims() != b.dims()) return false;
    std::map<Label, Label> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == 0) != (b[i] == 0)) return false;
        if (a[i] == 0) continue;
        const auto [it1, new1] = ab.emplace(a[i], b[i]);
        const auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) return false;
    }
    return true;
}

/// Voxels whose six face neighbors all lie in the mask; outside is empty.
inline BinaryMask erode(const BinaryMask& mask) {
    BinaryMask out(mask.dims());
    const Dims d = mask.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                const auto at = [&](std::int64_t dz, std::int64_t dy, std::int64_t dx) {
                    return mask.get_or(static_cast<std::int64_t>(z) + dz, static_cast<std::int64_t>(y) + dy,
                                       static_cast<std::int64_t>(x) + dx, 0) != 0;
                };
                out(z, y, x) = at(-1, 0, 0) && at(1, 0, 0) && at(0, -1, 0) && at(0, 1, 0) && at(0, 0, -1) && at(0, 0, 1);
            }
        }
    }
    return out;
}

/// Euler characteristic of the union of closed unit cubes, counted on the
/// cell complex with explicit sets of vertices, edges, squares and cubes.
/// Cells are keyed by doubled coordinates so a cell's key is its center.
inline std::int64_t cubical_euler(const BinaryMask& mask) {
    std::set<std::tuple<int, int, int>> cells[4];
    const Dims d = mask.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                const int cz = 2 * static_cast<int>(z) + 1, cy = 2 * static_cast<int>(y) + 1, cx = 2 * static_cast<int>(x) + 1;
                for (int dz = -1; dz <= 1; ++dz) {
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            // dimension of a face = number of axes at the cube's center coordinate
                            const int dim = (dz == 0) + (dy == 0) + (dx == 0);
                            cells[dim].emplace(cz + dz, cy + dy, cx + dx);
                        }
                    }
                }
            }
        }
    }
    return static_cast<std::int64_t>(cells[0].size()) - static_cast<std::int64_t>(cells[1].size()) +
           static_cast<std::int64_t>(cells[2].size()) - static_cast<std::int64_t>(cells[3].size());
}

/// Random mask of the given density.
inline BinaryMask random_mask(std::mt19937_64& rng, Dims d, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(d);
    for (auto& v : m.values()) v = on(rng) ? 1 : 0;
    return m;
}

/// Union of random balls: a lumpy blob that usually has a thick interior.
inline BinaryMask random_blob(std::mt19937_64& rng, Dims d, int balls) {
    BinaryMask m(d);
    std::uniform_real_distribution<double> uz(2.0, static_cast<double>(d.z) - 3.0);
    std::uniform_real_distribution<double> uy(2.0, static_cast<double>(d.y) - 3.0);
    std::uniform_real_distribution<double> ux(2.0, static_cast<double>(d.x) - 3.0);
    std::uniform_real_distribution<double> ur(1.5, static_cast<double>(std::min({d.z, d.y, d.x})) / 3.0);
    for (int b = 0; b < balls; ++b) {
        const double cz = uz(rng), cy = uy(rng), cx = ux(rng), r = ur(rng);
        for (std::size_t z = 0; z < d.z; ++z) {
            for (std::size_t y = 0; y < d.y; ++y) {
                for (std::size_t x = 0; x < d.x; ++x) {
                    const double dz = static_cast<double>(z) - cz, dy = static_cast<double>(y) - cy,
                                 dx = static_cast<double>(x) - cx;
                    if (dz * dz + dy * dy + dx * dx < r * r) m(z, y, x) = 1;
                }
            }
        }
    }
    return m;
}

/// Ball of radius r centered on voxel (c, c, c), strict inequality.
inline BinaryMask ball(std::size_t n, double c, double r) {
    BinaryMask m({n, n, n});
    for (std::size_t z = 0; z < n; ++z) {
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                const double dz = static_cast<double>(z) - c, dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
                m(z, y, x) = dz * dz + dy * dy + dx * dx < r * r ? 1 : 0;
            }
        }
    }
    return m;
}

/// Solid box [lo, lo + side) in every axis inside an n³ volume.
inline BinaryMask cube(std::size_t n, std::size_t lo, std::size_t side) {
    BinaryMask m({n, n, n});
    for (std::size_t z = lo; z < lo + side; ++z) {
        for (std::size_t y = lo; y < lo + side; ++y) {
            for (std::size_t x = lo; x < lo + side; ++x) m(z, y, x) = 1;
        }
    }
    return m;
}

// ---------------------------------------------------------------- peaks

struct PeakRecord {
    std::size_t index = 0;
    double prominence = 0.0;
    double width = 0.0;
};

struct PeakFilter {
    double height = 0.0;
    double threshold = 0.0;
    double distance = 0.0;
    double prominence = 0.0;
    double width = 0.0;
};

/// Local maxima by enumerating maximal runs of equal samples; a run is a
/// peak when both neighbors exist and are strictly lower. The run's
/// midpoint (rounded down) is reported.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& x) {
    std::vector<std::size_t> out;
    std::size_t l = 0;
    while (l < x.size()) {
        std::size_t r = l;
        while (r + 1 < x.size() && x[r + 1] == x[l]) ++r;
        if (l > 0 && r + 1 < x.size() && x[l - 1] < x[l] && x[r + 1] < x[l]) out.push_back((l + r) / 2);
        l = r + 1;
    }
    return out;
}

/// Prominence with its bases: the lowest point of each side's reach, where
/// a side reaches every sample up to the first one higher than the peak.
inline std::tuple<double, std::size_t, std::size_t> prominence(const std::vector<double>& x, std::size_t p) {
    std::size_t a = p;
    while (a > 0 && x[a - 1] <= x[p]) --a;
    std::size_t b = p;
    while (b + 1 < x.size() && x[b + 1] <= x[p]) ++b;
    // among equal minima, the one nearest the peak is the base
    std::size_t lb = p;
    for (std::size_t i = a; i <= p; ++i) {
        if (x[i] <= x[lb] && (x[i] < x[lb] || i > lb)) lb = i;
    }
    std::size_t rb = p;
    for (std::size_t i = b + 1; i-- > p;) {
        if (x[i] <= x[rb] && (x[i] < x[rb] || i < rb)) rb = i;
    }
    return {x[p] - std::max(x[lb], x[rb]), lb, rb};
}

/// Width at half prominence with linear interpolation between samples.
inline double half_width(const std::vector<double>& x, std::size_t p, double prom, std::size_t lb, std::size_t rb) {
    const double h = x[p] - 0.5 * prom;
    // last sample at or below h on the left within [lb, p]
    std::size_t i = lb;
    for (std::size_t k = lb; k <= p; ++k) {
        if (x[k] <= h) i = k;
    }
    double left = static_cast<double>(i);
    if (x[i] < h) left += (h - x[i]) / (x[i + 1] - x[i]);
    std::size_t j = rb;
    for (std::size_t k = rb + 1; k-- > p;) {
        if (x[k] <= h) j = k;
    }
    double right = static_cast<double>(j);
    if (x[j] < h) right -= (h - x[j]) / (x[j - 1] - x[j]);
    return right - left;
}

inline std::vector<PeakRecord> find_peaks(const std::vector<double>& x, const PeakFilter& f) {
    std::vector<std::size_t> peaks;
    for (std::size_t p : local_maxima(x)) {
        if (x[p] >= f.height && x[p] - x[p - 1] >= f.threshold && x[p] - x[p + 1] >= f.threshold) peaks.push_back(p);
    }
    if (f.distance > 0.0) {
        // visit by (height, index) descending; keep a peak when no kept peak is closer than the distance
        std::vector<std::size_t> order = peaks;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::make_pair(x[a], a) > std::make_pair(x[b], b);
        });
        const double dist = std::ceil(f.distance);
        std::vector<std::size_t> kept;
        for (std::size_t p : order) {
            const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
                return std::abs(static_cast<double>(k) - static_cast<double>(p)) >= dist;
            });
            if (clear) kept.push_back(p);
        }
        std::sort(kept.begin(), kept.end());
        peaks = kept;
    }
    std::vector<PeakRecord> out;
    for (std::size_t p : peaks) {
        const auto [prom, lb, rb] = prominence(x, p);
        if (prom < f.prominence) continue;
        const double w = half_width(x, p, prom, lb, rb);
        if (w < f.width) continue;
        out.push_back({p, prom, w});
    }
    return out;
}

// ---------------------------------------------------------------- files

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oracle
