#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ctquant/convex_hull.hpp"
#include "ctquant/error.hpp"
#include "ctquant/histograms.hpp"
#include "ctquant/marching_cubes.hpp"
#include "ctquant/parallel.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/regions.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Exponents (p, q, r) on (z, y, x) of the 20 central moments up to order 3.
[[nodiscard]] inline const std::vector<std::array<int, 3>>& moment_exponents() {
    static const std::vector<std::array<int, 3>> exps = [] {
        std::vector<std::array<int, 3>> e;
        for (int order = 0; order <= 3; ++order) {
            for (int p = order; p >= 0; --p) {
                for (int q = order - p; q >= 0; --q) e.push_back({p, q, order - p - q});
            }
        }
        return e;
    }();
    return exps;
}

/// Lengths in µm (voxel_size units), areas in µm², volumes in µm³. Inertia
/// eigenvalues and moments stay in voxel units. NaN marks a value that
/// could not be computed.
struct RegionProperties {
    Label label = 0;
    std::string status = "ok";
    double volume = kNaN;
    double surface_area = kNaN;
    double min_gray = kNaN;
    double max_gray = kNaN;
    double mean_gray = kNaN;
    std::array<double, 3> centroid{kNaN, kNaN, kNaN};
    double equivalent_diameter = kNaN;
    double feret_min = kNaN;
    double feret_max = kNaN;
    double mean_over_max = kNaN;
    std::array<double, 3> inertia{kNaN, kNaN, kNaN};
    double entropy = kNaN;
    double aspect_ratio = kNaN;
    std::vector<double> moments;
    double euler_number = kNaN;
    double solidity = kNaN;
};

struct BasicProperties {
    double volume = 0.0;
    double min_gray = 0.0;
    double max_gray = 0.0;
    double mean_gray = 0.0;
    std::array<double, 3> centroid{};
    double equivalent_diameter = 0.0;
};

[[nodiscard]] inline BasicProperties basic_properties(const RegionData& r, double voxel_size) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    const Dims d = r.mask.dims();
    std::uint64_t n = 0;
    std::uint64_t gray_sum = 0;
    GrayValue lo = 65535;
    GrayValue hi = 0;
    std::array<double, 3> pos_sum{};
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!r.mask(z, y, x)) continue;
                const GrayValue g = r.gray(z, y, x);
                ++n;
                gray_sum += g;
                lo = std::min(lo, g);
                hi = std::max(hi, g);
                pos_sum[0] += static_cast<double>(z);
                pos_sum[1] += static_cast<double>(y);
                pos_sum[2] += static_cast<double>(x);
            }
        }
    }
    if (n == 0) throw Error(ErrorCode::empty_region, "region is empty");
    BasicProperties b;
    const double s = voxel_size;
    b.volume = static_cast<double>(n) * s * s * s;
    b.min_gray = lo;
    b.max_gray = hi;
    b.mean_gray = static_cast<double>(gray_sum) / static_cast<double>(n);
    for (std::size_t a = 0; a < 3; ++a) {
        b.centroid[a] = (static_cast<double>(r.origin[a]) + pos_sum[a] / static_cast<double>(n)) * s;
    }
    b.equivalent_diameter = std::cbrt(6.0 * b.volume / std::numbers::pi);
    return b;
}

/// Euler characteristic V - E + F - C of the union of closed unit cubes.
[[nodiscard]] inline std::int64_t euler_number(const BinaryMask& mask) {
    const Dims d = mask.dims();
    const auto at = [&](std::int64_t z, std::int64_t y, std::int64_t x) { return mask.get_or(z, y, x, 0) != 0; };
    std::int64_t v = 0, e = 0, f = 0, c = 0;
    for (std::int64_t z = 0; z <= static_cast<std::int64_t>(d.z); ++z) {
        for (std::int64_t y = 0; y <= static_cast<std::int64_t>(d.y); ++y) {
            for (std::int64_t x = 0; x <= static_cast<std::int64_t>(d.x); ++x) {
                // corner (z, y, x) touches voxels (z - dz, y - dy, x - dx), d* in {0, 1}
                bool vox[2][2][2];
                bool any = false;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            vox[dz][dy][dx] = at(z - dz, y - dy, x - dx);
                            any = any || vox[dz][dy][dx];
                        }
                if (any) ++v;
                // edges starting at this corner along z, y, x
                if (vox[0][0][0] || vox[0][1][0] || vox[0][0][1] || vox[0][1][1]) ++e;  // along z
                if (vox[0][0][0] || vox[1][0][0] || vox[0][0][1] || vox[1][0][1]) ++e;  // along y
                if (vox[0][0][0] || vox[1][0][0] || vox[0][1][0] || vox[1][1][0]) ++e;  // along x
                // faces spanned from this corner, perpendicular to z, y, x
                if (vox[0][0][0] || vox[1][0][0]) ++f;
                if (vox[0][0][0] || vox[0][1][0]) ++f;
                if (vox[0][0][0] || vox[0][0][1]) ++f;
                if (vox[0][0][0]) ++c;
            }
        }
    }
    return v - e + f - c;
}

struct ShapeDescriptors {
    std::array<double, 3> inertia{};
    double entropy = 0.0;
    double aspect_ratio = 1.0;
    std::vector<double> moments;
    std::int64_t euler_number = 0;
    double solidity = 1.0;
    double mean_over_max = 0.0;
};

/// Eigenvalues (ascending) of Σ (p - c)(p - c)ᵀ over voxel centers.
[[nodiscard]] inline std::array<double, 3> inertia_eigenvalues(const BinaryMask& mask) {
    const Dims d = mask.dims();
    double n = 0.0;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x)
                if (mask(z, y, x)) {
                    sum += Eigen::Vector3d(static_cast<double>(z), static_cast<double>(y), static_cast<double>(x));
                    n += 1.0;
                }
    if (n == 0.0) throw Error(ErrorCode::empty_region, "region is empty");
    const Eigen::Vector3d c = sum / n;
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x)
                if (mask(z, y, x)) {
                    const Eigen::Vector3d p =
                        Eigen::Vector3d(static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)) - c;
                    m += p * p.transpose();
                }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev[0], ev[1], ev[2]};
}

/// Central moments of the binary mask in `moment_exponents()` order.
[[nodiscard]] inline std::vector<double> central_moments(const BinaryMask& mask) {
    const Dims d = mask.dims();
    double n = 0.0;
    std::array<double, 3> c{};
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x)
                if (mask(z, y, x)) {
                    c[0] += static_cast<double>(z);
                    c[1] += static_cast<double>(y);
                    c[2] += static_cast<double>(x);
                    n += 1.0;
                }
    if (n == 0.0) throw Error(ErrorCode::empty_region, "region is empty");
    for (auto& v : c) v /= n;
    const auto& exps = moment_exponents();
    std::vector<double> mu(exps.size(), 0.0);
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                const std::array<double, 3> p{static_cast<double>(z) - c[0], static_cast<double>(y) - c[1],
                                              static_cast<double>(x) - c[2]};
                std::array<std::array<double, 4>, 3> pw{};
                for (std::size_t a = 0; a < 3; ++a) {
                    pw[a][0] = 1.0;
                    for (std::size_t k = 1; k < 4; ++k) pw[a][k] = pw[a][k - 1] * p[a];
                }
                for (std::size_t i = 0; i < exps.size(); ++i) {
                    mu[i] += pw[0][static_cast<std::size_t>(exps[i][0])] * pw[1][static_cast<std::size_t>(exps[i][1])] *
                             pw[2][static_cast<std::size_t>(exps[i][2])];
                }
            }
    return mu;
}

/// Shannon entropy (bits) of the 256-bin (g >> 8) gray histogram.
[[nodiscard]] inline double gray_entropy(const RegionData& r) {
    std::array<std::uint64_t, 256> bins{};
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
        if (!r.mask[i]) continue;
        ++bins[r.gray[i] >> 8];
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::empty_region, "region is empty");
    double h = 0.0;
    for (auto b : bins) {
        if (b == 0) continue;
        const double p = static_cast<double>(b) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h == 0.0 ? 0.0 : h;
}

[[nodiscard]] inline ShapeDescriptors shape_descriptors(const RegionData& r) {
    if (r.count == 0) throw Error(ErrorCode::empty_region, "region is empty");
    ShapeDescriptors s;
    s.inertia = inertia_eigenvalues(r.mask);
    s.entropy = gray_entropy(r);
    const double ez = static_cast<double>(r.box.extent(0));
    const double ey = static_cast<double>(r.box.extent(1));
    const double ex = static_cast<double>(r.box.extent(2));
    s.aspect_ratio = std::max({ez, ey, ex}) / std::min({ez, ey, ex});
    s.moments = central_moments(r.mask);
    s.euler_number = euler_number(r.mask);
    s.solidity = static_cast<double>(r.count) / voxel_hull_volume(r.mask);
    const auto basic = basic_properties(r, 1.0);
    s.mean_over_max = basic.max_gray > 0.0 ? basic.mean_gray / basic.max_gray : 0.0;
    return s;
}

/// Properties of one region honoring the per-property flags. Failures of
/// the mesh step leave the mesh-based fields NaN and set `status`.
[[nodiscard]] inline RegionProperties region_properties(const RegionData& r, const ExtractionParams& p) {
    RegionProperties out;
    out.label = r.label;
    const double s = p.voxel_size;
    const auto basic = basic_properties(r, s);
    out.volume = basic.volume;
    out.min_gray = basic.min_gray;
    out.max_gray = basic.max_gray;
    out.mean_gray = basic.mean_gray;
    out.centroid = basic.centroid;
    out.equivalent_diameter = basic.equivalent_diameter;
    if (p.basic_properties || p.ferets) {
        try {
            const auto mesh = build_surface_mesh(r.mask, p.mesh_spacing);
            out.surface_area = surface_area(mesh, s);
            if (p.ferets) {
                const auto f = feret_diameters(mesh.vertices, p.feret_angle, s);
                out.feret_min = f.min;
                out.feret_max = f.max;
            }
        } catch (const Error& e) {
            out.status = std::string(to_string(e.code()));
        }
    }
    if (p.mean_max) out.mean_over_max = basic.max_gray > 0.0 ? basic.mean_gray / basic.max_gray : 0.0;
    if (p.inertia) out.inertia = inertia_eigenvalues(r.mask);
    if (p.entropy) out.entropy = gray_entropy(r);
    if (p.aspect_ratio) {
        const double ez = static_cast<double>(r.box.extent(0));
        const double ey = static_cast<double>(r.box.extent(1));
        const double ex = static_cast<double>(r.box.extent(2));
        out.aspect_ratio = std::max({ez, ey, ex}) / std::min({ez, ey, ex});
    }
    if (p.moments) out.moments = central_moments(r.mask);
    if (p.euler) out.euler_number = static_cast<double>(euler_number(r.mask));
    if (p.solidity) out.solidity = static_cast<double>(r.count) / voxel_hull_volume(r.mask);
    return out;
}

struct ExtractionResult {
    std::vector<RegionProperties> properties;
    std::vector<RegionHistograms> histograms;
};

/// Region-parallel extraction. Rows come back in ascending label order
/// whatever the thread count. A region whose computation throws keeps a
/// row with `status` set to the error code.
[[nodiscard]] inline ExtractionResult extract_all(const GrayVolume& vol, const LabelVolume& labels,
                                                  const ExtractionParams& p) {
    if (vol.dims() != labels.dims()) throw Error(ErrorCode::shape_mismatch, "labels and volume differ in shape");
    const auto bounds = extract_bounding_regions(labels);
    ExtractionResult out;
    out.properties.resize(bounds.size());
    out.histograms.resize(bounds.size());
    parallel_for(bounds.size(), p.num_threads, [&](std::size_t i) {
        auto& props = out.properties[i];
        props.label = bounds[i].label;
        try {
            const RegionData r = crop_region(vol.voxels, labels, bounds[i]);
            props = region_properties(r, p);
            if (p.histogram) out.histograms[i] = compute_region_histograms(r);
        } catch (const Error& e) {
            props.status = std::string(to_string(e.code()));
        }
    });
    return out;
}

}  // namespace ctquant
