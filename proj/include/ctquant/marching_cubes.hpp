#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

/// Vertices are (z, y, x) in voxel units of the source mask; voxel centers
/// sit on integer coordinates. Triangles wind counter-clockwise seen from
/// the background side in right-handed (x, y, z) space.
struct TriangleMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

namespace detail {

// Corner c of a cell sits at (x, y, z) = (c & 1, c >> 1 & 1, c >> 2 & 1).
// Each face lists its corners counter-clockwise seen from outside the cell.
inline constexpr std::array<std::array<int, 4>, 6> kCellFaces{{
    {0, 4, 6, 2},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 6, 7, 3},  // y = 1
    {0, 2, 3, 1},  // z = 0
    {4, 5, 7, 6},  // z = 1
}};

// Cell edge between corners a and b (differing in one bit): local id.
constexpr int cell_edge(int a, int b) noexcept {
    const int lo = a < b ? a : b;
    const int bit = a ^ b;
    const int axis = bit == 1 ? 0 : (bit == 2 ? 1 : 2);
    // lo has the axis bit clear; pack the remaining two bits
    int rest = 0;
    int k = 0;
    for (int i = 0; i < 3; ++i) {
        if (i == axis) continue;
        rest |= ((lo >> i) & 1) << k;
        ++k;
    }
    return axis * 4 + rest;
}

}  // namespace detail

/// Marching cubes of the 0/1 field of `mask` at iso-level 0.5, sampled every
/// `spacing` voxels. The field is padded with background so the surface is
/// always closed. Vertices lie on cell-edge midpoints, plus one centroid
/// vertex per loop of five or more edges. Ambiguous faces join the
/// foreground corners, which keeps neighboring cells consistent.
[[nodiscard]] inline TriangleMesh build_surface_mesh(const BinaryMask& mask, int spacing = 1) {
    if (spacing < 1) throw Error(ErrorCode::validation, "mesh_spacing must be >= 1", {"mesh_spacing"});
    const Dims d = mask.dims();
    std::array<std::int64_t, 3> lo{INT64_MAX, INT64_MAX, INT64_MAX};
    std::array<std::int64_t, 3> hi{INT64_MIN, INT64_MIN, INT64_MIN};
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                const std::array<std::int64_t, 3> p{static_cast<std::int64_t>(x), static_cast<std::int64_t>(y),
                                                    static_cast<std::int64_t>(z)};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], p[a]);
                    hi[a] = std::max(hi[a], p[a]);
                }
            }
        }
    }
    if (lo[0] == INT64_MAX) throw Error(ErrorCode::empty_region, "cannot mesh an empty region");
    for (int a = 0; a < 3; ++a) {
        if (hi[a] - lo[a] + 1 < spacing) {
            throw Error(ErrorCode::degenerate_mesh, "region is thinner than mesh_spacing");
        }
    }

    // Sample q = i * spacing in padded coordinates (voxel v sits at q = v + 1).
    const std::int64_t s = spacing;
    const std::array<std::int64_t, 3> extent{static_cast<std::int64_t>(d.x), static_cast<std::int64_t>(d.y),
                                             static_cast<std::int64_t>(d.z)};
    std::array<std::int64_t, 3> n{};
    for (int a = 0; a < 3; ++a) n[a] = (extent[a] + 1 + s - 1) / s + 1;
    const auto sample = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> bool {
        return mask.get_or(k * s - 1, j * s - 1, i * s - 1, 0) != 0;
    };

    TriangleMesh mesh;
    std::unordered_map<std::int64_t, std::uint32_t> vertex_of;
    const auto vertex = [&](std::int64_t i, std::int64_t j, std::int64_t k, int axis) -> std::uint32_t {
        const std::int64_t key = ((k * n[1] + j) * n[0] + i) * 3 + axis;
        const auto [it, inserted] = vertex_of.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
            std::array<double, 3> xyz{static_cast<double>(i * s - 1), static_cast<double>(j * s - 1),
                                      static_cast<double>(k * s - 1)};
            xyz[axis] += 0.5 * static_cast<double>(s);
            mesh.vertices.push_back({xyz[2], xyz[1], xyz[0]});
        }
        return it->second;
    };

    for (std::int64_t k = 0; k + 1 < n[2]; ++k) {
        for (std::int64_t j = 0; j + 1 < n[1]; ++j) {
            for (std::int64_t i = 0; i + 1 < n[0]; ++i) {
                std::array<bool, 8> in{};
                int inside = 0;
                for (int c = 0; c < 8; ++c) {
                    in[c] = sample(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    inside += in[c] ? 1 : 0;
                }
                if (inside == 0 || inside == 8) continue;

                std::array<int, 12> next;
                next.fill(-1);
                for (const auto& face : detail::kCellFaces) {
                    std::array<int, 4> edge{};
                    std::array<int, 4> kind{};  // +1 exit (in -> out), -1 entry, 0 none
                    for (int e = 0; e < 4; ++e) {
                        const int a = face[e];
                        const int b = face[(e + 1) % 4];
                        edge[e] = detail::cell_edge(a, b);
                        kind[e] = in[a] == in[b] ? 0 : (in[a] ? 1 : -1);
                    }
                    for (int e = 0; e < 4; ++e) {
                        if (kind[e] != 1) continue;
                        for (int step = 1; step < 4; ++step) {
                            const int f = (e + step) % 4;
                            if (kind[f] == -1) {
                                next[edge[e]] = edge[f];
                                break;
                            }
                        }
                    }
                }

                std::array<bool, 12> used{};
                for (int start = 0; start < 12; ++start) {
                    if (next[start] < 0 || used[start]) continue;
                    std::vector<std::uint32_t> loop;
                    for (int e = start; !used[e]; e = next[e]) {
                        used[e] = true;
                        const int axis = e / 4;
                        const int rest = e % 4;
                        // reconstruct the lower corner of the edge
                        std::array<std::int64_t, 3> off{0, 0, 0};
                        int kbit = 0;
                        for (int a = 0; a < 3; ++a) {
                            if (a == axis) continue;
                            off[a] = (rest >> kbit) & 1;
                            ++kbit;
                        }
                        loop.push_back(vertex(i + off[0], j + off[1], k + off[2], axis));
                    }
                    // the edge-loop runs clockwise seen from outside; reverse it
                    if (loop.size() <= 4) {
                        for (std::size_t t = 1; t + 1 < loop.size(); ++t) {
                            mesh.triangles.push_back({loop[0], loop[t + 1], loop[t]});
                        }
                        continue;
                    }
                    // longer loops can hold a fan diagonal lying in a cell face, which would
                    // duplicate a face segment; fan around the loop centroid instead
                    std::array<double, 3> c{0.0, 0.0, 0.0};
                    for (auto v : loop) {
                        for (int a = 0; a < 3; ++a) c[a] += mesh.vertices[v][a];
                    }
                    for (auto& x : c) x /= static_cast<double>(loop.size());
                    const auto center = static_cast<std::uint32_t>(mesh.vertices.size());
                    mesh.vertices.push_back(c);
                    for (std::size_t t = 0; t < loop.size(); ++t) {
                        mesh.triangles.push_back({center, loop[(t + 1) % loop.size()], loop[t]});
                    }
                }
            }
        }
    }
    if (mesh.triangles.empty()) throw Error(ErrorCode::degenerate_mesh, "sampling grid missed the region");
    return mesh;
}

/// Sum of triangle areas times voxel_size².
[[nodiscard]] inline double surface_area(const TriangleMesh& mesh, double voxel_size = 1.0) {
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[t[0]];
        const auto& b = mesh.vertices[t[1]];
        const auto& c = mesh.vertices[t[2]];
        const std::array<double, 3> u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const std::array<double, 3> v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
        const double cx = u[1] * v[2] - u[2] * v[1];
        const double cy = u[2] * v[0] - u[0] * v[2];
        const double cz = u[0] * v[1] - u[1] * v[0];
        total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    }
    return total * voxel_size * voxel_size;
}

/// Enclosed volume by the divergence theorem, in (x, y, z) orientation.
/// Positive for a closed mesh with outward-facing triangles.
[[nodiscard]] inline double mesh_signed_volume(const TriangleMesh& mesh) {
    double six_v = 0.0;
    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[t[0]];
        const auto& b = mesh.vertices[t[1]];
        const auto& c = mesh.vertices[t[2]];
        // (x, y, z) = (v[2], v[1], v[0])
        six_v += a[2] * (b[1] * c[0] - b[0] * c[1]) - a[1] * (b[2] * c[0] - b[0] * c[2]) +
                 a[0] * (b[2] * c[1] - b[1] * c[2]);
    }
    return six_v / 6.0;
}

/// True iff every undirected edge is used by exactly two triangles, once in
/// each direction.
[[nodiscard]] inline bool mesh_is_closed(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) ++directed[{t[e], t[(e + 1) % 3]}];
    }
    for (const auto& [edge, count] : directed) {
        if (count != 1) return false;
        const auto it = directed.find({edge.second, edge.first});
        if (it == directed.end() || it->second != 1) return false;
    }
    return true;
}

struct FeretResult {
    double min = 0.0;
    double max = 0.0;
};

/// Unit directions (z, y, x) on the hemisphere: polar angle theta = k·a for
/// k = 0..floor(90/a), azimuth phi = j·a over [0, 360). For step sizes that
/// divide each other the coarser set is a subset of the finer one.
[[nodiscard]] inline std::vector<std::array<double, 3>> feret_directions(double angle_deg) {
    if (!(angle_deg > 0.0 && angle_deg <= 90.0)) {
        throw Error(ErrorCode::validation, "feret_angle must lie in (0, 90]", {"feret_angle"});
    }
    constexpr double kDeg = std::numbers::pi / 180.0;
    std::vector<std::array<double, 3>> dirs;
    const auto polar_steps = static_cast<int>(std::floor(90.0 / angle_deg + 1e-9));
    const auto azimuth_steps = static_cast<int>(std::ceil(360.0 / angle_deg - 1e-9));
    for (int k = 0; k <= polar_steps; ++k) {
        const double theta = k * angle_deg * kDeg;
        if (k == 0) {
            dirs.push_back({1.0, 0.0, 0.0});
            continue;
        }
        for (int j = 0; j < azimuth_steps; ++j) {
            const double phi = j * angle_deg * kDeg;
            dirs.push_back({std::cos(theta), std::sin(theta) * std::sin(phi), std::sin(theta) * std::cos(phi)});
        }
    }
    return dirs;
}

/// Min and max caliper extent of `points` over the sampled directions,
/// scaled by voxel_size.
[[nodiscard]] inline FeretResult feret_diameters(const std::vector<std::array<double, 3>>& points, double angle_deg,
                                                 double voxel_size = 1.0) {
    if (points.size() < 3) throw Error(ErrorCode::degenerate_mesh, "Feret diameters need at least 3 vertices");
    FeretResult r{INFINITY, 0.0};
    for (const auto& d : feret_directions(angle_deg)) {
        double lo = INFINITY;
        double hi = -INFINITY;
        for (const auto& p : points) {
            const double t = p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        r.min = std::min(r.min, hi - lo);
        r.max = std::max(r.max, hi - lo);
    }
    r.min *= voxel_size;
    r.max *= voxel_size;
    return r;
}

}  // namespace ctquant
