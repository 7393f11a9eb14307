#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

using IPoint3 = std::array<std::int64_t, 3>;

namespace detail {

inline std::int64_t orient3d(const IPoint3& a, const IPoint3& b, const IPoint3& c, const IPoint3& d) noexcept {
    const std::int64_t bx = b[0] - a[0], by = b[1] - a[1], bz = b[2] - a[2];
    const std::int64_t cx = c[0] - a[0], cy = c[1] - a[1], cz = c[2] - a[2];
    const std::int64_t dx = d[0] - a[0], dy = d[1] - a[1], dz = d[2] - a[2];
    return bx * (cy * dz - cz * dy) - by * (cx * dz - cz * dx) + bz * (cx * dy - cy * dx);
}

/// Andrew's monotone chain on (p[1], p[2]); collinear points are dropped.
inline std::vector<IPoint3> hull2d(std::vector<IPoint3> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    const auto cross = [](const IPoint3& o, const IPoint3& a, const IPoint3& b) {
        return (a[1] - o[1]) * (b[2] - o[2]) - (a[2] - o[2]) * (b[1] - o[1]);
    };
    std::vector<IPoint3> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

}  // namespace detail

/// Six times the volume of the convex hull of integer points, computed
/// exactly with an incremental hull. Returns 0 for degenerate input.
[[nodiscard]] inline std::int64_t convex_hull_volume6(std::vector<IPoint3> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 4) return 0;

    // initial tetrahedron
    std::size_t i1 = 1;
    std::size_t i2 = n;
    std::size_t i3 = n;
    for (std::size_t i = 2; i < n && i2 == n; ++i) {
        const IPoint3 u{pts[i1][0] - pts[0][0], pts[i1][1] - pts[0][1], pts[i1][2] - pts[0][2]};
        const IPoint3 v{pts[i][0] - pts[0][0], pts[i][1] - pts[0][1], pts[i][2] - pts[0][2]};
        const IPoint3 c{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
        if (c[0] != 0 || c[1] != 0 || c[2] != 0) i2 = i;
    }
    if (i2 == n) return 0;
    for (std::size_t i = 2; i < n && i3 == n; ++i) {
        if (detail::orient3d(pts[0], pts[i1], pts[i2], pts[i]) != 0) i3 = i;
    }
    if (i3 == n) return 0;

    struct Face {
        std::array<std::uint32_t, 3> v;
        bool alive = true;
    };
    std::vector<Face> faces;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_face;  // directed edge -> face
    const auto edge_key = [](std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; };
    const auto add_face = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        const auto id = static_cast<std::uint32_t>(faces.size());
        faces.push_back({{a, b, c}});
        edge_face[edge_key(a, b)] = id;
        edge_face[edge_key(b, c)] = id;
        edge_face[edge_key(c, a)] = id;
    };
    // faces are oriented so that orient3d(face, interior point) < 0
    auto a = static_cast<std::uint32_t>(0), b = static_cast<std::uint32_t>(i1), c = static_cast<std::uint32_t>(i2),
         d = static_cast<std::uint32_t>(i3);
    if (detail::orient3d(pts[a], pts[b], pts[c], pts[d]) > 0) std::swap(b, c);
    add_face(a, b, c);
    add_face(a, d, b);
    add_face(b, d, c);
    add_face(c, d, a);

    std::vector<std::uint32_t> visible;
    std::vector<std::uint8_t> is_visible;
    for (std::size_t pi = 0; pi < n; ++pi) {
        if (pi == a || pi == b || pi == c || pi == d) continue;
        const IPoint3& p = pts[pi];
        visible.clear();
        is_visible.assign(faces.size(), 0);
        for (std::uint32_t f = 0; f < faces.size(); ++f) {
            if (!faces[f].alive) continue;
            const auto& v = faces[f].v;
            if (detail::orient3d(pts[v[0]], pts[v[1]], pts[v[2]], p) > 0) {
                visible.push_back(f);
                is_visible[f] = 1;
            }
        }
        if (visible.empty()) continue;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> horizon;
        for (std::uint32_t f : visible) {
            const auto& v = faces[f].v;
            for (int e = 0; e < 3; ++e) {
                const std::uint32_t u = v[e];
                const std::uint32_t w = v[(e + 1) % 3];
                const std::uint32_t other = edge_face.at(edge_key(w, u));
                if (!is_visible[other]) horizon.emplace_back(u, w);
            }
        }
        for (std::uint32_t f : visible) {
            faces[f].alive = false;
            const auto& v = faces[f].v;
            for (int e = 0; e < 3; ++e) edge_face.erase(edge_key(v[e], v[(e + 1) % 3]));
        }
        for (const auto& [u, w] : horizon) add_face(u, w, static_cast<std::uint32_t>(pi));
    }

    std::int64_t six_v = 0;
    const IPoint3& o = pts[a];
    for (const auto& f : faces) {
        if (!f.alive) continue;
        six_v += detail::orient3d(o, pts[f.v[0]], pts[f.v[1]], pts[f.v[2]]);
    }
    return six_v;
}

/// Convex hull volume (voxel units) of the corner points of the set voxels.
[[nodiscard]] inline double voxel_hull_volume(const BinaryMask& mask) {
    const Dims d = mask.dims();
    // Per corner plane z = k, the row end corners of slices k-1 and k; only
    // their 2D hull vertices can be extreme in 3D.
    std::vector<std::vector<IPoint3>> plane_points(d.z + 1);
    for (std::size_t z = 0; z < d.z; ++z) {
        for (std::size_t y = 0; y < d.y; ++y) {
            std::int64_t first = -1;
            std::int64_t last = -1;
            for (std::size_t x = 0; x < d.x; ++x) {
                if (!mask(z, y, x)) continue;
                if (first < 0) first = static_cast<std::int64_t>(x);
                last = static_cast<std::int64_t>(x);
            }
            if (first < 0) continue;
            for (std::size_t dz = 0; dz < 2; ++dz) {
                auto& plane = plane_points[z + dz];
                const auto zc = static_cast<std::int64_t>(z + dz);
                for (std::int64_t dy = 0; dy < 2; ++dy) {
                    const auto yc = static_cast<std::int64_t>(y) + dy;
                    plane.push_back({zc, yc, first});
                    plane.push_back({zc, yc, last + 1});
                }
            }
        }
    }
    std::vector<IPoint3> candidates;
    for (auto& plane : plane_points) {
        const auto h = detail::hull2d(std::move(plane));
        candidates.insert(candidates.end(), h.begin(), h.end());
    }
    return static_cast<double>(convex_hull_volume6(std::move(candidates))) / 6.0;
}

}  // namespace ctquant
