#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/tiff_io.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

/// Gray value of class i (0-based): round(65535 · (i + 1) / 5).
[[nodiscard]] constexpr GrayValue phantom_class_gray(std::size_t i) noexcept {
    return static_cast<GrayValue>((65535 * (i + 1) * 2 + 5) / 10);
}

struct PhantomParticle {
    Index3 origin;
    int n_classes = 1;
};

/// Cubic particles whose classes are nested box shells: class A is the
/// outer shell, the last class the core. Each class only touches its
/// neighbors in class order, and only class A touches the background.
struct PhantomSpec {
    Dims dims{200, 200, 200};
    std::int64_t side = 40;
    std::int64_t shell = 4;
    std::vector<PhantomParticle> particles{
        {{20, 20, 20}, 1}, {{20, 20, 140}, 2}, {{20, 140, 80}, 3}, {{140, 20, 80}, 4}, {{140, 140, 140}, 5}};
    double sigma = 0.0;  // Gaussian blur, voxels
    double noise = 0.0;  // additive Gaussian noise, gray levels
    std::uint64_t seed = 0;
};

struct PhantomTruth {
    Index3 origin;
    int n_classes = 0;
    std::array<std::uint64_t, 5> voxels{};

    [[nodiscard]] std::uint64_t total() const noexcept {
        std::uint64_t n = 0;
        for (auto v : voxels) n += v;
        return n;
    }
    [[nodiscard]] double fraction(std::size_t c) const noexcept {
        return static_cast<double>(voxels[c]) / static_cast<double>(total());
    }
};

struct Phantom {
    GrayVolume volume;
    std::vector<PhantomTruth> truth;
};

inline void validate(const PhantomSpec& s) {
    std::vector<std::string> bad;
    if (s.dims.z < 1 || s.dims.y < 1 || s.dims.x < 1) bad.push_back("dims");
    if (s.side < 1) bad.push_back("side");
    if (s.shell < 1) bad.push_back("shell");
    if (s.sigma < 0.0) bad.push_back("sigma");
    if (s.noise < 0.0) bad.push_back("noise");
    for (const auto& p : s.particles) {
        if (p.n_classes < 1 || p.n_classes > 5 || 2 * s.shell * (p.n_classes - 1) >= s.side) {
            bad.push_back("n_classes");
            break;
        }
    }
    const auto box_of = [&](const PhantomParticle& p) {
        return Box{p.origin, {p.origin.z + s.side - 1, p.origin.y + s.side - 1, p.origin.x + s.side - 1}};
    };
    for (std::size_t i = 0; i < s.particles.size(); ++i) {
        const Box b = box_of(s.particles[i]);
        for (std::size_t a = 0; a < 3; ++a) {
            if (b.lo[a] < 1 || b.hi[a] + 1 >= static_cast<std::int64_t>(s.dims[a])) {
                bad.push_back("particles[" + std::to_string(i) + "]");
                break;
            }
        }
        for (std::size_t j = 0; j < i; ++j) {
            const Box o = box_of(s.particles[j]);
            bool apart = false;
            // one background voxel must separate particles, else they merge
            for (std::size_t a = 0; a < 3; ++a) apart = apart || b.lo[a] > o.hi[a] + 1 || o.lo[a] > b.hi[a] + 1;
            if (!apart) bad.push_back("particles[" + std::to_string(i) + "]");
        }
    }
    if (!bad.empty()) throw Error(ErrorCode::validation, "invalid phantom spec", bad);
}

namespace detail {

/// scipy-style "reflect" index: (d c b a | a b c d | d c b a).
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) noexcept {
    if (n == 1) return 0;
    const std::int64_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

inline void blur_axis(std::vector<double>& data, const Dims& d, std::size_t axis, const std::vector<double>& kernel) {
    const auto radius = static_cast<std::int64_t>(kernel.size() / 2);
    const std::size_t n = d[axis];
    const std::size_t stride = axis == 0 ? d.y * d.x : (axis == 1 ? d.x : 1);
    std::vector<double> line(n);
    std::vector<double> out(n);
    const std::size_t lines = d.voxels() / n;
    for (std::size_t l = 0; l < lines; ++l) {
        std::size_t base = 0;
        if (axis == 0) base = l;
        else if (axis == 1) base = (l / d.x) * d.y * d.x + l % d.x;
        else base = l * d.x;
        for (std::size_t i = 0; i < n; ++i) line[i] = data[base + i * stride];
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::int64_t k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       line[static_cast<std::size_t>(reflect_index(static_cast<std::int64_t>(i) + k, static_cast<std::int64_t>(n)))];
            }
            out[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) data[base + i * stride] = out[i];
    }
}

}  // namespace detail

/// Separable Gaussian (truncated at 4σ, reflective borders), rounded back
/// to 16 bits.
[[nodiscard]] inline Volume<GrayValue> gaussian_blur(const Volume<GrayValue>& vol, double sigma) {
    if (sigma <= 0.0) return vol;
    const auto radius = static_cast<std::int64_t>(4.0 * sigma + 0.5);
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::int64_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        sum += w;
    }
    for (auto& w : kernel) w /= sum;
    std::vector<double> data(vol.values().begin(), vol.values().end());
    for (std::size_t axis = 0; axis < 3; ++axis) detail::blur_axis(data, vol.dims(), axis, kernel);
    Volume<GrayValue> out(vol.dims());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<GrayValue>(std::clamp(std::round(data[i]), 0.0, 65535.0));
    return out;
}

/// Builds the phantom volume and its exact (unblurred) class voxel counts.
[[nodiscard]] inline Phantom generate_phantom(const PhantomSpec& spec) {
    validate(spec);
    Phantom ph{GrayVolume{Volume<GrayValue>(spec.dims), 1.0}, {}};
    auto& v = ph.volume.voxels;
    for (const auto& p : spec.particles) {
        PhantomTruth t{p.origin, p.n_classes, {}};
        for (std::int64_t z = 0; z < spec.side; ++z) {
            for (std::int64_t y = 0; y < spec.side; ++y) {
                for (std::int64_t x = 0; x < spec.side; ++x) {
                    // depth of the voxel below the particle surface, in shells
                    const std::int64_t inset = std::min({z, y, x, spec.side - 1 - z, spec.side - 1 - y, spec.side - 1 - x});
                    const auto c = static_cast<std::size_t>(std::min<std::int64_t>(inset / spec.shell, p.n_classes - 1));
                    v(static_cast<std::size_t>(p.origin.z + z), static_cast<std::size_t>(p.origin.y + y),
                      static_cast<std::size_t>(p.origin.x + x)) = phantom_class_gray(c);
                    ++t.voxels[c];
                }
            }
        }
        ph.truth.push_back(t);
    }
    if (spec.sigma > 0.0) v = gaussian_blur(v, spec.sigma);
    if (spec.noise > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> n(0.0, spec.noise);
        for (auto& g : v.values()) g = static_cast<GrayValue>(std::clamp(std::round(g + n(rng)), 0.0, 65535.0));
    }
    return ph;
}

[[nodiscard]] inline std::string phantom_truth_csv(const std::vector<PhantomTruth>& truth) {
    std::vector<std::string> header{"particle", "origin_z", "origin_y", "origin_x", "n_classes"};
    for (char c : {'A', 'B', 'C', 'D', 'E'}) header.push_back(std::string("voxels_") + c);
    for (char c : {'A', 'B', 'C', 'D', 'E'}) header.push_back(std::string("fraction_") + c);
    std::string out = join_csv(header);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& t = truth[i];
        std::vector<std::string> row{std::to_string(i + 1), std::to_string(t.origin.z), std::to_string(t.origin.y),
                                     std::to_string(t.origin.x), std::to_string(t.n_classes)};
        for (auto n : t.voxels) row.push_back(std::to_string(n));
        for (std::size_t c = 0; c < 5; ++c) row.push_back(format_number(t.fraction(c)));
        out += join_csv(row);
    }
    return out;
}

/// Writes one deflate TIFF per z-plane (phantom_0000.tiff, ...) plus
/// ground_truth.csv into `out_dir`.
inline Phantom write_phantom(const PhantomSpec& spec, const fs::path& out_dir) {
    Phantom ph = generate_phantom(spec);
    fs::create_directories(out_dir);
    const Dims d = ph.volume.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
        char name[48];
        std::snprintf(name, sizeof(name), "phantom_%04zu.tiff", z);
        write_tiff_plane(out_dir / name, ph.volume.voxels.plane(z), static_cast<std::uint32_t>(d.y),
                         static_cast<std::uint32_t>(d.x), TiffCompression::deflate);
    }
    write_file_atomic(out_dir / "ground_truth.csv", phantom_truth_csv(ph.truth));
    return ph;
}

}  // namespace ctquant
