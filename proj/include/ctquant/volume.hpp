#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctquant/error.hpp"

namespace ctquant {

using GrayValue = std::uint16_t;
using Label = std::uint32_t;

inline constexpr std::size_t kGrayLevels = 65536;

/// Voxel counts along (z, y, x).
struct Dims {
    std::size_t z = 0;
    std::size_t y = 0;
    std::size_t x = 0;

    [[nodiscard]] constexpr std::size_t voxels() const noexcept { return z * y * x; }
    [[nodiscard]] constexpr std::size_t operator[](std::size_t axis) const noexcept {
        return axis == 0 ? z : (axis == 1 ? y : x);
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

struct Index3 {
    std::int64_t z = 0;
    std::int64_t y = 0;
    std::int64_t x = 0;

    [[nodiscard]] constexpr std::int64_t operator[](std::size_t axis) const noexcept {
        return axis == 0 ? z : (axis == 1 ? y : x);
    }
    friend constexpr bool operator==(const Index3&, const Index3&) = default;
};

/// Inclusive voxel box.
struct Box {
    Index3 lo;
    Index3 hi;

    [[nodiscard]] constexpr std::int64_t extent(std::size_t axis) const noexcept {
        return hi[axis] - lo[axis] + 1;
    }
    [[nodiscard]] constexpr Dims dims() const noexcept {
        return {static_cast<std::size_t>(extent(0)), static_cast<std::size_t>(extent(1)),
                static_cast<std::size_t>(extent(2))};
    }
    friend constexpr bool operator==(const Box&, const Box&) = default;
};

/// Dense row-major (z, y, x) array.
template <class T>
class Volume {
public:
    using value_type = T;

    Volume() = default;
    explicit Volume(Dims dims, T fill = T{}) : dims_(dims), data_(dims.voxels(), fill) {}
    Volume(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
        if (data_.size() != dims_.voxels()) {
            throw Error(ErrorCode::shape_mismatch, "volume data size does not match dims");
        }
    }

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return (z * dims_.y + y) * dims_.x + x;
    }
    [[nodiscard]] bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const noexcept {
        return z >= 0 && y >= 0 && x >= 0 && static_cast<std::size_t>(z) < dims_.z &&
               static_cast<std::size_t>(y) < dims_.y && static_cast<std::size_t>(x) < dims_.x;
    }

    T& operator()(std::size_t z, std::size_t y, std::size_t x) noexcept { return data_[index(z, y, x)]; }
    const T& operator()(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return data_[index(z, y, x)];
    }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Out-of-range reads return `outside`.
    [[nodiscard]] T get_or(std::int64_t z, std::int64_t y, std::int64_t x, T outside) const noexcept {
        return contains(z, y, x) ? (*this)(static_cast<std::size_t>(z), static_cast<std::size_t>(y),
                                           static_cast<std::size_t>(x))
                                 : outside;
    }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
    [[nodiscard]] std::span<const T> plane(std::size_t z) const noexcept {
        return std::span<const T>(data_).subspan(z * dims_.y * dims_.x, dims_.y * dims_.x);
    }
    [[nodiscard]] std::span<T> plane(std::size_t z) noexcept {
        return std::span<T>(data_).subspan(z * dims_.y * dims_.x, dims_.y * dims_.x);
    }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Dims dims_{};
    std::vector<T> data_;
};

using BinaryMask = Volume<std::uint8_t>;
using LabelVolume = Volume<Label>;

/// Raw CT image: 16-bit gray-values plus the voxel edge length in micrometers.
struct GrayVolume {
    Volume<GrayValue> voxels;
    double voxel_size = 1.0;

    [[nodiscard]] const Dims& dims() const noexcept { return voxels.dims(); }
};

/// Copy of `box` out of `vol`; voxels outside `vol` take `outside`.
template <class T>
[[nodiscard]] Volume<T> crop(const Volume<T>& vol, const Box& box, T outside = T{}) {
    Volume<T> out(box.dims());
    for (std::size_t z = 0; z < out.dims().z; ++z) {
        for (std::size_t y = 0; y < out.dims().y; ++y) {
            for (std::size_t x = 0; x < out.dims().x; ++x) {
                out(z, y, x) = vol.get_or(box.lo.z + static_cast<std::int64_t>(z),
                                          box.lo.y + static_cast<std::int64_t>(y),
                                          box.lo.x + static_cast<std::int64_t>(x), outside);
            }
        }
    }
    return out;
}

}  // namespace ctquant
