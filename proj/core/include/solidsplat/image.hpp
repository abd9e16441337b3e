// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "solidsplat/common.hpp"

#include <cassert>
#include <cstdint>
#include <vector>

namespace solidsplat {

/// Row-major 2D buffer indexed as (x, y).
template <class T>
class Image {
public:
    Image() = default;
    Image(int width, int height, const T &fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool in_bounds(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    T &operator()(int x, int y) {
        assert(in_bounds(x, y));
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }
    const T &operator()(int x, int y) const {
        assert(in_bounds(x, y));
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }

    T &operator[](std::size_t i) { return data_[i]; }
    const T &operator[](std::size_t i) const { return data_[i]; }

    std::vector<T> &data() noexcept { return data_; }
    const std::vector<T> &data() const noexcept { return data_; }

    void fill(const T &value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const Image &other) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Mask = Image<std::uint8_t>;
using RgbImage = Image<Vec3>;

/// A depth channel and its validity mask.
struct DepthMap {
    Image<double> depth;
    Mask mask;
};

inline double luminance(const Vec3 &rgb) {
    return 0.299 * rgb.x() + 0.587 * rgb.y() + 0.114 * rgb.z();
}

} // namespace solidsplat
