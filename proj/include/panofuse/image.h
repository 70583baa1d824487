#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "panofuse/error.h"

namespace panofuse {

// Row-major, channel-interleaved raster.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw InvalidInput("image dimensions must be positive, got " +
                         std::to_string(width) + "x" + std::to_string(height) +
                         "x" + std::to_string(channels));
    }
    data_.assign(static_cast<size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width_ + x) * channels_ + c;
  }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::span<T> row(int y) {
    return std::span<T>(data_).subspan(index(0, y),
                                       static_cast<size_t>(width_) * channels_);
  }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(
        index(0, y), static_cast<size_t>(width_) * channels_);
  }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  template <typename U>
  bool same_extent(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using ImageF = Image<float>;
using Mask = Image<std::uint8_t>;

inline Mask FullMask(int width, int height) { return Mask(width, height, 1, 1); }

inline size_t CountValid(const Mask& mask) {
  size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

// Rec.601 luma; single-channel inputs are returned unchanged.
ImageD ToGray(const ImageD& image);

}  // namespace panofuse
