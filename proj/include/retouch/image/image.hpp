#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace retouch::image {

/// RGB image with sRGB-encoded float channels in [0,1], row-major, interleaved.
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  /// Throws InvalidArgument for zero dimensions or a fill value outside [0,1].
  Image(std::size_t width, std::size_t height, float fill = 0.0f);
  Image(std::size_t width, std::size_t height, float r, float g, float b);
  /// Validates size, finiteness and range.
  static Image from_pixels(std::size_t width, std::size_t height, std::vector<float> pixels);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty() const { return pixels_.empty(); }

  std::span<float> data() { return pixels_; }
  std::span<const float> data() const { return pixels_; }

  float& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * kChannels + c];
  }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * kChannels + c];
  }

  bool same_size(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Clamps every channel into [0,1].
  void clamp();

  bool operator==(const Image& other) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> pixels_;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline double luminance(double r, double g, double b) { return kLumaR * r + kLumaG * g + kLumaB * b; }

/// Per-pixel luminance plane, row-major.
std::vector<double> luminance_plane(const Image& img);

/// Planar CHW copy (network input layout).
std::vector<float> to_planar(const Image& img);

}  // namespace retouch::image
