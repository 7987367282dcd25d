#include "retouch/image/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retouch/common/error.hpp"

namespace retouch::image {

Image::Image(std::size_t width, std::size_t height, float fill) : Image(width, height, fill, fill, fill) {}

Image::Image(std::size_t width, std::size_t height, float r, float g, float b)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) throw InvalidArgument("image dimensions must be positive");
  for (float v : {r, g, b}) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("image fill value outside [0,1]");
  }
  pixels_.resize(width * height * kChannels);
  for (std::size_t i = 0; i < width * height; ++i) {
    pixels_[i * 3] = r;
    pixels_[i * 3 + 1] = g;
    pixels_[i * 3 + 2] = b;
  }
}

Image Image::from_pixels(std::size_t width, std::size_t height, std::vector<float> pixels) {
  if (width == 0 || height == 0) throw InvalidArgument("image dimensions must be positive");
  if (pixels.size() != width * height * kChannels) {
    throw InvalidArgument("image " + std::to_string(width) + "x" + std::to_string(height) +
                          " needs " + std::to_string(width * height * kChannels) +
                          " values, got " + std::to_string(pixels.size()));
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("image value outside [0,1] or NaN");
  }
  Image img;
  img.width_ = width;
  img.height_ = height;
  img.pixels_ = std::move(pixels);
  return img;
}

void Image::clamp() {
  for (auto& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
}

std::vector<double> luminance_plane(const Image& img) {
  std::vector<double> out(img.pixel_count());
  const auto px = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = luminance(px[i * 3], px[i * 3 + 1], px[i * 3 + 2]);
  }
  return out;
}

std::vector<float> to_planar(const Image& img) {
  const std::size_t n = img.pixel_count();
  std::vector<float> out(n * 3);
  const auto px = img.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * n + i] = px[i * 3 + c];
  }
  return out;
}

}  // namespace retouch::image
