#include "retouch/image/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "retouch/common/error.hpp"

namespace retouch::image {
namespace {

constexpr double kA = -0.5;

struct Taps {
  std::vector<std::ptrdiff_t> index; // clamped source index per tap
  std::vector<double> weight;
};

// One set of taps per output coordinate.
std::vector<Taps> make_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double stretch = std::max(1.0, scale);
  const double support = 2.0 * stretch;
  std::vector<Taps> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - support));
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil(center + support));
    Taps& t = taps[i];
    double total = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double w = cubic_kernel((static_cast<double>(j) + 0.5 - center) / stretch);
      if (w == 0.0) continue;
      t.index.push_back(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in) - 1));
      t.weight.push_back(w);
      total += w;
    }
    for (auto& w : t.weight) w /= total;
  }
  return taps;
}

}  // namespace

double cubic_kernel(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((kA + 2.0) * ax - (kA + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((kA * ax - 5.0 * kA) * ax + 8.0 * kA) * ax - 4.0 * kA;
  return 0.0;
}

Image resize_bicubic(const Image& img, std::size_t new_width, std::size_t new_height) {
  if (new_width == 0 || new_height == 0) {
    throw InvalidArgument("resize_bicubic: target dimensions must be positive");
  }
  if (img.empty()) throw InvalidArgument("resize_bicubic: empty source image");
  const std::size_t w = img.width(), h = img.height();
  const auto xtaps = make_taps(w, new_width);
  const auto ytaps = make_taps(h, new_height);

  // Horizontal pass into a double buffer of size new_width x h.
  std::vector<double> tmp(new_width * h * 3);
  const auto src = img.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < new_width; ++x) {
      const auto& t = xtaps[x];
      double acc[3] = {0, 0, 0};
      for (std::size_t k = 0; k < t.index.size(); ++k) {
        const float* p = &src[(y * w + static_cast<std::size_t>(t.index[k])) * 3];
        for (int c = 0; c < 3; ++c) acc[c] += t.weight[k] * p[c];
      }
      for (int c = 0; c < 3; ++c) tmp[(y * new_width + x) * 3 + c] = acc[c];
    }
  }
  std::vector<float> out(new_width * new_height * 3);
  for (std::size_t y = 0; y < new_height; ++y) {
    const auto& t = ytaps[y];
    for (std::size_t x = 0; x < new_width; ++x) {
      double acc[3] = {0, 0, 0};
      for (std::size_t k = 0; k < t.index.size(); ++k) {
        const double* p = &tmp[(static_cast<std::size_t>(t.index[k]) * new_width + x) * 3];
        for (int c = 0; c < 3; ++c) acc[c] += t.weight[k] * p[c];
      }
      for (int c = 0; c < 3; ++c) {
        out[(y * new_width + x) * 3 + c] = static_cast<float>(std::clamp(acc[c], 0.0, 1.0));
      }
    }
  }
  return Image::from_pixels(new_width, new_height, std::move(out));
}

}  // namespace retouch::image
