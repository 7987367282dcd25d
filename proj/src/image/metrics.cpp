#include "retouch/image/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "retouch/common/error.hpp"

namespace retouch::image {
namespace {

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (!a.same_size(b)) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch " + std::to_string(a.width()) +
                          "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()));
  }
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of a w x h plane; output (w-n+1) x (h-n+1).
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t w, std::size_t h,
                                 const std::vector<double>& g) {
  const std::size_t n = g.size();
  const std::size_t ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(ow * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_size(a, b, "mse");
  const auto av = a.data(), bv = b.data();
  double s = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
  require_same_size(a, b, "ssim");
  const std::size_t w = a.width(), h = a.height();
  const int win = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(params.window), std::min(w, h)));
  const auto g = gaussian_window(win, params.sigma);
  const auto x = luminance_plane(a);
  const auto y = luminance_plane(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h, g);
  const auto my = filter_valid(y, w, h, g);
  const auto exx = filter_valid(xx, w, h, g);
  const auto eyy = filter_valid(yy, w, h, g);
  const auto exy = filter_valid(xy, w, h, g);
  const double c1 = (params.k1) * (params.k1);
  const double c2 = (params.k2) * (params.k2);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace retouch::image
