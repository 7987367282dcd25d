#include "retouch/filters/filters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <vector>

#include "retouch/common/error.hpp"

namespace retouch::filters {
namespace {

using image::Image;

constexpr std::array<FilterSpec, kFilterCount> kSpecs{{
    {FilterId::Dehaze, "Dehaze", -1.0, 1.0, false},
    {FilterId::Clarity, "Clarity", -1.0, 1.0, false},
    {FilterId::Contrast, "Contrast", -1.0, 1.0, true},
    {FilterId::Exposure, "Exposure", -1.0, 1.0, true},
    {FilterId::Temp, "Temp", -1.0, 1.0, true},
    {FilterId::Tint, "Tint", -1.0, 1.0, true},
    {FilterId::Whites, "Whites", -1.0, 1.0, true},
    {FilterId::Blacks, "Blacks", -1.0, 1.0, true},
    {FilterId::Highlights, "Highlights", -1.0, 1.0, true},
    {FilterId::Shadows, "Shadows", -1.0, 1.0, true},
    {FilterId::Vibrance, "Vibrance", -1.0, 1.0, true},
    {FilterId::Saturation, "Saturation", -1.0, 1.0, true},
}};

// Contrast curve steepness at |value| = 1.
constexpr double kContrastStrength = 5.0;
// White-balance gain exponent: gain = 2^(kWhiteBalanceStops * value).
constexpr double kWhiteBalanceStops = 0.3;
// Tone endpoint shift at |value| = 1.
constexpr double kEndpointShift = 0.25;
constexpr double kClarityFraction = 0.02;
constexpr double kDehazeFraction = 0.03;
constexpr double kDehazeStrength = 0.5;

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double contrast_curve(double v, double value) {
  const double c = kContrastStrength * std::abs(value);
  const double half = std::tanh(0.5 * c);
  if (value > 0) return 0.5 + 0.5 * std::tanh(c * (v - 0.5)) / half;
  // Inverse of the S-curve flattens; endpoints stay fixed.
  const double u = std::clamp(2.0 * (v - 0.5) * half, -half, half);
  return 0.5 + std::atanh(u) / c;
}

// Separable Gaussian blur of a plane with edge clamping.
std::vector<double> gaussian_blur(const std::vector<double>& plane, std::size_t w, std::size_t h,
                                  double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (auto& v : kernel) v /= total;

  const auto iw = static_cast<std::ptrdiff_t>(w), ih = static_cast<std::ptrdiff_t>(h);
  std::vector<double> tmp(plane.size()), out(plane.size());
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      double s = 0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto sx = std::clamp<std::ptrdiff_t>(x + k, 0, iw - 1);
        s += kernel[static_cast<std::size_t>(k + radius)] * plane[static_cast<std::size_t>(y * iw + sx)];
      }
      tmp[static_cast<std::size_t>(y * iw + x)] = s;
    }
  }
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      double s = 0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto sy = std::clamp<std::ptrdiff_t>(y + k, 0, ih - 1);
        s += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(sy * iw + x)];
      }
      out[static_cast<std::size_t>(y * iw + x)] = s;
    }
  }
  return out;
}

// Sliding-window minimum over [i - r, i + r] along one line (monotonic deque).
void min_line(const double* in, double* out, std::size_t n, std::size_t stride, std::size_t r) {
  std::deque<std::size_t> q;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + r);
    while (next <= hi) {
      while (!q.empty() && in[q.back() * stride] >= in[next * stride]) q.pop_back();
      q.push_back(next++);
    }
    const std::size_t lo = i >= r ? i - r : 0;
    while (q.front() < lo) q.pop_front();
    out[i * stride] = in[q.front() * stride];
  }
}

std::vector<double> min_filter(const std::vector<double>& plane, std::size_t w, std::size_t h,
                               std::size_t r) {
  std::vector<double> tmp(plane.size()), out(plane.size());
  for (std::size_t y = 0; y < h; ++y) min_line(&plane[y * w], &tmp[y * w], w, 1, r);
  for (std::size_t x = 0; x < w; ++x) min_line(&tmp[x], &out[x], h, w, r);
  return out;
}

Image pointwise(const Image& img, FilterId id, double value) {
  Image out = img;
  auto px = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    double rgb[3] = {px[i * 3], px[i * 3 + 1], px[i * 3 + 2]};
    apply_pointwise(id, value, rgb);
    for (int c = 0; c < 3; ++c) {
      px[i * 3 + c] = static_cast<float>(std::clamp(rgb[c], 0.0, 1.0));
    }
  }
  return out;
}

// Unsharp mask on luminance; the luminance delta is added to every channel.
Image clarity(const Image& img, double value) {
  const std::size_t w = img.width(), h = img.height();
  const auto lum = image::luminance_plane(img);
  const auto blurred = gaussian_blur(lum, w, h, clarity_sigma(w, h));
  Image out = img;
  auto px = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const double delta = value * (lum[i] - blurred[i]);
    for (int c = 0; c < 3; ++c) {
      px[i * 3 + c] = static_cast<float>(std::clamp(px[i * 3 + c] + delta, 0.0, 1.0));
    }
  }
  return out;
}

// Dark-channel haze model with atmospheric light 1: positive values remove the
// estimated veil, negative values add one where the scene is clear.
Image dehaze(const Image& img, double value) {
  const std::size_t w = img.width(), h = img.height();
  const std::size_t r = dehaze_radius(w, h);
  std::vector<double> minc(img.pixel_count());
  const auto src = img.data();
  for (std::size_t i = 0; i < minc.size(); ++i) {
    minc[i] = std::min({src[i * 3], src[i * 3 + 1], src[i * 3 + 2]});
  }
  const auto dark = gaussian_blur(min_filter(minc, w, h, r), w, h, static_cast<double>(r));
  const double omega = kDehazeStrength * std::abs(value);
  Image out = img;
  auto px = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const double d = std::clamp(dark[i], 0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      const double v = px[i * 3 + c];
      double r_v;
      if (value > 0) {
        const double veil = omega * d;
        r_v = (v - veil) / (1.0 - veil);
      } else {
        const double haze = omega * (1.0 - d);
        r_v = v * (1.0 - haze) + haze;
      }
      px[i * 3 + c] = static_cast<float>(std::clamp(r_v, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace

const std::array<FilterSpec, kFilterCount>& filter_specs() { return kSpecs; }

const FilterSpec& filter_spec(std::size_t index) {
  if (index >= kFilterCount) {
    throw InvalidArgument("unknown filter index " + std::to_string(index));
  }
  return kSpecs[index];
}

void validate(const ActionVector& action) {
  for (std::size_t k = 0; k < kFilterCount; ++k) {
    const auto& spec = kSpecs[k];
    const double v = action.values[k];
    if (!(v >= spec.min_value && v <= spec.max_value)) {
      throw InvalidArgument(std::string(spec.name) + " value " + std::to_string(v) +
                            " outside [" + std::to_string(spec.min_value) + ", " +
                            std::to_string(spec.max_value) + "]");
    }
  }
}

double clarity_sigma(std::size_t width, std::size_t height) {
  return std::max(1.0, kClarityFraction * static_cast<double>(std::min(width, height)));
}

std::size_t dehaze_radius(std::size_t width, std::size_t height) {
  const double r = std::round(kDehazeFraction * static_cast<double>(std::min(width, height)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(r));
}

void apply_pointwise(FilterId id, double value, double rgb[3]) {
  const double lum = image::luminance(rgb[0], rgb[1], rgb[2]);
  switch (id) {
    case FilterId::Contrast:
      for (int c = 0; c < 3; ++c) rgb[c] = contrast_curve(rgb[c], value);
      return;
    case FilterId::Exposure: {
      const double gain = std::exp2(value);
      for (int c = 0; c < 3; ++c) rgb[c] *= gain;
      return;
    }
    case FilterId::Temp: {
      const double gain = std::exp2(kWhiteBalanceStops * value);
      rgb[0] *= gain;
      rgb[2] /= gain;
      return;
    }
    case FilterId::Tint:
      rgb[1] /= std::exp2(kWhiteBalanceStops * value);
      return;
    case FilterId::Whites:
      for (int c = 0; c < 3; ++c) rgb[c] += kEndpointShift * value * rgb[c] * rgb[c];
      return;
    case FilterId::Blacks:
      for (int c = 0; c < 3; ++c) rgb[c] += kEndpointShift * value * (1.0 - rgb[c]) * (1.0 - rgb[c]);
      return;
    case FilterId::Highlights: {
      const double gain = std::exp2(value * smoothstep(0.5, 1.0, lum));
      for (int c = 0; c < 3; ++c) rgb[c] *= gain;
      return;
    }
    case FilterId::Shadows: {
      const double gain = std::exp2(value * (1.0 - smoothstep(0.0, 0.5, lum)));
      for (int c = 0; c < 3; ++c) rgb[c] *= gain;
      return;
    }
    case FilterId::Vibrance: {
      const double mx = std::max({rgb[0], rgb[1], rgb[2]});
      const double mn = std::min({rgb[0], rgb[1], rgb[2]});
      const double sat = mx > 0 ? (mx - mn) / mx : 0.0;
      const double scale = 1.0 + value * (1.0 - sat);
      for (int c = 0; c < 3; ++c) rgb[c] = lum + (rgb[c] - lum) * scale;
      return;
    }
    case FilterId::Saturation:
      for (int c = 0; c < 3; ++c) rgb[c] = lum + (rgb[c] - lum) * (1.0 + value);
      return;
    case FilterId::Dehaze:
    case FilterId::Clarity:
      break;
  }
  throw InvalidArgument("apply_pointwise: filter is not pointwise");
}

Image apply_filter(const Image& img, std::size_t index, double value) {
  const auto& spec = filter_spec(index);
  if (!(value >= spec.min_value && value <= spec.max_value)) {
    throw InvalidArgument(std::string(spec.name) + " value " + std::to_string(value) +
                          " outside [-1, 1]");
  }
  if (img.empty()) throw InvalidArgument("apply_filter: empty image");
  if (value == 0.0) return img;
  switch (spec.id) {
    case FilterId::Dehaze: return dehaze(img, value);
    case FilterId::Clarity: return clarity(img, value);
    default: return pointwise(img, spec.id, value);
  }
}

Image apply_filter(const Image& img, FilterId id, double value) {
  return apply_filter(img, static_cast<std::size_t>(id), value);
}

Image apply_pipeline(const Image& img, const ActionVector& action) {
  validate(action);
  Image out = img;
  for (std::size_t k = 0; k < kFilterCount; ++k) {
    if (action.values[k] != 0.0) out = apply_filter(out, k, action.values[k]);
  }
  return out;
}

std::string parameter_report(const ActionVector& action) {
  std::string out = "[\n";
  for (std::size_t k = 0; k < kFilterCount; ++k) {
    double v = action.values[k];
    if (std::abs(v) < 5e-5) v = 0.0;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  {\"name\": \"%s\", \"value\": %.4f}%s\n",
                  std::string(kSpecs[k].name).c_str(), v, k + 1 < kFilterCount ? "," : "");
    out += buf;
  }
  out += "]\n";
  return out;
}

}  // namespace retouch::filters
