#pragma once

#include "retouch/image/image.hpp"

namespace retouch::image {

/// Mean over all H*W*3 values of the squared difference.
double mse(const Image& a, const Image& b);

inline constexpr double kPsnrCapDb = 100.0;

/// 10*log10(1/mse); kPsnrCapDb when mse < 1e-10.
double psnr(const Image& a, const Image& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all fully-contained Gaussian windows of the luminance
/// planes (dynamic range 1). Images smaller than the window use a window of
/// min(width, height).
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

}  // namespace retouch::image
