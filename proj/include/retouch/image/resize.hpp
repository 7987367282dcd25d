#pragma once

#include <cstddef>

#include "retouch/image/image.hpp"

namespace retouch::image {

/// Catmull-Rom cubic (a = -0.5) kernel.
double cubic_kernel(double x);

/// Separable bicubic resampling with edge-clamped taps. When shrinking, the
/// kernel is stretched by the scale factor so that every source pixel
/// contributes (antialiasing); when enlarging this is plain 4-tap bicubic.
/// Output is clamped to [0,1].
Image resize_bicubic(const Image& img, std::size_t new_width, std::size_t new_height);

}  // namespace retouch::image
