#pragma once

#include <filesystem>

#include "retouch/image/image.hpp"

namespace retouch::image {

/// Decodes an 8-bit PNG or binary PPM (P6), detected from the file content.
/// Values map to [0,1] as v/maxval (v/255 for 8-bit files).
Image load_image(const std::filesystem::path& path);

/// Encodes by extension (.png or .ppm) with v -> floor(v*255 + 0.5).
/// The destination is replaced atomically.
void save_image(const Image& img, const std::filesystem::path& path);

bool is_supported_image(const std::filesystem::path& path);

/// 8-bit quantization used by the encoders.
inline unsigned char quantize8(float v) {
  const float s = v * 255.0f + 0.5f;
  return static_cast<unsigned char>(s <= 0.0f ? 0 : (s >= 255.0f ? 255 : static_cast<int>(s)));
}

}  // namespace retouch::image
