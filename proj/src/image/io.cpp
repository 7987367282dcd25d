#include "retouch/image/io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include "retouch/common/error.hpp"
#include "retouch/common/files.hpp"

namespace retouch::image {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& where) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw IoError(where + ": malformed PPM header (" + what + ")");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 24)) throw IoError(where + ": PPM " + what + " too large");
      ++pos;
    }
    return v;
  };
  const auto width = read_int("width");
  const auto height = read_int("height");
  const auto maxval = read_int("maxval");
  if (width == 0 || height == 0) throw IoError(where + ": PPM has zero dimension");
  if (maxval == 0 || maxval > 255) {
    throw IoError(where + ": only 8-bit PPM is supported (maxval " + std::to_string(maxval) + ")");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError(where + ": malformed PPM header");
  }
  ++pos;
  const std::size_t n = width * height * 3;
  if (bytes.size() - pos < n) {
    throw IoError(where + ": truncated PPM data (expected " + std::to_string(n) + " bytes, found " +
                  std::to_string(bytes.size() - pos) + ")");
  }
  std::vector<float> px(n);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < n; ++i) px[i] = std::min(1.0f, bytes[pos + i] * scale);
  return Image::from_pixels(width, height, std::move(px));
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& where) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw IoError(where + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError(where + ": " + msg);
  }
  std::vector<float> px(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) px[i] = raw[i] / 255.0f;
  return Image::from_pixels(png.width, png.height, std::move(px));
}

std::vector<std::uint8_t> quantize(const Image& img) {
  std::vector<std::uint8_t> out(img.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize8(img.data()[i]);
  return out;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string where = path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, where);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return decode_png(bytes, where);
  }
  throw IoError(where + ": unsupported image format (expected PNG or binary PPM)");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  const auto ext = lower_extension(path);
  const auto q = quantize(img);
  if (ext == ".ppm") {
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(q.data()), q.size());
    write_file_atomic(path, out);
    return;
  }
  if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width());
    png.height = static_cast<png_uint_32>(img.height());
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(png, size, 0, q.data(), 0, nullptr)) {
      throw IoError(path.string() + ": " + png.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, q.data(), 0, nullptr)) {
      throw IoError(path.string() + ": " + png.message);
    }
    out.resize(size);
    write_file_atomic(path, out);
    return;
  }
  throw IoError(path.string() + ": unsupported output format '" + ext + "' (use .png or .ppm)");
}

bool is_supported_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm";
}

}  // namespace retouch::image
