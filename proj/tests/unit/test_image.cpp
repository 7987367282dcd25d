#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "retouch/common/error.hpp"
#include "retouch/common/rng.hpp"
#include "retouch/image/image.hpp"
#include "retouch/image/io.hpp"
#include "retouch/image/metrics.hpp"
#include "retouch/image/resize.hpp"
#include "toy_data.hpp"

using namespace retouch;
using image::Image;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("retouch_image_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

Image random_image(std::size_t w, std::size_t h, Rng& rng) {
  Image img(w, h);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0, 1));
  return img;
}

// Direct 2-D evaluation of the 4-tap bicubic at pixel-centre coordinates.
double bicubic_at(const Image& src, std::size_t c, double u, double v) {
  const auto fx = static_cast<long>(std::floor(u)), fy = static_cast<long>(std::floor(v));
  const long w = static_cast<long>(src.width()), h = static_cast<long>(src.height());
  double s = 0;
  for (long j = fy - 1; j <= fy + 2; ++j) {
    for (long i = fx - 1; i <= fx + 2; ++i) {
      const double k = image::cubic_kernel(u - i) * image::cubic_kernel(v - j);
      s += k * src.at(std::clamp(i, 0L, w - 1), std::clamp(j, 0L, h - 1), c);
    }
  }
  return std::clamp(s, 0.0, 1.0);
}

// SSIM with explicit 2-D Gaussian windows, no separability.
double ssim_bruteforce(const Image& a, const Image& b) {
  const auto x = image::luminance_plane(a), y = image::luminance_plane(b);
  const std::size_t w = a.width(), h = a.height();
  const int n = 11;
  double g[n][n], gs = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gs += g[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + n <= h; ++oy) {
    for (std::size_t ox = 0; ox + n <= w; ++ox) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double wt = g[i][j] / gs;
          const std::size_t p = (oy + i) * w + ox + j;
          mx += wt * x[p];
          my += wt * y[p];
          xx += wt * x[p] * x[p];
          yy += wt * y[p] * y[p];
          xy += wt * x[p] * y[p];
        }
      }
      const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

TEST_CASE("image construction validates range and size") {
  CHECK_THROWS_AS(Image(0, 3), InvalidArgument);
  CHECK_THROWS_AS(Image(2, 2, 1.5f), InvalidArgument);
  CHECK_THROWS_AS(Image::from_pixels(2, 1, {0, 0, 0, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(Image::from_pixels(1, 1, {0, std::nanf(""), 0}), InvalidArgument);
  CHECK_THROWS_AS(Image::from_pixels(1, 1, {0, -0.01f, 0}), InvalidArgument);
  Image img(2, 1, 0.25f, 0.5f, 1.0f);
  CHECK(img.at(1, 0, 2) == 1.0f);
  CHECK(image::luminance_plane(img)[0] == doctest::Approx(0.299 * 0.25 + 0.587 * 0.5 + 0.114));
  const auto planar = image::to_planar(img);
  CHECK(planar == std::vector<float>{0.25f, 0.25f, 0.5f, 0.5f, 1.0f, 1.0f});
}

TEST_CASE("png and ppm round trips stay within one quantization step") {
  const auto dir = temp_dir();
  Rng rng(1);
  const auto img = random_image(17, 9, rng);
  for (const char* name : {"a.png", "a.ppm"}) {
    image::save_image(img, dir / name);
    const auto back = image::load_image(dir / name);
    REQUIRE(back.same_size(img));
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5f / 255.0f + 1e-6f);
    }
    // A decoded image re-encodes losslessly.
    image::save_image(back, dir / ("b_" + std::string(name)));
    CHECK(image::load_image(dir / ("b_" + std::string(name))) == back);
  }
  CHECK(image::quantize8(0.0f) == 0);
  CHECK(image::quantize8(1.0f) == 255);
  CHECK(image::quantize8(0.5f) == 128);
  fs::remove_all(dir);
}

TEST_CASE("format detection is by content and bad files name the path") {
  const auto dir = temp_dir();
  Rng rng(2);
  image::save_image(random_image(4, 4, rng), dir / "x.png");
  fs::copy_file(dir / "x.png", dir / "misnamed.ppm");
  CHECK(image::load_image(dir / "misnamed.ppm").width() == 4);
  {
    std::ofstream out(dir / "fake.jpg", std::ios::binary);
    out << "\xFF\xD8\xFF\xE0 not really";
  }
  CHECK_THROWS_WITH_AS(image::load_image(dir / "fake.jpg"), doctest::Contains("fake.jpg"), IoError);
  {
    std::ofstream out(dir / "short.ppm", std::ios::binary);
    out << "P6\n4 4\n255\n" << std::string(10, 'a');
  }
  CHECK_THROWS_WITH_AS(image::load_image(dir / "short.ppm"), doctest::Contains("truncated"), IoError);
  {
    std::ofstream out(dir / "deep.ppm", std::ios::binary);
    out << "P6\n1 1\n65535\n" << std::string(6, 'a');
  }
  CHECK_THROWS_AS(image::load_image(dir / "deep.ppm"), IoError);
  CHECK_THROWS_AS(image::load_image(dir / "absent.png"), IoError);
  CHECK_THROWS_WITH_AS(image::save_image(Image(2, 2), dir / "out.bmp"), doctest::Contains(".bmp"),
                       IoError);
  CHECK(image::is_supported_image("a.PNG"));
  CHECK_FALSE(image::is_supported_image("a.jpg"));
  fs::remove_all(dir);
}

TEST_CASE("psnr and mse") {
  Image a(8, 8, 0.3f);
  Image b(8, 8, 0.4f);
  CHECK(image::mse(a, b) == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(image::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));
  CHECK(image::psnr(a, a) == image::kPsnrCapDb);
  CHECK_THROWS_WITH_AS(image::psnr(a, Image(8, 7)), doctest::Contains("8x8 vs 8x7"), InvalidArgument);
}

TEST_CASE("ssim is one on identical images and matches a brute-force window sum") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 11 + rng.below(30), h = 11 + rng.below(30);
    const auto a = testing::synthetic_photo(w, h, 100 + trial);
    Image b = a;
    for (auto& v : b.data()) v = static_cast<float>(std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0));
    CHECK(image::ssim(a, a) == 1.0);
    CHECK(std::abs(image::ssim(a, b) - ssim_bruteforce(a, b)) < 1e-4);
  }
  // Small images shrink the window instead of failing.
  const auto small = testing::synthetic_photo(6, 9, 4);
  CHECK(image::ssim(small, small) == doctest::Approx(1.0));
}

TEST_CASE("ssim decreases with noise") {
  const auto a = testing::synthetic_photo(48, 48, 9);
  Rng rng(4);
  double prev = 1.0;
  for (double amp : {0.02, 0.1, 0.3}) {
    Image b = a;
    for (auto& v : b.data()) v = static_cast<float>(std::clamp(v + rng.uniform(-amp, amp), 0.0, 1.0));
    const double s = image::ssim(a, b);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("bicubic 2x2 checkerboard to 4x4 matches direct evaluation") {
  const auto src = Image::from_pixels(2, 2, {0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0});
  const auto out = image::resize_bicubic(src, 4, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      const double u = (x + 0.5) * 0.5 - 0.5, v = (y + 0.5) * 0.5 - 0.5;
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.at(x, y, c) - bicubic_at(src, c, u, v)) < 1e-5);
    }
  }
  // Symmetry of the pattern: opposite corners agree, neighbours mirror.
  CHECK(out.at(0, 0, 0) == doctest::Approx(out.at(3, 3, 0)));
  CHECK(out.at(1, 1, 0) == doctest::Approx(1.0 - out.at(2, 1, 0)).epsilon(1e-5));
}

TEST_CASE("bicubic upscaling matches direct evaluation on random images") {
  Rng rng(6);
  const auto src = random_image(5, 7, rng);
  const auto out = image::resize_bicubic(src, 13, 16);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 13; ++x) {
      const double u = (x + 0.5) * 5.0 / 13.0 - 0.5, v = (y + 0.5) * 7.0 / 16.0 - 0.5;
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.at(x, y, c) - bicubic_at(src, c, u, v)) < 1e-5);
    }
  }
}

TEST_CASE("resize properties") {
  Rng rng(7);
  const auto src = random_image(9, 6, rng);
  CHECK(image::resize_bicubic(src, 9, 6) == src);
  CHECK(image::cubic_kernel(0) == 1.0);
  CHECK(image::cubic_kernel(1) == 0.0);
  CHECK(image::cubic_kernel(2) == 0.0);
  // Constant images stay constant at any scale.
  const Image flat(10, 10, 0.6f);
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{3, 4}, {31, 17}, {1, 1}}) {
    const auto r = image::resize_bicubic(flat, w, h);
    for (float v : r.data()) CHECK(v == doctest::Approx(0.6f).epsilon(1e-6));
  }
  // Downscaling averages out a fine checkerboard.
  Image board(64, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      for (std::size_t c = 0; c < 3; ++c) board.at(x, y, c) = static_cast<float>((x + y) % 2);
  const auto small = image::resize_bicubic(board, 8, 8);
  for (float v : small.data()) CHECK(std::abs(v - 0.5f) < 0.02f);
  CHECK_THROWS_AS(image::resize_bicubic(src, 0, 3), InvalidArgument);
}
