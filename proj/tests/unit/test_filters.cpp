#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "retouch/common/error.hpp"
#include "retouch/common/rng.hpp"
#include "retouch/filters/filters.hpp"
#include "retouch/image/metrics.hpp"
#include "retouch/image/resize.hpp"
#include "toy_data.hpp"

using namespace retouch;
using filters::ActionVector;
using filters::FilterId;
using image::Image;

namespace {

double mean_luminance(const Image& img) {
  double s = 0;
  for (double v : image::luminance_plane(img)) s += v;
  return s / static_cast<double>(img.pixel_count());
}

double mean_chroma(const Image& img) {
  double s = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      s += std::max({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)}) -
           std::min({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
  return s / static_cast<double>(img.pixel_count());
}

double lum_stddev(const Image& img) {
  const auto l = image::luminance_plane(img);
  const double m = mean_luminance(img);
  double s = 0;
  for (double v : l) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(l.size()));
}

double max_abs_diff(const Image& a, const Image& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, double(std::abs(a.data()[i] - b.data()[i])));
  return d;
}

}  // namespace

TEST_CASE("specs list twelve filters in application order") {
  const char* names[] = {"Dehaze", "Clarity", "Contrast", "Exposure", "Temp", "Tint",
                         "Whites", "Blacks", "Highlights", "Shadows", "Vibrance", "Saturation"};
  for (std::size_t k = 0; k < filters::kFilterCount; ++k) {
    CHECK(filters::filter_spec(k).name == names[k]);
    CHECK(static_cast<std::size_t>(filters::filter_spec(k).id) == k);
    CHECK(filters::filter_spec(k).min_value == -1.0);
    CHECK(filters::filter_spec(k).max_value == 1.0);
  }
  CHECK_THROWS_AS(filters::filter_spec(12), InvalidArgument);
}

TEST_CASE("zero is the identity for every filter and the whole pipeline") {
  const auto img = testing::synthetic_photo(37, 23, 1);
  for (std::size_t k = 0; k < filters::kFilterCount; ++k) CHECK(filters::apply_filter(img, k, 0.0) == img);
  CHECK(filters::apply_pipeline(img, ActionVector::neutral()) == img);
}

TEST_CASE("values outside the range are rejected") {
  const Image img(4, 4, 0.5f);
  CHECK_THROWS_WITH_AS(filters::apply_filter(img, FilterId::Exposure, 1.01), doctest::Contains("Exposure"),
                       InvalidArgument);
  CHECK_THROWS_AS(filters::apply_filter(img, FilterId::Dehaze, std::nan("")), InvalidArgument);
  ActionVector a;
  a[FilterId::Shadows] = -1.5;
  CHECK_THROWS_WITH_AS(filters::apply_pipeline(img, a), doctest::Contains("Shadows"), InvalidArgument);
  a[FilterId::Shadows] = -1.0;
  CHECK_NOTHROW(filters::apply_pipeline(img, a));
}

TEST_CASE("outputs stay in range at the extremes") {
  const auto img = testing::synthetic_photo(40, 30, 2);
  for (std::size_t k = 0; k < filters::kFilterCount; ++k) {
    for (double v : {-1.0, -0.37, 0.5, 1.0}) {
      const auto out = filters::apply_filter(img, k, v);
      REQUIRE(out.same_size(img));
      for (float p : out.data()) CHECK((p >= 0.0f && p <= 1.0f));
    }
  }
}

TEST_CASE("exposure is a power-of-two gain and its inverse undoes darkening") {
  const auto img = testing::synthetic_photo(24, 24, 3);
  const auto dark = testing::degrade(img, 0.5, 1.0);
  const auto bright = filters::apply_filter(dark, FilterId::Exposure, 1.0);
  CHECK(max_abs_diff(bright, img) < 1e-5);
  double rgb[3] = {0.2, 0.1, 0.05};
  filters::apply_pointwise(FilterId::Exposure, -0.5, rgb);
  CHECK(rgb[0] == doctest::Approx(0.2 / std::sqrt(2.0)));
}

TEST_CASE("each filter moves the image in its named direction") {
  const auto img = testing::synthetic_photo(48, 48, 4);
  auto apply = [&](FilterId id, double v) { return filters::apply_filter(img, id, v); };
  CHECK(mean_luminance(apply(FilterId::Exposure, 0.5)) > mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Exposure, -0.5)) < mean_luminance(img));
  CHECK(mean_chroma(apply(FilterId::Saturation, 0.5)) > mean_chroma(img));
  CHECK(mean_chroma(apply(FilterId::Saturation, -0.5)) < mean_chroma(img));
  CHECK(mean_chroma(apply(FilterId::Vibrance, 0.5)) > mean_chroma(img));
  CHECK(lum_stddev(apply(FilterId::Contrast, 0.5)) > lum_stddev(img));
  CHECK(lum_stddev(apply(FilterId::Contrast, -0.5)) < lum_stddev(img));
  CHECK(mean_luminance(apply(FilterId::Shadows, 0.5)) > mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Highlights, -0.5)) < mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Whites, 0.5)) > mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Blacks, -0.5)) < mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Dehaze, 0.5)) < mean_luminance(img));
  CHECK(mean_luminance(apply(FilterId::Dehaze, -0.5)) > mean_luminance(img));

  const auto warm = apply(FilterId::Temp, 0.5);
  CHECK(warm.at(10, 10, 0) > img.at(10, 10, 0));
  CHECK(warm.at(10, 10, 2) < img.at(10, 10, 2));
  const auto magenta = apply(FilterId::Tint, 0.5);
  CHECK(magenta.at(10, 10, 1) < img.at(10, 10, 1));
  CHECK(lum_stddev(apply(FilterId::Clarity, 1.0)) > lum_stddev(img));
}

TEST_CASE("pointwise filters agree with their per-pixel form") {
  const auto img = testing::synthetic_photo(9, 7, 5);
  for (std::size_t k = 0; k < filters::kFilterCount; ++k) {
    const auto& spec = filters::filter_spec(k);
    if (!spec.pointwise) {
      double rgb[3] = {0.5, 0.5, 0.5};
      CHECK_THROWS_AS(filters::apply_pointwise(spec.id, 0.3, rgb), InvalidArgument);
      continue;
    }
    const auto out = filters::apply_filter(img, k, 0.3);
    for (std::size_t y = 0; y < 7; ++y) {
      for (std::size_t x = 0; x < 9; ++x) {
        double rgb[3] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
        filters::apply_pointwise(spec.id, 0.3, rgb);
        for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == static_cast<float>(std::clamp(rgb[c], 0.0, 1.0)));
      }
    }
  }
}

TEST_CASE("grey pixels are invariant under saturation and vibrance") {
  const Image grey(5, 5, 0.42f);
  for (double v : {-1.0, 1.0}) {
    CHECK(max_abs_diff(filters::apply_filter(grey, FilterId::Saturation, v), grey) < 1e-6);
    CHECK(max_abs_diff(filters::apply_filter(grey, FilterId::Vibrance, v), grey) < 1e-6);
  }
  // Flat images have no detail for clarity to boost.
  CHECK(max_abs_diff(filters::apply_filter(grey, FilterId::Clarity, 1.0), grey) < 1e-6);
}

TEST_CASE("the fixed order matters: filters do not commute") {
  const auto img = testing::synthetic_photo(32, 32, 6);
  const auto ec = filters::apply_filter(filters::apply_filter(img, FilterId::Exposure, 0.8), FilterId::Contrast, 0.8);
  const auto ce = filters::apply_filter(filters::apply_filter(img, FilterId::Contrast, 0.8), FilterId::Exposure, 0.8);
  CHECK(max_abs_diff(ec, ce) > 0.05);

  // The pipeline applies contrast before exposure.
  ActionVector a;
  a[FilterId::Exposure] = 0.8;
  a[FilterId::Contrast] = 0.8;
  CHECK(filters::apply_pipeline(img, a) == ce);
}

TEST_CASE("spatial filters scale with the image") {
  CHECK(filters::clarity_sigma(64, 64) == doctest::Approx(1.28));
  CHECK(filters::clarity_sigma(512, 300) == doctest::Approx(6.0));
  CHECK(filters::clarity_sigma(10, 10) == 1.0);
  CHECK(filters::dehaze_radius(64, 64) == 2);
  CHECK(filters::dehaze_radius(512, 512) == 15);
  CHECK(filters::dehaze_radius(8, 8) == 1);

  // Same look at two resolutions: enhance large then shrink vs shrink then enhance.
  const auto big = testing::synthetic_photo(256, 256, 7);
  const auto small = image::resize_bicubic(big, 64, 64);
  for (FilterId id : {FilterId::Clarity, FilterId::Dehaze}) {
    const auto a = image::resize_bicubic(filters::apply_filter(big, id, 0.8), 64, 64);
    const auto b = filters::apply_filter(small, id, 0.8);
    CHECK(image::psnr(a, b) > 30.0);
  }
}

TEST_CASE("parameter report is ordered json with four decimals") {
  ActionVector a;
  a[FilterId::Exposure] = 0.0625;
  a[FilterId::Saturation] = -1.0;
  a[FilterId::Tint] = -1e-6;
  const auto text = filters::parameter_report(a);
  const auto j = nlohmann::json::parse(text);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 12);
  for (std::size_t k = 0; k < 12; ++k) CHECK(j[k]["name"] == std::string(filters::filter_spec(k).name));
  CHECK(j[3]["value"].get<double>() == 0.0625);
  CHECK(j[11]["value"].get<double>() == -1.0);
  CHECK(text.find("\"value\": 0.0625") != std::string::npos);
  CHECK(text.find("\"value\": -1.0000") != std::string::npos);
  CHECK(text.find("-0.0000") == std::string::npos);
}
