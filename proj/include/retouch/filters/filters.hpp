#pragma once

// The parameter-driven editing pipeline: twelve retouch controls applied in a
// fixed order, each taking a value in [-1, 1] where 0 is the identity.
//
// Pointwise filters map each pixel independently. Clarity and Dehaze look at
// a neighbourhood whose radius is a fixed fraction of min(width, height), so
// the same value produces the same look at any resolution.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "retouch/image/image.hpp"

namespace retouch::filters {

inline constexpr std::size_t kFilterCount = 12;

enum class FilterId : std::size_t {
  Dehaze,
  Clarity,
  Contrast,
  Exposure,
  Temp,
  Tint,
  Whites,
  Blacks,
  Highlights,
  Shadows,
  Vibrance,
  Saturation,
};

struct FilterSpec {
  FilterId id;
  std::string_view name;
  double min_value;
  double max_value;
  bool pointwise;
};

/// Specs in application order.
const std::array<FilterSpec, kFilterCount>& filter_specs();
const FilterSpec& filter_spec(std::size_t index);

/// One parameter per filter, in application order.
struct ActionVector {
  std::array<double, kFilterCount> values{};

  static ActionVector neutral() { return {}; }
  double& operator[](FilterId id) { return values[static_cast<std::size_t>(id)]; }
  double operator[](FilterId id) const { return values[static_cast<std::size_t>(id)]; }
  bool operator==(const ActionVector&) const = default;
};

/// Throws InvalidArgument if any component is outside its filter's range or NaN.
void validate(const ActionVector& action);

/// Applies filter `index` (0-based, application order) and clamps to [0,1].
/// value == 0 returns the input unchanged.
image::Image apply_filter(const image::Image& img, std::size_t index, double value);
image::Image apply_filter(const image::Image& img, FilterId id, double value);

/// Single-pixel form of a pointwise filter (rgb is updated in place, unclamped).
void apply_pointwise(FilterId id, double value, double rgb[3]);

/// Every filter in order, each followed by clamping.
image::Image apply_pipeline(const image::Image& img, const ActionVector& action);

/// Ordered {name, value} list, JSON text, values with 4 decimals.
std::string parameter_report(const ActionVector& action);

/// Neighbourhood scales used by the spatial filters for an image of this size.
double clarity_sigma(std::size_t width, std::size_t height);
std::size_t dehaze_radius(std::size_t width, std::size_t height);

}  // namespace retouch::filters
