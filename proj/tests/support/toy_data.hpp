#pragma once

// Procedural "photos" for tests and the toy unpaired experiment. Images are
// defined in continuous [0,1]^2 coordinates, so one seed renders the same
// scene at any resolution.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/image/image.hpp"

namespace retouch::testing {

/// Smooth scene: a two-colour gradient, a few soft colour blobs and gentle
/// texture, with channel values kept inside [0.1, 0.95].
image::Image synthetic_photo(std::size_t width, std::size_t height, std::uint64_t seed);

/// Independent uniform noise in [lo, hi].
image::Image noise_image(std::size_t width, std::size_t height, Rng& rng, float lo = 0.0f,
                         float hi = 1.0f);

/// Scales chroma about luminance by `chroma`, then every channel by `gain`.
image::Image degrade(const image::Image& img, double gain = 0.5, double chroma = 0.7);

struct ToyDomains {
  std::vector<image::Image> source;            ///< degraded training originals
  std::vector<image::Image> target;            ///< untouched, different scenes
  std::vector<image::Image> heldout_source;    ///< degraded evaluation images
  std::vector<image::Image> heldout_original;  ///< their undegraded versions
};

ToyDomains make_toy_domains(std::size_t n_source, std::size_t n_target, std::size_t n_heldout,
                            std::size_t size, std::uint64_t seed);

}  // namespace retouch::testing
