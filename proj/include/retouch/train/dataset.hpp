#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/image/image.hpp"

namespace retouch::train {

/// Supported image files directly inside `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Decodes every image in `dir` and resizes it to size x size. Throws when
/// the directory is missing or holds no decodable image.
std::vector<image::Image> load_image_dir(const std::filesystem::path& dir, std::size_t size = 64);

/// Unpaired training data: originals (source) and examples of the desired
/// look (target), both already at training resolution.
struct Dataset {
  std::vector<image::Image> source;
  std::vector<image::Image> target;

  void validate(std::size_t size) const;
};

Dataset load_dataset(const std::filesystem::path& source_dir,
                     const std::filesystem::path& target_dir, std::size_t size = 64);

/// Ring buffer of generated images; once full, each push evicts the oldest.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(image::Image img);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  /// Slot that the next push writes once the buffer is full.
  std::size_t cursor() const { return cursor_; }
  const image::Image& at(std::size_t i) const { return items_.at(i); }
  /// Uniform draw (with replacement) over the current contents.
  const image::Image& sample(Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<image::Image> items_;
};

}  // namespace retouch::train
