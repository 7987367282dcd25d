#include "retouch/train/dataset.hpp"

#include <algorithm>

#include "retouch/common/error.hpp"
#include "retouch/image/io.hpp"
#include "retouch/image/resize.hpp"

namespace retouch::train {

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError(dir.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && image::is_supported_image(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return files;
}

std::vector<image::Image> load_image_dir(const std::filesystem::path& dir, std::size_t size) {
  std::vector<image::Image> images;
  for (const auto& path : list_images(dir)) {
    auto img = image::load_image(path);
    if (img.width() != size || img.height() != size) img = image::resize_bicubic(img, size, size);
    images.push_back(std::move(img));
  }
  if (images.empty()) throw IoError(dir.string() + ": no decodable images (PNG or PPM)");
  return images;
}

void Dataset::validate(std::size_t size) const {
  if (source.empty()) throw InvalidArgument("dataset has no source images");
  if (target.empty()) throw InvalidArgument("dataset has no target images");
  for (const auto* set : {&source, &target}) {
    for (const auto& img : *set) {
      if (img.width() != size || img.height() != size) {
        throw InvalidArgument("dataset images must be " + std::to_string(size) + "x" +
                              std::to_string(size));
      }
    }
  }
}

Dataset load_dataset(const std::filesystem::path& source_dir,
                     const std::filesystem::path& target_dir, std::size_t size) {
  Dataset data{load_image_dir(source_dir, size), load_image_dir(target_dir, size)};
  data.validate(size);
  return data;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("replay buffer capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(image::Image img) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(img));
    return;
  }
  items_[cursor_] = std::move(img);
  cursor_ = (cursor_ + 1) % capacity_;
}

const image::Image& ReplayBuffer::sample(Rng& rng) const {
  if (items_.empty()) throw InvalidArgument("cannot sample from an empty replay buffer");
  return items_[rng.below(items_.size())];
}

}  // namespace retouch::train
