#pragma once

// Binary checkpoint container.
//
//   magic      8 bytes  "RETOUCH\0"
//   version    u32      kCheckpointVersion
//   n_header   u32      then n_header x { u32 len, key bytes, u32 len, value bytes }
//   n_arrays   u32      then n_arrays x { u32 len, name bytes, u32 rank, rank x u32 dim,
//                                         prod(dim) x f32 }
//
// All integers and floats are little-endian. Header entries carry the
// hyperparameters as text; arrays are namespaced ("agent/...", "critic/...").

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "retouch/nn/params.hpp"
#include "retouch/nn/tensor.hpp"

namespace retouch::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<NamedArray> arrays;

  void set(const std::string& key, const std::string& value);
  /// Throws InvalidArgument when the key is absent.
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  const NamedArray& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Rejects bad magic, unknown versions and truncated input.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Appends every parameter (converted to f32) under its registered name.
template <class T>
void export_params(const ParamSet<T>& params, Checkpoint& ckpt);

/// Overwrites parameter values from same-named arrays; shapes must match.
template <class T>
void import_params(ParamSet<T>& params, const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace retouch::nn
