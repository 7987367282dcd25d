#include "retouch/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "retouch/common/error.hpp"
#include "retouch/common/files.hpp"

namespace retouch::nn {
namespace {

constexpr char kMagic[8] = {'R', 'E', 'T', 'O', 'U', 'C', 'H', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw IoError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(const char* what) {
    const auto n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32() {
    const auto bits = u32("array data");
    return std::bit_cast<float>(bits);
  }

  const std::uint8_t* raw(std::size_t n, const char* what) {
    need(n, what);
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : header) {
    if (k == key) {
      v = value;
      return;
    }
  }
  header.emplace_back(key, value);
}

const std::string& Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw InvalidArgument("checkpoint header has no key '" + key + "'");
}

bool Checkpoint::has(const std::string& key) const {
  for (const auto& entry : header) {
    if (entry.first == key) return true;
  }
  return false;
}

const NamedArray& Checkpoint::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw InvalidArgument("checkpoint has no array '" + name + "'");
}

bool Checkpoint::has_array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.header.size()));
  for (const auto& [k, v] : ckpt.header) {
    put_string(out, k);
    put_string(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    if (shape_size(a.shape) != a.values.size()) {
      throw InvalidArgument("checkpoint array '" + a.name + "' has shape " +
                            shape_string(a.shape) + " but " + std::to_string(a.values.size()) +
                            " values");
    }
    put_string(out, a.name);
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const auto* magic = r.raw(sizeof(kMagic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const auto n_header = r.u32("header count");
  for (std::uint32_t i = 0; i < n_header; ++i) {
    auto key = r.str("header key");
    auto value = r.str("header value");
    ckpt.header.emplace_back(std::move(key), std::move(value));
  }
  const auto n_arrays = r.u32("array count");
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = r.str("array name");
    const auto rank = r.u32("array rank");
    if (rank == 0 || rank > 8) throw IoError("checkpoint array '" + a.name + "' has bad rank");
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.u32("array dims"));
    const auto n = shape_size(a.shape);
    r.need(n * 4, "array data");
    a.values.resize(n);
    for (auto& v : a.values) v = r.f32();
    ckpt.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw IoError("trailing bytes after checkpoint payload");
  return ckpt;
}

template <class T>
void export_params(const ParamSet<T>& params, Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensor(i);
    NamedArray a{params.name(i), t.shape(), {}};
    a.values.assign(t.values().begin(), t.values().end());
    ckpt.arrays.push_back(std::move(a));
  }
}

template <class T>
void import_params(ParamSet<T>& params, const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params.tensor(i);
    const auto& a = ckpt.array(params.name(i));
    if (a.shape != t.shape()) {
      throw InvalidArgument("checkpoint array '" + a.name + "' has shape " +
                            shape_string(a.shape) + ", expected " + shape_string(t.shape()));
    }
    std::copy(a.values.begin(), a.values.end(), t.values().begin());
  }
}

template void export_params<float>(const ParamSet<float>&, Checkpoint&);
template void export_params<double>(const ParamSet<double>&, Checkpoint&);
template void import_params<float>(ParamSet<float>&, const Checkpoint&);
template void import_params<double>(ParamSet<double>&, const Checkpoint&);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace retouch::nn
