#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "retouch/common/error.hpp"
#include "retouch/common/files.hpp"
#include "retouch/nn/checkpoint.hpp"

using namespace retouch;
namespace fs = std::filesystem;

namespace {

nn::Checkpoint sample() {
  nn::Checkpoint c;
  c.set("lambda", "10");
  c.set("note", std::string("binary\0ok", 9));
  c.arrays.push_back({"a/w", {2, 3}, {1, -2, 3.5f, 0, 1e-30f, -0.0f}});
  c.arrays.push_back({"b", {1}, {42}});
  return c;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / ("retouch_ckpt_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("encode/decode round trip is exact and re-encodes to the same bytes") {
  const auto c = sample();
  const auto bytes = nn::encode_checkpoint(c);
  CHECK(bytes.substr(0, 8) == std::string("RETOUCH\0", 8));
  const auto d = nn::decode_checkpoint(bytes_of(bytes));
  CHECK(d.get("lambda") == "10");
  CHECK(d.get("note") == std::string("binary\0ok", 9));
  REQUIRE(d.arrays.size() == 2);
  CHECK(d.array("a/w").shape == nn::Shape{2, 3});
  CHECK(d.array("a/w").values == c.arrays[0].values);
  CHECK(std::signbit(d.array("a/w").values[5]));
  CHECK(nn::encode_checkpoint(d) == bytes);
}

TEST_CASE("every truncation is rejected cleanly") {
  const auto bytes = nn::encode_checkpoint(sample());
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CHECK_THROWS_AS(nn::decode_checkpoint(bytes_of(bytes.substr(0, n))), IoError);
  }
  CHECK_THROWS_AS(nn::decode_checkpoint(bytes_of(bytes + "x")), IoError);
}

TEST_CASE("bad magic and unknown versions are rejected") {
  auto bytes = nn::encode_checkpoint(sample());
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(nn::decode_checkpoint(bytes_of(bad)), IoError);
  auto future = bytes;
  future[8] = static_cast<char>(nn::kCheckpointVersion + 1);
  try {
    nn::decode_checkpoint(bytes_of(future));
    FAIL("expected a version error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("missing keys and arrays are reported by name") {
  const auto c = sample();
  CHECK_THROWS_WITH_AS(c.get("nope"), doctest::Contains("nope"), InvalidArgument);
  CHECK_THROWS_WITH_AS(c.array("nope"), doctest::Contains("nope"), InvalidArgument);
  auto d = c;
  d.set("lambda", "5");
  CHECK(d.get("lambda") == "5");
  CHECK(d.header.size() == c.header.size());
}

TEST_CASE("parameter export and import") {
  nn::ParamSet<double> src, dst;
  src.add("net/w", nn::Tensor<double>::parameter({2}, {0.25, -4}));
  dst.add("net/w", nn::Tensor<double>::parameter({2}, {0, 0}));
  nn::Checkpoint c;
  nn::export_params(src, c);
  nn::import_params(dst, c);
  CHECK(dst.tensor(0).values()[1] == -4);
  nn::ParamSet<double> wrong;
  wrong.add("net/w", nn::Tensor<double>::parameter({3}, {0, 0, 0}));
  CHECK_THROWS_AS(nn::import_params(wrong, c), InvalidArgument);
}

TEST_CASE("files: atomic save, load and failures name the path") {
  const auto dir = temp_dir();
  const auto path = dir / "model.ckpt";
  nn::save_checkpoint(sample(), path);
  CHECK(nn::load_checkpoint(path).get("lambda") == "10");
  CHECK_FALSE(fs::exists(path.string() + ".partial"));

  const auto bytes = read_file_bytes(path);
  {
    std::ofstream out(dir / "cut.ckpt", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_WITH(nn::load_checkpoint(dir / "cut.ckpt"), doctest::Contains("cut.ckpt"));
  CHECK_THROWS(nn::load_checkpoint(dir / "missing.ckpt"));
  CHECK_THROWS(nn::save_checkpoint(sample(), dir / "no_such_dir" / "x.ckpt"));
  fs::remove_all(dir);
}
