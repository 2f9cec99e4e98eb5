// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "cycpaint/checkpoint.hpp"
#include "cycpaint/error.hpp"
#include "doctest.h"
#include "support/helpers.hpp"

using namespace cycpaint;
namespace fs = std::filesystem;

namespace {

// Two-level miniature bundle at 8x8.
TrainingConfig mini_config(int resolution = 8) {
  TrainingConfig c;
  c.resolution = resolution;
  c.gen_base_channels = 2;
  c.gen_downsample_stages = 1;
  c.gen_dilations = {1, 2};
  c.gen_edge_kernel = 3;
  c.disc_base_channels = 2;
  c.disc_downsample_stages = 2;
  c.seed = 17;
  return c;
}

void randomize(ParameterSet<float>& ps, Rng& rng) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (float& v : ps[i].values()) v = static_cast<float>(rng.normal());
}

TrainingState random_state(const TrainingConfig& cfg) {
  TrainingState s = init_training(cfg);
  Rng rng(5);
  for (ParameterSet<float>* ps :
       {&s.bundle.completion.params(), &s.bundle.extrapolation.params(), &s.bundle.discriminator.params(),
        &s.opt_C.m, &s.opt_C.v, &s.opt_E.m, &s.opt_E.v, &s.opt_D.m, &s.opt_D.v}) {
    randomize(*ps, rng);
  }
  s.step = 1234;
  s.opt_C.t = 11;
  s.opt_E.t = 12;
  s.opt_D.t = 13;
  return s;
}

bool bit_equal(const ParameterSet<float>& a, const ParameterSet<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i) || !(a[i].shape() == b[i].shape())) return false;
    if (std::memcmp(a[i].data(), b[i].data(), a[i].numel() * sizeof(float)) != 0) return false;
  }
  return true;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string checkpoint_error(const fs::path& p, ErrorCategory expected = ErrorCategory::checkpoint) {
  try {
    load_checkpoint(p.string());
  } catch (const Error& e) {
    CHECK(e.category() == expected);
    return e.what();
  }
  FAIL("expected an error loading " << p);
  return {};
}

std::vector<std::string> layer_names(const std::string& net, const std::vector<std::string>& layers) {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    out.push_back(net + "." + l + ".weight");
    out.push_back(net + "." + l + ".bias");
  }
  return out;
}

}  // namespace

TEST_CASE("save and load round trip bit-exactly") {
  const auto dir = testutil::scratch_dir("ckpt_roundtrip");
  const TrainingState s = random_state(mini_config());
  save_checkpoint(s, (dir / "a.ckpt").string());
  const TrainingState back = load_checkpoint((dir / "a.ckpt").string());
  CHECK(back.step == 1234);
  CHECK(back.config == s.config);
  CHECK(back.opt_C.t == 11);
  CHECK(back.opt_E.t == 12);
  CHECK(back.opt_D.t == 13);
  CHECK(bit_equal(back.bundle.completion.params(), s.bundle.completion.params()));
  CHECK(bit_equal(back.bundle.extrapolation.params(), s.bundle.extrapolation.params()));
  CHECK(bit_equal(back.bundle.discriminator.params(), s.bundle.discriminator.params()));
  CHECK(bit_equal(back.opt_C.m, s.opt_C.m));
  CHECK(bit_equal(back.opt_E.v, s.opt_E.v));
  CHECK(bit_equal(back.opt_D.v, s.opt_D.v));

  save_checkpoint(back, (dir / "b.ckpt").string());
  CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
}

TEST_CASE("the miniature checkpoint holds exactly the expected tensors") {
  const auto dir = testutil::scratch_dir("ckpt_names");
  save_checkpoint(random_state(mini_config()), (dir / "m.ckpt").string());

  // One strided stage, two dilated residual blocks of two convs each; a
  // discriminator with two strided convs and a head.
  const std::vector<std::string> gen_layers{"stem", "down0", "mid0.conv0", "mid0.conv1",
                                            "mid1.conv0", "mid1.conv1", "up0", "head"};
  std::vector<std::string> params;
  for (const char* net : {"C", "E"}) {
    const auto n = layer_names(net, gen_layers);
    params.insert(params.end(), n.begin(), n.end());
  }
  const auto d = layer_names("D", {"down0", "down1", "head"});
  params.insert(params.end(), d.begin(), d.end());

  std::set<std::string> expected(params.begin(), params.end());
  for (const auto& p : params) {
    const std::string net = p.substr(0, 1);
    expected.insert("adam." + net + ".m." + p);
    expected.insert("adam." + net + ".v." + p);
  }
  const auto stored = checkpoint_tensor_names((dir / "m.ckpt").string());
  CHECK(stored.size() == expected.size());
  CHECK(std::set<std::string>(stored.begin(), stored.end()) == expected);
  CHECK(expected_tensor_names(mini_config()) == stored);
}

TEST_CASE("loading into another resolution names the first mismatched tensor") {
  const auto dir = testutil::scratch_dir("ckpt_resolution");
  const TrainingConfig saved_cfg = mini_config(16);
  save_checkpoint(random_state(saved_cfg), (dir / "r.ckpt").string());
  const TrainingConfig other = mini_config(8);

  // The generators are fully convolutional; the first shape that changes is
  // found by walking both bundles in storage order.
  const TrainingState a = init_training(saved_cfg), b = init_training(other);
  std::string first;
  for (const auto* pair : {&a.bundle.completion, &a.bundle.extrapolation, &a.bundle.discriminator}) {
    const auto& pa = pair->params();
    const auto& pb = pair == &a.bundle.completion      ? b.bundle.completion.params()
                     : pair == &a.bundle.extrapolation ? b.bundle.extrapolation.params()
                                                       : b.bundle.discriminator.params();
    for (std::size_t i = 0; i < pa.size() && first.empty(); ++i) {
      if (!(pa[i].shape() == pb[i].shape())) first = pa.name(i);
    }
  }
  REQUIRE_FALSE(first.empty());
  CHECK(first == "D.head.weight");
  try {
    load_checkpoint((dir / "r.ckpt").string(), other);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::checkpoint);
    CHECK(std::string(e.what()).find("tensor " + first + ":") != std::string::npos);
  }
  CHECK_NOTHROW(load_checkpoint((dir / "r.ckpt").string(), saved_cfg));
}

TEST_CASE("damaged files fail with offsets") {
  const auto dir = testutil::scratch_dir("ckpt_damage");
  save_checkpoint(random_state(mini_config()), (dir / "ok.ckpt").string());
  const std::string bytes = read_bytes(dir / "ok.ckpt");

  SUBCASE("missing file") {
    checkpoint_error(dir / "none.ckpt", ErrorCategory::io);
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    write_bytes(dir / "x.ckpt", b);
    CHECK(checkpoint_error(dir / "x.ckpt").find("offset 0") != std::string::npos);
  }
  SUBCASE("unknown version") {
    std::string b = bytes;
    b[8] = 9;
    write_bytes(dir / "x.ckpt", b);
    CHECK(checkpoint_error(dir / "x.ckpt").find("offset 8") != std::string::npos);
  }
  SUBCASE("truncated anywhere") {
    for (std::size_t len : {std::size_t{0}, std::size_t{5}, std::size_t{19}, std::size_t{40}, bytes.size() / 2,
                            bytes.size() - 1}) {
      CAPTURE(len);
      write_bytes(dir / "t.ckpt", bytes.substr(0, len));
      const std::string msg = checkpoint_error(dir / "t.ckpt");
      CHECK((msg.find("offset") != std::string::npos || msg.find("ends at") != std::string::npos));
    }
  }
  SUBCASE("flipped payload byte") {
    std::string b = bytes;
    const std::size_t at = b.size() - 3;
    b[at] = static_cast<char>(b[at] ^ 0x40);
    write_bytes(dir / "f.ckpt", b);
    const std::string msg = checkpoint_error(dir / "f.ckpt");
    CHECK(msg.find("hash mismatch") != std::string::npos);
    CHECK(msg.find("adam.D.v.") != std::string::npos);
  }
}

TEST_CASE("saving into a missing directory is an io error") {
  try {
    save_checkpoint(init_training(mini_config()), "/nonexistent-dir/x/y.ckpt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::io);
  }
}
