// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cycpaint {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'Y', 'C', 'P', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPreamble = 20;

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

template <class State, class Fn>
void for_each_tensor(State& s, Fn fn) {
  auto params = [&](auto& ps, const std::string& prefix) {
    for (std::size_t i = 0; i < ps.size(); ++i) fn(prefix + ps.name(i), ps[i]);
  };
  params(s.bundle.completion.params(), "");
  params(s.bundle.extrapolation.params(), "");
  params(s.bundle.discriminator.params(), "");
  params(s.opt_C.m, "adam.C.m.");
  params(s.opt_C.v, "adam.C.v.");
  params(s.opt_E.m, "adam.E.m.");
  params(s.opt_E.v, "adam.E.v.");
  params(s.opt_D.m, "adam.D.m.");
  params(s.opt_D.v, "adam.D.v.");
}

[[noreturn]] void corrupt(const std::string& path, const std::string& what) {
  fail(ErrorCategory::checkpoint, "checkpoint " + path + ": " + what);
}

std::vector<int> shape_vec(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

std::string shape_str(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "x" : "") << v[i];
  return os.str();
}

struct Parsed {
  nlohmann::json header;
  std::string payload;
  std::uint64_t payload_offset = 0;
};

Parsed read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kPreamble) {
    corrupt(path, "file ends at offset " + std::to_string(bytes.size()) + ", inside the " +
                      std::to_string(kPreamble) + "-byte preamble");
  }
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) corrupt(path, "bad magic at offset 0");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&header_len, bytes.data() + 12, 8);
  if (version != kCheckpointVersion) {
    corrupt(path, "unsupported version " + std::to_string(version) + " at offset 8 (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (header_len > bytes.size() - kPreamble) {
    corrupt(path, "header of " + std::to_string(header_len) + " bytes at offset 20 runs past end of file (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.substr(kPreamble, header_len));
  } catch (const nlohmann::json::exception& e) {
    corrupt(path, std::string("malformed header at offset 20: ") + e.what());
  }
  p.payload_offset = kPreamble + header_len;
  p.payload = bytes.substr(p.payload_offset);
  return p;
}

TrainingState fill_state(const std::string& path, const Parsed& p, const TrainingConfig& cfg) {
  TrainingState s = init_training(cfg);
  const auto& h = p.header;
  try {
    s.step = h.at("step").get<long>();
    s.opt_C.t = h.at("adam_t").at("C").get<long>();
    s.opt_E.t = h.at("adam_t").at("E").get<long>();
    s.opt_D.t = h.at("adam_t").at("D").get<long>();
  } catch (const nlohmann::json::exception& e) {
    corrupt(path, std::string("header field missing: ") + e.what());
  }
  const auto& dir = h.at("tensors");
  std::size_t k = 0;
  for_each_tensor(s, [&](const std::string& name, Tensor<float>& t) {
    if (k >= dir.size()) corrupt(path, "missing tensor " + name);
    const auto& e = dir[k++];
    const std::string stored = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<int>>();
    if (stored != name) corrupt(path, "tensor name mismatch: expected " + name + ", found " + stored);
    if (shape != shape_vec(t.shape())) {
      corrupt(path, "shape mismatch for tensor " + name + ": checkpoint has " + shape_str(shape) +
                        ", model expects " + shape_str(shape_vec(t.shape())));
    }
    const auto offset = e.at("offset").get<std::uint64_t>();
    const std::size_t bytes = t.numel() * sizeof(float);
    if (offset + bytes > p.payload.size()) {
      corrupt(path, "tensor " + name + " needs bytes [" + std::to_string(p.payload_offset + offset) + ", " +
                        std::to_string(p.payload_offset + offset + bytes) + ") but the file ends at " +
                        std::to_string(p.payload_offset + p.payload.size()));
    }
    const char* src = p.payload.data() + offset;
    if (fnv1a(src, bytes) != e.at("fnv1a").get<std::uint64_t>()) {
      corrupt(path, "hash mismatch for tensor " + name + " at file offset " +
                        std::to_string(p.payload_offset + offset));
    }
    std::memcpy(t.data(), src, bytes);
  });
  if (k != dir.size()) {
    corrupt(path, "unexpected tensor " + dir[k].at("name").get<std::string>());
  }
  return s;
}

TrainingConfig stored_config(const std::string& path, const Parsed& p) {
  try {
    return TrainingConfig::from_text(p.header.at("config").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    corrupt(path, std::string("header has no config: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::string& path) {
  nlohmann::ordered_json header;
  header["format"] = "cycpaint-checkpoint";
  header["step"] = state.step;
  header["config"] = state.config.to_text();
  header["adam_t"] = {{"C", state.opt_C.t}, {"E", state.opt_E.t}, {"D", state.opt_D.t}};
  header["tensors"] = nlohmann::ordered_json::array();
  std::string payload;
  for_each_tensor(state, [&](const std::string& name, const Tensor<float>& t) {
    const std::size_t bytes = t.numel() * sizeof(float);
    header["tensors"].push_back({{"name", name},
                                 {"shape", shape_vec(t.shape())},
                                 {"offset", payload.size()},
                                 {"fnv1a", fnv1a(t.data(), bytes)}});
    payload.append(reinterpret_cast<const char*>(t.data()), bytes);
  });
  const std::string h = header.dump();
  const std::uint64_t header_len = h.size();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write checkpoint " + tmp);
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) fail(ErrorCategory::io, "short write to checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCategory::io, "cannot move checkpoint into place at " + path + ": " + ec.message());
}

TrainingState load_checkpoint(const std::string& path) {
  const Parsed p = read_container(path);
  return fill_state(path, p, stored_config(path, p));
}

TrainingState load_checkpoint(const std::string& path, const TrainingConfig& expected) {
  const Parsed p = read_container(path);
  TrainingState s = fill_state(path, p, expected);
  s.config = stored_config(path, p);
  return s;
}

std::vector<std::string> checkpoint_tensor_names(const std::string& path) {
  const Parsed p = read_container(path);
  std::vector<std::string> names;
  for (const auto& e : p.header.at("tensors")) names.push_back(e.at("name").get<std::string>());
  return names;
}

std::vector<std::string> expected_tensor_names(const TrainingConfig& cfg) {
  TrainingState s = init_training(cfg);
  std::vector<std::string> names;
  for_each_tensor(s, [&](const std::string& name, Tensor<float>&) { names.push_back(name); });
  return names;
}

}  // namespace cycpaint
