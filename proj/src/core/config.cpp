// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cycpaint {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorCategory::config, "invalid value '" + value + "' for key " + key);
}

long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_long(key, trim(item))));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::function<std::string(const TrainingConfig&)> get;
  std::function<void(TrainingConfig&, const std::string&)> set;
};

#define INT_FIELD(name, member)                                                         \
  {name, {[](const TrainingConfig& c) { return std::to_string(c.member); },             \
          [](TrainingConfig& c, const std::string& v) {                                 \
            c.member = static_cast<decltype(c.member)>(parse_long(name, v));            \
          }}}
#define DOUBLE_FIELD(name, member)                                                      \
  {name, {[](const TrainingConfig& c) { return fmt_double(c.member); },                 \
          [](TrainingConfig& c, const std::string& v) { c.member = parse_double(name, v); }}}
#define BOOL_FIELD(name, member)                                                        \
  {name, {[](const TrainingConfig& c) { return std::string(c.member ? "true" : "false"); }, \
          [](TrainingConfig& c, const std::string& v) { c.member = parse_bool(name, v); }}}
#define STRING_FIELD(name, member)                                                      \
  {name, {[](const TrainingConfig& c) { return c.member; },                             \
          [](TrainingConfig& c, const std::string& v) { c.member = v; }}}

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      INT_FIELD("resolution", resolution),
      INT_FIELD("batch_size", batch_size),
      INT_FIELD("total_steps", total_steps),
      DOUBLE_FIELD("learning_rate", learning_rate),
      DOUBLE_FIELD("adam_beta1", adam_beta1),
      DOUBLE_FIELD("adam_beta2", adam_beta2),
      DOUBLE_FIELD("alpha", weights.alpha),
      DOUBLE_FIELD("beta", weights.beta),
      DOUBLE_FIELD("min_fraction", mask_spec.min_fraction),
      DOUBLE_FIELD("max_fraction", mask_spec.max_fraction),
      {"mask_seed", {[](const TrainingConfig& c) { return std::to_string(c.mask_spec.seed); },
                     [](TrainingConfig& c, const std::string& v) { c.mask_spec.seed = parse_u64("mask_seed", v); }}},
      {"seed", {[](const TrainingConfig& c) { return std::to_string(c.seed); },
                [](TrainingConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }}},
      INT_FIELD("checkpoint_every", checkpoint_every),
      INT_FIELD("log_every", log_every),
      BOOL_FIELD("include_E_adv_in_forward", include_E_adv_in_forward),
      BOOL_FIELD("use_cycle_loss", use_cycle_loss),
      INT_FIELD("gen_base_channels", gen_base_channels),
      INT_FIELD("gen_downsample_stages", gen_downsample_stages),
      {"gen_dilations", {[](const TrainingConfig& c) {
                           std::string s;
                           for (std::size_t i = 0; i < c.gen_dilations.size(); ++i) {
                             if (i) s += ",";
                             s += std::to_string(c.gen_dilations[i]);
                           }
                           return s;
                         },
                         [](TrainingConfig& c, const std::string& v) { c.gen_dilations = parse_int_list("gen_dilations", v); }}},
      INT_FIELD("gen_edge_kernel", gen_edge_kernel),
      INT_FIELD("disc_base_channels", disc_base_channels),
      INT_FIELD("disc_downsample_stages", disc_downsample_stages),
      STRING_FIELD("data", data),
      DOUBLE_FIELD("split_ratio", split_ratio),
      STRING_FIELD("out_dir", out_dir),
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : field_table()) {
    if (name == key) return f;
  }
  fail(ErrorCategory::config, "unknown config key '" + key + "'");
}

}  // namespace

void TrainingConfig::validate() const {
  std::ostringstream os;
  if (total_steps < 1) os << "total_steps must be >= 1; ";
  if (!(learning_rate > 0.0)) os << "learning_rate must be > 0; ";
  if (batch_size < 1) os << "batch_size must be >= 1; ";
  if (checkpoint_every < 1) os << "checkpoint_every must be >= 1; ";
  if (log_every < 1) os << "log_every must be >= 1; ";
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    os << "adam betas must lie in [0, 1); ";
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) os << "split_ratio must lie in (0, 1); ";
  if (!os.str().empty()) fail(ErrorCategory::config, os.str().substr(0, os.str().size() - 2));
  weights.validate();
  mask_spec.validate();
  const GeneratorConfig g = generator();
  g.validate();
  discriminator().validate();
  const auto [lo, hi] = feasible_sides(mask_spec, resolution, resolution);
  (void)lo;
  const int field = middle_receptive_field(g);
  if (field <= hi) {
    fail(ErrorCategory::config, "generator middle receptive field " + std::to_string(field) +
                                    " does not exceed the largest mask side " + std::to_string(hi));
  }
}

GeneratorConfig TrainingConfig::generator() const {
  GeneratorConfig g;
  g.base_channels = gen_base_channels;
  g.downsample_stages = gen_downsample_stages;
  g.dilated_blocks = gen_dilations;
  g.input_channels = 4;
  g.output_channels = 3;
  g.resolution = resolution;
  g.edge_kernel = gen_edge_kernel;
  return g;
}

DiscriminatorConfig TrainingConfig::discriminator() const {
  DiscriminatorConfig d;
  d.base_channels = disc_base_channels;
  d.downsample_stages = disc_downsample_stages;
  d.input_channels = 3;
  d.resolution = resolution;
  return d;
}

void TrainingConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, trim(value)); }

std::string TrainingConfig::get(const std::string& key) const { return field(key).get(*this); }

void TrainingConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCategory::usage, "override must be key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string TrainingConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [name, f] : field_table()) os << name << " = " << f.get(*this) << "\n";
  return os.str();
}

TrainingConfig TrainingConfig::from_text(const std::string& text) {
  TrainingConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCategory::config, "line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

TrainingConfig TrainingConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

const std::vector<std::string>& TrainingConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : field_table()) out.push_back(name);
    return out;
  }();
  return k;
}

bool is_schedule_only_key(const std::string& key) {
  return key == "total_steps" || key == "checkpoint_every" || key == "log_every" || key == "out_dir";
}

std::vector<std::string> config_diff(const TrainingConfig& a, const TrainingConfig& b, bool trajectory_only) {
  std::vector<std::string> out;
  for (const auto& [name, f] : field_table()) {
    if (trajectory_only && is_schedule_only_key(name)) continue;
    const std::string va = f.get(a), vb = f.get(b);
    if (va != vb) out.push_back(name + ": " + va + " -> " + vb);
  }
  return out;
}

}  // namespace cycpaint
