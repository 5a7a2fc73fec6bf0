// Copyright (c) 2026, sttts contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STTTS_CONFIG_HPP_
#define STTTS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sttts/core.hpp"
#include "sttts/io.hpp"

namespace sttts {

// Desk-scale defaults; paper-scale values go through the same fields
// (see configs/paper_scale.cfg).
struct ModelConfig {
  // dimensions
  int mel_dim = 20;
  int hidden = 64;
  int style_dim = 64;    // shared style embedding size
  int lm_dim = 32;       // tag-provider output size
  int adapt_hidden = 64;

  // text encoder
  int text_blocks = 8;
  int text_kernel = 5;
  std::vector<int> text_dilations = {1, 2, 4};

  // duration predictor
  int dur_blocks = 5;
  int dur_kernel = 5;
  std::vector<int> dur_dilations = {1};

  // mel decoder
  int dec_blocks = 12;
  int dec_kernel = 3;
  std::vector<int> dec_dilations = {1, 2, 4, 8};

  // reference encoder conv stack (stride-2 3x3 per entry)
  std::vector<int> ref_channels = {8, 8, 16, 16, 32, 32};

  // aligner flow
  int flow_blocks = 4;
  int flow_hidden = 32;
  int flow_kernel = 5;
  int flow_net_layers = 4;
  bool flow_mixing = true;

  // synthetic tag provider
  double provider_centroid_scale = 10.0;
  double provider_jitter = 0.1;

  // losses
  double w_mel = 1.0;
  double w_dur = 1.0;
  double w_align = 1.0;
  double w_style = 1.0;
  bool stop_grad_reference = false;
  double huber_delta = 1.0;

  // optimizer / schedule
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  double noam_scale = 0.02;
  int warmup_steps = 500;
  int batch_size = 16;
  int max_steps = 5000;

  std::uint64_t seed = 1;
  std::string precision = "single";  // or "double"
  int log_interval = 50;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  double holdout_fraction = 0.1;
  int threads = 1;

  void validate() const {
    check(mel_dim >= 1 && hidden >= 1 && style_dim >= 1 && lm_dim >= 1 && adapt_hidden >= 1,
          "ModelConfig: dimensions must be >= 1");
    check(text_kernel % 2 == 1 && dur_kernel % 2 == 1 && dec_kernel % 2 == 1 &&
              flow_kernel % 2 == 1,
          "ModelConfig: kernels must be odd");
    check(!text_dilations.empty() && !dur_dilations.empty() && !dec_dilations.empty(),
          "ModelConfig: dilation cycles must be nonempty");
    check(!ref_channels.empty(), "ModelConfig: ref_channels must be nonempty");
    check(w_mel >= 0 && w_dur >= 0 && w_align >= 0 && w_style >= 0,
          "ModelConfig: loss weights must be >= 0");
    check(warmup_steps >= 1, "ModelConfig: warmup_steps must be >= 1");
    check(batch_size >= 1 && max_steps >= 0, "ModelConfig: bad batch_size/max_steps");
    check(precision == "single" || precision == "double",
          "ModelConfig: precision must be single or double");
    check(holdout_fraction >= 0.0 && holdout_fraction < 1.0,
          "ModelConfig: holdout_fraction must be in [0, 1)");
    check(threads >= 1, "ModelConfig: threads must be >= 1");
  }
};

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const std::string& part : split(s, ','))
    out.push_back(static_cast<int>(parse_int(part, key)));
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Flat "key = value" map; the checkpoint manifest reuses the same encoding.
inline std::map<std::string, std::string> config_to_map(const ModelConfig& c) {
  std::map<std::string, std::string> m;
  m["mel_dim"] = std::to_string(c.mel_dim);
  m["hidden"] = std::to_string(c.hidden);
  m["style_dim"] = std::to_string(c.style_dim);
  m["lm_dim"] = std::to_string(c.lm_dim);
  m["adapt_hidden"] = std::to_string(c.adapt_hidden);
  m["text_blocks"] = std::to_string(c.text_blocks);
  m["text_kernel"] = std::to_string(c.text_kernel);
  m["text_dilations"] = detail::join_ints(c.text_dilations);
  m["dur_blocks"] = std::to_string(c.dur_blocks);
  m["dur_kernel"] = std::to_string(c.dur_kernel);
  m["dur_dilations"] = detail::join_ints(c.dur_dilations);
  m["dec_blocks"] = std::to_string(c.dec_blocks);
  m["dec_kernel"] = std::to_string(c.dec_kernel);
  m["dec_dilations"] = detail::join_ints(c.dec_dilations);
  m["ref_channels"] = detail::join_ints(c.ref_channels);
  m["flow_blocks"] = std::to_string(c.flow_blocks);
  m["flow_hidden"] = std::to_string(c.flow_hidden);
  m["flow_kernel"] = std::to_string(c.flow_kernel);
  m["flow_net_layers"] = std::to_string(c.flow_net_layers);
  m["flow_mixing"] = c.flow_mixing ? "1" : "0";
  m["provider_centroid_scale"] = format_double(c.provider_centroid_scale);
  m["provider_jitter"] = format_double(c.provider_jitter);
  m["w_mel"] = format_double(c.w_mel);
  m["w_dur"] = format_double(c.w_dur);
  m["w_align"] = format_double(c.w_align);
  m["w_style"] = format_double(c.w_style);
  m["stop_grad_reference"] = c.stop_grad_reference ? "1" : "0";
  m["huber_delta"] = format_double(c.huber_delta);
  m["adam_beta1"] = format_double(c.adam_beta1);
  m["adam_beta2"] = format_double(c.adam_beta2);
  m["adam_eps"] = format_double(c.adam_eps);
  m["noam_scale"] = format_double(c.noam_scale);
  m["warmup_steps"] = std::to_string(c.warmup_steps);
  m["batch_size"] = std::to_string(c.batch_size);
  m["max_steps"] = std::to_string(c.max_steps);
  m["seed"] = std::to_string(c.seed);
  m["precision"] = c.precision;
  m["log_interval"] = std::to_string(c.log_interval);
  m["checkpoint_interval"] = std::to_string(c.checkpoint_interval);
  m["holdout_fraction"] = format_double(c.holdout_fraction);
  m["threads"] = std::to_string(c.threads);
  return m;
}

inline void apply_config_entry(ModelConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&] { return static_cast<int>(parse_int(value, key)); };
  auto as_double = [&] { return parse_double(value, key); };
  auto as_bool = [&] {
    check(value == "0" || value == "1" || value == "true" || value == "false",
          "config: boolean key " + key + " must be 0/1/true/false");
    return value == "1" || value == "true";
  };
  if (key == "mel_dim") c.mel_dim = as_int();
  else if (key == "hidden") c.hidden = as_int();
  else if (key == "style_dim") c.style_dim = as_int();
  else if (key == "lm_dim") c.lm_dim = as_int();
  else if (key == "adapt_hidden") c.adapt_hidden = as_int();
  else if (key == "text_blocks") c.text_blocks = as_int();
  else if (key == "text_kernel") c.text_kernel = as_int();
  else if (key == "text_dilations") c.text_dilations = detail::parse_int_list(value, key);
  else if (key == "dur_blocks") c.dur_blocks = as_int();
  else if (key == "dur_kernel") c.dur_kernel = as_int();
  else if (key == "dur_dilations") c.dur_dilations = detail::parse_int_list(value, key);
  else if (key == "dec_blocks") c.dec_blocks = as_int();
  else if (key == "dec_kernel") c.dec_kernel = as_int();
  else if (key == "dec_dilations") c.dec_dilations = detail::parse_int_list(value, key);
  else if (key == "ref_channels") c.ref_channels = detail::parse_int_list(value, key);
  else if (key == "flow_blocks") c.flow_blocks = as_int();
  else if (key == "flow_hidden") c.flow_hidden = as_int();
  else if (key == "flow_kernel") c.flow_kernel = as_int();
  else if (key == "flow_net_layers") c.flow_net_layers = as_int();
  else if (key == "flow_mixing") c.flow_mixing = as_bool();
  else if (key == "provider_centroid_scale") c.provider_centroid_scale = as_double();
  else if (key == "provider_jitter") c.provider_jitter = as_double();
  else if (key == "w_mel") c.w_mel = as_double();
  else if (key == "w_dur") c.w_dur = as_double();
  else if (key == "w_align") c.w_align = as_double();
  else if (key == "w_style") c.w_style = as_double();
  else if (key == "stop_grad_reference") c.stop_grad_reference = as_bool();
  else if (key == "huber_delta") c.huber_delta = as_double();
  else if (key == "adam_beta1") c.adam_beta1 = as_double();
  else if (key == "adam_beta2") c.adam_beta2 = as_double();
  else if (key == "adam_eps") c.adam_eps = as_double();
  else if (key == "noam_scale") c.noam_scale = as_double();
  else if (key == "warmup_steps") c.warmup_steps = as_int();
  else if (key == "batch_size") c.batch_size = as_int();
  else if (key == "max_steps") c.max_steps = as_int();
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "precision") c.precision = value;
  else if (key == "log_interval") c.log_interval = as_int();
  else if (key == "checkpoint_interval") c.checkpoint_interval = as_int();
  else if (key == "holdout_fraction") c.holdout_fraction = as_double();
  else if (key == "threads") c.threads = as_int();
  else fail("config: unknown key '" + key + "'");
}

inline ModelConfig config_from_map(const std::map<std::string, std::string>& m) {
  ModelConfig c;
  for (const auto& [k, v] : m) apply_config_entry(c, k, v);
  return c;
}

// "key = value" lines, '#' starts a comment
inline void load_config_file(ModelConfig& c, const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(i + 1) + " of " + path.string() + " is not key = value");
    apply_config_entry(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

}  // namespace sttts

#endif  // STTTS_CONFIG_HPP_
