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

#ifndef STTTS_CHECKPOINT_HPP_
#define STTTS_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sttts/core.hpp"
#include "sttts/io.hpp"
#include "sttts/model.hpp"

namespace sttts {

// Single binary container: "STTTS1" magic, uint32 manifest length, JSON
// manifest (tensor name/shape/dtype/offset plus config, vocabulary, family
// table and step counter), then raw little-endian scalar payload. The
// manifest keeps insertion order, so save -> load -> save is byte-identical.

inline constexpr char kCheckpointMagic[6] = {'S', 'T', 'T', 'T', 'S', '1'};

namespace detail {

template <typename S>
void append_tensor_payload(std::string& payload, const Matrix<S>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if constexpr (sizeof(S) == 4) {
        const float v = static_cast<float>(m(r, c));
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
      } else {
        const double v = static_cast<double>(m(r, c));
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
      }
    }
}

template <typename S>
void read_tensor_payload(const std::string& payload, std::size_t offset, Matrix<S>& m) {
  std::size_t pos = offset;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if constexpr (sizeof(S) == 4) {
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i)
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[pos + i])) << (8 * i);
        float v;
        std::memcpy(&v, &bits, 4);
        m(r, c) = static_cast<S>(v);
        pos += 4;
      } else {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[pos + i])) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        m(r, c) = static_cast<S>(v);
        pos += 8;
      }
    }
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const Model<S>& model, int step) {
  nlohmann::ordered_json manifest;
  manifest["version"] = "STTTS1";
  manifest["dtype"] = sizeof(S) == 4 ? "f32" : "f64";
  manifest["step"] = step;
  manifest["config"] = config_to_map(model.cfg);
  manifest["vocab"] = model.vocab.tokens;
  nlohmann::ordered_json fams = nlohmann::ordered_json::array();
  for (const TagFamily& f : model.families) {
    nlohmann::ordered_json jf;
    jf["id"] = f.family_id;
    jf["rate"] = format_double(f.rate);
    jf["gain"] = format_double(f.gain);
    jf["tilt"] = format_double(f.tilt);
    jf["forms"] = f.surface_forms;
    jf["heldout"] = f.heldout_forms;
    fams.push_back(std::move(jf));
  }
  manifest["families"] = std::move(fams);

  std::string payload;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  auto emit = [&](const std::string& name, const Matrix<S>& m) {
    nlohmann::ordered_json jt;
    jt["name"] = name;
    jt["rows"] = m.rows();
    jt["cols"] = m.cols();
    jt["offset"] = payload.size();
    tensors.push_back(std::move(jt));
    detail::append_tensor_payload(payload, m);
  };
  for (int pid = 0; pid < model.params.size(); ++pid) {
    const auto& p = model.params.at(pid);
    emit(p.name, p.value);
  }
  for (int pid = 0; pid < model.params.size(); ++pid) {
    const auto& p = model.params.at(pid);
    emit("opt.m:" + p.name, p.adam_m);
    emit("opt.v:" + p.name, p.adam_v);
  }
  manifest["tensors"] = std::move(tensors);

  const std::string mstr = manifest.dump();
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "save_checkpoint: cannot open " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32_le(os, static_cast<std::uint32_t>(mstr.size()));
  os.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  check(os.good(), "save_checkpoint: write failed for " + path.string());
}

struct CheckpointHeader {
  nlohmann::ordered_json manifest;
  std::string payload;
};

inline CheckpointHeader read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "load_checkpoint: cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  check(is.good() && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
        "load_checkpoint: bad magic in " + path.string());
  const std::uint32_t mlen = read_u32_le(is);
  check(is.good(), "load_checkpoint: truncated header in " + path.string());
  std::string mstr(mlen, '\0');
  is.read(mstr.data(), mlen);
  check(is.good(), "load_checkpoint: truncated manifest in " + path.string());
  CheckpointHeader h;
  h.manifest = nlohmann::ordered_json::parse(mstr, nullptr, /*allow_exceptions=*/false);
  check(!h.manifest.is_discarded(), "load_checkpoint: manifest is not valid JSON");
  check(h.manifest.value("version", "") == "STTTS1",
        "load_checkpoint: unsupported version in " + path.string());
  std::ostringstream payload;
  payload << is.rdbuf();
  h.payload = payload.str();
  return h;
}

inline std::string checkpoint_precision(const std::filesystem::path& path) {
  const CheckpointHeader h = read_checkpoint_file(path);
  return h.manifest.value("dtype", "f32") == "f64" ? "double" : "single";
}

struct LoadedCheckpoint {
  ModelConfig cfg;
  int step = 0;
};

// Rebuilds the model from the stored config (same seed => same permutations
// and shapes), then overwrites parameter values and optimizer state.
template <typename S>
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, Model<S>& out_model,
                                 std::shared_ptr<const TagEmbeddingProvider> provider = nullptr) {
  const CheckpointHeader h = read_checkpoint_file(path);
  const std::string dtype = h.manifest.value("dtype", "");
  check(dtype == (sizeof(S) == 4 ? "f32" : "f64"),
        "load_checkpoint: dtype " + dtype + " does not match requested precision");

  std::map<std::string, std::string> cfg_map;
  for (const auto& [k, v] : h.manifest.at("config").items()) cfg_map[k] = v.template get<std::string>();
  LoadedCheckpoint lc;
  lc.cfg = config_from_map(cfg_map);
  lc.step = h.manifest.at("step").template get<int>();

  Vocabulary vocab = Vocabulary::from_tokens(
      h.manifest.at("vocab").template get<std::vector<std::string>>());
  std::vector<TagFamily> families;
  for (const auto& jf : h.manifest.at("families")) {
    TagFamily f;
    f.family_id = jf.at("id").template get<int>();
    f.rate = parse_double(jf.at("rate").template get<std::string>(), "rate");
    f.gain = parse_double(jf.at("gain").template get<std::string>(), "gain");
    f.tilt = parse_double(jf.at("tilt").template get<std::string>(), "tilt");
    f.surface_forms = jf.at("forms").template get<std::vector<std::string>>();
    f.heldout_forms = jf.at("heldout").template get<std::vector<std::string>>();
    families.push_back(std::move(f));
  }

  out_model = Model<S>::create(lc.cfg, std::move(vocab), std::move(families), std::move(provider));

  for (const auto& jt : h.manifest.at("tensors")) {
    const std::string name = jt.at("name").template get<std::string>();
    const Eigen::Index rows = jt.at("rows").template get<Eigen::Index>();
    const Eigen::Index cols = jt.at("cols").template get<Eigen::Index>();
    const std::size_t offset = jt.at("offset").template get<std::size_t>();
    check(offset + static_cast<std::size_t>(rows * cols) * sizeof(S) <= h.payload.size(),
          "load_checkpoint: tensor " + name + " exceeds payload");
    Matrix<S>* target = nullptr;
    std::string pname = name;
    if (name.rfind("opt.m:", 0) == 0) {
      pname = name.substr(6);
      target = &out_model.params.at(out_model.params.find(pname)).adam_m;
    } else if (name.rfind("opt.v:", 0) == 0) {
      pname = name.substr(6);
      target = &out_model.params.at(out_model.params.find(pname)).adam_v;
    } else {
      target = &out_model.params.at(out_model.params.find(pname)).value;
    }
    check(target->rows() == rows && target->cols() == cols,
          "load_checkpoint: tensor " + name + " shape mismatch");
    detail::read_tensor_payload(h.payload, offset, *target);
  }
  return lc;
}

}  // namespace sttts

#endif  // STTTS_CHECKPOINT_HPP_
