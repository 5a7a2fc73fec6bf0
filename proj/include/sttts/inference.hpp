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

#ifndef STTTS_INFERENCE_HPP_
#define STTTS_INFERENCE_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "sttts/io.hpp"
#include "sttts/model.hpp"

namespace sttts {

// Exactly one style source: a natural-language tag or a reference mel file.
struct SynthesisRequest {
  std::string id;
  std::string text;
  std::string tag;
  std::string ref_mel_path;

  void validate() const {
    check(!text.empty(), "synthesis request" + (id.empty() ? "" : " '" + id + "'") +
                             ": empty text");
    const bool has_tag = !tag.empty();
    const bool has_ref = !ref_mel_path.empty();
    check(has_tag != has_ref, "synthesis request" + (id.empty() ? "" : " '" + id + "'") +
                                  ": exactly one of tag or reference mel must be given");
  }
};

// text + style -> log-mel with predictor durations. The flow is not part of
// this path; the decoder consumes exp-rounded durations, every token gets at
// least one frame.
template <typename S>
Matrix<float> synthesize(const Model<S>& model, const SynthesisRequest& req) {
  req.validate();
  const TokenSequence tokens = tokenize(req.text, model.vocab);
  Vector<S> style;
  if (!req.tag.empty()) {
    style = model.encode_tag_values(req.tag);
  } else {
    const Matrix<S> ref = read_mel<S>(req.ref_mel_path);
    style = model.encode_reference_values(ref);
  }

  ad::Graph<S> g;
  Bind<S> bind(g, model.params);
  ad::Var<S> trunk = model.text.trunk(bind, tokens);
  ad::Var<S> style_var = g.constant(style.transpose());
  const Matrix<S> log_d = model.dur.predict(bind, trunk, style_var).value();
  std::vector<double> log_durations(static_cast<std::size_t>(log_d.rows()));
  for (Eigen::Index i = 0; i < log_d.rows(); ++i)
    log_durations[static_cast<std::size_t>(i)] = static_cast<double>(log_d(i, 0));
  const std::vector<int> durations = durations_for_inference(log_durations);

  ad::Var<S> dec_in = model.text.dec_head(bind, trunk);
  ad::Var<S> expanded = expand_by_duration(dec_in, durations);
  const Matrix<S> mel = model.dec.decode(bind, expanded, style_var).value();
  return mel.template cast<float>();
}

// batch request file: id<TAB>text<TAB>tag or id<TAB>text<TAB>@mel_path
inline std::vector<SynthesisRequest> load_requests(const std::filesystem::path& path) {
  std::vector<SynthesisRequest> reqs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    check(fields.size() == 3, "load_requests: line " + std::to_string(i + 1) +
                                  " must be id<TAB>text<TAB>tag|@mel_path");
    SynthesisRequest r;
    r.id = fields[0];
    r.text = fields[1];
    if (!fields[2].empty() && fields[2][0] == '@') r.ref_mel_path = fields[2].substr(1);
    else r.tag = fields[2];
    reqs.push_back(std::move(r));
  }
  return reqs;
}

struct BatchManifestRow {
  std::string id;
  bool ok = false;
  std::string detail;  // output file name, or the error message
  Eigen::Index frames = 0;
};

// Maps synthesize over the requests; per-request failures become manifest
// rows instead of aborting the batch.
template <typename S>
std::vector<BatchManifestRow> batch_synthesize(const Model<S>& model,
                                               const std::vector<SynthesisRequest>& requests,
                                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<BatchManifestRow> manifest;
  for (const SynthesisRequest& req : requests) {
    BatchManifestRow row;
    row.id = req.id;
    try {
      const Matrix<float> mel = synthesize(model, req);
      const std::string fname = req.id + ".mel";
      write_mel(out_dir / fname, mel);
      row.ok = true;
      row.detail = fname;
      row.frames = mel.rows();
    } catch (const std::exception& e) {
      row.ok = false;
      row.detail = e.what();
    }
    manifest.push_back(std::move(row));
  }
  std::string body;
  for (const BatchManifestRow& row : manifest)
    body += row.id + "\t" + (row.ok ? "ok" : "error") + "\t" + row.detail +
            (row.ok ? "\t" + std::to_string(row.frames) : "") + "\n";
  write_text(out_dir / "manifest.tsv", body);
  return manifest;
}

}  // namespace sttts

#endif  // STTTS_INFERENCE_HPP_
