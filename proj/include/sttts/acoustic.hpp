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

#ifndef STTTS_ACOUSTIC_HPP_
#define STTTS_ACOUSTIC_HPP_

#include <optional>
#include <string>
#include <vector>

#include "sttts/autodiff.hpp"
#include "sttts/config.hpp"
#include "sttts/core.hpp"
#include "sttts/nn.hpp"

namespace sttts {

// Token embedding plus an unconditioned residual stack. The trunk feeds
// three consumers through separate heads: prior means for the aligner, the
// mel decoder input, and (directly) the duration predictor.
template <typename S>
struct TextEncoder {
  int embedding = -1;
  int vocab_size = 0;
  ResidualStack<S> stack;
  Linear<S> mu_head;   // hidden -> mel_dim
  Linear<S> dec_head;  // hidden -> hidden

  static TextEncoder create(ParamStore<S>& ps, const ModelConfig& cfg, int vocab_size,
                            Rng& rng) {
    TextEncoder t;
    t.vocab_size = vocab_size;
    t.embedding = ps.add("text.embedding",
                         rng.normal_matrix<S>(vocab_size, cfg.hidden,
                                              1.0 / std::sqrt(static_cast<double>(cfg.hidden))));
    t.stack = ResidualStack<S>::create(ps, "text", cfg.hidden, cfg.text_kernel,
                                       cfg.text_dilations, cfg.text_blocks, 0, rng);
    t.mu_head = Linear<S>::create(ps, "text.mu_head", cfg.hidden, cfg.mel_dim, rng);
    t.dec_head = Linear<S>::create(ps, "text.dec_head", cfg.hidden, cfg.hidden, rng);
    return t;
  }

  ad::Var<S> trunk(Bind<S>& bind, const TokenSequence& tokens) const {
    check(!tokens.empty(), "encode_text: empty token sequence");
    for (const int id : tokens)
      check(id >= 0 && id < vocab_size,
            "encode_text: token id " + std::to_string(id) + " outside vocabulary of size " +
                std::to_string(vocab_size));
    ad::Var<S> emb = ad::gather_rows(bind(embedding), tokens);
    return stack(bind, emb, std::nullopt);
  }
};

// Style-conditioned stack predicting one log-duration per token.
template <typename S>
struct DurationPredictor {
  ResidualStack<S> stack;
  Linear<S> head;  // hidden -> 1, zero-initialized so a fresh model says log d = 0

  static DurationPredictor create(ParamStore<S>& ps, const ModelConfig& cfg, Rng& rng) {
    DurationPredictor d;
    d.stack = ResidualStack<S>::create(ps, "dur", cfg.hidden, cfg.dur_kernel, cfg.dur_dilations,
                                       cfg.dur_blocks, cfg.style_dim, rng);
    d.head = Linear<S>::create(ps, "dur.head", cfg.hidden, 1, rng, /*zero_init=*/true);
    return d;
  }

  // N x 1 log durations
  ad::Var<S> predict(Bind<S>& bind, ad::Var<S> text_seq, ad::Var<S> style) const {
    return head(bind, stack(bind, text_seq, style));
  }
};

// Style-conditioned stack mapping the duration-expanded text embedding to a
// log-mel of the same length.
template <typename S>
struct MelDecoder {
  ResidualStack<S> stack;
  Linear<S> head;  // hidden -> mel_dim

  static MelDecoder create(ParamStore<S>& ps, const ModelConfig& cfg, Rng& rng) {
    MelDecoder d;
    d.stack = ResidualStack<S>::create(ps, "dec", cfg.hidden, cfg.dec_kernel, cfg.dec_dilations,
                                       cfg.dec_blocks, cfg.style_dim, rng);
    d.head = Linear<S>::create(ps, "dec.head", cfg.hidden, cfg.mel_dim, rng);
    return d;
  }

  ad::Var<S> decode(Bind<S>& bind, ad::Var<S> expanded, ad::Var<S> style) const {
    check(expanded.rows() >= 1, "decode_mel: empty input");
    return head(bind, stack(bind, expanded, style));
  }
};

// durations -> frame-to-token index map [0 repeated d_0 times, 1 repeated
// d_1 times, ...]
inline std::vector<int> duration_frame_index(const std::vector<int>& durations) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    check(durations[i] >= 1, "expand_by_duration: duration " + std::to_string(durations[i]) +
                                 " at token " + std::to_string(i) + " is < 1");
    idx.insert(idx.end(), static_cast<std::size_t>(durations[i]), static_cast<int>(i));
  }
  return idx;
}

// row i repeated durations[i] times, order preserved
template <typename S>
Matrix<S> expand_by_duration(const Matrix<S>& seq, const std::vector<int>& durations) {
  check(static_cast<std::size_t>(seq.rows()) == durations.size(),
        "expand_by_duration: durations length must match rows");
  const std::vector<int> idx = duration_frame_index(durations);
  Matrix<S> out(static_cast<Eigen::Index>(idx.size()), seq.cols());
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.row(static_cast<Eigen::Index>(j)) = seq.row(idx[j]);
  return out;
}

template <typename S>
ad::Var<S> expand_by_duration(ad::Var<S> seq, const std::vector<int>& durations) {
  check(static_cast<std::size_t>(seq.rows()) == durations.size(),
        "expand_by_duration: durations length must match rows");
  return ad::gather_rows(seq, duration_frame_index(durations));
}

// d_i = max(1, round_half_to_even(exp(log_d_i))); rounding ties go to even
inline std::vector<int> durations_for_inference(const std::vector<double>& log_durations) {
  std::vector<int> out;
  out.reserve(log_durations.size());
  for (const double ld : log_durations) {
    check(std::isfinite(ld), "durations_for_inference: non-finite log duration");
    out.push_back(std::max(1, static_cast<int>(round_half_to_even(std::exp(ld)))));
  }
  return out;
}

// mean absolute error over all entries; value-only variant of the training
// loss for evaluation paths
template <typename S>
S mel_mae(const Matrix<S>& pred, const Matrix<S>& target) {
  check(pred.rows() == target.rows() && pred.cols() == target.cols(),
        "mel_loss: shape mismatch between prediction and target");
  return (pred - target).cwiseAbs().mean();
}

}  // namespace sttts

#endif  // STTTS_ACOUSTIC_HPP_
