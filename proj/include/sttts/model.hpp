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

#ifndef STTTS_MODEL_HPP_
#define STTTS_MODEL_HPP_

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "sttts/acoustic.hpp"
#include "sttts/config.hpp"
#include "sttts/core.hpp"
#include "sttts/corpus.hpp"
#include "sttts/flow.hpp"
#include "sttts/mas.hpp"
#include "sttts/style_encoder.hpp"
#include "sttts/tag_provider.hpp"

namespace sttts {

// Negative log likelihood of the mel under the flow and the best monotonic
// alignment of its latents to the prior means, normalized by T*D. The MAS
// path is a hard assignment: gradients flow into the flow parameters and the
// prior means, never through the search itself.
template <typename S>
struct AlignmentLoss {
  ad::Var<S> loss;
  std::vector<int> path;
};

template <typename S>
AlignmentLoss<S> alignment_loss(const Flow<S>& flow, Bind<S>& bind, const Matrix<S>& mel,
                                ad::Var<S> mu, const std::vector<int>* frozen_path = nullptr) {
  ad::Graph<S>& g = bind.graph();
  const Eigen::Index t_len = mel.rows();
  const Eigen::Index n = mu.rows();
  check(t_len >= n, "alignment_loss: mel length " + std::to_string(t_len) +
                        " is shorter than token count " + std::to_string(n));
  auto [z, logdet] = flow.forward(bind, g.constant(mel));
  AlignmentLoss<S> out;
  out.path = frozen_path ? *frozen_path : mas(frame_log_likelihoods<S>(z.value(), mu.value()));
  validate_alignment_path(out.path, static_cast<int>(n));
  ad::Var<S> diff = ad::sub(z, ad::gather_rows(mu, out.path));
  ad::Var<S> sqsum = ad::sum_all(ad::mul(diff, diff));
  const S inv_td = S(1) / static_cast<S>(t_len * mel.cols());
  const S half_log2pi = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
  out.loss = ad::cadd(ad::cmul(ad::sub(ad::cmul(sqsum, S(0.5)), logdet), inv_td), half_log2pi);
  return out;
}

// The assembled single-stage system. The tag provider is held as a frozen
// component outside the parameter store, so the optimizer can never touch
// it.
template <typename S>
struct Model {
  ModelConfig cfg;
  Vocabulary vocab;
  std::vector<TagFamily> families;
  AugmentRuleTable rules;
  std::shared_ptr<const TagEmbeddingProvider> provider;

  ParamStore<S> params;
  TextEncoder<S> text;
  DurationPredictor<S> dur;
  MelDecoder<S> dec;
  ReferenceEncoder<S> ref;
  TagAdaptation<S> adapt;
  Flow<S> flow;

  static Model create(const ModelConfig& cfg, Vocabulary vocab, std::vector<TagFamily> families,
                      std::shared_ptr<const TagEmbeddingProvider> provider = nullptr) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.vocab = std::move(vocab);
    m.families = std::move(families);
    if (provider) {
      check(provider->dim() == cfg.lm_dim, "Model: provider dim does not match lm_dim");
      m.provider = std::move(provider);
    } else {
      ProviderSpec pspec;
      pspec.lm_dim = cfg.lm_dim;
      pspec.centroid_scale = cfg.provider_centroid_scale;
      pspec.within_family_jitter = cfg.provider_jitter;
      pspec.seed = cfg.seed;
      m.provider = std::make_shared<SyntheticTagProvider>(pspec, m.families, m.rules);
    }
    Rng rng(hash_combine(cfg.seed, "init"));
    m.text = TextEncoder<S>::create(m.params, cfg, m.vocab.size(), rng);
    m.dur = DurationPredictor<S>::create(m.params, cfg, rng);
    m.dec = MelDecoder<S>::create(m.params, cfg, rng);
    m.ref = ReferenceEncoder<S>::create(m.params, cfg, rng);
    m.adapt = TagAdaptation<S>::create(m.params, cfg, rng);
    m.flow = Flow<S>::create(m.params, cfg, rng);
    return m;
  }

  // ---- training graph ----

  struct UttLosses {
    ad::Var<S> total;
    double mel = 0, dur = 0, align = 0, style = 0;
    std::vector<int> aligner_durations;
  };

  // Builds the full four-loss graph for one utterance. The alignment path is
  // recomputed from current parameters unless frozen_path is given (the
  // gradient-check harness freezes it so the loss is smooth around the base
  // point).
  UttLosses build_losses(Bind<S>& bind, const Utterance& utt, const std::string& tag,
                         const std::vector<int>* frozen_path = nullptr) const {
    const Eigen::Index n = static_cast<Eigen::Index>(utt.tokens.size());
    const Eigen::Index t_len = utt.mel.rows();
    check(t_len >= n, "utterance '" + utt.id + "': mel length " + std::to_string(t_len) +
                          " is shorter than token count " + std::to_string(n));
    check(utt.mel.cols() == cfg.mel_dim, "utterance '" + utt.id + "': mel dim mismatch");

    const Matrix<S> mel = utt.mel.template cast<S>();
    ad::Var<S> trunk = text.trunk(bind, utt.tokens);
    ad::Var<S> mu = text.mu_head(bind, trunk);

    const AlignmentLoss<S> align = alignment_loss(flow, bind, mel, mu, frozen_path);
    ad::Var<S> align_loss = align.loss;
    const std::vector<int>& path = align.path;

    UttLosses out;
    out.aligner_durations = extract_durations(path, static_cast<int>(n));

    // style: reference embedding drives the TTS losses; the tag embedding is
    // pulled onto it (both directions by default)
    ad::Var<S> style_ref = ref.encode(bind, mel);
    ad::Var<S> style_tag = adapt.encode(bind, provider->embed_tag(tag));
    ad::Var<S> style_anchor = cfg.stop_grad_reference ? ad::stop_gradient(style_ref) : style_ref;
    ad::Var<S> style_loss = style_embedding_loss(style_tag, style_anchor);

    // durations: Huber on log scale, aligner output treated as constant
    Matrix<S> log_d_target(n, 1);
    for (Eigen::Index i = 0; i < n; ++i)
      log_d_target(i, 0) = static_cast<S>(std::log(
          static_cast<double>(out.aligner_durations[static_cast<std::size_t>(i)])));
    ad::Var<S> log_d_pred = dur.predict(bind, trunk, style_ref);
    ad::Var<S> dur_loss = ad::huber_loss(log_d_pred, log_d_target, static_cast<S>(cfg.huber_delta));

    // mel: decoder consumes aligner durations during training
    ad::Var<S> dec_in = text.dec_head(bind, trunk);
    ad::Var<S> expanded = ad::gather_rows(dec_in, path);
    ad::Var<S> mel_pred = dec.decode(bind, expanded, style_ref);
    ad::Var<S> mel_loss = ad::mae_loss(mel_pred, mel);

    out.total = ad::add(
        ad::add(ad::cmul(mel_loss, static_cast<S>(cfg.w_mel)),
                ad::cmul(dur_loss, static_cast<S>(cfg.w_dur))),
        ad::add(ad::cmul(align_loss, static_cast<S>(cfg.w_align)),
                ad::cmul(style_loss, static_cast<S>(cfg.w_style))));
    out.mel = static_cast<double>(mel_loss.value()(0, 0));
    out.dur = static_cast<double>(dur_loss.value()(0, 0));
    out.align = static_cast<double>(align_loss.value()(0, 0));
    out.style = static_cast<double>(style_loss.value()(0, 0));
    return out;
  }

  // ---- value-only helpers (no backward pass ever runs on these graphs) ----

  Vector<S> encode_tag_values(const std::string& tag) const {
    ad::Graph<S> g;
    Bind<S> bind(g, params);
    return adapt.encode(bind, provider->embed_tag(tag)).value().row(0).transpose();
  }

  Vector<S> encode_reference_values(const Matrix<S>& mel) const {
    ad::Graph<S> g;
    Bind<S> bind(g, params);
    return ref.encode(bind, mel).value().row(0).transpose();
  }

  // MAS alignment of a (tokens, mel) pair under current parameters
  std::vector<int> align_durations(const Utterance& utt) const {
    const Eigen::Index n = static_cast<Eigen::Index>(utt.tokens.size());
    check(utt.mel.cols() == cfg.mel_dim, "utterance '" + utt.id + "': mel dim mismatch");
    check(utt.mel.rows() >= n, "utterance '" + utt.id + "': mel length " +
                                   std::to_string(utt.mel.rows()) +
                                   " is shorter than token count " + std::to_string(n));
    ad::Graph<S> g;
    Bind<S> bind(g, params);
    ad::Var<S> trunk = text.trunk(bind, utt.tokens);
    const Matrix<S> mu = text.mu_head(bind, trunk).value();
    auto [zmat, logdet] = flow_forward_values(flow, params, Matrix<S>(utt.mel.template cast<S>()));
    (void)logdet;
    const std::vector<int> path = mas(frame_log_likelihoods<S>(zmat, mu));
    return extract_durations(path, static_cast<int>(n));
  }

  // predictor log-durations for a token sequence under a given style
  std::vector<double> predict_log_durations(const TokenSequence& tokens,
                                            const Vector<S>& style) const {
    ad::Graph<S> g;
    Bind<S> bind(g, params);
    ad::Var<S> trunk = text.trunk(bind, tokens);
    ad::Var<S> style_var = g.constant(style.transpose());
    const Matrix<S> ld = dur.predict(bind, trunk, style_var).value();
    std::vector<double> out(static_cast<std::size_t>(ld.rows()));
    for (Eigen::Index i = 0; i < ld.rows(); ++i) out[static_cast<std::size_t>(i)] = ld(i, 0);
    return out;
  }

  // teacher-forced decode: expand by given durations, decode under style
  Matrix<S> decode_with_durations(const TokenSequence& tokens, const std::vector<int>& durations,
                                  const Vector<S>& style) const {
    ad::Graph<S> g;
    Bind<S> bind(g, params);
    ad::Var<S> trunk = text.trunk(bind, tokens);
    ad::Var<S> dec_in = text.dec_head(bind, trunk);
    ad::Var<S> expanded = expand_by_duration(dec_in, durations);
    ad::Var<S> style_var = g.constant(style.transpose());
    return dec.decode(bind, expanded, style_var).value();
  }
};

}  // namespace sttts

#endif  // STTTS_MODEL_HPP_
