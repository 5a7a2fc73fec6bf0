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

#ifndef STTTS_STYLE_ENCODER_HPP_
#define STTTS_STYLE_ENCODER_HPP_

#include <string>
#include <vector>

#include "sttts/autodiff.hpp"
#include "sttts/config.hpp"
#include "sttts/core.hpp"
#include "sttts/nn.hpp"
#include "sttts/tag_provider.hpp"

namespace sttts {

// Convolutional-recurrent mel summarizer (GST-style reference encoder,
// token bank removed): strided 3x3 conv stack with weight normalization and
// ReLU, GRU over the downsampled time axis, linear projection to the style
// space.
template <typename S>
struct ReferenceEncoder {
  struct ConvLayer {
    int v = -1, g = -1, b = -1;
    int in_ch = 0, out_ch = 0;
  };

  int mel_dim = 0;
  int style_dim = 0;
  std::vector<ConvLayer> convs;
  GruCell<S> gru;
  Linear<S> proj;

  static ReferenceEncoder create(ParamStore<S>& ps, const ModelConfig& cfg, Rng& rng) {
    ReferenceEncoder enc;
    enc.mel_dim = cfg.mel_dim;
    enc.style_dim = cfg.style_dim;
    int in_ch = 1;
    int freq = cfg.mel_dim;
    for (std::size_t i = 0; i < cfg.ref_channels.size(); ++i) {
      ConvLayer layer;
      layer.in_ch = in_ch;
      layer.out_ch = cfg.ref_channels[i];
      const std::string name = "ref.conv" + std::to_string(i);
      const int fan_in = 9 * in_ch;
      layer.v = ps.add(name + ".v",
                       rng.normal_matrix<S>(fan_in, layer.out_ch, 1.0 / std::sqrt(fan_in)));
      layer.g = ps.add(name + ".g", Matrix<S>::Ones(1, layer.out_ch));
      layer.b = ps.add(name + ".b", Matrix<S>::Zero(1, layer.out_ch));
      enc.convs.push_back(layer);
      in_ch = layer.out_ch;
      freq = (freq + 1) / 2;
    }
    enc.gru = GruCell<S>::create(ps, "ref.gru", freq * in_ch, cfg.style_dim, rng);
    enc.proj = Linear<S>::create(ps, "ref.proj", cfg.style_dim, cfg.style_dim, rng);
    return enc;
  }

  // Mels shorter than the stack's minimum receptive length (2^layers frames)
  // are right-padded with the mel's minimum value.
  Matrix<S> pad(const Matrix<S>& mel) const {
    check(mel.size() > 0, "encode_reference: empty mel");
    check(mel.cols() == mel_dim, "encode_reference: mel dim mismatch");
    const Eigen::Index min_len = Eigen::Index(1) << convs.size();
    if (mel.rows() >= min_len) return mel;
    Matrix<S> padded(min_len, mel.cols());
    padded.setConstant(mel.minCoeff());
    padded.topRows(mel.rows()) = mel;
    return padded;
  }

  ad::Var<S> encode(Bind<S>& bind, const Matrix<S>& mel_in) const {
    ad::Graph<S>& g = bind.graph();
    const Matrix<S> mel = pad(mel_in);
    int h = static_cast<int>(mel.rows());
    int w = static_cast<int>(mel.cols());
    // (T*D) x 1 feature map, site index t*D + d
    Matrix<S> x0(static_cast<Eigen::Index>(h) * w, 1);
    for (int t = 0; t < h; ++t)
      for (int d = 0; d < w; ++d) x0(static_cast<Eigen::Index>(t) * w + d, 0) = mel(t, d);
    ad::Var<S> x = g.constant(std::move(x0));
    for (const ConvLayer& layer : convs) {
      const ad::Conv2dShape sh = ad::conv2d_s2_shape(h, w);
      ad::Var<S> wnorm = ad::weight_norm_cols(bind(layer.v), bind(layer.g));
      x = ad::relu(ad::conv2d_s2(x, wnorm, bind(layer.b), sh));
      h = sh.out_h;
      w = sh.out_w;
    }
    // GRU over the remaining time steps; each step sees freq*channels values
    ad::Var<S> hidden = g.constant(Matrix<S>::Zero(1, style_dim));
    for (int t = 0; t < h; ++t)
      hidden = gru.step(bind, ad::rows_as_row(x, static_cast<Eigen::Index>(t) * w, w), hidden);
    return proj(bind, hidden);
  }
};

// Three linear layers mapping the frozen provider space to the style space;
// ReLU after the first two, unconstrained output.
template <typename S>
struct TagAdaptation {
  Linear<S> l0, l1, l2;
  int lm_dim = 0;

  static TagAdaptation create(ParamStore<S>& ps, const ModelConfig& cfg, Rng& rng) {
    TagAdaptation a;
    a.lm_dim = cfg.lm_dim;
    a.l0 = Linear<S>::create(ps, "adapt.l0", cfg.lm_dim, cfg.adapt_hidden, rng);
    a.l1 = Linear<S>::create(ps, "adapt.l1", cfg.adapt_hidden, cfg.adapt_hidden, rng);
    a.l2 = Linear<S>::create(ps, "adapt.l2", cfg.adapt_hidden, cfg.style_dim, rng);
    return a;
  }

  ad::Var<S> encode(Bind<S>& bind, const TagVector& tag_vec) const {
    check(static_cast<int>(tag_vec.values.size()) == lm_dim,
          "TagAdaptation: provider output width mismatch");
    Matrix<S> row = tag_vec.values.transpose().template cast<S>();
    ad::Var<S> x = bind.graph().constant(std::move(row));
    return l2(bind, ad::relu(l1(bind, ad::relu(l0(bind, x)))));
  }
};

// Mean squared error over the style dimensions, gradient into both sides.
template <typename S>
ad::Var<S> style_embedding_loss(ad::Var<S> e_tag, ad::Var<S> e_ref) {
  check(e_tag.rows() == e_ref.rows() && e_tag.cols() == e_ref.cols(),
        "style_embedding_loss: embedding dims disagree");
  return ad::mse_loss(e_tag, e_ref);
}

}  // namespace sttts

#endif  // STTTS_STYLE_ENCODER_HPP_
