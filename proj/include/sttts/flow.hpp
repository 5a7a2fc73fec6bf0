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

#ifndef STTTS_FLOW_HPP_
#define STTTS_FLOW_HPP_

#include <atomic>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sttts/autodiff.hpp"
#include "sttts/config.hpp"
#include "sttts/core.hpp"
#include "sttts/nn.hpp"

namespace sttts {

// Normalizing flow over mel frames, training-time aligner only. Each block
// is a fixed channel permutation (log|det| = 0) followed by an affine
// coupling whose scale/translation network is a small gated residual conv
// stack. Coupling output layers start at zero, so a fresh flow is the
// identity up to channel permutations.
template <typename S>
struct Flow {
  struct Block {
    std::vector<int> perm;      // forward column permutation
    std::vector<int> inv_perm;
    int keep = 0, change = 0;
    Linear<S> pre;
    ResidualStack<S> net;
    Linear<S> out;
  };

  int mel_dim = 0;
  int kernel = 5;
  std::vector<Block> blocks;
  std::shared_ptr<std::atomic<long>> forward_calls = std::make_shared<std::atomic<long>>(0);

  static Flow create(ParamStore<S>& ps, const ModelConfig& cfg, Rng& rng) {
    Flow f;
    f.mel_dim = cfg.mel_dim;
    f.kernel = cfg.flow_kernel;
    const int keep = (cfg.mel_dim + 1) / 2;
    const int change = cfg.mel_dim - keep;
    for (int bi = 0; bi < cfg.flow_blocks; ++bi) {
      Block b;
      b.keep = keep;
      b.change = change;
      b.perm.resize(static_cast<std::size_t>(cfg.mel_dim));
      std::iota(b.perm.begin(), b.perm.end(), 0);
      if (cfg.flow_mixing) {
        Rng prng(hash_combine(hash_combine(cfg.seed, "flow_perm"),
                              static_cast<std::uint64_t>(bi)));
        for (std::size_t i = b.perm.size(); i > 1; --i)
          std::swap(b.perm[i - 1],
                    b.perm[static_cast<std::size_t>(prng.uniform_int(static_cast<std::int64_t>(i)))]);
      }
      b.inv_perm.resize(b.perm.size());
      for (std::size_t i = 0; i < b.perm.size(); ++i)
        b.inv_perm[static_cast<std::size_t>(b.perm[i])] = static_cast<int>(i);
      const std::string name = "flow.block" + std::to_string(bi);
      if (change > 0) {
        b.pre = Linear<S>::create(ps, name + ".pre", keep, cfg.flow_hidden, rng);
        b.net = ResidualStack<S>::create(ps, name + ".net", cfg.flow_hidden, cfg.flow_kernel,
                                         {1}, cfg.flow_net_layers, 0, rng);
        b.out = Linear<S>::create(ps, name + ".out", cfg.flow_hidden, 2 * change, rng,
                                  /*zero_init=*/true);
      }
      f.blocks.push_back(std::move(b));
    }
    return f;
  }

  // mel -> latent, plus the accumulated log|det| of the Jacobian
  std::pair<ad::Var<S>, ad::Var<S>> forward(Bind<S>& bind, ad::Var<S> x) const {
    forward_calls->fetch_add(1, std::memory_order_relaxed);
    ad::Graph<S>& g = bind.graph();
    ad::Var<S> logdet = g.constant(Matrix<S>::Zero(1, 1));
    for (const Block& b : blocks) {
      x = ad::permute_cols(x, b.perm);
      if (b.change == 0) continue;
      ad::Var<S> xa = ad::slice_cols(x, 0, b.keep);
      ad::Var<S> xb = ad::slice_cols(x, b.keep, b.change);
      ad::Var<S> st = b.out(bind, b.net(bind, b.pre(bind, xa), std::nullopt));
      ad::Var<S> s = ad::slice_cols(st, 0, b.change);
      ad::Var<S> t = ad::slice_cols(st, b.change, b.change);
      ad::Var<S> zb = ad::add(ad::mul(xb, ad::exp_(s)), t);
      x = ad::concat_cols(xa, zb);
      logdet = ad::add(logdet, ad::sum_all(s));
    }
    return {x, logdet};
  }

  // exact inverse of forward; evaluation only (testing utility, never part
  // of training or synthesis)
  Matrix<S> inverse(const ParamStore<S>& ps, const Matrix<S>& z) const {
    Matrix<S> x = z;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
      const Block& b = *it;
      if (b.change > 0) {
        ad::Graph<S> g;
        Bind<S> bind(g, ps);
        ad::Var<S> xa = g.constant(x.leftCols(b.keep));
        const Matrix<S> st = b.out(bind, b.net(bind, b.pre(bind, xa), std::nullopt)).value();
        const Matrix<S> s = st.leftCols(b.change);
        const Matrix<S> t = st.rightCols(b.change);
        x.rightCols(b.change) =
            (x.rightCols(b.change) - t).cwiseProduct((-s).array().exp().matrix());
      }
      Matrix<S> unpermuted(x.rows(), x.cols());
      for (std::size_t j = 0; j < b.inv_perm.size(); ++j)
        unpermuted.col(static_cast<Eigen::Index>(j)) = x.col(b.inv_perm[j]);
      x = std::move(unpermuted);
    }
    return x;
  }
};

// convenience wrappers for callers that only want values

template <typename S>
std::pair<Matrix<S>, S> flow_forward_values(const Flow<S>& flow, const ParamStore<S>& ps,
                                            const Matrix<S>& mel) {
  check(mel.size() > 0, "flow_forward: empty mel");
  check(mel.allFinite(), "flow_forward: non-finite mel input");
  ad::Graph<S> g;
  Bind<S> bind(g, ps);
  auto [z, logdet] = flow.forward(bind, g.constant(mel));
  return {z.value(), logdet.value()(0, 0)};
}

}  // namespace sttts

#endif  // STTTS_FLOW_HPP_
