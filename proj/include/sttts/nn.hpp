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

#ifndef STTTS_NN_HPP_
#define STTTS_NN_HPP_

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sttts/autodiff.hpp"
#include "sttts/core.hpp"

namespace sttts {

// Named parameter registry. Values are shared by all graphs built from the
// model; gradients and Adam state live here between steps.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix<S> value;
    Matrix<S> grad;
    Matrix<S> adam_m;
    Matrix<S> adam_v;
  };

  int add(const std::string& name, Matrix<S> init) {
    check(by_name_.find(name) == by_name_.end(), "ParamStore: duplicate parameter " + name);
    const int id = static_cast<int>(entries_.size());
    Entry e;
    e.name = name;
    e.grad = Matrix<S>::Zero(init.rows(), init.cols());
    e.adam_m = e.grad;
    e.adam_v = e.grad;
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    by_name_[name] = id;
    return id;
  }

  Entry& at(int id) { return entries_[static_cast<std::size_t>(id)]; }
  const Entry& at(int id) const { return entries_[static_cast<std::size_t>(id)]; }
  int find(const std::string& name) const {
    const auto it = by_name_.find(name);
    check(it != by_name_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }
  int size() const { return static_cast<int>(entries_.size()); }

  void zero_grads() {
    for (Entry& e : entries_) e.grad.setZero();
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  // group = name up to the first '.', e.g. "flow.block0.out.w" -> "flow"
  static std::string group_of(const std::string& name) {
    const std::size_t dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

// Per-graph binding of parameters to leaf nodes. Leaves are created lazily;
// after backward, collect() hands the per-parameter gradients back in
// parameter order so batch accumulation is order-deterministic.
template <typename S>
class Bind {
 public:
  Bind(ad::Graph<S>& g, const ParamStore<S>& store)
      : g_(&g), store_(&store), leaf_of_(static_cast<std::size_t>(store.size()), -1) {}

  ad::Graph<S>& graph() { return *g_; }

  ad::Var<S> operator()(int pid) {
    int& node = leaf_of_[static_cast<std::size_t>(pid)];
    if (node < 0) node = g_->leaf(store_->at(pid).value).id();
    return g_->var(node);
  }

  std::vector<std::pair<int, Matrix<S>>> collect() const {
    std::vector<std::pair<int, Matrix<S>>> out;
    for (std::size_t pid = 0; pid < leaf_of_.size(); ++pid) {
      const int node = leaf_of_[pid];
      if (node >= 0 && g_->has_grad(node)) out.emplace_back(static_cast<int>(pid), g_->grad_of(node));
    }
    return out;
  }

 private:
  ad::Graph<S>* g_;
  const ParamStore<S>* store_;
  std::vector<int> leaf_of_;
};

template <typename S>
struct Linear {
  int w = -1;
  int b = -1;
  static Linear create(ParamStore<S>& ps, const std::string& name, int in, int out, Rng& rng,
                       bool zero_init = false, bool bias = true) {
    Linear l;
    Matrix<S> wi = zero_init ? Matrix<S>::Zero(in, out)
                             : rng.normal_matrix<S>(in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    l.w = ps.add(name + ".w", std::move(wi));
    if (bias) l.b = ps.add(name + ".b", Matrix<S>::Zero(1, out));
    return l;
  }
  ad::Var<S> operator()(Bind<S>& bind, ad::Var<S> x) const {
    ad::Var<S> y = ad::matmul(x, bind(w));
    if (b >= 0) y = ad::add_rowvec(y, bind(b));
    return y;
  }
};

// Gated residual dilated convolution block: dilated conv to 2H channels,
// optional broadcast style projection added pre-activation, tanh*sigmoid
// gate, 1x1 conv back to residual and skip halves.
template <typename S>
struct GatedResBlock {
  int conv_w = -1, conv_b = -1;
  int style_w = -1;
  int out_w = -1, out_b = -1;
  int kernel = 3, dilation = 1, channels = 0;

  static GatedResBlock create(ParamStore<S>& ps, const std::string& name, int channels,
                              int kernel, int dilation, int style_dim, Rng& rng) {
    GatedResBlock blk;
    blk.kernel = kernel;
    blk.dilation = dilation;
    blk.channels = channels;
    const int fan_in = kernel * channels;
    blk.conv_w = ps.add(name + ".conv.w",
                        rng.normal_matrix<S>(fan_in, 2 * channels, 1.0 / std::sqrt(fan_in)));
    blk.conv_b = ps.add(name + ".conv.b", Matrix<S>::Zero(1, 2 * channels));
    if (style_dim > 0)
      blk.style_w = ps.add(name + ".style.w",
                           rng.normal_matrix<S>(style_dim, 2 * channels,
                                                1.0 / std::sqrt(static_cast<double>(style_dim))));
    blk.out_w = ps.add(name + ".out.w",
                       rng.normal_matrix<S>(channels, 2 * channels,
                                            1.0 / std::sqrt(static_cast<double>(channels))));
    blk.out_b = ps.add(name + ".out.b", Matrix<S>::Zero(1, 2 * channels));
    return blk;
  }

  // returns {residual output, skip}
  std::pair<ad::Var<S>, ad::Var<S>> operator()(Bind<S>& bind, ad::Var<S> x,
                                               std::optional<ad::Var<S>> style) const {
    ad::Var<S> y = ad::conv1d(x, bind(conv_w), bind(conv_b), kernel, dilation);
    if (style.has_value()) {
      check(style_w >= 0, "GatedResBlock: block was built without style conditioning");
      y = ad::add_rowvec(y, ad::matmul(*style, bind(style_w)));
    }
    ad::Var<S> gate = ad::mul(ad::tanh_(ad::slice_cols(y, 0, channels)),
                              ad::sigmoid_(ad::slice_cols(y, channels, channels)));
    ad::Var<S> o = ad::add_rowvec(ad::matmul(gate, bind(out_w)), bind(out_b));
    return {ad::add(x, ad::slice_cols(o, 0, channels)), ad::slice_cols(o, channels, channels)};
  }
};

// Stack of gated residual blocks; output = last residual stream + summed
// skip connections, so an all-zero-weight stack is the identity.
template <typename S>
struct ResidualStack {
  std::vector<GatedResBlock<S>> blocks;

  static ResidualStack create(ParamStore<S>& ps, const std::string& name, int channels,
                              int kernel, const std::vector<int>& dilation_cycle, int n_blocks,
                              int style_dim, Rng& rng) {
    ResidualStack st;
    for (int i = 0; i < n_blocks; ++i) {
      const int dilation = dilation_cycle[static_cast<std::size_t>(i) % dilation_cycle.size()];
      st.blocks.push_back(GatedResBlock<S>::create(ps, name + ".block" + std::to_string(i),
                                                   channels, kernel, dilation, style_dim, rng));
    }
    return st;
  }

  ad::Var<S> operator()(Bind<S>& bind, ad::Var<S> x, std::optional<ad::Var<S>> style) const {
    ad::Var<S> skip_sum;
    bool have_skip = false;
    for (const GatedResBlock<S>& blk : blocks) {
      auto [res, skip] = blk(bind, x, style);
      x = res;
      skip_sum = have_skip ? ad::add(skip_sum, skip) : skip;
      have_skip = true;
    }
    return have_skip ? ad::add(x, skip_sum) : x;
  }
};

// Single-layer GRU; packed input weights, separate recurrent matrices for
// the gates and the candidate.
template <typename S>
struct GruCell {
  int wx = -1, b = -1;  // in x 3H (r, u, c), 1 x 3H
  int uru = -1;         // H x 2H
  int uc = -1;          // H x H
  int hidden = 0;

  static GruCell create(ParamStore<S>& ps, const std::string& name, int in, int hidden,
                        Rng& rng) {
    GruCell c;
    c.hidden = hidden;
    c.wx = ps.add(name + ".wx",
                  rng.normal_matrix<S>(in, 3 * hidden, 1.0 / std::sqrt(static_cast<double>(in))));
    c.b = ps.add(name + ".b", Matrix<S>::Zero(1, 3 * hidden));
    c.uru = ps.add(name + ".uru", rng.normal_matrix<S>(hidden, 2 * hidden,
                                                       1.0 / std::sqrt(static_cast<double>(hidden))));
    c.uc = ps.add(name + ".uc",
                  rng.normal_matrix<S>(hidden, hidden, 1.0 / std::sqrt(static_cast<double>(hidden))));
    return c;
  }

  ad::Var<S> step(Bind<S>& bind, ad::Var<S> x_t, ad::Var<S> h) const {
    ad::Var<S> xg = ad::add_rowvec(ad::matmul(x_t, bind(wx)), bind(b));
    ad::Var<S> hg = ad::matmul(h, bind(uru));
    ad::Var<S> r = ad::sigmoid_(ad::add(ad::slice_cols(xg, 0, hidden), ad::slice_cols(hg, 0, hidden)));
    ad::Var<S> u = ad::sigmoid_(
        ad::add(ad::slice_cols(xg, hidden, hidden), ad::slice_cols(hg, hidden, hidden)));
    ad::Var<S> c = ad::tanh_(
        ad::add(ad::slice_cols(xg, 2 * hidden, hidden), ad::matmul(ad::mul(r, h), bind(uc))));
    return ad::add(ad::mul(u, h), ad::mul(ad::one_minus(u), c));
  }
};

}  // namespace sttts

#endif  // STTTS_NN_HPP_
