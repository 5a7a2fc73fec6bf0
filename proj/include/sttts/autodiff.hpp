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

#ifndef STTTS_AUTODIFF_HPP_
#define STTTS_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sttts/core.hpp"

// Reverse-mode tape over dense Eigen matrices. A Graph is built per forward
// pass (define-by-run); creation order is a valid topological order, so the
// backward pass is a single reverse sweep. Every op is a free function that
// returns a new Var, Eigen-style.

namespace sttts::ad {

template <typename Scalar>
class Graph;

template <typename Scalar>
class Var {
 public:
  Var() = default;
  const Matrix<Scalar>& value() const { return g_->value(id_); }
  const Matrix<Scalar>& grad() const { return g_->grad_of(id_); }
  bool needs_grad() const { return g_->needs(id_); }
  int id() const { return id_; }
  Graph<Scalar>* graph() const { return g_; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Graph<Scalar>;
  Var(Graph<Scalar>* g, int id) : g_(g), id_(id) {}
  Graph<Scalar>* g_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Graph {
 public:
  using M = Matrix<Scalar>;

  Var<Scalar> constant(M v) { return push(std::move(v), false, {}); }

  Var<Scalar> leaf(M v) { return push(std::move(v), true, {}); }

  // f is invoked with (graph, upstream grad of this node) during backward.
  template <typename F>
  Var<Scalar> make(M value, bool needs, F&& f) {
    Var<Scalar> out = push(std::move(value), needs, {});
    if (needs) {
      const int id = out.id();
      nodes_[id].backward = [id, fn = std::forward<F>(f)](Graph& g) { fn(g, g.nodes_[id].grad); };
    }
    return out;
  }

  const M& value(int id) const { return nodes_[id].value; }
  bool needs(int id) const { return nodes_[id].needs; }
  bool has_grad(int id) const { return nodes_[id].grad_live; }
  Var<Scalar> var(int id) { return Var<Scalar>(this, id); }

  // Zero-initialized on first touch so ops can accumulate into blocks.
  M& grad_of(int id) {
    Node& n = nodes_[id];
    if (!n.grad_live) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  template <typename Expr>
  void add_grad(int id, const Expr& e) {
    if (nodes_[id].needs) grad_of(id) += e;
  }

  void backward(const Var<Scalar>& root, Scalar seed = Scalar(1)) {
    check(root.value().size() == 1, "backward: root must be a scalar node");
    grad_of(root.id())(0, 0) += seed;
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.needs && n.grad_live && n.backward) n.backward(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;
    bool needs = false;
    bool grad_live = false;
    std::function<void(Graph&)> backward;
  };

  Var<Scalar> push(M v, bool needs, std::function<void(Graph&)> bw) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(v), {}, needs, false, std::move(bw)});
    return Var<Scalar>(this, id);
  }

  std::vector<Node> nodes_;
};

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  const int ai = a.id(), bi = b.id();
  return g.make(Matrix<S>(a.value() + b.value()), a.needs_grad() || b.needs_grad(),
                [ai, bi](Graph<S>& g, const Matrix<S>& dout) {
                  g.add_grad(ai, dout);
                  g.add_grad(bi, dout);
                });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  const int ai = a.id(), bi = b.id();
  return g.make(Matrix<S>(a.value() - b.value()), a.needs_grad() || b.needs_grad(),
                [ai, bi](Graph<S>& g, const Matrix<S>& dout) {
                  g.add_grad(ai, dout);
                  g.add_grad(bi, -dout);
                });
}

// elementwise product
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  const int ai = a.id(), bi = b.id();
  return g.make(Matrix<S>(a.value().cwiseProduct(b.value())), a.needs_grad() || b.needs_grad(),
                [ai, bi](Graph<S>& g, const Matrix<S>& dout) {
                  g.add_grad(ai, dout.cwiseProduct(g.value(bi)));
                  g.add_grad(bi, dout.cwiseProduct(g.value(ai)));
                });
}

template <typename S>
Var<S> cmul(Var<S> a, S c) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  return g.make(Matrix<S>(a.value() * c), a.needs_grad(),
                [ai, c](Graph<S>& g, const Matrix<S>& dout) { g.add_grad(ai, dout * c); });
}

template <typename S>
Var<S> cadd(Var<S> a, S c) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  return g.make(Matrix<S>(a.value().array() + c), a.needs_grad(),
                [ai](Graph<S>& g, const Matrix<S>& dout) { g.add_grad(ai, dout); });
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  check(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  const int ai = a.id(), bi = b.id();
  Matrix<S> v(a.rows(), b.cols());
  v.noalias() = a.value() * b.value();
  return g.make(std::move(v), a.needs_grad() || b.needs_grad(),
                [ai, bi](Graph<S>& g, const Matrix<S>& dout) {
                  if (g.needs(ai)) g.grad_of(ai).noalias() += dout * g.value(bi).transpose();
                  if (g.needs(bi)) g.grad_of(bi).noalias() += g.value(ai).transpose() * dout;
                });
}

// broadcast a 1xC row over every row of m
template <typename S>
Var<S> add_rowvec(Var<S> m, Var<S> r) {
  Graph<S>& g = *m.graph();
  check(r.rows() == 1 && r.cols() == m.cols(), "add_rowvec: r must be 1 x cols(m)");
  const int mi = m.id(), ri = r.id();
  return g.make(Matrix<S>(m.value().rowwise() + r.value().row(0)),
                m.needs_grad() || r.needs_grad(),
                [mi, ri](Graph<S>& g, const Matrix<S>& dout) {
                  g.add_grad(mi, dout);
                  g.add_grad(ri, dout.colwise().sum());
                });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  return g.make(Matrix<S>(a.value().cwiseMax(S(0))), a.needs_grad(),
                [ai](Graph<S>& g, const Matrix<S>& dout) {
                  g.add_grad(ai, (g.value(ai).array() > S(0))
                                     .template cast<S>()
                                     .matrix()
                                     .cwiseProduct(dout));
                });
}

template <typename S>
Var<S> tanh_(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  Matrix<S> v = a.value().array().tanh().matrix();
  const Matrix<S> vc = v;
  return g.make(std::move(v), a.needs_grad(), [ai, vc](Graph<S>& g, const Matrix<S>& dout) {
    g.add_grad(ai, ((S(1) - vc.array().square()) * dout.array()).matrix());
  });
}

template <typename S>
Var<S> sigmoid_(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  Matrix<S> v = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  const Matrix<S> vc = v;
  return g.make(std::move(v), a.needs_grad(), [ai, vc](Graph<S>& g, const Matrix<S>& dout) {
    g.add_grad(ai, (vc.array() * (S(1) - vc.array()) * dout.array()).matrix());
  });
}

template <typename S>
Var<S> exp_(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  Matrix<S> v = a.value().array().exp().matrix();
  const Matrix<S> vc = v;
  return g.make(std::move(v), a.needs_grad(), [ai, vc](Graph<S>& g, const Matrix<S>& dout) {
    g.add_grad(ai, vc.cwiseProduct(dout));
  });
}

template <typename S>
Var<S> one_minus(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  return g.make(Matrix<S>((S(1) - a.value().array()).matrix()), a.needs_grad(),
                [ai](Graph<S>& g, const Matrix<S>& dout) { g.add_grad(ai, -dout); });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index c0, Eigen::Index n) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  return g.make(Matrix<S>(a.value().middleCols(c0, n)), a.needs_grad(),
                [ai, c0, n](Graph<S>& g, const Matrix<S>& dout) {
                  if (g.needs(ai)) g.grad_of(ai).middleCols(c0, n) += dout;
                });
}

template <typename S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  check(a.rows() == b.rows(), "concat_cols: row counts disagree");
  const int ai = a.id(), bi = b.id();
  Matrix<S> v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return g.make(std::move(v), a.needs_grad() || b.needs_grad(),
                [ai, bi, ca, cb](Graph<S>& g, const Matrix<S>& dout) {
                  if (g.needs(ai)) g.grad_of(ai) += dout.leftCols(ca);
                  if (g.needs(bi)) g.grad_of(bi) += dout.rightCols(cb);
                });
}

template <typename S>
Var<S> sum_all(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  Matrix<S> v(1, 1);
  v(0, 0) = a.value().sum();
  return g.make(std::move(v), a.needs_grad(), [ai](Graph<S>& g, const Matrix<S>& dout) {
    if (g.needs(ai)) g.grad_of(ai).array() += dout(0, 0);
  });
}

template <typename S>
Var<S> mean_all(Var<S> a) {
  return cmul(sum_all(a), S(1) / static_cast<S>(a.value().size()));
}

// rows of the output are rows of a selected by idx; duplicates allowed, so
// this doubles as embedding lookup and duration expansion
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<int> idx) {
  Graph<S>& g = *a.graph();
  const int ai = a.id();
  Matrix<S> v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  return g.make(std::move(v), a.needs_grad(),
                [ai, idx = std::move(idx)](Graph<S>& g, const Matrix<S>& dout) {
                  if (!g.needs(ai)) return;
                  Matrix<S>& da = g.grad_of(ai);
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    da.row(idx[i]) += dout.row(static_cast<Eigen::Index>(i));
                });
}

template <typename S>
Var<S> permute_cols(Var<S> a, std::vector<int> perm) {
  Graph<S>& g = *a.graph();
  check(static_cast<Eigen::Index>(perm.size()) == a.cols(), "permute_cols: size mismatch");
  const int ai = a.id();
  Matrix<S> v(a.rows(), a.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    v.col(static_cast<Eigen::Index>(j)) = a.value().col(perm[j]);
  return g.make(std::move(v), a.needs_grad(),
                [ai, perm = std::move(perm)](Graph<S>& g, const Matrix<S>& dout) {
                  if (!g.needs(ai)) return;
                  Matrix<S>& da = g.grad_of(ai);
                  for (std::size_t j = 0; j < perm.size(); ++j)
                    da.col(perm[j]) += dout.col(static_cast<Eigen::Index>(j));
                });
}

template <typename S>
Var<S> stop_gradient(Var<S> a) {
  return a.graph()->constant(a.value());
}

// n consecutive rows starting at r0, flattened row-major into a 1 x (n*C)
// row vector
template <typename S>
Var<S> rows_as_row(Var<S> a, Eigen::Index r0, Eigen::Index n) {
  Graph<S>& g = *a.graph();
  check(r0 >= 0 && r0 + n <= a.rows(), "rows_as_row: row range out of bounds");
  const int ai = a.id();
  const Eigen::Index c = a.cols();
  Matrix<S> v(1, n * c);
  for (Eigen::Index i = 0; i < n; ++i) v.block(0, i * c, 1, c) = a.value().row(r0 + i);
  return g.make(std::move(v), a.needs_grad(),
                [ai, r0, n, c](Graph<S>& g, const Matrix<S>& dout) {
                  if (!g.needs(ai)) return;
                  Matrix<S>& da = g.grad_of(ai);
                  for (Eigen::Index i = 0; i < n; ++i)
                    da.row(r0 + i) += dout.block(0, i * c, 1, c);
                });
}

// mean |a - target| over all entries; target is not a graph node
template <typename S>
Var<S> mae_loss(Var<S> a, const Matrix<S>& target) {
  Graph<S>& g = *a.graph();
  check(a.rows() == target.rows() && a.cols() == target.cols(), "mae_loss: shape mismatch");
  const int ai = a.id();
  const S inv_n = S(1) / static_cast<S>(target.size());
  Matrix<S> v(1, 1);
  v(0, 0) = (a.value() - target).cwiseAbs().mean();
  return g.make(std::move(v), a.needs_grad(),
                [ai, target, inv_n](Graph<S>& g, const Matrix<S>& dout) {
                  const auto diff = (g.value(ai) - target).array();
                  g.add_grad(ai, (diff.sign() * (dout(0, 0) * inv_n)).matrix());
                });
}

// mean (a - b)^2; both sides are graph nodes (the style loss needs gradient
// into both encoders)
template <typename S>
Var<S> mse_loss(Var<S> a, Var<S> b) {
  Graph<S>& g = *a.graph();
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mse_loss: shape mismatch");
  const int ai = a.id(), bi = b.id();
  const S inv_n = S(1) / static_cast<S>(a.value().size());
  Matrix<S> v(1, 1);
  v(0, 0) = (a.value() - b.value()).array().square().mean();
  return g.make(std::move(v), a.needs_grad() || b.needs_grad(),
                [ai, bi, inv_n](Graph<S>& g, const Matrix<S>& dout) {
                  const Matrix<S> d =
                      (g.value(ai) - g.value(bi)) * (S(2) * inv_n * dout(0, 0));
                  g.add_grad(ai, d);
                  g.add_grad(bi, -d);
                });
}

// mean Huber(a - target) with threshold delta
template <typename S>
Var<S> huber_loss(Var<S> a, const Matrix<S>& target, S delta) {
  Graph<S>& g = *a.graph();
  check(a.rows() == target.rows() && a.cols() == target.cols(), "huber_loss: shape mismatch");
  const int ai = a.id();
  const S inv_n = S(1) / static_cast<S>(target.size());
  const auto e = (a.value() - target).array();
  const auto quad = S(0.5) * e.square();
  const auto lin = delta * (e.abs() - S(0.5) * delta);
  Matrix<S> v(1, 1);
  v(0, 0) = (e.abs() <= delta).select(quad, lin).sum() * inv_n;
  return g.make(std::move(v), a.needs_grad(),
                [ai, target, delta, inv_n](Graph<S>& g, const Matrix<S>& dout) {
                  const auto e = (g.value(ai) - target).array();
                  g.add_grad(ai, (e.min(delta).max(-delta) * (dout(0, 0) * inv_n)).matrix());
                });
}

// columns of v renormalized to unit length and scaled by g (1 x cols):
// w_j = g_j * v_j / ||v_j||
template <typename S>
Var<S> weight_norm_cols(Var<S> v, Var<S> gscale) {
  Graph<S>& g = *v.graph();
  check(gscale.rows() == 1 && gscale.cols() == v.cols(), "weight_norm_cols: g must be 1 x cols");
  const int vi = v.id(), gi = gscale.id();
  const Eigen::Index c = v.cols();
  Vector<S> norms(c);
  for (Eigen::Index j = 0; j < c; ++j) norms(j) = v.value().col(j).norm();
  Matrix<S> out(v.rows(), c);
  for (Eigen::Index j = 0; j < c; ++j)
    out.col(j) = v.value().col(j) * (gscale.value()(0, j) / norms(j));
  return g.make(std::move(out), v.needs_grad() || gscale.needs_grad(),
                [vi, gi, norms](Graph<S>& g, const Matrix<S>& dout) {
                  const Matrix<S>& vv = g.value(vi);
                  const Matrix<S>& gv = g.value(gi);
                  for (Eigen::Index j = 0; j < vv.cols(); ++j) {
                    const S n = norms(j);
                    const S dot = vv.col(j).dot(dout.col(j));
                    if (g.needs(gi)) g.grad_of(gi)(0, j) += dot / n;
                    if (g.needs(vi))
                      g.grad_of(vi).col(j) +=
                          (gv(0, j) / n) * (dout.col(j) - (dot / (n * n)) * vv.col(j));
                  }
                });
}

namespace detail {

// im2col for 1-D conv over rows: row t of the result is the concatenation of
// x rows t + (k - mid) * dilation for k in [0, kernel), zero outside.
template <typename S>
Matrix<S> im2col_1d(const Matrix<S>& x, int kernel, int dilation) {
  const Eigen::Index n = x.rows(), c = x.cols();
  const int mid = kernel / 2;
  Matrix<S> cols = Matrix<S>::Zero(n, kernel * c);
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index off = static_cast<Eigen::Index>(k - mid) * dilation;
    const Eigen::Index src0 = std::max<Eigen::Index>(0, off);
    const Eigen::Index dst0 = std::max<Eigen::Index>(0, -off);
    const Eigen::Index len = n - std::max<Eigen::Index>(std::abs(off), 0);
    if (len <= 0) continue;
    cols.block(dst0, static_cast<Eigen::Index>(k) * c, len, c) = x.middleRows(src0, len);
  }
  return cols;
}

template <typename S>
void col2im_1d_add(Matrix<S>& dx, const Matrix<S>& dcols, int kernel, int dilation) {
  const Eigen::Index n = dx.rows(), c = dx.cols();
  const int mid = kernel / 2;
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index off = static_cast<Eigen::Index>(k - mid) * dilation;
    const Eigen::Index src0 = std::max<Eigen::Index>(0, off);
    const Eigen::Index dst0 = std::max<Eigen::Index>(0, -off);
    const Eigen::Index len = n - std::max<Eigen::Index>(std::abs(off), 0);
    if (len <= 0) continue;
    dx.middleRows(src0, len) += dcols.block(dst0, static_cast<Eigen::Index>(k) * c, len, c);
  }
}

}  // namespace detail

// 1-D convolution over the row (time) axis with "same" zero padding.
// x: L x Cin, w: (kernel*Cin) x Cout, b: 1 x Cout. Odd kernel.
template <typename S>
Var<S> conv1d(Var<S> x, Var<S> w, Var<S> b, int kernel, int dilation) {
  Graph<S>& g = *x.graph();
  check(kernel % 2 == 1, "conv1d: kernel must be odd");
  check(w.rows() == static_cast<Eigen::Index>(kernel) * x.cols(),
        "conv1d: weight rows must be kernel*Cin");
  const int xi = x.id(), wi = w.id(), bi = b.id();
  auto cols = std::make_shared<Matrix<S>>(detail::im2col_1d(x.value(), kernel, dilation));
  Matrix<S> v(x.rows(), w.cols());
  v.noalias() = (*cols) * w.value();
  v.rowwise() += b.value().row(0);
  return g.make(std::move(v), x.needs_grad() || w.needs_grad() || b.needs_grad(),
                [xi, wi, bi, cols, kernel, dilation](Graph<S>& g, const Matrix<S>& dout) {
                  if (g.needs(bi)) g.grad_of(bi) += dout.colwise().sum();
                  if (g.needs(wi)) g.grad_of(wi).noalias() += cols->transpose() * dout;
                  if (g.needs(xi)) {
                    Matrix<S> dcols(cols->rows(), cols->cols());
                    dcols.noalias() = dout * g.value(wi).transpose();
                    detail::col2im_1d_add(g.grad_of(xi), dcols, kernel, dilation);
                  }
                });
}

// 2-D feature maps are stored as (H*W) x C with site index h*W + w.
struct Conv2dShape {
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

// stride-2 3x3 "same" shape: out = ceil(in / 2), padding split low/high
inline Conv2dShape conv2d_s2_shape(int h, int w) {
  Conv2dShape s;
  s.in_h = h;
  s.in_w = w;
  s.out_h = (h + 1) / 2;
  s.out_w = (w + 1) / 2;
  const int pad_h = std::max((s.out_h - 1) * 2 + 3 - h, 0);
  const int pad_w = std::max((s.out_w - 1) * 2 + 3 - w, 0);
  s.pad_top = pad_h / 2;
  s.pad_left = pad_w / 2;
  return s;
}

namespace detail {

template <typename S>
Matrix<S> im2col_2d_s2(const Matrix<S>& x, const Conv2dShape& sh) {
  const Eigen::Index c = x.cols();
  Matrix<S> cols = Matrix<S>::Zero(static_cast<Eigen::Index>(sh.out_h) * sh.out_w, 9 * c);
  for (int kh = 0; kh < 3; ++kh) {
    for (int kw = 0; kw < 3; ++kw) {
      const Eigen::Index tap = (static_cast<Eigen::Index>(kh) * 3 + kw) * c;
      for (int oh = 0; oh < sh.out_h; ++oh) {
        const int ih = oh * 2 - sh.pad_top + kh;
        if (ih < 0 || ih >= sh.in_h) continue;
        for (int ow = 0; ow < sh.out_w; ++ow) {
          const int iw = ow * 2 - sh.pad_left + kw;
          if (iw < 0 || iw >= sh.in_w) continue;
          cols.block(static_cast<Eigen::Index>(oh) * sh.out_w + ow, tap, 1, c) =
              x.row(static_cast<Eigen::Index>(ih) * sh.in_w + iw);
        }
      }
    }
  }
  return cols;
}

template <typename S>
void col2im_2d_s2_add(Matrix<S>& dx, const Matrix<S>& dcols, const Conv2dShape& sh) {
  const Eigen::Index c = dx.cols();
  for (int kh = 0; kh < 3; ++kh) {
    for (int kw = 0; kw < 3; ++kw) {
      const Eigen::Index tap = (static_cast<Eigen::Index>(kh) * 3 + kw) * c;
      for (int oh = 0; oh < sh.out_h; ++oh) {
        const int ih = oh * 2 - sh.pad_top + kh;
        if (ih < 0 || ih >= sh.in_h) continue;
        for (int ow = 0; ow < sh.out_w; ++ow) {
          const int iw = ow * 2 - sh.pad_left + kw;
          if (iw < 0 || iw >= sh.in_w) continue;
          dx.row(static_cast<Eigen::Index>(ih) * sh.in_w + iw) +=
              dcols.block(static_cast<Eigen::Index>(oh) * sh.out_w + ow, tap, 1, c);
        }
      }
    }
  }
}

}  // namespace detail

// 3x3 stride-2 convolution on an (H*W) x Cin map. w: (9*Cin) x Cout.
template <typename S>
Var<S> conv2d_s2(Var<S> x, Var<S> w, Var<S> b, const Conv2dShape& sh) {
  Graph<S>& g = *x.graph();
  check(x.rows() == static_cast<Eigen::Index>(sh.in_h) * sh.in_w, "conv2d_s2: bad input rows");
  check(w.rows() == 9 * x.cols(), "conv2d_s2: weight rows must be 9*Cin");
  const int xi = x.id(), wi = w.id(), bi = b.id();
  auto cols = std::make_shared<Matrix<S>>(detail::im2col_2d_s2(x.value(), sh));
  Matrix<S> v(cols->rows(), w.cols());
  v.noalias() = (*cols) * w.value();
  v.rowwise() += b.value().row(0);
  return g.make(std::move(v), x.needs_grad() || w.needs_grad() || b.needs_grad(),
                [xi, wi, bi, cols, sh](Graph<S>& g, const Matrix<S>& dout) {
                  if (g.needs(bi)) g.grad_of(bi) += dout.colwise().sum();
                  if (g.needs(wi)) g.grad_of(wi).noalias() += cols->transpose() * dout;
                  if (g.needs(xi)) {
                    Matrix<S> dcols(cols->rows(), cols->cols());
                    dcols.noalias() = dout * g.value(wi).transpose();
                    detail::col2im_2d_s2_add(g.grad_of(xi), dcols, sh);
                  }
                });
}

}  // namespace sttts::ad

#endif  // STTTS_AUTODIFF_HPP_
