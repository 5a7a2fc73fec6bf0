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

#ifndef STTTS_MAS_HPP_
#define STTTS_MAS_HPP_

#include <numbers>
#include <string>
#include <vector>

#include "sttts/core.hpp"

namespace sttts {

// Frame-to-token log likelihoods under unit-variance Gaussians:
// entry (j, i) = -D/2 log(2 pi) - 1/2 ||z_j - mu_i||^2.
template <typename S>
Matrix<S> frame_log_likelihoods(const Matrix<S>& z, const Matrix<S>& mu) {
  check(z.cols() == mu.cols(), "frame_log_likelihoods: latent and prior dims disagree");
  const Eigen::Index t = z.rows(), n = mu.rows(), d = z.cols();
  const S base = static_cast<S>(-0.5 * d * std::log(2.0 * std::numbers::pi));
  // ||z - mu||^2 = |z|^2 + |mu|^2 - 2 z.mu, one GEMM for the cross term
  Matrix<S> ll(t, n);
  ll.noalias() = z * mu.transpose();
  const Vector<S> z2 = z.rowwise().squaredNorm();
  const Vector<S> m2 = mu.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      ll(j, i) = base - S(0.5) * (z2(j) + m2(i) - S(2) * ll(j, i));
  return ll;
}

// Monotonic Alignment Search. Input is the T x N frame-to-token
// log-likelihood matrix; output is the frame-to-token map (0-based, length
// T) maximizing the summed log likelihood over all monotonic surjective
// paths. DP: Q(i,j) = ll(j,i) + max(Q(i,j-1), Q(i-1,j-1)), infeasible cells
// -inf, ties prefer staying on the current token.
template <typename S>
std::vector<int> mas(const Matrix<S>& loglik) {
  const Eigen::Index t = loglik.rows(), n = loglik.cols();
  check(n >= 1, "mas: need at least one token");
  check(t >= n, "mas: T < N, no monotonic surjective alignment exists (T=" +
                    std::to_string(t) + ", N=" + std::to_string(n) + ")");
  const S neg_inf = -std::numeric_limits<S>::infinity();
  Matrix<S> q = Matrix<S>::Constant(n, t, neg_inf);
  q(0, 0) = loglik(0, 0);
  for (Eigen::Index j = 1; j < t; ++j) {
    // feasible tokens at frame j: i <= j and n - 1 - i <= t - 1 - j
    const Eigen::Index lo = std::max<Eigen::Index>(0, n - t + j);
    const Eigen::Index hi = std::min<Eigen::Index>(j, n - 1);
    for (Eigen::Index i = lo; i <= hi; ++i) {
      const S stay = q(i, j - 1);
      const S advance = i > 0 ? q(i - 1, j - 1) : neg_inf;
      q(i, j) = loglik(j, i) + (stay >= advance ? stay : advance);
    }
  }
  std::vector<int> path(static_cast<std::size_t>(t));
  Eigen::Index i = n - 1;
  path[static_cast<std::size_t>(t - 1)] = static_cast<int>(i);
  for (Eigen::Index j = t - 1; j > 0; --j) {
    const S stay = q(i, j - 1);
    const S advance = i > 0 ? q(i - 1, j - 1) : neg_inf;
    if (advance > stay) --i;
    path[static_cast<std::size_t>(j - 1)] = static_cast<int>(i);
  }
  return path;
}

template <typename S>
S path_score(const Matrix<S>& loglik, const std::vector<int>& path) {
  S total = S(0);
  for (Eigen::Index j = 0; j < loglik.rows(); ++j)
    total += loglik(j, path[static_cast<std::size_t>(j)]);
  return total;
}

// d_i = number of frames assigned to token i; valid paths yield all >= 1
// and sum = T
inline std::vector<int> extract_durations(const std::vector<int>& path, int n_tokens) {
  std::vector<int> d(static_cast<std::size_t>(n_tokens), 0);
  for (const int i : path) {
    check(i >= 0 && i < n_tokens, "extract_durations: path index out of range");
    ++d[static_cast<std::size_t>(i)];
  }
  return d;
}

inline void validate_alignment_path(const std::vector<int>& path, int n_tokens) {
  check(!path.empty(), "alignment path is empty");
  check(path.front() == 0, "alignment path must start at token 0");
  check(path.back() == n_tokens - 1, "alignment path must end at the last token");
  for (std::size_t j = 1; j < path.size(); ++j) {
    const int step = path[j] - path[j - 1];
    check(step == 0 || step == 1, "alignment path steps must be 0 or +1");
  }
}

}  // namespace sttts

#endif  // STTTS_MAS_HPP_
