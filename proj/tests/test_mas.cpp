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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sttts/mas.hpp"

using namespace sttts;
using Md = Matrix<double>;

namespace {

// All monotonic surjective frame->token paths, scored in frame order so the
// summation order matches the DP exactly.
void enumerate_paths(int t, int n, int j, int i, double score, const Md& ll,
                     double& best, bool& any) {
  score += ll(j, i);
  if (j == t - 1) {
    if (i == n - 1 && (!any || score > best)) {
      best = score;
      any = true;
    }
    return;
  }
  // stay or advance, pruned by feasibility
  if (n - 1 - i <= t - 2 - j) enumerate_paths(t, n, j + 1, i, score, ll, best, any);
  if (i + 1 <= n - 1) enumerate_paths(t, n, j + 1, i + 1, score, ll, best, any);
}

double brute_force_best(const Md& ll) {
  double best = 0;
  bool any = false;
  enumerate_paths(static_cast<int>(ll.rows()), static_cast<int>(ll.cols()), 0, 0, 0.0, ll, best,
                  any);
  REQUIRE(any);
  return best;
}

}  // namespace

TEST_CASE("frame log likelihood hand values (D=1, sigma=1)") {
  Md z(2, 1), mu(1, 1);
  z << 0.0, 1.0;
  mu << 0.0;
  const Md ll = frame_log_likelihoods(z, mu);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(ll(0, 0) == doctest::Approx(-half_log_2pi).epsilon(1e-12));         // -0.918938...
  CHECK(ll(1, 0) == doctest::Approx(-half_log_2pi - 0.5).epsilon(1e-12));   // -1.418938...
}

TEST_CASE("frame log likelihoods equal the direct density loop") {
  Rng rng(3);
  const Md z = rng.normal_matrix<double>(6, 3, 1.0);
  const Md mu = rng.normal_matrix<double>(4, 3, 1.0);
  const Md ll = frame_log_likelihoods(z, mu);
  for (Eigen::Index j = 0; j < z.rows(); ++j)
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
      double acc = -0.5 * 3 * std::log(2.0 * std::numbers::pi);
      for (Eigen::Index d = 0; d < 3; ++d)
        acc -= 0.5 * (z(j, d) - mu(i, d)) * (z(j, d) - mu(i, d));
      CHECK(std::abs(ll(j, i) - acc) <= 1e-12);
    }
}

TEST_CASE("frame log likelihood rejects mismatched dims") {
  CHECK_THROWS(frame_log_likelihoods(Md(Md::Zero(2, 3)), Md(Md::Zero(2, 4))));
}

TEST_CASE("mas degenerate shapes") {
  SUBCASE("single token takes every frame") {
    const Md ll = Md::Random(3, 1);
    CHECK(mas(ll) == std::vector<int>{0, 0, 0});
  }
  SUBCASE("square case is the diagonal") {
    Rng rng(5);
    const Md ll = rng.normal_matrix<double>(4, 4, 1.0);
    CHECK(mas(ll) == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("T < N is an error") {
    CHECK_THROWS(mas(Md(Md::Zero(2, 3))));
  }
}

TEST_CASE("mas tie-break prefers staying on the current token") {
  // all-zero scores: every feasible path ties; the stated rule gives the
  // path that stays on the final token as long as possible
  const Md ll = Md::Zero(3, 2);
  CHECK(mas(ll) == std::vector<int>{0, 1, 1});
}

TEST_CASE("mas equals brute-force enumeration on random instances") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const int t = n + static_cast<int>(rng.uniform_int(9 - n));
    const Md ll = rng.normal_matrix<double>(t, n, 1.0);
    const std::vector<int> path = mas(ll);
    validate_alignment_path(path, n);
    CHECK(path_score(ll, path) == brute_force_best(ll));
  }
}

TEST_CASE("mas output always satisfies the path invariants") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    const int t = n + static_cast<int>(rng.uniform_int(10));
    const Md ll = rng.normal_matrix<double>(t, n, 2.0);
    const std::vector<int> path = mas(ll);
    validate_alignment_path(path, n);
    const std::vector<int> durs = extract_durations(path, n);
    int total = 0;
    for (const int d : durs) {
      CHECK(d >= 1);
      total += d;
    }
    CHECK(total == t);
  }
}

TEST_CASE("extract_durations counts frames per token") {
  CHECK(extract_durations({0, 0, 1, 2, 2, 2}, 3) == std::vector<int>{2, 1, 3});
  CHECK(extract_durations(std::vector<int>(7, 0), 1) == std::vector<int>{7});
  // random valid path against an independent counting oracle
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const int t = n + static_cast<int>(rng.uniform_int(8));
    std::vector<int> path;
    int i = 0;
    for (int j = 0; j < t; ++j) {
      if (j > 0) {
        // staying at i is feasible iff the tokens left fit the frames left
        const bool must_advance = (n - 1 - i) > (t - 1 - j);
        const bool can_advance = i < n - 1;
        if (must_advance || (can_advance && rng.uniform() < 0.4)) ++i;
      }
      path.push_back(i);
    }
    validate_alignment_path(path, n);
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (const int p : path) ++counts[static_cast<std::size_t>(p)];
    CHECK(extract_durations(path, n) == counts);
  }
}
