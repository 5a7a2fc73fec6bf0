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
//
// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; A5 performs the full desk-scale training run and A6/A7 reuse its
// trained model.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>

#include <Eigen/LU>

#include "sttts/checkpoint.hpp"
#include "sttts/eval.hpp"
#include "sttts/inference.hpp"
#include "sttts/trainer.hpp"

using namespace sttts;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criterion(const char* id, bool ok, const std::string& detail) {
  std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, id, ": ", detail);
}

// ---- brute-force path enumeration (oracle for A1) ----

void enumerate_paths(int t, int n, int j, int i, double score, const Matrix<double>& ll,
                     double& best, bool& any) {
  score += ll(j, i);
  if (j == t - 1) {
    if (i == n - 1 && (!any || score > best)) {
      best = score;
      any = true;
    }
    return;
  }
  if (n - 1 - i <= t - 2 - j) enumerate_paths(t, n, j + 1, i, score, ll, best, any);
  if (i + 1 <= n - 1) enumerate_paths(t, n, j + 1, i + 1, score, ll, best, any);
}

// ---- shared trained fixture for A5..A7 ----

ModelConfig desk_config() {
  ModelConfig cfg;  // desk-scale defaults
  cfg.seed = 1;
  cfg.threads = 2;
  cfg.max_steps = 5000;
  cfg.log_interval = 500;
  return cfg;
}

CorpusSpec a5_corpus_spec() {
  CorpusSpec spec;
  spec.seed = 1;
  spec.n_utterances = 500;
  spec.n_families = 20;
  spec.noise_sigma = 0.01;
  spec.mel_dim = 20;
  return spec;
}

struct TrainedFixture {
  GeneratedCorpus corpus;
  std::vector<Utterance> train_set;
  std::vector<Utterance> eval_set;
  Model<float> untrained;
  Model<float> model;
  double train_seconds = 0;

  TrainedFixture() {
    corpus = generate_corpus(a5_corpus_spec());
    const std::size_t n_eval = corpus.utterances.size() / 10;
    const std::size_t n_train = corpus.utterances.size() - n_eval;
    train_set.assign(corpus.utterances.begin(),
                     corpus.utterances.begin() + static_cast<std::ptrdiff_t>(n_train));
    eval_set.assign(corpus.utterances.begin() + static_cast<std::ptrdiff_t>(n_train),
                    corpus.utterances.end());
    const ModelConfig cfg = desk_config();
    untrained = Model<float>::create(cfg, corpus.vocab, corpus.families);
    model = Model<float>::create(cfg, corpus.vocab, corpus.families);
    Trainer<float> trainer(model, train_set);
    const auto t0 = std::chrono::steady_clock::now();
    trainer.train();
    train_seconds = seconds_since(t0);
  }
};

TrainedFixture& trained() {
  static TrainedFixture fixture;
  return fixture;
}

// teacher-forced reconstruction error with ground-truth durations and the
// reference style of the target itself
double heldout_mel_mae(const Model<float>& model, const std::vector<Utterance>& utts) {
  double total = 0;
  for (const Utterance& u : utts) {
    const Matrix<float> target = u.mel;
    const Vector<float> style = model.encode_reference_values(target);
    const Matrix<float> pred = model.decode_with_durations(u.tokens, u.true_durations, style);
    total += static_cast<double>(mel_mae(pred, target));
  }
  return total / static_cast<double>(utts.size());
}

std::vector<int> predicted_durations(const Model<float>& model, const TokenSequence& tokens,
                                     const std::string& tag) {
  return durations_for_inference(
      model.predict_log_durations(tokens, model.encode_tag_values(tag)));
}

double mean_pairwise(const std::vector<Vector<double>>& a, const std::vector<Vector<double>>& b,
                     bool same_set) {
  double total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = same_set ? i + 1 : 0; j < b.size(); ++j) {
      total += (a[i] - b[j]).norm();
      ++n;
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

// fraction of families whose intra-family mean distance is below the mean
// distance to all other families' members
double cluster_fraction(const std::map<int, std::vector<Vector<double>>>& by_family) {
  int eligible = 0, good = 0;
  for (const auto& [fid, members] : by_family) {
    if (members.size() < 2) continue;
    ++eligible;
    const double intra = mean_pairwise(members, members, true);
    double inter_sum = 0;
    std::size_t inter_n = 0;
    for (const auto& [other_id, other_members] : by_family) {
      if (other_id == fid) continue;
      for (const auto& x : members)
        for (const auto& y : other_members) {
          inter_sum += (x - y).norm();
          ++inter_n;
        }
    }
    const double inter = inter_sum / static_cast<double>(inter_n);
    if (intra < inter) ++good;
  }
  return eligible ? static_cast<double>(good) / eligible : 0.0;
}

double mse_between(const Vector<double>& a, const Vector<double>& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

// truncate to the shorter length; tag-dependent durations make synthesized
// lengths differ across styles
double output_mae_truncated(const Matrix<float>& a, const Matrix<float>& b) {
  const Eigen::Index t = std::min(a.rows(), b.rows());
  return static_cast<double>(
      (a.topRows(t) - b.topRows(t)).cwiseAbs().mean());
}

}  // namespace

TEST_CASE("A1 MAS equals exhaustive enumeration on 200 random instances") {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(42);
  bool all_equal = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const int t = n + static_cast<int>(rng.uniform_int(8 - n + 1));
    const Matrix<double> ll = rng.normal_matrix<double>(t, n, 1.0);
    const std::vector<int> path = mas(ll);
    validate_alignment_path(path, n);
    double best = 0;
    bool any = false;
    enumerate_paths(t, n, 0, 0, 0.0, ll, best, any);
    if (!any || path_score(ll, path) != best) all_equal = false;
  }
  const double elapsed = seconds_since(t0);
  criterion("A1", all_equal && elapsed < 10.0,
            "MAS path score bitwise-equals brute force on 200 instances (" +
                format_double(elapsed) + " s)");
}

TEST_CASE("A2 flow round-trips 100 random mels in both precisions") {
  // Parameters are drawn around the identity initialization (the regime a
  // trained aligner occupies); coupling scales amplify float cancellation
  // exponentially, so arbitrarily large draws cannot meet a fixed bound.
  const auto t0 = std::chrono::steady_clock::now();
  double worst_double = 0, worst_single = 0;
  int mels = 0;
  for (int draw = 0; draw < 10; ++draw) {
    const int d = 1 + draw % 8;
    ModelConfig cfg;
    cfg.mel_dim = d;
    cfg.flow_blocks = 4;
    cfg.flow_hidden = 16;
    cfg.flow_net_layers = 2;
    cfg.seed = static_cast<std::uint64_t>(100 + draw);

    ParamStore<double> ps_d;
    Rng init_d(cfg.seed);
    const Flow<double> flow_d = Flow<double>::create(ps_d, cfg, init_d);
    ParamStore<float> ps_f;
    Rng init_f(cfg.seed);
    const Flow<float> flow_f = Flow<float>::create(ps_f, cfg, init_f);
    Rng prng(cfg.seed * 7 + 1);
    for (int pid = 0; pid < ps_d.size(); ++pid) {
      auto& pd = ps_d.at(pid);
      pd.value += prng.normal_matrix<double>(
          pd.value.rows(), pd.value.cols(),
          0.1 / std::sqrt(static_cast<double>(pd.value.rows())));
      ps_f.at(pid).value = pd.value.cast<float>();
    }

    Rng data(cfg.seed * 13 + 5);
    for (int k = 0; k < 10; ++k, ++mels) {
      const int t = 1 + static_cast<int>(data.uniform_int(20));
      const Matrix<double> mel = data.normal_matrix<double>(t, d, 1.5);
      const auto [zd, ld_d] = flow_forward_values(flow_d, ps_d, mel);
      worst_double =
          std::max(worst_double,
                   double((flow_d.inverse(ps_d, zd) - mel).cwiseAbs().maxCoeff()));
      const Matrix<float> mel_f = mel.cast<float>();
      const auto [zf, ld_f] = flow_forward_values(flow_f, ps_f, mel_f);
      worst_single =
          std::max(worst_single,
                   double((flow_f.inverse(ps_f, zf) - mel_f).cwiseAbs().maxCoeff()));
    }
  }
  const double elapsed = seconds_since(t0);
  criterion("A2",
            mels == 100 && worst_double <= 1e-8 && worst_single <= 1e-4 && elapsed < 30.0,
            "round-trip max err double=" + format_double(worst_double) +
                " single=" + format_double(worst_single) + " over 100 mels (" +
                format_double(elapsed) + " s)");
}

TEST_CASE("A3 analytic logdet matches the numerical Jacobian on 20 draws") {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  const std::pair<int, int> shapes[] = {{4, 4}, {2, 8}, {8, 2}, {16, 1}, {2, 4}};
  for (int draw = 0; draw < 20; ++draw) {
    const auto [t, d] = shapes[draw % 5];
    ModelConfig cfg;
    cfg.mel_dim = d;
    cfg.flow_blocks = 3;
    cfg.flow_hidden = 12;
    cfg.flow_net_layers = 2;
    cfg.seed = static_cast<std::uint64_t>(500 + draw);
    ParamStore<double> ps;
    Rng init(cfg.seed);
    const Flow<double> flow = Flow<double>::create(ps, cfg, init);
    Rng prng(cfg.seed * 3 + 7);
    for (int pid = 0; pid < ps.size(); ++pid) {
      auto& p = ps.at(pid);
      p.value = prng.normal_matrix<double>(
          p.value.rows(), p.value.cols(), 0.5 / std::sqrt(static_cast<double>(p.value.rows())));
    }
    Rng data(cfg.seed * 11 + 3);
    const Matrix<double> x = data.normal_matrix<double>(t, d, 1.0);
    const auto [z, analytic] = flow_forward_values(flow, ps, x);

    const int dim = t * d;
    Matrix<double> jac(dim, dim);
    const double h = 1e-6;
    for (int col = 0; col < dim; ++col) {
      Matrix<double> xp = x, xm = x;
      xp(col / d, col % d) += h;
      xm(col / d, col % d) -= h;
      const Matrix<double> zp = flow_forward_values(flow, ps, xp).first;
      const Matrix<double> zm = flow_forward_values(flow, ps, xm).first;
      for (int row = 0; row < dim; ++row)
        jac(row, col) = (zp(row / d, row % d) - zm(row / d, row % d)) / (2 * h);
    }
    const double numeric =
        Eigen::FullPivLU<Matrix<double>>(jac).matrixLU().diagonal().array().abs().log().sum();
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
  const double elapsed = seconds_since(t0);
  criterion("A3", worst <= 1e-4 && elapsed < 60.0,
            "logdet rel err max=" + format_double(worst) + " over 20 parameter draws (" +
                format_double(elapsed) + " s)");
}

TEST_CASE("A4 analytic gradients match finite differences on the tiny model") {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.mel_dim = 4;
  cfg.hidden = 8;
  cfg.style_dim = 8;
  cfg.lm_dim = 8;
  cfg.adapt_hidden = 8;
  cfg.text_blocks = 2;
  cfg.text_kernel = 3;
  cfg.text_dilations = {1, 2};
  cfg.dur_blocks = 2;
  cfg.dur_kernel = 3;
  cfg.dur_dilations = {1};
  cfg.dec_blocks = 2;
  cfg.dec_kernel = 3;
  cfg.dec_dilations = {1, 2};
  cfg.ref_channels = {4, 4};
  cfg.flow_blocks = 2;
  cfg.flow_hidden = 8;
  cfg.flow_kernel = 3;
  cfg.flow_net_layers = 2;
  cfg.seed = 77;
  cfg.precision = "double";

  CorpusSpec spec;
  spec.seed = 77;
  spec.mel_dim = 4;
  spec.n_families = 2;
  spec.n_utterances = 4;
  spec.token_base_duration = 2;
  spec.min_tokens = 3;
  spec.max_tokens = 5;
  spec.noise_sigma = 0.02;
  const GeneratedCorpus corpus = generate_corpus(spec);

  Model<double> model = Model<double>::create(cfg, corpus.vocab, corpus.families);
  const std::vector<Utterance> batch{corpus.utterances[0], corpus.utterances[1]};
  const GradCheckReport report = grad_check(model, batch, 1e-5);
  const double elapsed = seconds_since(t0);

  std::string groups;
  bool ok = !report.groups.empty() && elapsed < 300.0;
  for (const auto& g : report.groups) {
    groups += g.name + "=" + format_double(g.max_rel_err) + " ";
    if (g.max_rel_err > 1e-3) ok = false;
  }
  criterion("A4", ok, "per-group max rel err: " + groups + "(" + format_double(elapsed) + " s)");
}

TEST_CASE("A5 desk-scale single-stage training meets the quality bars") {
  TrainedFixture& fx = trained();
  const bool time_ok = fx.train_seconds <= 1800.0;

  const double untrained_mae = heldout_mel_mae(fx.untrained, fx.eval_set);
  const double trained_mae = heldout_mel_mae(fx.model, fx.eval_set);
  const bool mel_ok = trained_mae <= 0.5 * untrained_mae;

  double aligner_err = 0, predictor_err = 0;
  for (const Utterance& u : fx.eval_set) {
    const std::vector<int> aligned = fx.model.align_durations(u);
    double e = 0;
    for (std::size_t i = 0; i < aligned.size(); ++i)
      e += std::abs(aligned[i] - u.true_durations[i]);
    aligner_err += e / static_cast<double>(aligned.size());

    const std::vector<int> predicted = predicted_durations(fx.model, u.tokens, u.style_tag);
    e = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      e += std::abs(predicted[i] - u.true_durations[i]);
    predictor_err += e / static_cast<double>(predicted.size());
  }
  aligner_err /= static_cast<double>(fx.eval_set.size());
  predictor_err /= static_cast<double>(fx.eval_set.size());
  const bool aligner_ok = aligner_err <= 1.0;
  const bool predictor_ok = predictor_err <= 1.5;

  // duration ordering across families whose rate ratio is >= 1.5
  std::vector<const TagFamily*> by_rate;
  for (const TagFamily& f : fx.corpus.families) by_rate.push_back(&f);
  std::sort(by_rate.begin(), by_rate.end(),
            [](const TagFamily* a, const TagFamily* b) { return a->rate < b->rate; });
  auto family_total = [&](const TagFamily& fam) {
    double total = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      const TokenSequence& tokens = fx.eval_set[k].tokens;
      const std::vector<int> d = predicted_durations(fx.model, tokens, fam.surface_forms[0]);
      total += std::accumulate(d.begin(), d.end(), 0);
    }
    return total;
  };
  int pairs = 0, consistent = 0;
  for (std::size_t lo = 0; lo < by_rate.size(); lo += 4) {
    for (std::size_t hi = lo + 1; hi < by_rate.size(); hi += 4) {
      if (by_rate[hi]->rate / by_rate[lo]->rate < 1.5) continue;
      ++pairs;
      if (family_total(*by_rate[hi]) > family_total(*by_rate[lo])) ++consistent;
    }
  }
  const bool ordering_ok = pairs >= 2 && consistent == pairs;

  criterion("A5",
            time_ok && mel_ok && aligner_ok && predictor_ok && ordering_ok,
            "train=" + format_double(fx.train_seconds) + "s mel MAE " +
                format_double(trained_mae) + " vs untrained " + format_double(untrained_mae) +
                ", aligner dur MAE=" + format_double(aligner_err) +
                ", predictor dur MAE=" + format_double(predictor_err) + ", rate ordering " +
                std::to_string(consistent) + "/" + std::to_string(pairs));
}

TEST_CASE("A6 bi-modal embeddings cluster by family") {
  TrainedFixture& fx = trained();

  std::map<int, std::vector<Vector<double>>> ref_by_family;
  for (const Utterance& u : fx.eval_set)
    ref_by_family[u.family].push_back(
        fx.model.encode_reference_values(u.mel).cast<double>());
  const double ref_fraction = cluster_fraction(ref_by_family);

  std::map<int, std::vector<Vector<double>>> tag_by_family;
  for (const TagFamily& f : fx.corpus.families)
    for (const std::string& form : f.surface_forms)
      tag_by_family[f.family_id].push_back(fx.model.encode_tag_values(form).cast<double>());
  const double tag_fraction = cluster_fraction(tag_by_family);

  // anchor property: tag embeddings sit nearer their own family's reference
  // embeddings than other families' (mean squared error)
  double same_mse = 0, other_mse = 0;
  std::size_t same_n = 0, other_n = 0;
  for (const auto& [fid, tag_embs] : tag_by_family)
    for (const auto& tag_emb : tag_embs)
      for (const auto& [rfid, ref_embs] : ref_by_family)
        for (const auto& ref_emb : ref_embs) {
          if (rfid == fid) {
            same_mse += mse_between(tag_emb, ref_emb);
            ++same_n;
          } else {
            other_mse += mse_between(tag_emb, ref_emb);
            ++other_n;
          }
        }
  same_mse /= static_cast<double>(same_n);
  other_mse /= static_cast<double>(other_n);

  criterion("A6",
            ref_fraction >= 0.8 && tag_fraction >= 0.8 && same_mse < other_mse,
            "intra<inter for ref=" + format_double(ref_fraction) + ", tag=" +
                format_double(tag_fraction) + " of families; tag-to-ref MSE same=" +
                format_double(same_mse) + " other=" + format_double(other_mse));
}

TEST_CASE("A7 unseen style tags retrieve and synthesize like their family") {
  TrainedFixture& fx = trained();

  // retrieval over the 20 held-out surface forms
  std::vector<std::pair<int, Vector<double>>> train_embs;
  for (const TagFamily& f : fx.corpus.families)
    for (const std::string& form : f.surface_forms)
      train_embs.emplace_back(f.family_id, fx.model.encode_tag_values(form).cast<double>());
  int total = 0, correct = 0;
  for (const TagFamily& f : fx.corpus.families)
    for (const std::string& form : f.heldout_forms) {
      const Vector<double> e = fx.model.encode_tag_values(form).cast<double>();
      double best = std::numeric_limits<double>::infinity();
      int best_fid = -1;
      for (const auto& [fid, emb] : train_embs) {
        const double d = (emb - e).norm();
        if (d < best) {
          best = d;
          best_fid = fid;
        }
      }
      ++total;
      if (best_fid == f.family_id) ++correct;
    }
  const double acc = static_cast<double>(correct) / std::max(1, total);
  const bool retrieval_ok = total == 20 && acc >= 0.9;

  // unseen-tag synthesis stays closer to its family than to other families
  const std::string text = fx.eval_set[0].text;
  double same_sum = 0, cross_sum = 0;
  std::size_t same_n = 0, cross_n = 0;
  for (std::size_t fi = 0; fi < fx.corpus.families.size(); fi += 4) {
    const TagFamily& fam = fx.corpus.families[fi];
    SynthesisRequest unseen_req;
    unseen_req.text = text;
    unseen_req.tag = fam.heldout_forms[0];
    const Matrix<float> unseen_mel = synthesize(fx.model, unseen_req);
    for (std::size_t fj = 0; fj < fx.corpus.families.size(); ++fj) {
      SynthesisRequest seen_req;
      seen_req.text = text;
      seen_req.tag = fx.corpus.families[fj].surface_forms[0];
      const Matrix<float> seen_mel = synthesize(fx.model, seen_req);
      if (fj == fi) {
        same_sum += output_mae_truncated(unseen_mel, seen_mel);
        ++same_n;
      } else {
        cross_sum += output_mae_truncated(unseen_mel, seen_mel);
        ++cross_n;
      }
    }
  }
  const double same_mae = same_sum / static_cast<double>(same_n);
  const double cross_mae = cross_sum / static_cast<double>(cross_n);
  const bool synth_ok = same_mae < cross_mae;

  criterion("A7", retrieval_ok && synth_ok,
            "held-out retrieval acc=" + format_double(acc) + " (" + std::to_string(total) +
                " tags); unseen-vs-seen output MAE same=" + format_double(same_mae) +
                " cross=" + format_double(cross_mae));
}

TEST_CASE("A8 inference duration rule matches an independent scalar oracle") {
  Rng rng(2024);
  bool all_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    std::vector<double> log_d(static_cast<std::size_t>(n));
    for (double& v : log_d) v = rng.uniform(-6.0, 3.0);
    const std::vector<int> got = durations_for_inference(log_d);

    // independent scalar loop with its own tie-to-even rounding
    for (std::size_t i = 0; i < log_d.size(); ++i) {
      const double e = std::exp(log_d[i]);
      const double f = std::floor(e);
      const double frac = e - f;
      double r;
      if (frac > 0.5) r = f + 1;
      else if (frac < 0.5) r = f;
      else r = (std::fmod(f, 2.0) == 0.0) ? f : f + 1;
      const int expected = std::max(1, static_cast<int>(r));
      if (got[i] != expected || got[i] < 1) all_ok = false;
    }
  }
  criterion("A8", all_ok, "1000 random vectors, exp + round-half-even + clamp to one");
}
