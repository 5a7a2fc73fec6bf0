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

#ifndef STTTS_TRAINER_HPP_
#define STTTS_TRAINER_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "sttts/core.hpp"
#include "sttts/io.hpp"
#include "sttts/model.hpp"

namespace sttts {

// lr = scale * min(step^-1/2, step * warmup^-3/2); peak at step == warmup
inline double noam_lr(int step, double noam_scale, int warmup) {
  check(step >= 1, "noam_lr: step must be >= 1");
  check(warmup >= 1, "noam_lr: warmup must be >= 1");
  const double s = static_cast<double>(step);
  return noam_scale * std::min(1.0 / std::sqrt(s), s * std::pow(static_cast<double>(warmup), -1.5));
}

struct StepMetrics {
  int step = 0;
  double lr = 0;
  double mel = 0, dur = 0, align = 0, style = 0;
  double total = 0;
};

inline std::string metrics_csv_header() {
  return "step,lr,mel_loss,dur_loss,align_loss,style_loss,total";
}

inline std::string metrics_csv_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + format_double(m.lr) + "," + format_double(m.mel) + "," +
         format_double(m.dur) + "," + format_double(m.align) + "," + format_double(m.style) +
         "," + format_double(m.total);
}

template <typename S>
class Trainer {
 public:
  Trainer(Model<S>& model, std::vector<Utterance> train_set)
      : model_(model), train_set_(std::move(train_set)) {
    check(!train_set_.empty(), "Trainer: empty training corpus");
  }

  int step() const { return step_; }
  void set_step(int s) { step_ = s; }
  const std::vector<StepMetrics>& history() const { return history_; }

  // Per-loss breakdown averaged over the batch, with gradients accumulated
  // into the parameter store (scaled by 1/batch). Batch items are
  // independent graphs; grads merge in item order, so results do not depend
  // on the number of worker threads.
  StepMetrics accumulate_batch(const std::vector<const Utterance*>& batch,
                               const std::vector<std::string>& tags) {
    const std::size_t b = batch.size();
    struct ItemResult {
      typename Model<S>::UttLosses losses;
      std::vector<std::pair<int, Matrix<S>>> grads;
    };
    std::vector<ItemResult> results(b);
    const S seed_scale = S(1) / static_cast<S>(b);

    auto run_item = [&](std::size_t k) {
      ad::Graph<S> g;
      Bind<S> bind(g, model_.params);
      results[k].losses = model_.build_losses(bind, *batch[k], tags[k]);
      g.backward(results[k].losses.total, seed_scale);
      results[k].grads = bind.collect();
    };

    const int workers = std::min<int>(model_.cfg.threads, static_cast<int>(b));
    if (workers <= 1) {
      for (std::size_t k = 0; k < b; ++k) run_item(k);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = static_cast<std::size_t>(w); k < b;
                 k += static_cast<std::size_t>(workers))
              run_item(k);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      for (std::thread& th : pool) th.join();
      for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
    }

    StepMetrics m;
    for (std::size_t k = 0; k < b; ++k) {
      const auto& l = results[k].losses;
      const std::pair<const char*, double> sub_losses[] = {
          {"mel", l.mel}, {"duration", l.dur}, {"alignment", l.align}, {"style", l.style}};
      for (const auto& [name, v] : sub_losses)
        check(std::isfinite(v), "training aborted: non-finite " + std::string(name) +
                                    " loss at step " + std::to_string(step_ + 1) +
                                    " (utterance '" + batch[k]->id + "')");
      m.mel += l.mel;
      m.dur += l.dur;
      m.align += l.align;
      m.style += l.style;
      for (const auto& [pid, grad] : results[k].grads) model_.params.at(pid).grad += grad;
    }
    m.mel /= static_cast<double>(b);
    m.dur /= static_cast<double>(b);
    m.align /= static_cast<double>(b);
    m.style /= static_cast<double>(b);
    m.total = model_.cfg.w_mel * m.mel + model_.cfg.w_dur * m.dur +
              model_.cfg.w_align * m.align + model_.cfg.w_style * m.style;
    return m;
  }

  void adam_step(double lr) {
    const ModelConfig& cfg = model_.cfg;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
    const S b1 = static_cast<S>(cfg.adam_beta1), b2 = static_cast<S>(cfg.adam_beta2);
    for (int pid = 0; pid < model_.params.size(); ++pid) {
      auto& p = model_.params.at(pid);
      p.adam_m = b1 * p.adam_m + (S(1) - b1) * p.grad;
      p.adam_v = (b2 * p.adam_v.array() + (S(1) - b2) * p.grad.array().square()).matrix();
      const auto m_hat = p.adam_m.array() / static_cast<S>(bc1);
      const auto v_hat = p.adam_v.array() / static_cast<S>(bc2);
      p.value.array() -=
          static_cast<S>(lr) * m_hat / (v_hat.sqrt() + static_cast<S>(cfg.adam_eps));
    }
  }

  // Deterministic batch for a given step: selection and tag augmentation
  // depend only on (seed, step), so resumed runs see the same stream.
  void make_batch(int step, std::vector<const Utterance*>& batch,
                  std::vector<std::string>& tags) const {
    batch.clear();
    tags.clear();
    Rng rng(hash_combine(hash_combine(model_.cfg.seed, "batch"), static_cast<std::uint64_t>(step)));
    for (int k = 0; k < model_.cfg.batch_size; ++k) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(train_set_.size())));
      const Utterance& utt = train_set_[idx];
      batch.push_back(&utt);
      const std::uint64_t aug_seed = hash_combine(
          hash_combine(model_.cfg.seed, "aug"),
          static_cast<std::uint64_t>(step) * 1000003ull + static_cast<std::uint64_t>(k));
      tags.push_back(augment_tag(utt.style_tag, model_.rules, aug_seed));
    }
  }

  StepMetrics run_step() {
    std::vector<const Utterance*> batch;
    std::vector<std::string> tags;
    make_batch(step_ + 1, batch, tags);
    model_.params.zero_grads();
    StepMetrics m = accumulate_batch(batch, tags);
    ++step_;
    m.step = step_;
    m.lr = noam_lr(step_, model_.cfg.noam_scale, model_.cfg.warmup_steps);
    adam_step(m.lr);
    return m;
  }

  // Runs until cfg.max_steps; on_checkpoint fires at checkpoint_interval
  // boundaries and after the final step.
  void train(std::ostream* metrics_out = nullptr,
             const std::function<void(int)>& on_checkpoint = {}) {
    if (metrics_out && step_ == 0) *metrics_out << metrics_csv_header() << "\n";
    while (step_ < model_.cfg.max_steps) {
      const StepMetrics m = run_step();
      history_.push_back(m);
      const bool log_now = model_.cfg.log_interval > 0 &&
                           (m.step % model_.cfg.log_interval == 0 ||
                            m.step == model_.cfg.max_steps || m.step == 1);
      if (metrics_out && log_now) {
        *metrics_out << metrics_csv_row(m) << "\n";
        metrics_out->flush();
      }
      if (on_checkpoint && model_.cfg.checkpoint_interval > 0 &&
          m.step % model_.cfg.checkpoint_interval == 0 && m.step != model_.cfg.max_steps)
        on_checkpoint(m.step);
    }
    if (on_checkpoint) on_checkpoint(step_);
  }

 private:
  Model<S>& model_;
  std::vector<Utterance> train_set_;
  std::vector<StepMetrics> history_;
  int step_ = 0;
};

// ---- finite-difference gradient check ----

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0;
  std::size_t n_scalars = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst = 0;
};

// Central differences of the batch-mean total loss against the tape, with
// MAS paths frozen at the base parameters (the analytic gradient is defined
// with the hard alignment held constant, so the comparison must hold it
// constant too). Double precision only.
inline GradCheckReport grad_check(Model<double>& model, const std::vector<Utterance>& batch,
                                  double h = 1e-5) {
  check(!batch.empty(), "grad_check: empty batch");
  std::vector<std::vector<int>> paths;
  for (const Utterance& utt : batch) {
    ad::Graph<double> g;
    Bind<double> bind(g, model.params);
    ad::Var<double> trunk = model.text.trunk(bind, utt.tokens);
    const Matrix<double> mu = model.text.mu_head(bind, trunk).value();
    auto [z, logdet] = flow_forward_values(model.flow, model.params,
                                           Matrix<double>(utt.mel.cast<double>()));
    (void)logdet;
    paths.push_back(mas(frame_log_likelihoods<double>(z, mu)));
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  auto batch_loss = [&]() {
    double total = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      ad::Graph<double> g;
      Bind<double> bind(g, model.params);
      const auto l = model.build_losses(bind, batch[k], batch[k].style_tag, &paths[k]);
      total += l.total.value()(0, 0);
    }
    return total * inv_b;
  };

  // analytic gradients of the same frozen-path loss
  model.params.zero_grads();
  for (std::size_t k = 0; k < batch.size(); ++k) {
    ad::Graph<double> g;
    Bind<double> bind(g, model.params);
    const auto l = model.build_losses(bind, batch[k], batch[k].style_tag, &paths[k]);
    g.backward(l.total, inv_b);
    for (const auto& [pid, grad] : bind.collect()) model.params.at(pid).grad += grad;
  }

  GradCheckReport report;
  std::vector<GradCheckGroup>& groups = report.groups;
  auto group_index = [&](const std::string& name) {
    const std::string gname = ParamStore<double>::group_of(name);
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i].name == gname) return i;
    groups.push_back(GradCheckGroup{gname, 0.0, 0});
    return groups.size() - 1;
  };

  for (int pid = 0; pid < model.params.size(); ++pid) {
    auto& p = model.params.at(pid);
    const std::size_t gi = group_index(p.name);
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        const double saved = p.value(r, c);
        p.value(r, c) = saved + h;
        const double fp = batch_loss();
        p.value(r, c) = saved - h;
        const double fm = batch_loss();
        p.value(r, c) = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double a = p.grad(r, c);
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        groups[gi].max_rel_err = std::max(groups[gi].max_rel_err, rel);
        ++groups[gi].n_scalars;
        report.worst = std::max(report.worst, rel);
      }
    }
  }
  return report;
}

}  // namespace sttts

#endif  // STTTS_TRAINER_HPP_
