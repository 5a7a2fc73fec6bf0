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

#ifndef STTTS_EVAL_HPP_
#define STTTS_EVAL_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sttts/inference.hpp"
#include "sttts/model.hpp"

namespace sttts {

struct EmbeddingRow {
  std::string label;
  std::string source;  // "tag" or "ref"
  Vector<double> values;
};

inline std::string embeddings_to_csv(const std::vector<EmbeddingRow>& rows) {
  std::string out;
  for (const EmbeddingRow& r : rows) {
    out += r.label + "," + r.source;
    for (Eigen::Index i = 0; i < r.values.size(); ++i) out += "," + format_double(r.values(i));
    out += "\n";
  }
  return out;
}

inline std::vector<EmbeddingRow> embeddings_from_csv(const std::filesystem::path& path) {
  std::vector<EmbeddingRow> rows;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], ',');
    check(fields.size() >= 3, "embeddings csv: line " + std::to_string(i + 1) + " too short");
    EmbeddingRow r;
    r.label = fields[0];
    r.source = fields[1];
    r.values.resize(static_cast<Eigen::Index>(fields.size() - 2));
    for (std::size_t j = 2; j < fields.size(); ++j)
      r.values(static_cast<Eigen::Index>(j - 2)) = parse_double(fields[j], "embedding value");
    check(!rows.empty() ? rows[0].values.size() == r.values.size() : true,
          "embeddings csv: inconsistent widths at line " + std::to_string(i + 1));
    rows.push_back(std::move(r));
  }
  return rows;
}

template <typename S>
std::vector<EmbeddingRow> tag_embedding_rows(const Model<S>& model,
                                             const std::vector<std::string>& tags) {
  std::vector<EmbeddingRow> rows;
  for (const std::string& tag : tags) {
    EmbeddingRow r;
    r.label = tag;
    r.source = "tag";
    r.values = model.encode_tag_values(tag).template cast<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

template <typename S>
std::vector<EmbeddingRow> reference_embedding_rows(const Model<S>& model,
                                                   const std::vector<Utterance>& utts) {
  std::vector<EmbeddingRow> rows;
  for (const Utterance& u : utts) {
    EmbeddingRow r;
    r.label = u.id;
    r.source = "ref";
    r.values =
        model.encode_reference_values(Matrix<S>(u.mel.template cast<S>())).template cast<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

// PCA onto the top-2 principal components of the mean-centered rows. Sign
// convention: each component's largest-magnitude coefficient is positive, so
// the projection is reproducible. Input order is preserved.
inline Matrix<double> pca_project_2d(const Matrix<double>& x) {
  check(x.rows() >= 3, "cmd_project: need at least 3 rows, got " + std::to_string(x.rows()));
  const Matrix<double> centered = x.rowwise() - x.colwise().mean();
  const Eigen::Index dim = x.cols();
  Matrix<double> basis = Matrix<double>::Zero(dim, 2);
  if (dim == 1) {
    basis(0, 0) = 1.0;
  } else {
    const Matrix<double> cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Matrix<double>> solver(cov);
    check(solver.info() == Eigen::Success, "cmd_project: eigendecomposition failed");
    // eigenvalues ascending; take the last two, largest first
    basis.col(0) = solver.eigenvectors().col(dim - 1);
    basis.col(1) = solver.eigenvectors().col(dim - 2);
  }
  for (int c = 0; c < 2; ++c) {
    Eigen::Index argmax = 0;
    basis.col(c).cwiseAbs().maxCoeff(&argmax);
    if (basis(argmax, c) < 0) basis.col(c) = -basis.col(c);
  }
  return centered * basis;
}

struct ProjectedRow {
  std::string label;
  std::string source;
  double x = 0, y = 0;
};

inline std::vector<ProjectedRow> project_embeddings(const std::vector<EmbeddingRow>& rows) {
  check(rows.size() >= 3, "cmd_project: need at least 3 rows, got " + std::to_string(rows.size()));
  Matrix<double> x(static_cast<Eigen::Index>(rows.size()), rows[0].values.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
  const Matrix<double> coords = pca_project_2d(x);
  std::vector<ProjectedRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back(ProjectedRow{rows[i].label, rows[i].source,
                               coords(static_cast<Eigen::Index>(i), 0),
                               coords(static_cast<Eigen::Index>(i), 1)});
  return out;
}

inline std::string projected_to_csv(const std::vector<ProjectedRow>& rows) {
  std::string out;
  for (const ProjectedRow& r : rows)
    out += r.label + "," + r.source + "," + format_double(r.x) + "," + format_double(r.y) + "\n";
  return out;
}

// Objective stand-ins for the subjective listening tests: reconstruction
// error with oracle durations, duration errors, held-out tag retrieval, and
// a cluster-separation margin on reference embeddings.
struct EvalReport {
  double mel_mae = 0;
  double duration_mae = 0;        // predictor vs ground truth, frames per token
  double aligner_duration_mae = 0;  // aligner vs ground truth, frames per token
  double tag_retrieval_acc = 0;
  double silhouette_like_margin = 0;
  int n_utterances = 0;
  int n_heldout_tags = 0;
};

inline std::string eval_report_text(const EvalReport& r) {
  std::string out;
  out += "mel_mae=" + format_double(r.mel_mae) + "\n";
  out += "duration_mae=" + format_double(r.duration_mae) + "\n";
  out += "aligner_duration_mae=" + format_double(r.aligner_duration_mae) + "\n";
  out += "tag_retrieval_acc=" + format_double(r.tag_retrieval_acc) + "\n";
  out += "silhouette_like_margin=" + format_double(r.silhouette_like_margin) + "\n";
  out += "n_utterances=" + std::to_string(r.n_utterances) + "\n";
  out += "n_heldout_tags=" + std::to_string(r.n_heldout_tags) + "\n";
  return out;
}

inline double mean_abs_duration_error(const std::vector<int>& a, const std::vector<int>& b) {
  check(a.size() == b.size(), "duration MAE: length mismatch");
  double err = 0;
  for (std::size_t i = 0; i < a.size(); ++i) err += std::abs(a[i] - b[i]);
  return err / static_cast<double>(a.size());
}

// Mel reconstruction uses ground-truth durations when the corpus carries
// them (aligner durations otherwise) and the reference-encoder style of the
// target itself, isolating decoder quality from duration errors.
template <typename S>
EvalReport evaluate(const Model<S>& model, const std::vector<Utterance>& eval_utts,
                    const std::vector<TagFamily>& families) {
  check(!eval_utts.empty(), "cmd_eval: empty evaluation corpus");
  EvalReport report;
  report.n_utterances = static_cast<int>(eval_utts.size());

  double mel_sum = 0, dur_sum = 0, align_dur_sum = 0;
  int dur_count = 0;
  std::map<int, std::vector<Vector<double>>> ref_by_family;
  for (const Utterance& u : eval_utts) {
    const Matrix<S> target = u.mel.template cast<S>();
    const Vector<S> ref_style = model.encode_reference_values(target);
    if (u.family >= 0)
      ref_by_family[u.family].push_back(ref_style.template cast<double>());

    std::vector<int> teacher_durations =
        !u.true_durations.empty() ? u.true_durations : model.align_durations(u);
    const Matrix<S> pred = model.decode_with_durations(u.tokens, teacher_durations, ref_style);
    mel_sum += static_cast<double>(mel_mae(pred, target));

    if (!u.true_durations.empty()) {
      const Vector<S> tag_style = model.encode_tag_values(u.style_tag);
      const std::vector<int> predicted =
          durations_for_inference(model.predict_log_durations(u.tokens, tag_style));
      dur_sum += mean_abs_duration_error<S>(predicted, u.true_durations);
      align_dur_sum += mean_abs_duration_error<S>(model.align_durations(u), u.true_durations);
      ++dur_count;
    }
  }
  report.mel_mae = mel_sum / static_cast<double>(eval_utts.size());
  report.duration_mae = dur_count > 0 ? dur_sum / dur_count : 0.0;
  report.aligner_duration_mae = dur_count > 0 ? align_dur_sum / dur_count : 0.0;

  // held-out tag retrieval: nearest training-form embedding must share the
  // family
  std::vector<std::pair<int, Vector<double>>> train_tag_embs;
  for (const TagFamily& f : families)
    for (const std::string& form : f.surface_forms)
      train_tag_embs.emplace_back(f.family_id,
                                  model.encode_tag_values(form).template cast<double>());
  int heldout_total = 0, heldout_correct = 0;
  for (const TagFamily& f : families) {
    for (const std::string& form : f.heldout_forms) {
      const Vector<double> e = model.encode_tag_values(form).template cast<double>();
      double best = std::numeric_limits<double>::infinity();
      int best_family = -1;
      for (const auto& [fid, emb] : train_tag_embs) {
        const double d = (emb - e).norm();
        if (d < best) {
          best = d;
          best_family = fid;
        }
      }
      ++heldout_total;
      if (best_family == f.family_id) ++heldout_correct;
    }
  }
  report.n_heldout_tags = heldout_total;
  report.tag_retrieval_acc =
      heldout_total > 0 ? static_cast<double>(heldout_correct) / heldout_total : 0.0;

  // cluster margin over reference embeddings
  double intra = 0, inter = 0;
  std::size_t intra_n = 0, inter_n = 0;
  for (auto ia = ref_by_family.begin(); ia != ref_by_family.end(); ++ia) {
    for (std::size_t i = 0; i < ia->second.size(); ++i) {
      for (std::size_t j = i + 1; j < ia->second.size(); ++j) {
        intra += (ia->second[i] - ia->second[j]).norm();
        ++intra_n;
      }
      for (auto ib = std::next(ia); ib != ref_by_family.end(); ++ib)
        for (const auto& other : ib->second) {
          inter += (ia->second[i] - other).norm();
          ++inter_n;
        }
    }
  }
  if (intra_n > 0 && inter_n > 0) {
    intra /= static_cast<double>(intra_n);
    inter /= static_cast<double>(inter_n);
    report.silhouette_like_margin = (inter - intra) / std::max({inter, intra, 1e-12});
  }
  return report;
}

}  // namespace sttts

#endif  // STTTS_EVAL_HPP_
