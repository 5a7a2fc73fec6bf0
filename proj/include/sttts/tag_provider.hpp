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

#ifndef STTTS_TAG_PROVIDER_HPP_
#define STTTS_TAG_PROVIDER_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sttts/core.hpp"
#include "sttts/corpus.hpp"
#include "sttts/io.hpp"

namespace sttts {

// Provider output space; float32 is the adapter contract.
struct TagVector {
  Vector<float> values;
};

// Frozen sentence-embedding provider. Implementations never see gradients;
// the adaptation layers downstream absorb whatever space this emits.
class TagEmbeddingProvider {
 public:
  virtual ~TagEmbeddingProvider() = default;
  virtual TagVector embed_tag(const std::string& tag) const = 0;
  virtual int dim() const = 0;
};

struct ProviderSpec {
  int lm_dim = 32;
  double centroid_scale = 10.0;
  double within_family_jitter = 0.1;
  std::uint64_t seed = 1;
};

// Deterministic stand-in for a pretrained sentence embedder: each tag family
// owns a centroid, every known surface form (and each of its enumerable
// augmentations) lands within a jitter ball around it.
class SyntheticTagProvider : public TagEmbeddingProvider {
 public:
  SyntheticTagProvider(const ProviderSpec& spec, const std::vector<TagFamily>& families,
                       const AugmentRuleTable& rules = AugmentRuleTable{})
      : spec_(spec) {
    check(spec.lm_dim >= 1, "SyntheticTagProvider: lm_dim must be >= 1");
    check(spec.within_family_jitter >= 0.0, "SyntheticTagProvider: jitter must be >= 0");
    centroids_.resize(static_cast<Eigen::Index>(families.size()), spec.lm_dim);
    for (std::size_t f = 0; f < families.size(); ++f) {
      Rng rng(hash_combine(hash_combine(spec.seed, "centroid"),
                           static_cast<std::uint64_t>(families[f].family_id)));
      Vector<double> dir(spec.lm_dim);
      for (int d = 0; d < spec.lm_dim; ++d) dir(d) = rng.normal();
      dir.normalize();
      centroids_.row(static_cast<Eigen::Index>(f)) =
          (dir * spec.centroid_scale).transpose().cast<float>();
      family_ids_.push_back(families[f].family_id);
      for (const std::string& form : families[f].all_forms())
        for (const std::string& variant : enumerate_augmentations(form, rules)) {
          const auto [it, inserted] = family_of_.emplace(variant, families[f].family_id);
          check(inserted || it->second == families[f].family_id,
                "SyntheticTagProvider: tag '" + variant + "' maps to two families");
        }
    }
    // jitter balls must be well separated or family identity is lost
    for (Eigen::Index i = 0; i < centroids_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < centroids_.rows(); ++j) {
        const double gap = (centroids_.row(i) - centroids_.row(j)).norm();
        check(gap > 4.0 * spec.within_family_jitter,
              "SyntheticTagProvider: centroid gap " + format_double(gap) +
                  " violates gap > 4*jitter");
      }
  }

  TagVector embed_tag(const std::string& tag) const override {
    const int fid = family_of(tag);
    Eigen::Index row = 0;
    for (; row < static_cast<Eigen::Index>(family_ids_.size()); ++row)
      if (family_ids_[static_cast<std::size_t>(row)] == fid) break;
    Rng rng(fnv1a64(tag));
    Vector<double> dir(spec_.lm_dim);
    for (int d = 0; d < spec_.lm_dim; ++d) dir(d) = rng.normal();
    dir.normalize();
    const double radius = spec_.within_family_jitter * rng.uniform();
    TagVector out;
    out.values = centroids_.row(row).transpose() + (dir * radius).cast<float>();
    return out;
  }

  int dim() const override { return spec_.lm_dim; }

  int family_of(const std::string& tag) const {
    const auto it = family_of_.find(tag);
    check(it != family_of_.end(), "SyntheticTagProvider: unknown tag '" + tag + "'");
    return it->second;
  }

  // argmin centroid distance, ties broken by lowest family id
  int nearest_family(const TagVector& v) const {
    check(v.values.size() == spec_.lm_dim, "nearest_family: dimension mismatch");
    int best = -1;
    double best_d = 0;
    for (Eigen::Index r = 0; r < centroids_.rows(); ++r) {
      const double d = (centroids_.row(r).transpose() - v.values).norm();
      const int fid = family_ids_[static_cast<std::size_t>(r)];
      if (best < 0 || d < best_d || (d == best_d && fid < best)) {
        best = fid;
        best_d = d;
      }
    }
    check(best >= 0, "nearest_family: provider has no families");
    return best;
  }

  const Matrix<float>& centroids() const { return centroids_; }
  const ProviderSpec& spec() const { return spec_; }

 private:
  ProviderSpec spec_;
  Matrix<float> centroids_;  // one row per family
  std::vector<int> family_ids_;
  std::unordered_map<std::string, int> family_of_;
};

// File-backed adapter for real pretrained embedders: a TSV of
// tag<TAB>v1,v2,...  precomputed offline. Missing file or tag is an error;
// there is no fallback.
class FileTagProvider : public TagEmbeddingProvider {
 public:
  explicit FileTagProvider(const std::filesystem::path& path) {
    check(std::filesystem::exists(path),
          "FileTagProvider: embedding table not found: " + path.string());
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto fields = split(lines[i], '\t');
      check(fields.size() == 2,
            "FileTagProvider: line " + std::to_string(i + 1) + " must be tag<TAB>values");
      const auto parts = split(fields[1], ',');
      Vector<float> v(static_cast<Eigen::Index>(parts.size()));
      for (std::size_t j = 0; j < parts.size(); ++j)
        v(static_cast<Eigen::Index>(j)) = static_cast<float>(parse_double(parts[j], "embedding"));
      if (dim_ == 0) dim_ = static_cast<int>(v.size());
      check(static_cast<int>(v.size()) == dim_,
            "FileTagProvider: inconsistent embedding width at line " + std::to_string(i + 1));
      table_[fields[0]] = std::move(v);
    }
    check(dim_ > 0, "FileTagProvider: empty embedding table " + path.string());
  }

  TagVector embed_tag(const std::string& tag) const override {
    const auto it = table_.find(tag);
    check(it != table_.end(), "FileTagProvider: no embedding for tag '" + tag + "'");
    return TagVector{it->second};
  }

  int dim() const override { return dim_; }

 private:
  std::unordered_map<std::string, Vector<float>> table_;
  int dim_ = 0;
};

}  // namespace sttts

#endif  // STTTS_TAG_PROVIDER_HPP_
