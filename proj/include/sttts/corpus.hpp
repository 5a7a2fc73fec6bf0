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

#ifndef STTTS_CORPUS_HPP_
#define STTTS_CORPUS_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sttts/core.hpp"
#include "sttts/io.hpp"

namespace sttts {

struct Utterance {
  std::string id;
  std::string text;
  TokenSequence tokens;
  std::string style_tag;
  Matrix<float> mel;                // T x D log-mel
  std::vector<int> true_durations;  // synthetic corpora only; empty when unknown
  int family = -1;                  // synthetic corpora only; -1 when unknown
};

struct TagFamily {
  int family_id = 0;
  std::vector<std::string> surface_forms;   // used for training utterances
  std::vector<std::string> heldout_forms;   // never sampled; for generalization tests
  double rate = 1.0;  // stretches per-token duration
  double gain = 1.0;  // scales the token pattern
  double tilt = 0.0;  // adds tilt * linear ramp over mel bins

  std::vector<std::string> all_forms() const {
    std::vector<std::string> out = surface_forms;
    out.insert(out.end(), heldout_forms.begin(), heldout_forms.end());
    return out;
  }
};

struct CorpusSpec {
  std::uint64_t seed = 1;
  int vocab_size = 28;  // alphabet + space + UNK
  int mel_dim = 20;
  int n_families = 20;
  int n_utterances = 500;
  int token_base_duration = 4;
  double noise_sigma = 0.01;
  int min_tokens = 4;
  int max_tokens = 12;
  int forms_per_family = 3;
  int heldout_per_family = 1;

  void validate() const {
    check(vocab_size >= 4, "CorpusSpec: vocab_size must be >= 4");
    check(mel_dim >= 1 && n_families >= 1 && n_utterances >= 1 && token_base_duration >= 1,
          "CorpusSpec: counts must be >= 1");
    check(noise_sigma >= 0.0, "CorpusSpec: noise_sigma must be >= 0");
    check(min_tokens >= 1 && max_tokens >= min_tokens, "CorpusSpec: bad token length range");
    check(forms_per_family >= 1 && heldout_per_family >= 0, "CorpusSpec: bad form counts");
    check(forms_per_family + heldout_per_family <= 6,
          "CorpusSpec: at most 6 surface forms per family");
  }
};

// ---- tokenizer ----

inline std::vector<std::string> utf8_chars(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xe0) == 0xc0) len = 2;
    else if ((c & 0xf0) == 0xe0) len = 3;
    else if ((c & 0xf8) == 0xf0) len = 4;
    len = std::min(len, text.size() - i);
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

struct Vocabulary {
  std::vector<std::string> tokens;  // id -> character; tokens.back() is UNK
  std::unordered_map<std::string, int> to_id;
  int unk_id = 0;

  int size() const { return static_cast<int>(tokens.size()); }

  static Vocabulary build(const std::vector<std::string>& texts) {
    std::set<std::string> chars;
    for (const std::string& t : texts)
      for (const std::string& c : utf8_chars(t)) chars.insert(c);
    Vocabulary v;
    for (const std::string& c : chars) {
      v.to_id[c] = static_cast<int>(v.tokens.size());
      v.tokens.push_back(c);
    }
    v.unk_id = static_cast<int>(v.tokens.size());
    v.tokens.push_back("<unk>");
    return v;
  }

  static Vocabulary from_tokens(std::vector<std::string> toks) {
    Vocabulary v;
    check(!toks.empty(), "Vocabulary: empty token list");
    v.tokens = std::move(toks);
    v.unk_id = static_cast<int>(v.tokens.size()) - 1;
    for (int i = 0; i < v.unk_id; ++i) v.to_id[v.tokens[i]] = i;
    return v;
  }
};

// one id per character; unknown characters map to UNK
inline TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
  check(!text.empty(), "tokenize: empty text");
  TokenSequence ids;
  for (const std::string& c : utf8_chars(text)) {
    const auto it = vocab.to_id.find(c);
    ids.push_back(it == vocab.to_id.end() ? vocab.unk_id : it->second);
  }
  return ids;
}

// ---- tag augmentation ----

// Stand-in rule table: the source dataset's rule set is only sketched
// ("switching adverbs and adjectives", "extending keywords to plausible
// phrase forms"), so this keeps the same shape with generic rules.
struct AugmentRuleTable {
  bool swap_two_token = true;
  std::vector<std::pair<std::string, std::string>> wraps = {{"in a ", " way"}};
};

inline std::vector<std::string> enumerate_augmentations(const std::string& tag,
                                                        const AugmentRuleTable& rules) {
  check(!tag.empty(), "enumerate_augmentations: empty tag");
  std::vector<std::string> out{tag};
  const std::vector<std::string> words = split(tag, ' ');
  if (rules.swap_two_token && words.size() == 2) out.push_back(words[1] + " " + words[0]);
  for (const auto& [prefix, suffix] : rules.wraps) out.push_back(prefix + tag + suffix);
  return out;
}

inline std::string augment_tag(const std::string& tag, const AugmentRuleTable& rules,
                               std::uint64_t seed) {
  const std::vector<std::string> variants = enumerate_augmentations(tag, rules);
  Rng rng(hash_combine(hash_combine(seed, "augment"), tag));
  return variants[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(variants.size())))];
}

// ---- synthetic generation ----

namespace detail {

inline std::string make_pseudoword(Rng& rng) {
  static const char consonants[] = "bdfgklmnprstvz";
  static const char vowels[] = "aeiou";
  const int syllables = 2 + static_cast<int>(rng.uniform_int(2));
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += consonants[rng.uniform_int(static_cast<std::int64_t>(sizeof(consonants) - 1))];
    w += vowels[rng.uniform_int(static_cast<std::int64_t>(sizeof(vowels) - 1))];
  }
  return w;
}

// Utterance texts are drawn from a shared pseudo-word pool, so held-out
// utterances recombine seen words instead of presenting never-seen character
// soup.
inline std::vector<std::string> make_word_pool(std::uint64_t seed, int n_letters, int n_words) {
  std::vector<std::string> pool;
  std::unordered_set<std::string> used;
  Rng rng(hash_combine(seed, "word_pool"));
  while (static_cast<int>(pool.size()) < n_words) {
    const int len = 2 + static_cast<int>(rng.uniform_int(4));
    std::string w;
    for (int i = 0; i < len; ++i)
      w += static_cast<char>('a' + rng.uniform_int(n_letters));
    if (used.insert(w).second) pool.push_back(std::move(w));
  }
  return pool;
}

inline const std::vector<std::string>& form_suffixes() {
  static const std::vector<std::string> s = {"", " voice", " tone", " sound", " mood", " manner"};
  return s;
}

}  // namespace detail

// Fixed per-token mel pattern; the generated corpus and the oracle decoder in
// the tests both rely on this exact function.
inline Vector<double> token_pattern(std::uint64_t seed, int token_id, int mel_dim) {
  Rng rng(hash_combine(hash_combine(seed, "pattern"), static_cast<std::uint64_t>(token_id)));
  Vector<double> p(mel_dim);
  for (int d = 0; d < mel_dim; ++d) p(d) = rng.uniform(-2.0, 2.0);
  return p;
}

inline Vector<double> mel_ramp(int mel_dim) {
  Vector<double> r(mel_dim);
  for (int d = 0; d < mel_dim; ++d)
    r(d) = mel_dim == 1 ? 0.0 : 2.0 * d / (mel_dim - 1) - 1.0;
  return r;
}

inline int synthetic_token_duration(int base_duration, double rate) {
  return std::max(1, static_cast<int>(std::llround(base_duration * rate)));
}

struct GeneratedCorpus {
  std::vector<Utterance> utterances;
  std::vector<TagFamily> families;
  Vocabulary vocab;
};

inline GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  GeneratedCorpus out;

  // families: rates evenly spaced over [0.5, 2.0] so duration ordering by
  // rate is testable; gain/tilt drawn per family
  std::unordered_set<std::string> used_words;
  for (int f = 0; f < spec.n_families; ++f) {
    TagFamily fam;
    fam.family_id = f;
    fam.rate = spec.n_families == 1
                   ? 1.0
                   : 0.5 + 1.5 * static_cast<double>(f) / (spec.n_families - 1);
    Rng rng(hash_combine(hash_combine(spec.seed, "family"), static_cast<std::uint64_t>(f)));
    fam.gain = rng.uniform(0.5, 2.0);
    fam.tilt = rng.uniform(-0.5, 0.5);
    std::string base;
    for (int attempt = 0;; ++attempt) {
      check(attempt < 1000, "generate_corpus: could not draw a unique family word");
      base = detail::make_pseudoword(rng);
      if (used_words.insert(base).second) break;
    }
    const auto& suffixes = detail::form_suffixes();
    for (int i = 0; i < spec.forms_per_family; ++i) fam.surface_forms.push_back(base + suffixes[i]);
    for (int i = 0; i < spec.heldout_per_family; ++i)
      fam.heldout_forms.push_back(base + suffixes[spec.forms_per_family + i]);
    out.families.push_back(std::move(fam));
  }

  const int n_letters = std::min(26, spec.vocab_size - 2);
  const Vector<double> ramp = mel_ramp(spec.mel_dim);
  const std::vector<std::string> word_pool = detail::make_word_pool(spec.seed, n_letters, 60);

  std::vector<std::string> texts;
  for (int u = 0; u < spec.n_utterances; ++u) {
    Rng rng(hash_combine(hash_combine(spec.seed, "utt"), static_cast<std::uint64_t>(u)));
    Utterance utt;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "utt%05d", u);
    utt.id = idbuf;
    utt.family = u % spec.n_families;
    const TagFamily& fam = out.families[utt.family];
    utt.style_tag = fam.surface_forms[static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(fam.surface_forms.size())))];

    // token count includes separating spaces; overshooting words are sliced
    const int n_tokens =
        spec.min_tokens + static_cast<int>(rng.uniform_int(spec.max_tokens - spec.min_tokens + 1));
    std::string text;
    while (static_cast<int>(text.size()) < n_tokens) {
      std::string w = word_pool[static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(word_pool.size())))];
      if (!text.empty()) {
        if (static_cast<int>(text.size()) + 1 >= n_tokens) {
          w = w.substr(0, 1);  // no room for a space; top up with one letter
          text += w;
          break;
        }
        text += ' ';
      }
      const int room = n_tokens - static_cast<int>(text.size());
      text += w.substr(0, static_cast<std::size_t>(room));
    }
    utt.text = text;
    texts.push_back(text);

    const int d = synthetic_token_duration(spec.token_base_duration, fam.rate);
    utt.true_durations.assign(static_cast<std::size_t>(n_tokens), d);
    utt.mel.resize(static_cast<Eigen::Index>(n_tokens) * d, spec.mel_dim);
    out.utterances.push_back(std::move(utt));
  }

  out.vocab = Vocabulary::build(texts);
  check(out.vocab.size() <= spec.vocab_size, "generate_corpus: vocabulary exceeds vocab_size");

  for (Utterance& utt : out.utterances) {
    utt.tokens = tokenize(utt.text, out.vocab);
    const TagFamily& fam = out.families[utt.family];
    Rng noise(hash_combine(hash_combine(spec.seed, "mel"), utt.id));
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < utt.tokens.size(); ++k) {
      const Vector<double> p = token_pattern(spec.seed, utt.tokens[k], spec.mel_dim);
      for (int j = 0; j < utt.true_durations[k]; ++j, ++row) {
        for (int dd = 0; dd < spec.mel_dim; ++dd) {
          const double v = fam.gain * p(dd) + fam.tilt * ramp(dd) +
                           (spec.noise_sigma > 0.0 ? spec.noise_sigma * noise.normal() : 0.0);
          utt.mel(row, dd) = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

// ---- on-disk corpus ----
//
// layout: metadata.tsv (id<TAB>text<TAB>style_tag), mels/<id>.mel (MEL1),
// families.tsv, durations.tsv (synthetic ground truth, align-output format)

inline void save_families(const std::filesystem::path& path,
                          const std::vector<TagFamily>& families) {
  std::string body;
  auto join_bar = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += '|';
      s += v[i];
    }
    return s;
  };
  for (const TagFamily& f : families) {
    body += std::to_string(f.family_id) + "\t" + format_double(f.rate) + "\t" +
            format_double(f.gain) + "\t" + format_double(f.tilt) + "\t" +
            join_bar(f.surface_forms) + "\t" + join_bar(f.heldout_forms) + "\n";
  }
  write_text(path, body);
}

inline std::vector<TagFamily> load_families(const std::filesystem::path& path) {
  std::vector<TagFamily> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    check(fields.size() == 6,
          "load_families: line " + std::to_string(i + 1) + " must have 6 fields");
    TagFamily f;
    f.family_id = static_cast<int>(parse_int(fields[0], "family_id"));
    f.rate = parse_double(fields[1], "rate");
    f.gain = parse_double(fields[2], "gain");
    f.tilt = parse_double(fields[3], "tilt");
    f.surface_forms = split(fields[4], '|');
    if (!fields[5].empty()) f.heldout_forms = split(fields[5], '|');
    check(!f.surface_forms.empty() && !f.surface_forms[0].empty(),
          "load_families: family without surface forms at line " + std::to_string(i + 1));
    out.push_back(std::move(f));
  }
  return out;
}

inline void save_durations(const std::filesystem::path& path,
                           const std::vector<Utterance>& utterances) {
  std::string body;
  for (const Utterance& u : utterances) {
    if (u.true_durations.empty()) continue;
    body += u.id + "\t";
    for (std::size_t i = 0; i < u.true_durations.size(); ++i) {
      if (i) body += ',';
      body += std::to_string(u.true_durations[i]);
    }
    body += "\n";
  }
  write_text(path, body);
}

inline std::unordered_map<std::string, std::vector<int>> load_durations(
    const std::filesystem::path& path) {
  std::unordered_map<std::string, std::vector<int>> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    check(fields.size() == 2, "load_durations: line " + std::to_string(i + 1) + " malformed");
    std::vector<int> d;
    for (const std::string& part : split(fields[1], ','))
      d.push_back(static_cast<int>(parse_int(part, "duration")));
    out[fields[0]] = std::move(d);
  }
  return out;
}

inline void save_corpus(const std::filesystem::path& dir, const GeneratedCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "mels");
  std::string meta;
  for (const Utterance& u : corpus.utterances) {
    meta += u.id + "\t" + u.text + "\t" + u.style_tag + "\n";
    write_mel(dir / "mels" / (u.id + ".mel"), u.mel);
  }
  write_text(dir / "metadata.tsv", meta);
  save_families(dir / "families.tsv", corpus.families);
  save_durations(dir / "durations.tsv", corpus.utterances);
}

struct LoadedCorpus {
  std::vector<Utterance> utterances;
  Vocabulary vocab;
};

// metadata.tsv format: id<TAB>text<TAB>style_tag, UTF-8, no header
inline LoadedCorpus load_corpus(const std::filesystem::path& metadata_path,
                                const std::filesystem::path& mel_dir) {
  LoadedCorpus out;
  const auto lines = read_lines(metadata_path);
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    check(fields.size() == 3, "load_corpus: line " + std::to_string(i + 1) + " of " +
                                  metadata_path.string() + " must have 3 tab-separated fields");
    Utterance u;
    u.id = fields[0];
    u.text = fields[1];
    u.style_tag = fields[2];
    check(!u.id.empty() && !u.text.empty() && !u.style_tag.empty(),
          "load_corpus: empty field at line " + std::to_string(i + 1));
    u.mel = read_mel<float>(mel_dir / (u.id + ".mel"));
    texts.push_back(u.text);
    out.utterances.push_back(std::move(u));
  }
  out.vocab = Vocabulary::build(texts);
  for (Utterance& u : out.utterances) u.tokens = tokenize(u.text, out.vocab);
  return out;
}

// Loads a corpus directory produced by save_corpus, including synthetic
// ground truth when present.
inline GeneratedCorpus load_corpus_dir(const std::filesystem::path& dir) {
  GeneratedCorpus out;
  LoadedCorpus loaded = load_corpus(dir / "metadata.tsv", dir / "mels");
  out.utterances = std::move(loaded.utterances);
  out.vocab = std::move(loaded.vocab);
  if (std::filesystem::exists(dir / "families.tsv"))
    out.families = load_families(dir / "families.tsv");
  std::unordered_map<std::string, int> family_of_tag;
  for (const TagFamily& f : out.families)
    for (const std::string& s : f.surface_forms) family_of_tag[s] = f.family_id;
  if (std::filesystem::exists(dir / "durations.tsv")) {
    auto durs = load_durations(dir / "durations.tsv");
    for (Utterance& u : out.utterances) {
      const auto it = durs.find(u.id);
      if (it != durs.end()) u.true_durations = it->second;
    }
  }
  for (Utterance& u : out.utterances) {
    const auto it = family_of_tag.find(u.style_tag);
    if (it != family_of_tag.end()) u.family = it->second;
  }
  return out;
}

}  // namespace sttts

#endif  // STTTS_CORPUS_HPP_
