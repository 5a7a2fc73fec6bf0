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

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "sttts/checkpoint.hpp"
#include "sttts/config.hpp"
#include "sttts/corpus.hpp"
#include "sttts/eval.hpp"
#include "sttts/inference.hpp"
#include "sttts/io.hpp"
#include "sttts/model.hpp"
#include "sttts/trainer.hpp"

namespace fs = std::filesystem;
using namespace sttts;

namespace {

void retokenize(std::vector<Utterance>& utts, const Vocabulary& vocab) {
  for (Utterance& u : utts) u.tokens = tokenize(u.text, vocab);
}

// train split = leading (1 - fraction) of the corpus, eval split = the rest
std::pair<std::vector<Utterance>, std::vector<Utterance>> split_corpus(
    const std::vector<Utterance>& all, double fraction) {
  const std::size_t n_eval = static_cast<std::size_t>(fraction * static_cast<double>(all.size()));
  const std::size_t n_train = all.size() - n_eval;
  return {std::vector<Utterance>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<Utterance>(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end())};
}

std::shared_ptr<const TagEmbeddingProvider> make_file_provider(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<FileTagProvider>(path);
}

// dispatches on the precision recorded in the checkpoint
template <typename F>
void with_checkpoint(const std::string& path, const std::string& tag_embeddings, F&& f) {
  const std::string precision = checkpoint_precision(path);
  if (precision == "double") {
    Model<double> model;
    const LoadedCheckpoint lc = load_checkpoint(path, model, make_file_provider(tag_embeddings));
    f(model, lc);
  } else {
    Model<float> model;
    const LoadedCheckpoint lc = load_checkpoint(path, model, make_file_provider(tag_embeddings));
    f(model, lc);
  }
}

struct TrainArgs {
  std::string corpus_dir;
  std::string config_file;
  std::string checkpoint;  // resume source
  std::string out;
  std::string metrics;
  std::string tag_embeddings;
  std::uint64_t seed = 0;
  int max_steps = -1;
  int threads = 0;
  int batch_size = 0;
  double holdout_fraction = -1.0;
  std::string precision;
  bool seed_given = false;
};

template <typename S>
void run_train(const TrainArgs& args, ModelConfig cfg, const GeneratedCorpus& corpus) {
  Model<S> model;
  int start_step = 0;
  if (!args.checkpoint.empty()) {
    const LoadedCheckpoint lc =
        load_checkpoint(args.checkpoint, model, make_file_provider(args.tag_embeddings));
    check(model.vocab.tokens == corpus.vocab.tokens,
          "train: corpus vocabulary differs from the checkpoint vocabulary");
    start_step = lc.step;
    model.cfg.max_steps = cfg.max_steps;
    model.cfg.threads = cfg.threads;
    model.cfg.log_interval = cfg.log_interval;
    model.cfg.checkpoint_interval = cfg.checkpoint_interval;
  } else {
    model = Model<S>::create(cfg, corpus.vocab, corpus.families,
                             make_file_provider(args.tag_embeddings));
  }

  auto [train_set, eval_set] = split_corpus(corpus.utterances, model.cfg.holdout_fraction);
  check(!train_set.empty(), "train: empty training split");
  (void)eval_set;

  Trainer<S> trainer(model, train_set);
  trainer.set_step(start_step);

  const std::string metrics_path = args.metrics.empty() ? args.out + ".metrics.csv" : args.metrics;
  std::ofstream metrics(metrics_path,
                        start_step > 0 ? std::ios::app : std::ios::trunc);
  check(metrics.good(), "train: cannot open metrics file " + metrics_path);

  trainer.train(&metrics, [&](int step) { save_checkpoint(args.out, model, step); });
  std::cout << "trained to step " << trainer.step() << ", checkpoint: " << args.out << "\n";
}

void cmd_train(const TrainArgs& args) {
  const GeneratedCorpus corpus = load_corpus_dir(args.corpus_dir);
  check(!corpus.utterances.empty(), "train: corpus is empty");
  check(!corpus.families.empty() || !args.tag_embeddings.empty(),
        "train: families.tsv is required unless --tag-embeddings provides an external provider");

  ModelConfig cfg;
  if (!args.config_file.empty()) load_config_file(cfg, args.config_file);
  if (args.seed_given) cfg.seed = args.seed;
  if (args.max_steps >= 0) cfg.max_steps = args.max_steps;
  if (args.threads > 0) cfg.threads = args.threads;
  if (args.batch_size > 0) cfg.batch_size = args.batch_size;
  if (args.holdout_fraction >= 0) cfg.holdout_fraction = args.holdout_fraction;
  if (!args.precision.empty()) cfg.precision = args.precision;
  cfg.mel_dim = static_cast<int>(corpus.utterances[0].mel.cols());
  cfg.validate();

  if (cfg.precision == "double") run_train<double>(args, cfg, corpus);
  else run_train<float>(args, cfg, corpus);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sttts: style-tagged non-autoregressive text-to-mel, desk scale"};
  app.require_subcommand(1);

  // ---- gen-corpus ----
  auto* gen = app.add_subcommand("gen-corpus", "generate a deterministic synthetic corpus");
  CorpusSpec gspec;
  std::string gen_out;
  gen->add_option("--seed", gspec.seed, "corpus seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n-utterances", gspec.n_utterances, "utterance count");
  gen->add_option("--n-families", gspec.n_families, "tag family count");
  gen->add_option("--mel-dim", gspec.mel_dim, "mel bins");
  gen->add_option("--vocab-size", gspec.vocab_size, "vocabulary bound");
  gen->add_option("--base-duration", gspec.token_base_duration, "frames per token at rate 1");
  gen->add_option("--noise-sigma", gspec.noise_sigma, "mel noise stddev");
  gen->add_option("--min-tokens", gspec.min_tokens, "minimum tokens per utterance");
  gen->add_option("--max-tokens", gspec.max_tokens, "maximum tokens per utterance");
  gen->callback([&] {
    save_corpus(gen_out, generate_corpus(gspec));
    std::cout << "wrote corpus to " << gen_out << "\n";
  });

  // ---- train ----
  auto* train = app.add_subcommand("train", "single-stage joint training");
  TrainArgs targs;
  train->add_option("--corpus-dir", targs.corpus_dir, "corpus directory")->required();
  train->add_option("--config", targs.config_file, "key = value config file");
  train->add_option("--checkpoint", targs.checkpoint, "resume from this checkpoint");
  train->add_option("--out", targs.out, "checkpoint output path")->required();
  train->add_option("--metrics", targs.metrics, "metrics csv path (default <out>.metrics.csv)");
  train->add_option("--tag-embeddings", targs.tag_embeddings,
                    "external tag embedding table (tsv) instead of the synthetic provider");
  auto* seed_opt = train->add_option("--seed", targs.seed, "model seed");
  train->add_option("--max-steps", targs.max_steps, "total training steps");
  train->add_option("--threads", targs.threads, "batch worker threads");
  train->add_option("--batch-size", targs.batch_size, "utterances per step");
  train->add_option("--holdout-fraction", targs.holdout_fraction,
                    "trailing fraction excluded from training");
  train->add_option("--precision", targs.precision, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
  train->callback([&] {
    targs.seed_given = seed_opt->count() > 0;
    cmd_train(targs);
  });

  // ---- synthesize ----
  auto* synth = app.add_subcommand("synthesize", "text + style -> log-mel");
  std::string s_ckpt, s_text, s_tag, s_ref, s_out, s_requests, s_out_dir, s_tag_emb;
  synth->add_option("--checkpoint", s_ckpt, "trained checkpoint")->required();
  synth->add_option("--text", s_text, "input text");
  synth->add_option("--tag", s_tag, "style tag");
  synth->add_option("--ref-mel", s_ref, "reference mel file");
  synth->add_option("--out", s_out, "output mel path");
  synth->add_option("--requests", s_requests, "batch request tsv: id<TAB>text<TAB>tag|@mel");
  synth->add_option("--out-dir", s_out_dir, "batch output directory");
  synth->add_option("--tag-embeddings", s_tag_emb, "external tag embedding table (tsv)");
  synth->callback([&] {
    with_checkpoint(s_ckpt, s_tag_emb, [&](auto& model, const LoadedCheckpoint&) {
      if (!s_requests.empty()) {
        check(!s_out_dir.empty(), "synthesize: --requests needs --out-dir");
        const auto manifest = batch_synthesize(model, load_requests(s_requests), s_out_dir);
        std::size_t ok = 0;
        for (const auto& row : manifest) ok += row.ok ? 1 : 0;
        std::cout << "synthesized " << ok << "/" << manifest.size() << " requests into "
                  << s_out_dir << "\n";
        return;
      }
      check(!s_out.empty(), "synthesize: --out is required in single mode");
      SynthesisRequest req;
      req.text = s_text;
      req.tag = s_tag;
      req.ref_mel_path = s_ref;
      const Matrix<float> mel = synthesize(model, req);
      write_mel(s_out, mel);
      std::cout << "wrote " << mel.rows() << "x" << mel.cols() << " mel to " << s_out << "\n";
    });
  });

  // ---- align ----
  auto* align = app.add_subcommand("align", "extract aligner durations for a corpus");
  std::string a_ckpt, a_corpus, a_out, a_tag_emb;
  align->add_option("--checkpoint", a_ckpt, "trained checkpoint")->required();
  align->add_option("--corpus-dir", a_corpus, "corpus directory")->required();
  align->add_option("--out", a_out, "output tsv: id<TAB>d_1,d_2,...")->required();
  align->add_option("--tag-embeddings", a_tag_emb, "external tag embedding table (tsv)");
  align->callback([&] {
    with_checkpoint(a_ckpt, a_tag_emb, [&](auto& model, const LoadedCheckpoint&) {
      GeneratedCorpus corpus = load_corpus_dir(a_corpus);
      retokenize(corpus.utterances, model.vocab);
      std::string body;
      for (const Utterance& u : corpus.utterances) {
        const std::vector<int> durs = model.align_durations(u);
        body += u.id + "\t";
        for (std::size_t i = 0; i < durs.size(); ++i)
          body += (i ? "," : "") + std::to_string(durs[i]);
        body += "\n";
      }
      write_text(a_out, body);
      std::cout << "wrote durations for " << corpus.utterances.size() << " utterances to "
                << a_out << "\n";
    });
  });

  // ---- embed ----
  auto* embed = app.add_subcommand("embed", "export style embeddings as csv");
  std::string e_ckpt, e_tags, e_mel_dir, e_out, e_tag_emb;
  embed->add_option("--checkpoint", e_ckpt, "trained checkpoint")->required();
  embed->add_option("--tags-file", e_tags, "one style tag per line");
  embed->add_option("--mel-dir", e_mel_dir, "directory of .mel reference files");
  embed->add_option("--out", e_out, "output csv")->required();
  embed->add_option("--tag-embeddings", e_tag_emb, "external tag embedding table (tsv)");
  embed->callback([&] {
    check(!e_tags.empty() || !e_mel_dir.empty(),
          "embed: need --tags-file and/or --mel-dir");
    with_checkpoint(e_ckpt, e_tag_emb, [&](auto& model, const LoadedCheckpoint&) {
      std::vector<EmbeddingRow> rows;
      if (!e_tags.empty()) {
        std::vector<std::string> tags;
        for (const std::string& line : read_lines(e_tags))
          if (!line.empty()) tags.push_back(line);
        const auto tag_rows = tag_embedding_rows(model, tags);
        rows.insert(rows.end(), tag_rows.begin(), tag_rows.end());
      }
      if (!e_mel_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(e_mel_dir))
          if (entry.path().extension() == ".mel") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::vector<Utterance> utts;
        for (const fs::path& p : files) {
          Utterance u;
          u.id = p.stem().string();
          u.mel = read_mel<float>(p);
          utts.push_back(std::move(u));
        }
        const auto ref_rows = reference_embedding_rows(model, utts);
        rows.insert(rows.end(), ref_rows.begin(), ref_rows.end());
      }
      write_text(e_out, embeddings_to_csv(rows));
      std::cout << "wrote " << rows.size() << " embedding rows to " << e_out << "\n";
    });
  });

  // ---- project ----
  auto* project = app.add_subcommand("project", "PCA-project an embeddings csv to 2D");
  std::string p_in, p_out;
  project->add_option("--embeddings", p_in, "embeddings csv from `embed`")->required();
  project->add_option("--out", p_out, "output csv: label,source,x,y")->required();
  project->callback([&] {
    const auto rows = embeddings_from_csv(p_in);
    write_text(p_out, projected_to_csv(project_embeddings(rows)));
    std::cout << "projected " << rows.size() << " rows to " << p_out << "\n";
  });

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "objective evaluation report");
  std::string v_ckpt, v_corpus, v_out, v_tag_emb;
  double v_holdout = 0.1;
  eval_cmd->add_option("--checkpoint", v_ckpt, "trained checkpoint")->required();
  eval_cmd->add_option("--corpus-dir", v_corpus, "corpus directory")->required();
  eval_cmd->add_option("--holdout-fraction", v_holdout, "trailing fraction used for eval");
  eval_cmd->add_option("--out", v_out, "also write the report to this file");
  eval_cmd->add_option("--tag-embeddings", v_tag_emb, "external tag embedding table (tsv)");
  eval_cmd->callback([&] {
    with_checkpoint(v_ckpt, v_tag_emb, [&](auto& model, const LoadedCheckpoint&) {
      GeneratedCorpus corpus = load_corpus_dir(v_corpus);
      retokenize(corpus.utterances, model.vocab);
      auto [train_set, eval_set] = split_corpus(corpus.utterances, v_holdout);
      (void)train_set;
      const EvalReport report = evaluate(model, eval_set, model.families);
      const std::string text = eval_report_text(report);
      std::cout << text;
      if (!v_out.empty()) write_text(v_out, text);
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "sttts: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
