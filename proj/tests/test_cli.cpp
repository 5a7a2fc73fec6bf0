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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sttts/corpus.hpp"
#include "sttts/io.hpp"

using namespace sttts;
namespace fs = std::filesystem;

#ifndef STTTS_CLI_PATH
#error "STTTS_CLI_PATH must point at the built binary"
#endif

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(STTTS_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "sttts_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

const std::string kTinyCfg =
    "hidden = 12\nstyle_dim = 12\nlm_dim = 12\nadapt_hidden = 12\n"
    "text_blocks = 2\ndur_blocks = 2\ndec_blocks = 2\nref_channels = 4,4\n"
    "flow_blocks = 2\nflow_hidden = 8\nmax_steps = 8\nbatch_size = 4\n"
    "warmup_steps = 4\nlog_interval = 2\nthreads = 2\n";

// shared across cases: corpus + a briefly trained checkpoint
struct CliFixture {
  fs::path dir = work_dir();
  fs::path corpus = dir / "corpus";
  fs::path ckpt = dir / "model.ckpt";

  CliFixture() {
    REQUIRE(run_cli("gen-corpus --seed 1 --out " + corpus.string() +
                        " --n-utterances 16 --n-families 3 --mel-dim 6",
                    dir / "gen.log") == 0);
    write_text(dir / "tiny.cfg", kTinyCfg);
    REQUIRE(run_cli("train --corpus-dir " + corpus.string() + " --config " +
                        (dir / "tiny.cfg").string() + " --seed 3 --out " + ckpt.string(),
                    dir / "train.log") == 0);
  }
};

CliFixture& cli() {
  static CliFixture f;
  return f;
}

std::string first_training_tag(const fs::path& corpus) {
  const auto fams = load_families(corpus / "families.tsv");
  return fams.at(0).surface_forms.at(0);
}

}  // namespace

TEST_CASE("gen-corpus is reproducible across invocations") {
  auto& f = cli();
  const fs::path again = f.dir / "corpus_again";
  REQUIRE(run_cli("gen-corpus --seed 1 --out " + again.string() +
                      " --n-utterances 16 --n-families 3 --mel-dim 6",
                  f.dir / "gen2.log") == 0);
  CHECK(slurp(f.corpus / "metadata.tsv") == slurp(again / "metadata.tsv"));
  CHECK(slurp(f.corpus / "families.tsv") == slurp(again / "families.tsv"));
  CHECK(slurp(f.corpus / "durations.tsv") == slurp(again / "durations.tsv"));
  for (const auto& entry : fs::directory_iterator(f.corpus / "mels")) {
    const std::string name = entry.path().filename().string();
    CHECK(slurp(entry.path()) == slurp(again / "mels" / name));
  }
}

TEST_CASE("train with zero steps checkpoints the initialization") {
  auto& f = cli();
  const fs::path ckpt0a = f.dir / "init_a.ckpt";
  const fs::path ckpt0b = f.dir / "init_b.ckpt";
  const std::string base = "train --corpus-dir " + f.corpus.string() + " --config " +
                           (f.dir / "tiny.cfg").string() + " --seed 3 --max-steps 0 --out ";
  REQUIRE(run_cli(base + ckpt0a.string(), f.dir / "t0a.log") == 0);
  REQUIRE(run_cli(base + ckpt0b.string(), f.dir / "t0b.log") == 0);
  const std::string a = slurp(ckpt0a), b = slurp(ckpt0b);
  CHECK(!a.empty());
  CHECK(a == b);
  // and it differs from the trained checkpoint
  CHECK(a != slurp(f.ckpt));
}

TEST_CASE("synthesize writes a MEL1 file from a tag") {
  auto& f = cli();
  const fs::path out = f.dir / "synth.mel";
  REQUIRE(run_cli("synthesize --checkpoint " + f.ckpt.string() + " --text \"hello there\" --tag \"" +
                      first_training_tag(f.corpus) + "\" --out " + out.string(),
                  f.dir / "synth.log") == 0);
  const Matrix<float> mel = read_mel<float>(out);
  CHECK(mel.rows() >= 11);  // at least one frame per character
  CHECK(mel.cols() == 6);
}

TEST_CASE("synthesize with an unknown flag fails with a usage error") {
  auto& f = cli();
  CHECK(run_cli("synthesize --definitely-not-a-flag 1", f.dir / "badflag.log") != 0);
  CHECK(run_cli("synthesize --checkpoint " + (f.dir / "missing.ckpt").string() +
                    " --text hi --tag x --out " + (f.dir / "x.mel").string(),
                f.dir / "missingckpt.log") != 0);
}

TEST_CASE("align emits one duration row per utterance and fails cleanly on T < N") {
  auto& f = cli();
  const fs::path out = f.dir / "aligned.tsv";
  REQUIRE(run_cli("align --checkpoint " + f.ckpt.string() + " --corpus-dir " + f.corpus.string() +
                      " --out " + out.string(),
                  f.dir / "align.log") == 0);
  const auto lines = read_lines(out);
  CHECK(lines.size() == 16);
  for (const std::string& line : lines)
    if (!line.empty()) CHECK(split(line, '\t').size() == 2);

  // corpus with an utterance whose mel is shorter than its token count
  const fs::path bad = f.dir / "bad_corpus";
  fs::create_directories(bad / "mels");
  write_text(bad / "metadata.tsv", "u0\tabcdef\t" + first_training_tag(f.corpus) + "\n");
  write_mel(bad / "mels" / "u0.mel", Matrix<float>(Matrix<float>::Zero(3, 6)));
  const int rc = run_cli("align --checkpoint " + f.ckpt.string() + " --corpus-dir " +
                             bad.string() + " --out " + (f.dir / "bad.tsv").string(),
                         f.dir / "alignbad.log");
  CHECK(rc != 0);
  CHECK(slurp(f.dir / "alignbad.log").find("u0") != std::string::npos);
}

TEST_CASE("embed then project produce aligned csv rows") {
  auto& f = cli();
  const auto fams = load_families(f.corpus / "families.tsv");
  std::string tags;
  std::size_t n_tags = 0;
  for (const auto& fam : fams)
    for (const auto& form : fam.surface_forms) {
      tags += form + "\n";
      ++n_tags;
    }
  write_text(f.dir / "tags.txt", tags);
  const fs::path emb = f.dir / "emb.csv";
  REQUIRE(run_cli("embed --checkpoint " + f.ckpt.string() + " --tags-file " +
                      (f.dir / "tags.txt").string() + " --mel-dir " +
                      (f.corpus / "mels").string() + " --out " + emb.string(),
                  f.dir / "embed.log") == 0);
  const auto rows = read_lines(emb);
  std::size_t n_rows = 0;
  for (const auto& l : rows) n_rows += l.empty() ? 0 : 1;
  CHECK(n_rows == n_tags + 16);  // tag rows plus one per corpus mel

  const fs::path proj = f.dir / "proj.csv";
  REQUIRE(run_cli("project --embeddings " + emb.string() + " --out " + proj.string(),
                  f.dir / "project.log") == 0);
  const auto plines = read_lines(proj);
  std::size_t n_proj = 0;
  for (std::size_t i = 0; i < plines.size(); ++i) {
    if (plines[i].empty()) continue;
    ++n_proj;
    const auto fields = split(plines[i], ',');
    REQUIRE(fields.size() == 4);
    // order preserved: labels match the embed output line by line
    CHECK(fields[0] == split(rows[i], ',')[0]);
    CHECK(fields[1] == split(rows[i], ',')[1]);
  }
  CHECK(n_proj == n_rows);
}

TEST_CASE("eval prints a finite report") {
  auto& f = cli();
  const fs::path out = f.dir / "report.txt";
  REQUIRE(run_cli("eval --checkpoint " + f.ckpt.string() + " --corpus-dir " + f.corpus.string() +
                      " --holdout-fraction 0.25 --out " + out.string(),
                  f.dir / "eval.log") == 0);
  const std::string report = slurp(out);
  CHECK(report.find("mel_mae=") != std::string::npos);
  CHECK(report.find("tag_retrieval_acc=") != std::string::npos);
  CHECK(report.find("nan") == std::string::npos);
  CHECK(report.find("inf") == std::string::npos);
}

TEST_CASE("batch synthesize writes per-request outcomes") {
  auto& f = cli();
  const std::string tag = first_training_tag(f.corpus);
  write_text(f.dir / "requests.tsv",
             "r0\thello\t" + tag + "\nr1\tworld\tnot a known tag\nr2\tagain\t" + tag + "\n");
  const fs::path out_dir = f.dir / "batch_out";
  REQUIRE(run_cli("synthesize --checkpoint " + f.ckpt.string() + " --requests " +
                      (f.dir / "requests.tsv").string() + " --out-dir " + out_dir.string(),
                  f.dir / "batch.log") == 0);
  const auto manifest = read_lines(out_dir / "manifest.tsv");
  REQUIRE(manifest.size() == 3);
  CHECK(manifest[0].rfind("r0\tok", 0) == 0);
  CHECK(manifest[1].rfind("r1\terror", 0) == 0);
  CHECK(manifest[2].rfind("r2\tok", 0) == 0);
  CHECK(fs::exists(out_dir / "r0.mel"));
  CHECK(!fs::exists(out_dir / "r1.mel"));
}

TEST_CASE("training resumes from a checkpoint to the same trajectory") {
  auto& f = cli();
  // run A: 8 steps in one go (the fixture already did this: f.ckpt)
  // run B: 4 steps, then resume to 8
  const fs::path half = f.dir / "half.ckpt";
  const fs::path resumed = f.dir / "resumed.ckpt";
  const std::string common = "train --corpus-dir " + f.corpus.string() + " --config " +
                             (f.dir / "tiny.cfg").string() + " --seed 3 ";
  REQUIRE(run_cli(common + "--max-steps 4 --out " + half.string(), f.dir / "half.log") == 0);
  REQUIRE(run_cli(common + "--checkpoint " + half.string() + " --max-steps 8 --out " +
                      resumed.string(),
                  f.dir / "resume.log") == 0);
  CHECK(slurp(resumed) == slurp(f.ckpt));
}
