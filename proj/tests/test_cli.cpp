#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "glore/pipeline.hpp"

using namespace glore;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("glore_cli_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const char* name) const { return (path / name).string(); }
};

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  int code = dispatch(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string small_corpus() {
  std::string block;
  for (const char* verb : {"founded", "leads"}) {
    for (int i = 0; i < 2; ++i) {
      std::string person = "person" + std::to_string(i);
      std::string company = "company" + std::to_string(i);
      block += "1\t" + person + "\t_\t_\t_\t_\t2\tnsubj\t_\t_\n";
      block += "2\t" + std::string(verb) + "\t_\t_\t_\t_\t0\troot\t_\t_\n";
      block += "3\t" + company + "\t_\t_\t_\t_\t2\tdobj\t_\t_\n";
      block += "#MENTION\t1\t1\t" + person + "\n";
      block += "#MENTION\t3\t3\t" + company + "\n\n";
    }
  }
  return block;
}

std::string small_kb() {
  return "company0\tfounder\tperson0\ncompany1\tfounder\tperson1\n"
         "person0\tceo_of\tcompany0\nperson1\tceo_of\tcompany1\n";
}

}  // namespace

TEST_CASE("dispatch usage errors exit with code 2") {
  std::string out, err;
  CHECK(run({}, &out, &err) == 2);
  CHECK(err.find("Usage") != std::string::npos);

  CHECK(run({"frobnicate"}, &out, &err) == 2);
  CHECK(run({"extract", "--no-such-flag"}, &out, &err) == 2);
}

TEST_CASE("help exits cleanly") {
  std::string out, err;
  CHECK(run({"--help"}, &out, &err) == 0);
  CHECK(out.find("extract") != std::string::npos);
}

TEST_CASE("extract happy path is idempotent and leaves inputs alone") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  std::string before = read_file(dir.file("c.conllu"));

  std::string out;
  int code = run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("triples.tsv"),
                  "--seed", "9"},
                 &out);
  CHECK(code == 0);
  std::string first = read_file(dir.file("triples.tsv"));
  CHECK(first.find("# glore") == 0);
  CHECK(first.find("seed=9") != std::string::npos);
  CHECK(first.find("<-dobj> founded <nsubj>") != std::string::npos);

  // rerun: byte-identical output, untouched input
  CHECK(run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("triples.tsv"),
             "--seed", "9"}) == 0);
  CHECK(read_file(dir.file("triples.tsv")) == first);
  CHECK(read_file(dir.file("c.conllu")) == before);
}

TEST_CASE("validation failures exit with code 1 and name the path") {
  TempDir dir;
  std::string out, err;
  int code = run({"train", "--graph", dir.file("missing_graph.tsv"), "--checkpoint-out",
                  dir.file("ckpt.json")},
                 &out, &err);
  CHECK(code == 1);
  CHECK(err.find("missing_graph.tsv") != std::string::npos);
}

TEST_CASE("malformed corpus exits 1 with the line number") {
  TempDir dir;
  write_file(dir.file("bad.conllu"), "1\tonly\tthree\tcolumns\n\n");
  std::string err;
  CHECK(run({"extract", "--corpus", dir.file("bad.conllu"), "--out", dir.file("t.tsv")}, nullptr,
            &err) == 1);
  CHECK(err.find("line 1") != std::string::npos);
}

TEST_CASE("GLORE_SEED overrides config, explicit flag overrides both") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  write_file(dir.file("run.cfg"), "seed=5\npaths.corpus=c.conllu\npaths.kb=kb.tsv\n");

  ::setenv("GLORE_SEED", "77", 1);
  std::string out;
  CHECK(run({"extract", "--config", dir.file("run.cfg"), "--out", dir.file("t.tsv")}, &out) == 0);
  CHECK(read_file(dir.file("t.tsv")).find("seed=77") != std::string::npos);

  CHECK(run({"extract", "--config", dir.file("run.cfg"), "--out", dir.file("t.tsv"), "--seed",
             "123"}) == 0);
  CHECK(read_file(dir.file("t.tsv")).find("seed=123") != std::string::npos);
  ::unsetenv("GLORE_SEED");

  CHECK(run({"extract", "--config", dir.file("run.cfg"), "--out", dir.file("t.tsv")}) == 0);
  CHECK(read_file(dir.file("t.tsv")).find("seed=5") != std::string::npos);

  ::setenv("GLORE_SEED", "not-a-number", 1);
  std::string err;
  CHECK(run({"extract", "--config", dir.file("run.cfg"), "--out", dir.file("t.tsv")}, nullptr,
            &err) == 1);
  ::unsetenv("GLORE_SEED");
}

TEST_CASE("run config parsing") {
  SUBCASE("unknown keys are rejected") {
    std::istringstream in("seed=1\nbogus.key=2\n");
    CHECK_THROWS_WITH_AS(RunConfig::parse(in, ""), doctest::Contains("bogus.key"), Error);
  }
  SUBCASE("relative paths resolve against the config directory") {
    std::istringstream in("paths.corpus=data/c.conllu\npaths.out_dir=out\n");
    RunConfig cfg = RunConfig::parse(in, "/base");
    CHECK(cfg.corpus == "/base/data/c.conllu");
    CHECK(cfg.out_dir == "/base/out");
  }
  SUBCASE("seed propagates to every seeded section") {
    std::istringstream in("seed=99\n");
    RunConfig cfg = RunConfig::parse(in, "");
    CHECK(cfg.train.seed == 99);
    CHECK(cfg.re_head.seed == 99);
    CHECK(cfg.kbc.seed == 99);
  }
  SUBCASE("bad values are named") {
    std::istringstream in("train.max_epochs=soon\n");
    CHECK_THROWS_AS(RunConfig::parse(in, ""), Error);
  }
  SUBCASE("cutoff lists") {
    CHECK(parse_cutoffs("100,300,500") == std::vector<int>{100, 300, 500});
    CHECK_THROWS_AS(parse_cutoffs("100,-3"), Error);
    CHECK_THROWS_AS(parse_cutoffs(""), Error);
  }
}

TEST_CASE("build-graph subcommand on extracted triples") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  write_file(dir.file("kb.tsv"), small_kb());
  CHECK(run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("t.tsv")}) == 0);
  std::string out;
  CHECK(run({"build-graph", "--triples", dir.file("t.tsv"), "--kb", dir.file("kb.tsv"), "--out",
             dir.file("g.tsv"), "--min-count", "1"},
            &out) == 0);
  std::string graph = read_file(dir.file("g.tsv"));
  CHECK(graph.find("#textual\tkb\tcount\tweight") != std::string::npos);
  CHECK(graph.find("<-dobj> founded <nsubj>\tfounder\t2\t1") != std::string::npos);
}

TEST_CASE("train, export, and nn subcommands chain together") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  write_file(dir.file("kb.tsv"), small_kb());
  REQUIRE(run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("t.tsv")}) == 0);
  REQUIRE(run({"build-graph", "--triples", dir.file("t.tsv"), "--kb", dir.file("kb.tsv"), "--out",
               dir.file("g.tsv"), "--min-count", "1"}) == 0);

  std::string out, err;
  int code = run({"train", "--graph", dir.file("g.tsv"), "--checkpoint-out", dir.file("m.json"),
                  "--loss-log", dir.file("log.tsv"), "--d-model", "8", "--layers", "1", "--heads",
                  "2", "--ffn", "16", "--z-dim", "8", "--epochs", "3", "--batch", "1",
                  "--val-fraction", "0.5", "--seed", "4"},
                 &out, &err);
  CAPTURE(err);
  REQUIRE(code == 0);
  std::string log = read_file(dir.file("log.tsv"));
  CHECK(log.find("#epoch\ttrain_loss\tval_loss") != std::string::npos);

  REQUIRE(run({"export", "--graph", dir.file("g.tsv"), "--checkpoint", dir.file("m.json"),
               "--embeddings-out", dir.file("emb.tsv"), "--labeled-out", dir.file("lab.tsv"),
               "--min-count", "1", "--seed", "4"},
              &out, &err) == 0);
  CHECK(read_file(dir.file("lab.tsv")).find("founder") != std::string::npos);

  REQUIRE(run({"nn", "--embeddings", dir.file("emb.tsv"), "--query", "<-dobj> founded <nsubj>",
               "--k", "1"},
              &out, &err) == 0);
  CHECK(out.find("rank\tsimilarity\trelation") != std::string::npos);
  CHECK(out.find("<-dobj> founded <nsubj>") == std::string::npos);  // query excluded

  // unseen queries need the checkpoint
  CHECK(run({"nn", "--embeddings", dir.file("emb.tsv"), "--query", "<-nmod> new <dobj>", "--k",
             "1"},
            &out, &err) == 1);
  CHECK(run({"nn", "--embeddings", dir.file("emb.tsv"), "--query", "<-nmod> new <dobj>",
             "--checkpoint", dir.file("m.json"), "--k", "1"},
            &out, &err) == 0);
}

TEST_CASE("report headers carry version, seed, and input digests") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  REQUIRE(run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("t.tsv"), "--seed",
               "31"}) == 0);
  std::string header = split(read_file(dir.file("t.tsv")), '\n')[0];
  CHECK(header.rfind("# glore 1.0.0 seed=31 inputs=c.conllu:", 0) == 0);
  // the digest is the FNV-1a hash of the input bytes
  std::string content = read_file(dir.file("c.conllu"));
  CHECK(header.find(hex64(fnv1a64(content.data(), content.size()))) != std::string::npos);
}

TEST_CASE("train accepts pretrained word vectors through the CLI") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  write_file(dir.file("kb.tsv"), small_kb());
  write_file(dir.file("vectors.txt"), "founded 1 0 0 0 0 0 0 0\nleads 0 1 0 0 0 0 0 0\n");
  REQUIRE(run({"extract", "--corpus", dir.file("c.conllu"), "--out", dir.file("t.tsv")}) == 0);
  REQUIRE(run({"build-graph", "--triples", dir.file("t.tsv"), "--kb", dir.file("kb.tsv"), "--out",
               dir.file("g.tsv"), "--min-count", "1"}) == 0);
  std::string err;
  int code = run({"train", "--graph", dir.file("g.tsv"), "--checkpoint-out", dir.file("m.json"),
                  "--glove", dir.file("vectors.txt"), "--d-model", "8", "--layers", "1",
                  "--heads", "2", "--ffn", "16", "--z-dim", "8", "--epochs", "1", "--batch", "1",
                  "--val-fraction", "0.5", "--seed", "4"},
                 nullptr, &err);
  CAPTURE(err);
  CHECK(code == 0);
  CHECK(run({"train", "--graph", dir.file("g.tsv"), "--checkpoint-out", dir.file("m.json"),
             "--glove", dir.file("missing_vectors.txt"), "--epochs", "1"},
            nullptr, &err) == 1);
}

TEST_CASE("pipeline stops gracefully on an empty corpus") {
  TempDir dir;
  write_file(dir.file("c.conllu"), "");
  write_file(dir.file("kb.tsv"), small_kb());
  write_file(dir.file("run.cfg"), "seed=3\npaths.corpus=c.conllu\npaths.kb=kb.tsv\n");
  std::string out, err;
  int code = run({"pipeline", "--config", dir.file("run.cfg"), "--out-dir",
                  (dir.path / "out").string()},
                 &out, &err);
  CAPTURE(err);
  CHECK(code == 0);
  CHECK(out.find("stopped") != std::string::npos);
  std::string summary = read_file((dir.path / "out" / "summary.tsv").string());
  CHECK(summary.find("no rows") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "out" / "checkpoint.json"));
}

TEST_CASE("pipeline validates configured inputs before running any stage") {
  TempDir dir;
  write_file(dir.file("c.conllu"), small_corpus());
  write_file(dir.file("kb.tsv"), small_kb());
  write_file(dir.file("run.cfg"),
             "seed=3\npaths.corpus=c.conllu\npaths.kb=kb.tsv\n"
             "paths.re_train_bags=missing_bags.tsv\n");
  std::string err;
  int code = run({"pipeline", "--config", dir.file("run.cfg"), "--out-dir",
                  (dir.path / "out").string()},
                 nullptr, &err);
  CHECK(code == 1);
  CHECK(err.find("missing_bags.tsv") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "out" / "triples.tsv"));  // nothing ran
}
