#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "glore/config.hpp"

namespace glore {

// explicit --seed flag > GLORE_SEED environment variable > config value
uint64_t effective_seed(const std::optional<uint64_t>& flag, uint64_t config_seed);

struct ExtractCounts {
  long long sentences = 0;
  long long triples = 0;
};
ExtractCounts stage_extract(const std::string& corpus_path, const std::string& out_path,
                            uint64_t seed);

struct GraphCounts {
  long long rows = 0;
  long long edges = 0;
  long long kb_relations = 0;
  long long dropped_zero = 0;
  AlignStats align;
};
GraphCounts stage_build_graph(const std::string& triples_path, const std::string& kb_path,
                              const std::string& whitelist_path, FilterConfig filter,
                              const std::string& out_path, uint64_t seed);

struct TrainCounts {
  int epochs = 0;
  int best_epoch = 0;
  double best_val = 0.0;
  long long train_rows = 0;
  long long val_rows = 0;
};
TrainCounts stage_train(const std::string& graph_path, EncoderConfig enc, TrainConfig tc,
                        const std::string& glove_path, const std::string& ckpt_path,
                        const std::string& log_path, uint64_t seed);

struct ReResult {
  double alpha = 0.0;
  std::vector<int> cutoffs;
  std::vector<double> base;      // empty when eval bags carry no base scores
  std::vector<double> emb;
  std::vector<double> ensemble;  // empty when base is empty
};
ReResult stage_eval_re(const std::string& ckpt_path, const std::string& train_bags_path,
                       const std::string& eval_bags_path, const std::string& relations_path,
                       ReHeadConfig head_cfg, const std::vector<int>& cutoffs,
                       const std::string& alpha_spec, const std::string& out_path, uint64_t seed);

struct KbcStageResult {
  KbcReport kb_only;
  bool has_emb = false;
  KbcReport emb;
};
KbcStageResult stage_eval_kbc(const std::string& ckpt_path, const std::string& train_path,
                              const std::string& test_path, const std::string& mentions_path,
                              KbcConfig cfg, const std::string& out_path, uint64_t seed);

struct ExportCounts {
  long long embeddings = 0;
  long long labeled = 0;
  long long skipped = 0;
};
ExportCounts stage_export(const std::string& graph_path, const std::string& ckpt_path,
                          const std::string& embeddings_out, const std::string& labeled_out,
                          long long min_count, uint64_t seed);

std::string stage_nn(const std::string& table_path, const std::string& ckpt_path,
                     const std::string& query, int k);

struct PipelineResult {
  bool stopped_early = false;
  std::string stop_reason;
  std::string summary;  // contents of summary.tsv
};

// extract -> build-graph -> train -> export -> eval stages, short-circuiting
// on failure; writes all artifacts plus summary.tsv under cfg.out_dir.
PipelineResult run_pipeline(const RunConfig& cfg, uint64_t seed, std::ostream& progress);

// CLI entry point; returns 0 on success, 1 on validation failure, 2 on
// usage errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glore
