#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "glore/encoder.hpp"
#include "glore/relgraph.hpp"

namespace glore {

// ---- relation extraction ----

struct Bag {
  std::string pair_id;
  std::string e1;
  std::string e2;
  std::vector<std::string> gold;       // gold KB relation ids
  std::vector<std::string> relations;  // rendered textual relations, one per sentence
  std::vector<double> base_scores;     // optional, aligned with the target relation list
};

// TSV: pair id, entity1, entity2, gold labels comma-separated, rendered
// relations "||"-separated, optional base scores comma-separated.
std::vector<Bag> load_bags(std::istream& in);
std::string bags_to_tsv(const std::vector<Bag>& bags);

// Arithmetic mean of encode(t) over the bag's relations; over-length
// relations are skipped, a bag with none encodable is an error.
std::vector<double> embed_pair(const Bag& bag, Embedder& embedder, int max_len);

// Single feedforward projection from averaged embeddings to target-relation
// scores, trained on in-domain bags only with a multi-label sigmoid loss.
struct ReHead {
  Tensor w;  // [z_dim x targets]
  Tensor b;  // [1 x targets]
  std::vector<std::string> relations;
};

struct ReHeadConfig {
  int epochs = 200;
  double lr = 0.05;
  uint64_t seed = 0;
};

ReHead train_re_head(const std::vector<Bag>& bags, const Checkpoint& ckpt,
                     const std::vector<std::string>& relations, const ReHeadConfig& config);

// Sigmoid scores over the head's relations for one averaged embedding.
std::vector<double> re_head_scores(const ReHead& head, const std::vector<double>& avg_z);

// Normalizes a non-negative score vector to sum 1 (uniform if all zero).
std::vector<double> normalize_scores(const std::vector<double>& scores);

// (1 - alpha) * base + alpha * emb, elementwise.
std::vector<double> ensemble_scores(const std::vector<double>& base,
                                    const std::vector<double>& emb, double alpha);

struct Prediction {
  std::string pair_id;
  std::string relation;
  double score = 0.0;
};

// Fraction of the top-N globally ranked predictions present in the gold
// set, per cutoff. Ties break by pair id then relation id. Cutoffs beyond
// the prediction count are computed over what is available and flagged.
std::vector<double> precision_at_n(std::vector<Prediction> predictions,
                                   const std::set<std::pair<std::string, std::string>>& gold,
                                   const std::vector<int>& cutoffs,
                                   std::vector<bool>* truncated = nullptr);

// ---- knowledge base completion ----

struct KbcDataset {
  std::vector<std::string> entities;   // sorted
  std::vector<std::string> relations;  // sorted
  std::vector<KbTriple> train;
  std::vector<KbTriple> test;
  // entity pair -> textual relation embeddings (already encoded, frozen)
  std::map<std::pair<std::string, std::string>, std::vector<std::vector<double>>> mention_vecs;

  bool has_mentions(const std::string& e1, const std::string& e2) const;
  void validate() const;  // test disjoint from train, mention pairs known
};

// Loads train/test triple TSVs ("s\tr\to") and an optional mention TSV
// ("e1\te2\trendered"); mentions are embedded through the frozen checkpoint.
KbcDataset load_kbc_dataset(std::istream& train, std::istream& test, std::istream* mentions,
                            const Checkpoint* ckpt);

enum class KbcKind { distmult, e, combined };

std::string kbc_kind_name(KbcKind kind);
KbcKind kbc_kind_from_name(const std::string& name);

struct KbcConfig {
  KbcKind kind = KbcKind::distmult;
  bool use_mentions = false;
  int dim = 32;
  int negatives = 200;
  int epochs = 50;
  int batch_size = 16;
  double lr = 0.02;
  uint64_t seed = 0;
};

// Latent vectors per entity and relation (one vector for the trilinear
// model, subject/object pairs for model E) plus the affine mention
// projection from embedding space into each family's relation space.
struct KbcModel {
  KbcKind kind = KbcKind::distmult;
  int dim = 0;
  int z_dim = 0;
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::map<std::string, int> entity_index;
  std::map<std::string, int> relation_index;
  ParamMap tensors;

  double score(int e1, int r, int e2) const;
  double score_mention(int e1, const std::vector<double>& z, int e2) const;
};

double score_triple(const KbcModel& model, const std::string& e1, const std::string& r,
                    const std::string& e2);
double score_triple_mention(const KbcModel& model, const std::string& e1,
                            const std::vector<double>& z, const std::string& e2);

// Sampled-softmax ranking over corrupted objects; mention triples join the
// KB triples when use_mentions is set. The encoder is never touched.
KbcModel train_kbc(const KbcDataset& dataset, const KbcConfig& config);

struct KbcMetrics {
  double mrr = 0.0;     // scaled by 100
  double hits10 = 0.0;  // scaled by 100
  long long count = 0;
};

struct KbcReport {
  KbcMetrics overall;
  KbcMetrics with_mentions;
  KbcMetrics without_mentions;
};

// Filtered object ranking: candidates exclude other known-correct objects
// for (e1, r) across train and test; ties break by entity id ascending.
KbcReport evaluate_kbc(const KbcModel& model, const KbcDataset& dataset);

// Rank of the gold object for one test triple under the same protocol.
long long kbc_rank(const KbcModel& model, const KbcDataset& dataset, const KbTriple& triple);

}  // namespace glore
