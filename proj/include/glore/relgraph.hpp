#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "glore/deppath.hpp"

namespace glore {

struct KbTriple {
  std::string subject;
  std::string relation;
  std::string object;
  auto operator<=>(const KbTriple&) const = default;
};

class KbStore {
 public:
  void add(const KbTriple& t);
  bool contains(const std::string& s, const std::string& r, const std::string& o) const;
  // KB relations linking (s, o) in that order, sorted, deduplicated.
  const std::vector<std::string>& relations_for(const std::string& s, const std::string& o) const;
  size_t size() const { return triples_.size(); }

  // "subject\trelation\tobject" per line; duplicates collapse.
  static KbStore load(std::istream& in);

  std::set<std::string> relation_whitelist;

 private:
  std::unordered_set<std::string> triples_;
  std::unordered_map<std::string, std::vector<std::string>> by_pair_;
};

struct CorpusTriple {
  std::string subject;
  std::string rendered;
  std::string object;
  std::string sentence_id;
};

// "subject\trendered\tobject\tsentence_id" per line, '#' lines skipped.
std::vector<CorpusTriple> load_triples(std::istream& in);
std::string triples_to_tsv(const std::vector<CorpusTriple>& triples);

// Global co-occurrence counts. Merging shard counts by elementwise addition
// reproduces single-pass counting exactly.
struct CoocCounts {
  std::map<std::string, long long> occurrence;                    // t -> extraction count
  std::map<std::string, std::map<std::string, long long>> pairs;  // t -> r -> co-occurrences

  void merge(const CoocCounts& other);
  bool operator==(const CoocCounts&) const = default;
};

struct FilterConfig {
  int max_length = 10;
  long long min_occurrences = 2;
  bool drop_symmetric = true;
  bool use_whitelist = false;  // restricts pair counting to KbStore::relation_whitelist
};

struct AlignStats {
  long long triples = 0;
  long long skipped_unparseable = 0;
  long long pair_increments = 0;
};

// Counts one occurrence per triple and one pair co-occurrence for every KB
// relation r with (subject, r, object) in the store.
CoocCounts align_corpus(const std::vector<CorpusTriple>& triples, const KbStore& kb,
                        const FilterConfig& config, AlignStats* stats = nullptr);

// Drops textual relations that are over-long, symmetric, or below the
// occurrence floor, together with their pair counts. Idempotent; surviving
// counts are untouched.
CoocCounts apply_filters(const CoocCounts& counts, const FilterConfig& config);

struct GraphEdge {
  int kb = 0;
  long long count = 0;
  double weight = 0.0;
  bool operator==(const GraphEdge&) const = default;
};

// Bipartite relation graph; each row is the normalized co-occurrence
// distribution of one textual relation over KB relations.
struct RelationGraph {
  std::vector<std::string> textual_vocab;
  std::vector<std::string> kb_vocab;
  std::vector<std::vector<GraphEdge>> rows;  // parallel to textual_vocab; edges sorted by kb

  size_t row_count() const { return textual_vocab.size(); }
  size_t edge_count() const;
  void validate() const;  // row sums within 1e-9 of 1, weights in (0,1], no empty rows
  bool operator==(const RelationGraph&) const = default;
};

struct NormalizeStats {
  long long dropped_zero_rows = 0;
};

// Row-normalizes pair counts; textual relations with no pair counts are
// dropped and reported.
RelationGraph normalize(const CoocCounts& counts, NormalizeStats* stats = nullptr);

// Seeded row split; validation receives ceil(fraction * rows) rows. Both
// halves keep the full kb_vocab.
std::pair<RelationGraph, RelationGraph> split_train_validation(const RelationGraph& graph,
                                                               double fraction, uint64_t seed);

// Format: optional "#"-prefixed meta lines, the column header
// "#textual\tkb\tcount\tweight", then one edge per line grouped by textual
// relation; weights carry 17 significant digits so reload is exact.
void save_graph(std::ostream& out, const RelationGraph& graph, const std::string& meta = "");
RelationGraph load_graph(std::istream& in);

}  // namespace glore
