#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glore/relgraph.hpp"

namespace glore {

// dot(a,b) / (|a| * |b|); zero vectors are an error.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct EmbeddingTable {
  std::vector<std::string> names;           // rendered textual relations
  std::vector<std::vector<double>> vectors;

  int find(const std::string& name) const;  // -1 when absent
  static EmbeddingTable load(std::istream& in);  // export_embeddings format
};

struct Neighbor {
  std::string name;
  double similarity = 0.0;
};

// Top-k cosine neighbors, excluding an exact string match of the query,
// sorted by similarity descending with rendered-string tie-break. Returns
// the whole table (minus the query) when k exceeds it.
std::vector<Neighbor> nearest_neighbors(const std::string& query_rendered,
                                        const std::vector<double>& query_z,
                                        const EmbeddingTable& table, int k);

struct RowLabel {
  std::optional<std::string> label;  // present iff dominant weight > 0.5
  double dominant_weight = 0.0;
};

// Labels each textual relation with the KB relation it co-occurs with more
// than half of the time; ties and weaker maxima stay unlabeled.
std::map<std::string, RowLabel> auto_label(const RelationGraph& graph);

struct LabeledEmbedding {
  std::string rendered;
  std::optional<std::string> label;
  double dominant_weight = 0.0;
  std::vector<double> z;
};

// TSV: rendered relation, label (empty when absent), dominant weight,
// space-separated z values.
void write_labeled_embeddings(std::ostream& out, const std::vector<LabeledEmbedding>& rows,
                              const std::string& meta = "");

// Human-readable neighbor report: rank, similarity to 4 decimals, relation.
std::string neighbor_report(const std::vector<Neighbor>& neighbors);

}  // namespace glore
