#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "glore/deppath.hpp"
#include "glore/downstream.hpp"
#include "glore/relgraph.hpp"
#include "glore/util.hpp"

namespace glore::synth {

// Random dependency tree over n tokens with permuted indices; surfaces and
// deprels drawn from small pools.
SentenceGraph random_sentence(Rng& rng, int max_nodes);

// Independent path oracle: breadth-first search over the undirected tree,
// then direct element assembly. Mirrors the extraction contract but shares
// no code with it.
std::optional<TextualRelation> bfs_path_oracle(const SentenceGraph& s, const EntityMention& from,
                                               const EntityMention& to);

// Textual relations built from per-pattern vocabularies (disjoint dependency
// labels and words per pattern), each mapped one-hot to KB relation
// "r<pattern>".
struct PatternData {
  RelationGraph graph;
  std::vector<int> pattern_of_row;  // parallel to graph.textual_vocab
  int patterns = 0;
};
PatternData make_pattern_graph(int patterns, int relations_per_pattern, uint64_t seed);

// A fresh relation from one pattern's vocabulary (may repeat existing rows).
TextualRelation sample_pattern_relation(int pattern, Rng& rng);

// Synthetic distant-supervision corpus: parsed sentences whose extracted
// paths co-occur with a small KB, plus a planted high-frequency row whose
// counts are chosen by the caller.
struct CorpusData {
  std::vector<SentenceGraph> sentences;
  KbStore kb;
};
CorpusData make_corpus(int sentences, uint64_t seed, int planted_founder = 0,
                       int planted_named_after = 0);

struct ReData {
  std::vector<Bag> train_bags;
  std::vector<Bag> eval_bags;
  std::vector<std::string> relations;
};
// Bags whose textual relations come from the gold pattern; base scores are
// right with probability `base_accuracy`.
ReData make_re_data(const PatternData& pd, int train_bags, int eval_bags, double base_accuracy,
                    uint64_t seed);

struct KbcData {
  std::vector<KbTriple> train;
  std::vector<KbTriple> test;
  std::vector<std::array<std::string, 3>> mentions;  // e1, e2, rendered
};
// Entity groups linked by relation k; `held_out_fraction` of facts move to
// the test split. Pairs of a fact carry textual mentions from pattern k with
// probability `mention_fraction` (test pairs included, which is the textual
// signal the KB-only model cannot see).
KbcData make_kbc_data(const PatternData& pd, int entities, double held_out_fraction,
                      double mention_fraction, uint64_t seed);

}  // namespace glore::synth
