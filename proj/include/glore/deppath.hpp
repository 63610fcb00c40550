#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "glore/util.hpp"

namespace glore {

struct ParsedToken {
  int index = 0;        // 1-based position in the sentence
  std::string surface;
  int head = 0;         // 0 = root, otherwise 1-based token index
  std::string deprel;
};

struct EntityMention {
  int start = 0;  // 1-based, inclusive
  int end = 0;    // 1-based, inclusive
  std::string entity_id;
};

struct SentenceGraph {
  std::vector<ParsedToken> tokens;
  std::vector<EntityMention> mentions;
  std::string sentence_id;
};

enum class DepDirection { up, down };  // up = dependent -> head

struct PathElement {
  enum class Kind { lexical, dep };
  Kind kind = Kind::lexical;
  std::string text;  // surface form or dependency label
  DepDirection direction = DepDirection::down;

  static PathElement lexical(std::string surface) {
    return {Kind::lexical, std::move(surface), DepDirection::down};
  }
  static PathElement dep(std::string label, DepDirection d) {
    return {Kind::dep, std::move(label), d};
  }
  bool operator==(const PathElement&) const = default;
};

// A shortest dependency path between two entity mentions: lexical tokens
// interleaved with direction-tagged dependency labels. The first and last
// elements are always dependency edges.
struct TextualRelation {
  std::vector<PathElement> elements;
  bool operator==(const TextualRelation&) const = default;
};

// Reads blank-line-separated sentence blocks. Token lines carry the ten
// tab-separated CoNLL-U columns (index, surface, ..., head at column 7,
// deprel at column 8); multiword ranges ("1-2") and empty nodes ("1.1") are
// skipped. Mentions are supplied as "#MENTION\t<start>\t<end>\t<entity_id>"
// lines inside the block; "# sent_id = <id>" sets the sentence id, any other
// comment line is ignored. Structural problems (column counts, non-tree
// heads, bad spans) raise Error naming the sentence and line.
std::vector<SentenceGraph> parse_conllu(std::istream& in);

// The token of the span whose head lies outside the span (or is the root);
// leftmost when several qualify.
int mention_head(const SentenceGraph& sentence, const EntityMention& mention);

// Tree path from mention_head(from) to mention_head(to). Intermediate tokens
// appear as lowercased lexical elements between their incident edges; the
// two anchor tokens are not emitted. Returns nullopt when an intermediate
// token lies inside the span of any mention other than `from` and `to`.
std::optional<TextualRelation> extract_path(const SentenceGraph& sentence,
                                            const EntityMention& from,
                                            const EntityMention& to);

TextualRelation reverse_relation(const TextualRelation& t);
bool is_symmetric(const TextualRelation& t);
int relation_length(const TextualRelation& t);

// "<-label>" for up edges, "<label>" for down edges, bare surface for
// lexical elements, space-joined. parse_relation inverts render_relation and
// rejects malformed bracket tokens, empty labels, and sequences that do not
// start and end with an edge.
std::string render_relation(const TextualRelation& t);
TextualRelation parse_relation(const std::string& s);

struct ExtractedTriple {
  std::string subject;
  std::string rendered;
  std::string object;
  std::string sentence_id;
};

// Paths for every ordered pair of distinct mentions; pairs whose path is
// blocked by another entity are skipped.
std::vector<ExtractedTriple> extract_sentence_triples(const SentenceGraph& sentence);

}  // namespace glore
