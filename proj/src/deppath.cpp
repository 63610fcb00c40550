#include "glore/deppath.hpp"

#include <algorithm>
#include <cctype>
#include <istream>

namespace glore {

namespace {

[[noreturn]] void fail(const std::string& sentence_id, long line, const std::string& what) {
  throw Error("sentence " + sentence_id + " (line " + std::to_string(line) + "): " + what);
}

bool parse_int(const std::string& s, int* out) {
  if (s.empty()) return false;
  int value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
    if (value > 1000000) return false;
  }
  *out = value;
  return true;
}

void validate_sentence(const SentenceGraph& s, long line) {
  int n = static_cast<int>(s.tokens.size());
  int root = 0;
  std::vector<std::vector<int>> children(n + 1);
  for (const ParsedToken& tok : s.tokens) {
    if (tok.head < 0 || tok.head > n) {
      fail(s.sentence_id, line, "head " + std::to_string(tok.head) + " out of range");
    }
    if (tok.head == tok.index) {
      fail(s.sentence_id, line, "token " + std::to_string(tok.index) + " is its own head");
    }
    if (tok.head == 0) {
      if (root != 0) fail(s.sentence_id, line, "multiple root tokens");
      root = tok.index;
    } else {
      children[tok.head].push_back(tok.index);
    }
    if (tok.deprel.empty()) {
      fail(s.sentence_id, line, "empty deprel on token " + std::to_string(tok.index));
    }
  }
  if (root == 0) fail(s.sentence_id, line, "non-tree head structure: no root token");
  // reachability from the root; anything unreachable sits on a cycle
  std::vector<int> stack = {root};
  int seen = 0;
  while (!stack.empty()) {
    int t = stack.back();
    stack.pop_back();
    ++seen;
    for (int c : children[t]) stack.push_back(c);
  }
  if (seen != n) fail(s.sentence_id, line, "non-tree head structure: cycle among heads");

  std::vector<EntityMention> sorted = s.mentions;
  std::sort(sorted.begin(), sorted.end(),
            [](const EntityMention& a, const EntityMention& b) { return a.start < b.start; });
  for (size_t i = 0; i < sorted.size(); ++i) {
    const EntityMention& m = sorted[i];
    if (m.start < 1 || m.end > n || m.start > m.end) {
      fail(s.sentence_id, line,
           "mention span [" + std::to_string(m.start) + "," + std::to_string(m.end) +
               "] out of bounds");
    }
    if (m.entity_id.empty()) fail(s.sentence_id, line, "empty entity id in mention");
    if (i > 0 && sorted[i - 1].end >= m.start) {
      fail(s.sentence_id, line, "overlapping mention spans");
    }
  }
}

// Lowercase, drop embedded whitespace, and strip angle brackets so lexical
// tokens stay distinguishable from the "<label>" edge syntax.
std::string normalize_surface(const std::string& surface) {
  std::string out;
  for (char c : lower(surface)) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '>') continue;
    out.push_back(c);
  }
  if (out.empty()) out = "_";
  return out;
}

}  // namespace

std::vector<SentenceGraph> parse_conllu(std::istream& in) {
  std::vector<SentenceGraph> sentences;
  SentenceGraph current;
  std::string explicit_id;
  long line_no = 0;
  long block_start = 1;
  int block_ordinal = 0;
  bool in_block = false;
  std::string line;

  auto flush = [&]() {
    if (!in_block) return;
    if (current.tokens.empty()) {
      if (!current.mentions.empty()) {
        fail(explicit_id.empty() ? "s" + std::to_string(block_ordinal + 1) : explicit_id,
             block_start, "mention annotations without token lines");
      }
      current = SentenceGraph{};
      explicit_id.clear();
      in_block = false;
      return;
    }
    ++block_ordinal;
    current.sentence_id = explicit_id.empty() ? "s" + std::to_string(block_ordinal) : explicit_id;
    validate_sentence(current, block_start);
    sentences.push_back(std::move(current));
    current = SentenceGraph{};
    explicit_id.clear();
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (!in_block) {
      in_block = true;
      block_start = line_no;
    }
    if (line[0] == '#') {
      if (line.rfind("#MENTION\t", 0) == 0) {
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 4) fail("s" + std::to_string(block_ordinal + 1), line_no,
                                   "#MENTION line must have 4 tab-separated fields");
        EntityMention m;
        if (!parse_int(cols[1], &m.start) || !parse_int(cols[2], &m.end)) {
          fail("s" + std::to_string(block_ordinal + 1), line_no, "non-numeric mention span");
        }
        m.entity_id = cols[3];
        current.mentions.push_back(std::move(m));
      } else {
        std::string body = trim(line.substr(1));
        if (body.rfind("sent_id", 0) == 0) {
          size_t eq = body.find('=');
          if (eq != std::string::npos) explicit_id = trim(body.substr(eq + 1));
        }
      }
      continue;
    }
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 10) {
      fail("s" + std::to_string(block_ordinal + 1), line_no,
           "expected 10 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos) {
      continue;  // multiword token range or empty node
    }
    ParsedToken tok;
    if (!parse_int(cols[0], &tok.index)) {
      fail("s" + std::to_string(block_ordinal + 1), line_no, "non-numeric token index");
    }
    if (tok.index != static_cast<int>(current.tokens.size()) + 1) {
      fail("s" + std::to_string(block_ordinal + 1), line_no,
           "token index " + std::to_string(tok.index) + " out of sequence");
    }
    tok.surface = cols[1];
    if (!parse_int(cols[6], &tok.head)) {
      fail("s" + std::to_string(block_ordinal + 1), line_no, "non-numeric head");
    }
    tok.deprel = cols[7];
    current.tokens.push_back(std::move(tok));
  }
  flush();
  return sentences;
}

int mention_head(const SentenceGraph& sentence, const EntityMention& mention) {
  for (int i = mention.start; i <= mention.end; ++i) {
    int head = sentence.tokens[i - 1].head;
    if (head == 0 || head < mention.start || head > mention.end) return i;
  }
  throw Error("sentence " + sentence.sentence_id + ": mention [" +
              std::to_string(mention.start) + "," + std::to_string(mention.end) +
              "] has no head token outside its span");
}

std::optional<TextualRelation> extract_path(const SentenceGraph& sentence,
                                            const EntityMention& from,
                                            const EntityMention& to) {
  int a = mention_head(sentence, from);
  int b = mention_head(sentence, to);
  if (a == b) throw Error("sentence " + sentence.sentence_id + ": mentions share an anchor token");

  auto chain_to_root = [&](int t) {
    std::vector<int> chain = {t};
    while (sentence.tokens[chain.back() - 1].head != 0) {
      chain.push_back(sentence.tokens[chain.back() - 1].head);
    }
    return chain;
  };
  std::vector<int> up_a = chain_to_root(a);
  std::vector<int> up_b = chain_to_root(b);

  // lowest common ancestor: strip the shared suffix of the two root chains
  size_t ia = up_a.size(), ib = up_b.size();
  while (ia > 0 && ib > 0 && up_a[ia - 1] == up_b[ib - 1]) {
    --ia;
    --ib;
  }
  // path tokens a .. lca .. b
  std::vector<int> path(up_a.begin(), up_a.begin() + ia);
  path.push_back(up_a[ia]);  // the LCA itself
  for (size_t i = ib; i-- > 0;) path.push_back(up_b[i]);

  auto inside = [](const EntityMention& m, int tok) { return m.start <= tok && tok <= m.end; };
  auto same = [](const EntityMention& a, const EntityMention& b) {
    return a.start == b.start && a.end == b.end && a.entity_id == b.entity_id;
  };
  for (size_t i = 1; i + 1 < path.size(); ++i) {
    for (const EntityMention& m : sentence.mentions) {
      if (same(m, from) || same(m, to)) continue;
      if (inside(m, path[i])) return std::nullopt;
    }
  }

  TextualRelation rel;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    int x = path[i], y = path[i + 1];
    if (sentence.tokens[x - 1].head == y) {
      rel.elements.push_back(PathElement::dep(sentence.tokens[x - 1].deprel, DepDirection::up));
    } else {
      rel.elements.push_back(PathElement::dep(sentence.tokens[y - 1].deprel, DepDirection::down));
    }
    if (i + 2 < path.size()) {
      rel.elements.push_back(
          PathElement::lexical(normalize_surface(sentence.tokens[y - 1].surface)));
    }
  }
  return rel;
}

TextualRelation reverse_relation(const TextualRelation& t) {
  TextualRelation out;
  out.elements.reserve(t.elements.size());
  for (auto it = t.elements.rbegin(); it != t.elements.rend(); ++it) {
    PathElement e = *it;
    if (e.kind == PathElement::Kind::dep) {
      e.direction = e.direction == DepDirection::up ? DepDirection::down : DepDirection::up;
    }
    out.elements.push_back(std::move(e));
  }
  return out;
}

bool is_symmetric(const TextualRelation& t) { return t == reverse_relation(t); }

int relation_length(const TextualRelation& t) { return static_cast<int>(t.elements.size()); }

std::string render_relation(const TextualRelation& t) {
  std::string out;
  for (size_t i = 0; i < t.elements.size(); ++i) {
    if (i) out += ' ';
    const PathElement& e = t.elements[i];
    if (e.kind == PathElement::Kind::lexical) {
      out += e.text;
    } else if (e.direction == DepDirection::up) {
      out += "<-" + e.text + ">";
    } else {
      out += "<" + e.text + ">";
    }
  }
  return out;
}

TextualRelation parse_relation(const std::string& s) {
  TextualRelation rel;
  for (const std::string& tok : split_ws(s)) {
    if (tok.front() == '<' || tok.back() == '>') {
      if (tok.size() < 3 || tok.front() != '<' || tok.back() != '>') {
        throw Error("malformed path token: " + tok);
      }
      std::string label;
      DepDirection dir;
      if (tok[1] == '-') {
        label = tok.substr(2, tok.size() - 3);
        dir = DepDirection::up;
      } else {
        label = tok.substr(1, tok.size() - 2);
        dir = DepDirection::down;
      }
      if (label.empty()) throw Error("empty dependency label in token: " + tok);
      if (label.find('<') != std::string::npos || label.find('>') != std::string::npos) {
        throw Error("malformed path token: " + tok);
      }
      rel.elements.push_back(PathElement::dep(std::move(label), dir));
    } else {
      rel.elements.push_back(PathElement::lexical(tok));
    }
  }
  if (rel.elements.empty()) throw Error("empty textual relation");
  if (rel.elements.front().kind != PathElement::Kind::dep ||
      rel.elements.back().kind != PathElement::Kind::dep) {
    throw Error("textual relation must start and end with a dependency edge: " + s);
  }
  return rel;
}

std::vector<ExtractedTriple> extract_sentence_triples(const SentenceGraph& sentence) {
  std::vector<ExtractedTriple> out;
  for (size_t i = 0; i < sentence.mentions.size(); ++i) {
    for (size_t j = 0; j < sentence.mentions.size(); ++j) {
      if (i == j) continue;
      const EntityMention& from = sentence.mentions[i];
      const EntityMention& to = sentence.mentions[j];
      auto path = extract_path(sentence, from, to);
      if (!path) continue;
      out.push_back({from.entity_id, render_relation(*path), to.entity_id, sentence.sentence_id});
    }
  }
  return out;
}

}  // namespace glore
