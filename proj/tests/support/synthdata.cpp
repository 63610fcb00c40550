#include "support/synthdata.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace glore::synth {

namespace {

const std::vector<std::string> kSurfaces = {"alpha", "bravo", "echo",  "delta", "gamma",
                                            "omega", "sigma", "tango", "vector", "zen"};
const std::vector<std::string> kDeprels = {"nsubj", "dobj", "nmod", "amod",
                                           "conj",  "case", "appos", "acl"};

}  // namespace

SentenceGraph random_sentence(Rng& rng, int max_nodes) {
  int n = 2 + static_cast<int>(rng.index(static_cast<size_t>(max_nodes - 1)));
  // random recursive tree over nodes 1..n, then a random relabeling
  std::vector<int> parent(n + 1, 0);
  for (int v = 2; v <= n; ++v) parent[v] = 1 + static_cast<int>(rng.index(v - 1));
  std::vector<int> position(n + 1);
  for (int v = 1; v <= n; ++v) position[v] = v;
  std::vector<int> perm(position.begin() + 1, position.end());
  rng.shuffle(perm);
  for (int v = 1; v <= n; ++v) position[v] = perm[v - 1];

  SentenceGraph s;
  s.tokens.resize(n);
  for (int v = 1; v <= n; ++v) {
    ParsedToken& tok = s.tokens[position[v] - 1];
    tok.index = position[v];
    tok.surface = kSurfaces[rng.index(kSurfaces.size())];
    tok.head = parent[v] == 0 ? 0 : position[parent[v]];
    tok.deprel = kDeprels[rng.index(kDeprels.size())];
  }
  s.sentence_id = "synth";
  return s;
}

std::optional<TextualRelation> bfs_path_oracle(const SentenceGraph& s, const EntityMention& from,
                                               const EntityMention& to) {
  int n = static_cast<int>(s.tokens.size());
  auto anchor = [&](const EntityMention& m) {
    for (int i = m.start; i <= m.end; ++i) {
      int h = s.tokens[i - 1].head;
      if (h == 0 || h < m.start || h > m.end) return i;
    }
    throw Error("oracle: no anchor");
  };
  int a = anchor(from), b = anchor(to);

  std::vector<std::vector<int>> adj(n + 1);
  for (const ParsedToken& t : s.tokens) {
    if (t.head != 0) {
      adj[t.index].push_back(t.head);
      adj[t.head].push_back(t.index);
    }
  }
  std::vector<int> prev(n + 1, -1);
  std::deque<int> queue = {a};
  prev[a] = a;
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    if (x == b) break;
    for (int y : adj[x]) {
      if (prev[y] == -1) {
        prev[y] = x;
        queue.push_back(y);
      }
    }
  }
  if (prev[b] == -1) throw Error("oracle: endpoints disconnected");
  std::vector<int> path;
  for (int x = b; x != a; x = prev[x]) path.push_back(x);
  path.push_back(a);
  std::reverse(path.begin(), path.end());

  auto same = [](const EntityMention& x, const EntityMention& y) {
    return x.start == y.start && x.end == y.end && x.entity_id == y.entity_id;
  };
  for (size_t i = 1; i + 1 < path.size(); ++i) {
    for (const EntityMention& m : s.mentions) {
      if (same(m, from) || same(m, to)) continue;
      if (m.start <= path[i] && path[i] <= m.end) return std::nullopt;
    }
  }

  TextualRelation rel;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    int x = path[i], y = path[i + 1];
    if (s.tokens[x - 1].head == y) {
      rel.elements.push_back(PathElement::dep(s.tokens[x - 1].deprel, DepDirection::up));
    } else {
      rel.elements.push_back(PathElement::dep(s.tokens[y - 1].deprel, DepDirection::down));
    }
    if (i + 2 < path.size()) {
      rel.elements.push_back(PathElement::lexical(lower(s.tokens[y - 1].surface)));
    }
  }
  return rel;
}

TextualRelation sample_pattern_relation(int pattern, Rng& rng) {
  std::string p = std::to_string(pattern);
  auto dep = [&]() {
    std::string label = "d" + p + std::string(1, static_cast<char>('a' + rng.index(4)));
    return PathElement::dep(label, rng.index(2) ? DepDirection::up : DepDirection::down);
  };
  auto word = [&]() { return PathElement::lexical("w" + p + std::to_string(rng.index(6))); };
  TextualRelation rel;
  int pairs = 1 + static_cast<int>(rng.index(3));  // lengths 3, 5, 7
  rel.elements.push_back(dep());
  for (int i = 0; i < pairs; ++i) {
    rel.elements.push_back(word());
    rel.elements.push_back(dep());
  }
  return rel;
}

PatternData make_pattern_graph(int patterns, int relations_per_pattern, uint64_t seed) {
  if (patterns < 1 || patterns > 10) throw Error("make_pattern_graph: 1..10 patterns supported");
  Rng rng(seed);
  std::map<std::string, int> rows;  // rendered -> pattern, sorted
  for (int p = 0; p < patterns; ++p) {
    int made = 0;
    while (made < relations_per_pattern) {
      std::string rendered = render_relation(sample_pattern_relation(p, rng));
      if (rows.emplace(rendered, p).second) ++made;
    }
  }
  PatternData pd;
  pd.patterns = patterns;
  for (int p = 0; p < patterns; ++p) pd.graph.kb_vocab.push_back("r" + std::to_string(p));
  for (const auto& [rendered, p] : rows) {
    pd.graph.textual_vocab.push_back(rendered);
    pd.graph.rows.push_back({GraphEdge{p, 5, 1.0}});
    pd.pattern_of_row.push_back(p);
  }
  pd.graph.validate();
  return pd;
}

namespace {

struct Template {
  std::string verb;
  std::string kb_relation;  // fact (m2, relation, m1) when reversed, see below
};

// "m1 <verb> m2 ." with m1 as nsubj and m2 as dobj of the root verb; the KB
// fact direction is (m2, relation, m1) for founder-style relations and
// (m1, relation, m2) otherwise.
SentenceGraph verb_sentence(const std::string& verb, const std::string& m1,
                            const std::string& m2, const std::string& id) {
  SentenceGraph s;
  s.tokens = {{1, m1, 2, "nsubj"}, {2, verb, 0, "root"}, {3, m2, 2, "dobj"}, {4, ".", 2, "punct"}};
  s.mentions = {{1, 1, m1}, {3, 3, m2}};
  s.sentence_id = id;
  return s;
}

}  // namespace

CorpusData make_corpus(int sentences, uint64_t seed, int planted_founder,
                       int planted_named_after) {
  Rng rng(seed);
  CorpusData data;
  int id = 0;
  auto next_id = [&]() { return "s" + std::to_string(++id); };

  // planted Figure-style row: "person founded company", extracted
  // company->person as "<-dobj> founded <nsubj>"
  for (int i = 0; i < planted_founder; ++i) {
    std::string person = "pf" + std::to_string(i);
    std::string company = "cf" + std::to_string(i);
    data.sentences.push_back(verb_sentence("founded", person, company, next_id()));
    data.kb.add({company, "founder", person});
  }
  for (int i = 0; i < planted_named_after; ++i) {
    std::string person = "pn" + std::to_string(i);
    std::string company = "cn" + std::to_string(i);
    data.sentences.push_back(verb_sentence("founded", person, company, next_id()));
    data.kb.add({company, "named_after", person});
  }

  const std::vector<Template> templates = {
      {"leads", "ceo_of"}, {"acquired", "owner_of"}, {"visited", "visited"},
      {"praised", "praised"}, {"built", "builder_of"}};
  int remaining = sentences - planted_founder - planted_named_after;
  int pair_pool = std::max(4, remaining / 6);
  while (remaining > 0) {
    const Template& tpl = templates[rng.index(templates.size())];
    int pair = static_cast<int>(rng.index(pair_pool));
    std::string a = tpl.verb + "_a" + std::to_string(pair);
    std::string b = tpl.verb + "_b" + std::to_string(pair);
    // most template pairs carry a KB fact, subject = dobj side
    if (rng.uniform() < 0.7) data.kb.add({b, tpl.kb_relation, a});
    int repeats = std::min(remaining, 2 + static_cast<int>(rng.index(2)));
    for (int r = 0; r < repeats; ++r) {
      data.sentences.push_back(verb_sentence(tpl.verb, a, b, next_id()));
    }
    remaining -= repeats;
  }
  return data;
}

ReData make_re_data(const PatternData& pd, int train_bags, int eval_bags, double base_accuracy,
                    uint64_t seed) {
  Rng rng(seed);
  ReData data;
  data.relations = pd.graph.kb_vocab;
  std::vector<std::vector<std::string>> by_pattern(pd.patterns);
  for (size_t i = 0; i < pd.graph.textual_vocab.size(); ++i) {
    by_pattern[pd.pattern_of_row[i]].push_back(pd.graph.textual_vocab[i]);
  }
  int total = train_bags + eval_bags;
  for (int i = 0; i < total; ++i) {
    int gold = static_cast<int>(rng.index(pd.patterns));
    Bag bag;
    bag.pair_id = "b" + std::to_string(i);
    bag.e1 = bag.pair_id + "_s";
    bag.e2 = bag.pair_id + "_o";
    bag.gold = {data.relations[gold]};
    int n_rel = 1 + static_cast<int>(rng.index(3));
    for (int k = 0; k < n_rel; ++k) {
      if (rng.uniform() < 0.3) {
        // unseen relation from the same pattern vocabulary
        bag.relations.push_back(render_relation(sample_pattern_relation(gold, rng)));
      } else {
        const auto& pool = by_pattern[gold];
        bag.relations.push_back(pool[rng.index(pool.size())]);
      }
    }
    int pick = gold;
    if (rng.uniform() > base_accuracy) pick = static_cast<int>(rng.index(pd.patterns));
    bag.base_scores.assign(pd.patterns, 0.05);
    bag.base_scores[pick] += 1.0 + 0.2 * rng.uniform();
    (i < train_bags ? data.train_bags : data.eval_bags).push_back(std::move(bag));
  }
  return data;
}

KbcData make_kbc_data(const PatternData& pd, int entities, double held_out_fraction,
                      double mention_fraction, uint64_t seed) {
  Rng rng(seed);
  KbcData data;
  int P = pd.patterns;
  auto entity = [&](int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "e%03d", i);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> groups(P);
  for (int i = 0; i < entities; ++i) groups[i % P].push_back(entity(i));

  std::vector<std::vector<std::string>> by_pattern(P);
  for (size_t i = 0; i < pd.graph.textual_vocab.size(); ++i) {
    by_pattern[pd.pattern_of_row[i]].push_back(pd.graph.textual_vocab[i]);
  }

  std::set<std::array<std::string, 3>> seen;
  for (int k = 0; k < P; ++k) {
    const auto& subjects = groups[k];
    const auto& objects = groups[(k + 1) % P];
    std::string rel = "r" + std::to_string(k);
    for (const std::string& s : subjects) {
      for (int rep = 0; rep < 2; ++rep) {
        const std::string& o = objects[rng.index(objects.size())];
        if (!seen.insert({s, rel, o}).second) continue;
        KbTriple t{s, rel, o};
        bool held = rng.uniform() < held_out_fraction;
        (held ? data.test : data.train).push_back(t);
        if (rng.uniform() < mention_fraction) {
          const auto& pool = by_pattern[k];
          data.mentions.push_back({s, o, pool[rng.index(pool.size())]});
          if (rng.uniform() < 0.5) {
            data.mentions.push_back({s, o, pool[rng.index(pool.size())]});
          }
        }
      }
    }
  }
  return data;
}

}  // namespace glore::synth
