#include "glore/relgraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace glore {

namespace {

std::string pair_key(const std::string& s, const std::string& o) { return s + "\t" + o; }

}  // namespace

void KbStore::add(const KbTriple& t) {
  if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
    throw Error("KB triple fields must be non-empty");
  }
  std::string key = t.subject + "\t" + t.relation + "\t" + t.object;
  if (!triples_.insert(key).second) return;
  std::vector<std::string>& rels = by_pair_[pair_key(t.subject, t.object)];
  auto it = std::lower_bound(rels.begin(), rels.end(), t.relation);
  rels.insert(it, t.relation);
}

bool KbStore::contains(const std::string& s, const std::string& r, const std::string& o) const {
  return triples_.count(s + "\t" + r + "\t" + o) > 0;
}

const std::vector<std::string>& KbStore::relations_for(const std::string& s,
                                                       const std::string& o) const {
  static const std::vector<std::string> empty;
  auto it = by_pair_.find(pair_key(s, o));
  return it == by_pair_.end() ? empty : it->second;
}

KbStore KbStore::load(std::istream& in) {
  KbStore store;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3) {
      throw Error("KB line " + std::to_string(line_no) + ": expected 3 tab-separated columns, got " +
                  std::to_string(cols.size()));
    }
    store.add({cols[0], cols[1], cols[2]});
  }
  return store;
}

std::vector<CorpusTriple> load_triples(std::istream& in) {
  std::vector<CorpusTriple> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 4) {
      throw Error("triple line " + std::to_string(line_no) +
                  ": expected 4 tab-separated columns, got " + std::to_string(cols.size()));
    }
    out.push_back({cols[0], cols[1], cols[2], cols[3]});
  }
  return out;
}

std::string triples_to_tsv(const std::vector<CorpusTriple>& triples) {
  std::string out;
  for (const CorpusTriple& t : triples) {
    out += t.subject + "\t" + t.rendered + "\t" + t.object + "\t" + t.sentence_id + "\n";
  }
  return out;
}

void CoocCounts::merge(const CoocCounts& other) {
  for (const auto& [t, c] : other.occurrence) occurrence[t] += c;
  for (const auto& [t, row] : other.pairs) {
    auto& mine = pairs[t];
    for (const auto& [r, c] : row) mine[r] += c;
  }
}

CoocCounts align_corpus(const std::vector<CorpusTriple>& triples, const KbStore& kb,
                        const FilterConfig& config, AlignStats* stats) {
  CoocCounts counts;
  AlignStats local;
  for (const CorpusTriple& triple : triples) {
    ++local.triples;
    try {
      parse_relation(triple.rendered);
    } catch (const Error&) {
      ++local.skipped_unparseable;
      continue;
    }
    counts.occurrence[triple.rendered] += 1;
    for (const std::string& r : kb.relations_for(triple.subject, triple.object)) {
      if (config.use_whitelist && kb.relation_whitelist.count(r) == 0) continue;
      counts.pairs[triple.rendered][r] += 1;
      ++local.pair_increments;
    }
  }
  if (stats) *stats = local;
  return counts;
}

CoocCounts apply_filters(const CoocCounts& counts, const FilterConfig& config) {
  CoocCounts out;
  for (const auto& [rendered, occ] : counts.occurrence) {
    if (occ < config.min_occurrences) continue;
    TextualRelation rel = parse_relation(rendered);
    if (relation_length(rel) > config.max_length) continue;
    if (config.drop_symmetric && is_symmetric(rel)) continue;
    out.occurrence[rendered] = occ;
    auto it = counts.pairs.find(rendered);
    if (it != counts.pairs.end()) out.pairs[rendered] = it->second;
  }
  return out;
}

size_t RelationGraph::edge_count() const {
  size_t n = 0;
  for (const auto& row : rows) n += row.size();
  return n;
}

void RelationGraph::validate() const {
  if (rows.size() != textual_vocab.size()) throw Error("relation graph: row/vocab size mismatch");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].empty()) throw Error("relation graph: empty row for " + textual_vocab[i]);
    double sum = 0.0;
    for (const GraphEdge& e : rows[i]) {
      if (e.kb < 0 || e.kb >= static_cast<int>(kb_vocab.size())) {
        throw Error("relation graph: kb index out of range in row " + textual_vocab[i]);
      }
      if (!(e.weight > 0.0) || e.weight > 1.0) {
        throw Error("relation graph: weight outside (0,1] in row " + textual_vocab[i]);
      }
      sum += e.weight;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw Error("relation graph: row for " + textual_vocab[i] + " sums to " + fmt_g17(sum));
    }
  }
}

RelationGraph normalize(const CoocCounts& counts, NormalizeStats* stats) {
  RelationGraph graph;
  NormalizeStats local;
  std::set<std::string> kb_ids;
  for (const auto& [rendered, row] : counts.pairs) {
    (void)rendered;
    for (const auto& [r, c] : row) {
      if (c > 0) kb_ids.insert(r);
    }
  }
  graph.kb_vocab.assign(kb_ids.begin(), kb_ids.end());
  std::map<std::string, int> kb_index;
  for (size_t i = 0; i < graph.kb_vocab.size(); ++i) {
    kb_index[graph.kb_vocab[i]] = static_cast<int>(i);
  }
  for (const auto& [rendered, occ] : counts.occurrence) {
    (void)occ;
    auto it = counts.pairs.find(rendered);
    long long total = 0;
    if (it != counts.pairs.end()) {
      for (const auto& [r, c] : it->second) total += c;
    }
    if (total <= 0) {
      ++local.dropped_zero_rows;
      continue;
    }
    std::vector<GraphEdge> row;
    for (const auto& [r, c] : it->second) {
      if (c <= 0) continue;
      row.push_back({kb_index.at(r), c, static_cast<double>(c) / static_cast<double>(total)});
    }
    graph.textual_vocab.push_back(rendered);
    graph.rows.push_back(std::move(row));
  }
  if (stats) *stats = local;
  return graph;
}

std::pair<RelationGraph, RelationGraph> split_train_validation(const RelationGraph& graph,
                                                               double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split fraction must lie in (0,1)");
  size_t n = graph.row_count();
  if (n < 2) throw Error("cannot split a graph with fewer than 2 rows");
  size_t val_count = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_val(n, false);
  for (size_t i = 0; i < val_count; ++i) in_val[order[i]] = true;

  RelationGraph train, val;
  train.kb_vocab = graph.kb_vocab;
  val.kb_vocab = graph.kb_vocab;
  for (size_t i = 0; i < n; ++i) {
    RelationGraph& dst = in_val[i] ? val : train;
    dst.textual_vocab.push_back(graph.textual_vocab[i]);
    dst.rows.push_back(graph.rows[i]);
  }
  return {std::move(train), std::move(val)};
}

void save_graph(std::ostream& out, const RelationGraph& graph, const std::string& meta) {
  if (!meta.empty()) {
    out << meta;
    if (meta.back() != '\n') out << '\n';
  }
  out << "#textual\tkb\tcount\tweight\n";
  for (size_t i = 0; i < graph.rows.size(); ++i) {
    for (const GraphEdge& e : graph.rows[i]) {
      out << graph.textual_vocab[i] << '\t' << graph.kb_vocab[e.kb] << '\t' << e.count << '\t'
          << fmt_g17(e.weight) << '\n';
    }
  }
}

RelationGraph load_graph(std::istream& in) {
  // Edges arrive grouped by textual relation; the kb vocabulary is
  // reconstructed sorted over the kb ids seen.
  struct RawEdge {
    std::string kb;
    long long count;
    double weight;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<RawEdge>> by_textual;
  std::set<std::string> kb_ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 4) {
      throw Error("graph line " + std::to_string(line_no) + ": expected 4 columns, got " +
                  std::to_string(cols.size()));
    }
    RawEdge e;
    e.kb = cols[1];
    try {
      e.count = std::stoll(cols[2]);
      e.weight = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw Error("graph line " + std::to_string(line_no) + ": malformed count or weight");
    }
    if (by_textual.find(cols[0]) == by_textual.end()) order.push_back(cols[0]);
    by_textual[cols[0]].push_back(e);
    kb_ids.insert(e.kb);
  }
  RelationGraph graph;
  graph.kb_vocab.assign(kb_ids.begin(), kb_ids.end());
  std::map<std::string, int> kb_index;
  for (size_t i = 0; i < graph.kb_vocab.size(); ++i) {
    kb_index[graph.kb_vocab[i]] = static_cast<int>(i);
  }
  for (const std::string& rendered : order) {
    std::vector<GraphEdge> row;
    double sum = 0.0;
    for (const RawEdge& e : by_textual.at(rendered)) {
      row.push_back({kb_index.at(e.kb), e.count, e.weight});
      sum += e.weight;
    }
    std::sort(row.begin(), row.end(),
              [](const GraphEdge& a, const GraphEdge& b) { return a.kb < b.kb; });
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw Error("graph row for \"" + rendered + "\" sums to " + fmt_g17(sum));
    }
    graph.textual_vocab.push_back(rendered);
    graph.rows.push_back(std::move(row));
  }
  return graph;
}

}  // namespace glore
