#include "glore/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "glore/tensor.hpp"

namespace glore {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double na = vnorm(a), nb = vnorm(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine_similarity: zero vector");
  return vdot(a, b) / (na * nb);
}

int EmbeddingTable::find(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

EmbeddingTable EmbeddingTable::load(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  long line_no = 0;
  size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 2) {
      throw Error("embedding line " + std::to_string(line_no) + ": expected 2 columns");
    }
    std::vector<double> vec;
    for (const std::string& s : split_ws(cols[1])) {
      try {
        vec.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw Error("embedding line " + std::to_string(line_no) + ": bad number");
      }
    }
    if (vec.empty()) throw Error("embedding line " + std::to_string(line_no) + ": empty vector");
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim) {
      throw Error("embedding line " + std::to_string(line_no) + ": inconsistent dimension");
    }
    table.names.push_back(cols[0]);
    table.vectors.push_back(std::move(vec));
  }
  return table;
}

std::vector<Neighbor> nearest_neighbors(const std::string& query_rendered,
                                        const std::vector<double>& query_z,
                                        const EmbeddingTable& table, int k) {
  if (k < 1) throw Error("nearest_neighbors: k must be at least 1");
  if (table.names.empty()) throw Error("nearest_neighbors: empty embedding table");
  std::vector<Neighbor> all;
  for (size_t i = 0; i < table.names.size(); ++i) {
    if (table.names[i] == query_rendered) continue;
    all.push_back({table.names[i], cosine_similarity(query_z, table.vectors[i])});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.name < b.name;
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

std::map<std::string, RowLabel> auto_label(const RelationGraph& graph) {
  std::map<std::string, RowLabel> out;
  for (size_t i = 0; i < graph.row_count(); ++i) {
    RowLabel rl;
    int best = -1;
    for (const GraphEdge& e : graph.rows[i]) {
      if (e.weight > rl.dominant_weight) {
        rl.dominant_weight = e.weight;
        best = e.kb;
      }
    }
    if (best >= 0 && rl.dominant_weight > 0.5) rl.label = graph.kb_vocab[best];
    out.emplace(graph.textual_vocab[i], std::move(rl));
  }
  return out;
}

void write_labeled_embeddings(std::ostream& out, const std::vector<LabeledEmbedding>& rows,
                              const std::string& meta) {
  if (!meta.empty()) {
    out << meta;
    if (meta.back() != '\n') out << '\n';
  }
  out << "#relation\tlabel\tdominant_weight\tz\n";
  for (const LabeledEmbedding& row : rows) {
    out << row.rendered << '\t' << (row.label ? *row.label : "") << '\t'
        << fmt_g17(row.dominant_weight) << '\t';
    for (size_t i = 0; i < row.z.size(); ++i) {
      if (i) out << ' ';
      out << fmt_g17(row.z[i]);
    }
    out << '\n';
  }
}

std::string neighbor_report(const std::vector<Neighbor>& neighbors) {
  std::string out = "rank\tsimilarity\trelation\n";
  for (size_t i = 0; i < neighbors.size(); ++i) {
    out += std::to_string(i + 1) + "\t" + fmt_fixed(neighbors[i].similarity, 4) + "\t" +
           neighbors[i].name + "\n";
  }
  return out;
}

}  // namespace glore
