#include "glore/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

#include "glore/autodiff.hpp"
#include "glore/optim.hpp"

namespace glore {

std::vector<Bag> load_bags(std::istream& in) {
  std::vector<Bag> bags;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 5 && cols.size() != 6) {
      throw Error("bag line " + std::to_string(line_no) + ": expected 5 or 6 columns, got " +
                  std::to_string(cols.size()));
    }
    Bag bag;
    bag.pair_id = cols[0];
    bag.e1 = cols[1];
    bag.e2 = cols[2];
    if (!cols[3].empty()) bag.gold = split(cols[3], ',');
    if (cols[4].empty()) {
      throw Error("bag line " + std::to_string(line_no) + ": no contextual relations");
    }
    size_t start = 0;
    while (start <= cols[4].size()) {
      size_t pos = cols[4].find("||", start);
      if (pos == std::string::npos) {
        bag.relations.push_back(cols[4].substr(start));
        break;
      }
      bag.relations.push_back(cols[4].substr(start, pos - start));
      start = pos + 2;
    }
    if (cols.size() == 6 && !cols[5].empty()) {
      for (const std::string& s : split(cols[5], ',')) {
        try {
          bag.base_scores.push_back(std::stod(s));
        } catch (const std::exception&) {
          throw Error("bag line " + std::to_string(line_no) + ": bad base score");
        }
      }
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

std::string bags_to_tsv(const std::vector<Bag>& bags) {
  std::string out;
  for (const Bag& bag : bags) {
    out += bag.pair_id + "\t" + bag.e1 + "\t" + bag.e2 + "\t" + join(bag.gold, ",") + "\t";
    out += join(bag.relations, "||");
    if (!bag.base_scores.empty()) {
      out += "\t";
      for (size_t i = 0; i < bag.base_scores.size(); ++i) {
        if (i) out += ",";
        out += fmt_g17(bag.base_scores[i]);
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<double> embed_pair(const Bag& bag, Embedder& embedder, int max_len) {
  std::vector<double> mean;
  int used = 0;
  for (const std::string& rendered : bag.relations) {
    TextualRelation rel = parse_relation(rendered);
    if (relation_length(rel) > max_len) continue;
    std::vector<double> z = embedder.encode(rel);
    if (mean.empty()) mean.assign(z.size(), 0.0);
    for (size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
    ++used;
  }
  if (used == 0) throw Error("bag " + bag.pair_id + ": no encodable relations");
  for (double& x : mean) x /= static_cast<double>(used);
  return mean;
}

ReHead train_re_head(const std::vector<Bag>& bags, const Checkpoint& ckpt,
                     const std::vector<std::string>& relations, const ReHeadConfig& config) {
  if (bags.empty()) throw Error("train_re_head: no bags");
  if (relations.empty()) throw Error("train_re_head: no target relations");
  int m = static_cast<int>(relations.size());
  int zd = ckpt.config.z_dim;
  std::map<std::string, int> rel_index;
  for (int i = 0; i < m; ++i) rel_index[relations[i]] = i;

  Embedder embedder(ckpt);
  Tensor features(static_cast<int>(bags.size()), zd);
  Tensor targets(static_cast<int>(bags.size()), m);
  for (size_t i = 0; i < bags.size(); ++i) {
    std::vector<double> z = embed_pair(bags[i], embedder, ckpt.config.max_len);
    for (int j = 0; j < zd; ++j) features(static_cast<int>(i), j) = z[j];
    for (const std::string& g : bags[i].gold) {
      auto it = rel_index.find(g);
      if (it != rel_index.end()) targets(static_cast<int>(i), it->second) = 1.0;
    }
  }

  Rng rng(config.seed);
  ParamMap params;
  params.emplace("w", uniform_init(zd, m, zd, rng));
  params.emplace("b", Tensor::zeros(1, m));

  AdamConfig adam;
  adam.base_lr = config.lr;
  adam.schedule_dim = 0;
  AdamOptimizer opt(adam);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    Node* x = tape.input(features);
    Node* w = tape.input(params.at("w"));
    Node* b = tape.input(params.at("b"));
    Node* loss = tape.bce_logits(tape.add_rowvec(tape.matmul(x, w), b), targets);
    tape.backward(loss);
    if (!std::isfinite(loss->val.v[0])) {
      throw Error("re head training diverged at epoch " + std::to_string(epoch + 1));
    }
    ParamMap grads;
    grads.emplace("w", w->grad);
    grads.emplace("b", b->grad);
    opt.step(params, grads);
  }

  ReHead head;
  head.w = params.at("w");
  head.b = params.at("b");
  head.relations = relations;
  return head;
}

std::vector<double> re_head_scores(const ReHead& head, const std::vector<double>& avg_z) {
  if (static_cast<int>(avg_z.size()) != head.w.rows) {
    throw Error("re_head_scores: embedding dimension mismatch");
  }
  std::vector<double> scores(head.w.cols);
  for (int j = 0; j < head.w.cols; ++j) {
    double acc = head.b(0, j);
    for (int i = 0; i < head.w.rows; ++i) acc += avg_z[i] * head.w(i, j);
    scores[j] = 1.0 / (1.0 + std::exp(-acc));
  }
  return scores;
}

std::vector<double> normalize_scores(const std::vector<double>& scores) {
  double sum = 0.0;
  for (double s : scores) {
    if (s < 0.0) throw Error("normalize_scores: negative score");
    sum += s;
  }
  if (sum <= 0.0) {
    return std::vector<double>(scores.size(), 1.0 / static_cast<double>(scores.size()));
  }
  std::vector<double> out = scores;
  for (double& s : out) s /= sum;
  return out;
}

std::vector<double> ensemble_scores(const std::vector<double>& base,
                                    const std::vector<double>& emb, double alpha) {
  if (base.size() != emb.size()) throw Error("ensemble_scores: length mismatch");
  if (alpha < 0.0 || alpha > 1.0) throw Error("ensemble_scores: alpha outside [0,1]");
  std::vector<double> out(base.size());
  for (size_t i = 0; i < base.size(); ++i) out[i] = (1.0 - alpha) * base[i] + alpha * emb[i];
  return out;
}

std::vector<double> precision_at_n(std::vector<Prediction> predictions,
                                   const std::set<std::pair<std::string, std::string>>& gold,
                                   const std::vector<int>& cutoffs,
                                   std::vector<bool>* truncated) {
  std::sort(predictions.begin(), predictions.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
    return a.relation < b.relation;
  });
  std::vector<long long> hits_prefix(predictions.size() + 1, 0);
  for (size_t i = 0; i < predictions.size(); ++i) {
    bool hit = gold.count({predictions[i].pair_id, predictions[i].relation}) > 0;
    hits_prefix[i + 1] = hits_prefix[i] + (hit ? 1 : 0);
  }
  std::vector<double> out;
  if (truncated) truncated->clear();
  for (int n : cutoffs) {
    if (n <= 0) throw Error("precision_at_n: cutoff must be positive");
    size_t m = std::min<size_t>(static_cast<size_t>(n), predictions.size());
    if (truncated) truncated->push_back(m < static_cast<size_t>(n));
    out.push_back(m == 0 ? 0.0 : static_cast<double>(hits_prefix[m]) / static_cast<double>(m));
  }
  return out;
}

// ---- knowledge base completion ----

bool KbcDataset::has_mentions(const std::string& e1, const std::string& e2) const {
  return mention_vecs.count({e1, e2}) > 0;
}

void KbcDataset::validate() const {
  std::set<std::string> entity_set(entities.begin(), entities.end());
  std::set<KbTriple> train_set(train.begin(), train.end());
  for (const KbTriple& t : test) {
    if (train_set.count(t)) {
      throw Error("kbc dataset: test triple also in train: " + t.subject + " " + t.relation +
                  " " + t.object);
    }
  }
  for (const auto& [pair, vecs] : mention_vecs) {
    (void)vecs;
    if (!entity_set.count(pair.first) || !entity_set.count(pair.second)) {
      throw Error("kbc dataset: mention pair references unknown entity: " + pair.first + ", " +
                  pair.second);
    }
  }
}

namespace {

std::vector<KbTriple> read_kbc_triples(std::istream& in, const char* what) {
  std::vector<KbTriple> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3) {
      throw Error(std::string(what) + " line " + std::to_string(line_no) +
                  ": expected 3 columns, got " + std::to_string(cols.size()));
    }
    out.push_back({cols[0], cols[1], cols[2]});
  }
  return out;
}

}  // namespace

KbcDataset load_kbc_dataset(std::istream& train, std::istream& test, std::istream* mentions,
                            const Checkpoint* ckpt) {
  KbcDataset ds;
  ds.train = read_kbc_triples(train, "kbc train");
  ds.test = read_kbc_triples(test, "kbc test");
  std::set<std::string> ents, rels;
  for (const auto& t : ds.train) {
    ents.insert(t.subject);
    ents.insert(t.object);
    rels.insert(t.relation);
  }
  for (const auto& t : ds.test) {
    ents.insert(t.subject);
    ents.insert(t.object);
    rels.insert(t.relation);
  }
  ds.entities.assign(ents.begin(), ents.end());
  ds.relations.assign(rels.begin(), rels.end());
  if (mentions) {
    if (!ckpt) throw Error("mention file given without a checkpoint to embed it");
    Embedder embedder(*ckpt);
    std::string line;
    long line_no = 0;
    while (std::getline(*mentions, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty() || line[0] == '#') continue;
      std::vector<std::string> cols = split(line, '\t');
      if (cols.size() != 3) {
        throw Error("mention line " + std::to_string(line_no) + ": expected 3 columns, got " +
                    std::to_string(cols.size()));
      }
      TextualRelation rel = parse_relation(cols[2]);
      if (relation_length(rel) > ckpt->config.max_len) continue;
      ds.mention_vecs[{cols[0], cols[1]}].push_back(embedder.encode(rel));
    }
  }
  ds.validate();
  return ds;
}

std::string kbc_kind_name(KbcKind kind) {
  switch (kind) {
    case KbcKind::distmult: return "distmult";
    case KbcKind::e: return "e";
    case KbcKind::combined: return "combined";
  }
  throw Error("bad kbc kind");
}

KbcKind kbc_kind_from_name(const std::string& name) {
  if (name == "distmult") return KbcKind::distmult;
  if (name == "e") return KbcKind::e;
  if (name == "combined") return KbcKind::combined;
  throw Error("unknown kbc model kind: " + name);
}

double KbcModel::score(int e1, int r, int e2) const {
  const Tensor& ent = tensors.at("ent");
  double total = 0.0;
  if (kind == KbcKind::distmult || kind == KbcKind::combined) {
    const Tensor& rel = tensors.at("dm.rel");
    double s = 0.0;
    // entity product first so the score is exactly symmetric in e1, e2
    for (int d = 0; d < dim; ++d) s += (ent(e1, d) * ent(e2, d)) * rel(r, d);
    total += s;
  }
  if (kind == KbcKind::e || kind == KbcKind::combined) {
    const Tensor& rs = tensors.at("e.rel_subj");
    const Tensor& ro = tensors.at("e.rel_obj");
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += ent(e1, d) * rs(r, d) + ent(e2, d) * ro(r, d);
    total += s;
  }
  return total;
}

namespace {

std::vector<double> project(const Tensor& w, const Tensor& b, const std::vector<double>& z) {
  std::vector<double> out(w.cols);
  for (int j = 0; j < w.cols; ++j) {
    double acc = b(0, j);
    for (int i = 0; i < w.rows; ++i) acc += z[i] * w(i, j);
    out[j] = acc;
  }
  return out;
}

}  // namespace

double KbcModel::score_mention(int e1, const std::vector<double>& z, int e2) const {
  if (static_cast<int>(z.size()) != z_dim) throw Error("score_mention: embedding size mismatch");
  const Tensor& ent = tensors.at("ent");
  double total = 0.0;
  if (kind == KbcKind::distmult || kind == KbcKind::combined) {
    std::vector<double> rv = project(tensors.at("dm.proj.w"), tensors.at("dm.proj.b"), z);
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += (ent(e1, d) * ent(e2, d)) * rv[d];
    total += s;
  }
  if (kind == KbcKind::e || kind == KbcKind::combined) {
    std::vector<double> rs = project(tensors.at("e.proj_subj.w"), tensors.at("e.proj_subj.b"), z);
    std::vector<double> ro = project(tensors.at("e.proj_obj.w"), tensors.at("e.proj_obj.b"), z);
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += ent(e1, d) * rs[d] + ent(e2, d) * ro[d];
    total += s;
  }
  return total;
}

double score_triple(const KbcModel& model, const std::string& e1, const std::string& r,
                    const std::string& e2) {
  auto i1 = model.entity_index.find(e1);
  auto i2 = model.entity_index.find(e2);
  if (i1 == model.entity_index.end() || i2 == model.entity_index.end()) {
    throw Error("score_triple: unknown entity " + (i1 == model.entity_index.end() ? e1 : e2));
  }
  auto ir = model.relation_index.find(r);
  if (ir == model.relation_index.end()) throw Error("score_triple: unknown relation " + r);
  return model.score(i1->second, ir->second, i2->second);
}

double score_triple_mention(const KbcModel& model, const std::string& e1,
                            const std::vector<double>& z, const std::string& e2) {
  auto i1 = model.entity_index.find(e1);
  auto i2 = model.entity_index.find(e2);
  if (i1 == model.entity_index.end() || i2 == model.entity_index.end()) {
    throw Error("score_triple: unknown entity " + (i1 == model.entity_index.end() ? e1 : e2));
  }
  return model.score_mention(i1->second, z, i2->second);
}

KbcModel train_kbc(const KbcDataset& dataset, const KbcConfig& config) {
  if (dataset.train.empty()) throw Error("train_kbc: empty train set");
  dataset.validate();

  KbcModel model;
  model.kind = config.kind;
  model.dim = config.dim;
  model.entities = dataset.entities;
  model.relations = dataset.relations;
  for (size_t i = 0; i < model.entities.size(); ++i) {
    model.entity_index[model.entities[i]] = static_cast<int>(i);
  }
  for (size_t i = 0; i < model.relations.size(); ++i) {
    model.relation_index[model.relations[i]] = static_cast<int>(i);
  }
  int ne = static_cast<int>(model.entities.size());
  int nr = static_cast<int>(model.relations.size());

  // one training example per KB triple plus, when enabled, one per mention
  struct Example {
    int e1;
    int e2;
    int r;                         // -1 for mention examples
    const std::vector<double>* z;  // null for KB triples
  };
  std::vector<Example> examples;
  for (const KbTriple& t : dataset.train) {
    examples.push_back({model.entity_index.at(t.subject), model.entity_index.at(t.object),
                        model.relation_index.at(t.relation), nullptr});
  }
  model.z_dim = 0;
  for (const auto& [pair, vecs] : dataset.mention_vecs) {
    for (const auto& z : vecs) {
      if (model.z_dim == 0) model.z_dim = static_cast<int>(z.size());
      if (model.z_dim != static_cast<int>(z.size())) {
        throw Error("train_kbc: inconsistent mention embedding dimensions");
      }
      if (config.use_mentions) {
        examples.push_back(
            {model.entity_index.at(pair.first), model.entity_index.at(pair.second), -1, &z});
      }
    }
  }
  if (model.z_dim == 0) model.z_dim = 1;  // keeps projection shapes well-formed

  Rng rng(config.seed);
  // projections draw from their own stream so the entity and relation
  // initialization does not depend on the mention embedding dimension
  Rng proj_rng(config.seed ^ 0x70726f6aull);
  bool dm = config.kind == KbcKind::distmult || config.kind == KbcKind::combined;
  bool me = config.kind == KbcKind::e || config.kind == KbcKind::combined;
  model.tensors.emplace("ent", uniform_init(ne, config.dim, config.dim, rng));
  if (dm) {
    model.tensors.emplace("dm.rel", uniform_init(nr, config.dim, config.dim, rng));
    model.tensors.emplace("dm.proj.w",
                          uniform_init(model.z_dim, config.dim, model.z_dim, proj_rng));
    model.tensors.emplace("dm.proj.b", Tensor::zeros(1, config.dim));
  }
  if (me) {
    model.tensors.emplace("e.rel_subj", uniform_init(nr, config.dim, config.dim, rng));
    model.tensors.emplace("e.rel_obj", uniform_init(nr, config.dim, config.dim, rng));
    model.tensors.emplace("e.proj_subj.w",
                          uniform_init(model.z_dim, config.dim, model.z_dim, proj_rng));
    model.tensors.emplace("e.proj_subj.b", Tensor::zeros(1, config.dim));
    model.tensors.emplace("e.proj_obj.w",
                          uniform_init(model.z_dim, config.dim, model.z_dim, proj_rng));
    model.tensors.emplace("e.proj_obj.b", Tensor::zeros(1, config.dim));
  }

  AdamConfig adam;
  adam.base_lr = config.lr;
  adam.schedule_dim = 0;
  AdamOptimizer opt(adam);

  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      Tape tape;
      std::unordered_map<std::string, Node*> p;
      for (const auto& [name, tensor] : model.tensors) p.emplace(name, tape.input(tensor));
      Node* ones_col = nullptr;
      Node* acc = nullptr;
      for (size_t i = start; i < stop; ++i) {
        const Example& ex = examples[order[i]];
        std::vector<int> candidates = {ex.e2};
        for (int k = 0; k < config.negatives; ++k) {
          int neg = static_cast<int>(rng.index(ne));
          while (neg == ex.e2) neg = static_cast<int>(rng.index(ne));
          candidates.push_back(neg);
        }
        int nc = static_cast<int>(candidates.size());
        Node* e1row = tape.gather_rows(p.at("ent"), {ex.e1});
        Node* cand = tape.gather_rows(p.at("ent"), candidates);
        Node* scores = nullptr;
        if (dm) {
          Node* rv = ex.r >= 0
                         ? tape.gather_rows(p.at("dm.rel"), {ex.r})
                         : tape.add_rowvec(tape.matmul(tape.input(Tensor::row_vector(*ex.z)),
                                                       p.at("dm.proj.w")),
                                           p.at("dm.proj.b"));
          Node* q = tape.mul(e1row, rv);
          scores = tape.matmul_nt(cand, q);  // [nc x 1]
        }
        if (me) {
          Node* rs = ex.r >= 0
                         ? tape.gather_rows(p.at("e.rel_subj"), {ex.r})
                         : tape.add_rowvec(tape.matmul(tape.input(Tensor::row_vector(*ex.z)),
                                                       p.at("e.proj_subj.w")),
                                           p.at("e.proj_subj.b"));
          Node* ro = ex.r >= 0
                         ? tape.gather_rows(p.at("e.rel_obj"), {ex.r})
                         : tape.add_rowvec(tape.matmul(tape.input(Tensor::row_vector(*ex.z)),
                                                       p.at("e.proj_obj.w")),
                                           p.at("e.proj_obj.b"));
          if (!ones_col || ones_col->val.rows != nc) {
            ones_col = tape.input(Tensor::ones(nc, 1));
          }
          Node* subj = tape.matmul(ones_col, tape.matmul_nt(e1row, rs));  // broadcast scalar
          Node* obj = tape.matmul_nt(cand, ro);
          Node* es = tape.add(subj, obj);
          scores = scores ? tape.add(scores, es) : es;
        }
        Node* ce = tape.cross_entropy_logits(tape.transpose(scores), {{0, 1.0}});
        acc = acc ? tape.add(acc, ce) : ce;
      }
      Node* loss = tape.scale(acc, 1.0 / static_cast<double>(stop - start));
      tape.backward(loss);
      if (!std::isfinite(loss->val.v[0])) {
        throw Error("kbc training diverged at epoch " + std::to_string(epoch));
      }
      ParamMap grads;
      for (const auto& [name, node] : p) grads.emplace(name, node->grad);
      opt.step(model.tensors, grads);
    }
  }
  return model;
}

long long kbc_rank(const KbcModel& model, const KbcDataset& dataset, const KbTriple& triple) {
  auto gold_it = model.entity_index.find(triple.object);
  if (gold_it == model.entity_index.end()) {
    throw Error("kbc_rank: unknown gold entity " + triple.object);
  }
  int gold = gold_it->second;
  int e1 = model.entity_index.at(triple.subject);
  int r = model.relation_index.at(triple.relation);

  std::set<int> known;  // other correct objects for (subject, relation) are filtered out
  auto collect = [&](const std::vector<KbTriple>& triples) {
    for (const KbTriple& t : triples) {
      if (t.subject == triple.subject && t.relation == triple.relation &&
          t.object != triple.object) {
        auto it = model.entity_index.find(t.object);
        if (it != model.entity_index.end()) known.insert(it->second);
      }
    }
  };
  collect(dataset.train);
  collect(dataset.test);

  double gold_score = model.score(e1, r, gold);
  long long rank = 1;
  for (int o = 0; o < static_cast<int>(model.entities.size()); ++o) {
    if (o == gold || known.count(o)) continue;
    double s = model.score(e1, r, o);
    if (s > gold_score || (s == gold_score && o < gold)) ++rank;
  }
  return rank;
}

KbcReport evaluate_kbc(const KbcModel& model, const KbcDataset& dataset) {
  KbcReport report;
  auto add = [](KbcMetrics& m, long long rank) {
    m.mrr += 1.0 / static_cast<double>(rank);
    if (rank <= 10) m.hits10 += 1.0;
    m.count += 1;
  };
  for (const KbTriple& t : dataset.test) {
    long long rank = kbc_rank(model, dataset, t);
    add(report.overall, rank);
    if (dataset.has_mentions(t.subject, t.object)) {
      add(report.with_mentions, rank);
    } else {
      add(report.without_mentions, rank);
    }
  }
  auto finish = [](KbcMetrics& m) {
    if (m.count > 0) {
      m.mrr = 100.0 * m.mrr / static_cast<double>(m.count);
      m.hits10 = 100.0 * m.hits10 / static_cast<double>(m.count);
    }
  };
  finish(report.overall);
  finish(report.with_mentions);
  finish(report.without_mentions);
  return report;
}

}  // namespace glore
