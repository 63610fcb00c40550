#include "glore/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace glore {

namespace {

constexpr double kLayerNormEps = 1e-6;

std::string element_string(const PathElement& e) {
  if (e.kind == PathElement::Kind::lexical) return e.text;
  if (e.direction == DepDirection::up) return "<-" + e.text + ">";
  return "<" + e.text + ">";
}

bool is_lexical_token(const std::string& token) {
  return token.empty() || token.front() != '<' || token.back() != '>';
}

}  // namespace

std::string encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::transformer ? "transformer" : "recurrent";
}

EncoderKind encoder_kind_from_name(const std::string& name) {
  if (name == "transformer") return EncoderKind::transformer;
  if (name == "recurrent") return EncoderKind::recurrent;
  throw Error("unknown encoder kind: " + name);
}

void EncoderConfig::validate() const {
  if (d_model <= 0 || ffn_dim <= 0 || z_dim <= 0 || max_len <= 0) {
    throw Error("encoder config: dimensions must be positive");
  }
  if (layer_count < 1 || head_count < 1) {
    throw Error("encoder config: layer and head counts must be at least 1");
  }
  if (d_model % head_count != 0) {
    throw Error("encoder config: d_model must be divisible by head_count");
  }
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  int id = static_cast<int>(id_to_token.size());
  id_to_token.push_back(token);
  token_to_id.emplace(token, id);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? unk_id : it->second;
}

Vocab build_vocab(const RelationGraph& graph) {
  if (graph.row_count() == 0) throw Error("build_vocab: empty relation graph");
  Vocab vocab;
  for (const std::string& rendered : graph.textual_vocab) {
    for (const PathElement& e : parse_relation(rendered).elements) {
      vocab.add(element_string(e));
    }
  }
  return vocab;
}

Tensor& EncoderParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

const Tensor& EncoderParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

namespace {

void load_pretrained_rows(EncoderParams& params, const Vocab& vocab, int d_model,
                          const std::string& path, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pretrained vector file: " + path);
  Tensor& embed = params.at("embed");
  Tensor projection;  // built on first use when file dim != d_model
  int file_dim = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> parts = split_ws(line);
    if (parts.size() < 2) {
      throw Error("pretrained vectors line " + std::to_string(line_no) + ": malformed");
    }
    int dim = static_cast<int>(parts.size()) - 1;
    if (file_dim == -1) {
      file_dim = dim;
    } else if (dim != file_dim) {
      throw Error("pretrained vectors line " + std::to_string(line_no) +
                  ": dimension " + std::to_string(dim) + " != " + std::to_string(file_dim));
    }
    const std::string& token = parts[0];
    if (!is_lexical_token(token)) continue;  // edge tokens stay randomly initialized
    auto it = vocab.token_to_id.find(token);
    if (it == vocab.token_to_id.end()) continue;
    std::vector<double> vec(file_dim);
    for (int i = 0; i < file_dim; ++i) {
      try {
        vec[i] = std::stod(parts[i + 1]);
      } catch (const std::exception&) {
        throw Error("pretrained vectors line " + std::to_string(line_no) + ": bad number");
      }
    }
    if (file_dim == d_model) {
      for (int j = 0; j < d_model; ++j) embed(it->second, j) = vec[j];
    } else {
      if (projection.size() == 0) {
        Rng proj_rng(seed ^ 0x9e3779b97f4a7c15ull);
        projection = uniform_init(file_dim, d_model, file_dim, proj_rng);
      }
      for (int j = 0; j < d_model; ++j) {
        double acc = 0.0;
        for (int i = 0; i < file_dim; ++i) acc += vec[i] * projection(i, j);
        embed(it->second, j) = acc;
      }
    }
  }
}

}  // namespace

EncoderParams init_params(const Vocab& vocab, const EncoderConfig& config, int kb_count,
                          uint64_t seed, const std::string& pretrained_path) {
  config.validate();
  if (kb_count <= 0) throw Error("init_params: kb_count must be positive");
  EncoderParams params;
  Rng rng(seed);
  int d = config.d_model;

  auto matrix = [&](const std::string& name, int rows, int cols) {
    params.tensors.emplace(name, uniform_init(rows, cols, rows, rng));
  };
  auto bias = [&](const std::string& name, int cols) {
    params.tensors.emplace(name, Tensor::zeros(1, cols));
  };
  auto norm = [&](const std::string& name, int cols) {
    params.tensors.emplace(name + ".g", Tensor::ones(1, cols));
    params.tensors.emplace(name + ".b", Tensor::zeros(1, cols));
  };

  matrix("embed", vocab.size(), d);
  if (config.kind == EncoderKind::transformer) {
    for (int l = 0; l < config.layer_count; ++l) {
      std::string p = "enc" + std::to_string(l) + ".";
      for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) matrix(p + w, d, d);
      for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) bias(p + b, d);
      norm(p + "ln1", d);
      matrix(p + "ffn.w1", d, config.ffn_dim);
      bias(p + "ffn.b1", config.ffn_dim);
      matrix(p + "ffn.w2", config.ffn_dim, d);
      bias(p + "ffn.b2", d);
      norm(p + "ln2", d);
    }
  } else {
    for (const char* w : {"gru.wz", "gru.wr", "gru.wh", "gru.uz", "gru.ur", "gru.uh"}) {
      matrix(w, d, d);
    }
    for (const char* b : {"gru.bz", "gru.br", "gru.bh"}) bias(b, d);
  }
  matrix("pool.w", d, config.z_dim);
  bias("pool.b", config.z_dim);
  matrix("out.w", config.z_dim, kb_count);
  bias("out.b", kb_count);

  if (!pretrained_path.empty()) {
    load_pretrained_rows(params, vocab, d, pretrained_path, seed);
  }
  return params;
}

std::vector<int> relation_token_ids(const TextualRelation& t, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(t.elements.size());
  for (const PathElement& e : t.elements) ids.push_back(vocab.id(element_string(e)));
  return ids;
}

Tensor sinusoidal_positions(int max_len, int d_model) {
  Tensor pe(max_len, d_model);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int j = 0; j < d_model; ++j) {
      double exponent = static_cast<double>(j - (j % 2)) / d_model;
      double angle = pos / std::pow(10000.0, exponent);
      pe(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

std::unordered_map<std::string, Node*> register_params(Tape& tape, const EncoderParams& params) {
  std::unordered_map<std::string, Node*> nodes;
  for (const auto& [name, tensor] : params.tensors) {
    nodes.emplace(name, tape.input(tensor));
  }
  return nodes;
}

namespace {

Node* at(const std::unordered_map<std::string, Node*>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw Error("missing parameter node: " + name);
  return it->second;
}

Node* affine(Tape& t, Node* x, Node* w, Node* b) {
  return t.add_rowvec(t.matmul(x, w), b);
}

Node* transformer_stack(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                        const EncoderConfig& cfg, const std::vector<int>& ids) {
  int L = static_cast<int>(ids.size());
  int d = cfg.d_model;
  int dh = d / cfg.head_count;
  Node* x = tape.gather_rows(at(p, "embed"), ids);
  x = tape.scale(x, std::sqrt(static_cast<double>(d)));
  Tensor pe = sinusoidal_positions(L, d);
  x = tape.add_const(x, pe);
  for (int l = 0; l < cfg.layer_count; ++l) {
    std::string pre = "enc" + std::to_string(l) + ".";
    Node* q = affine(tape, x, at(p, pre + "attn.wq"), at(p, pre + "attn.bq"));
    Node* k = affine(tape, x, at(p, pre + "attn.wk"), at(p, pre + "attn.bk"));
    Node* v = affine(tape, x, at(p, pre + "attn.wv"), at(p, pre + "attn.bv"));
    std::vector<Node*> heads;
    for (int h = 0; h < cfg.head_count; ++h) {
      Node* qh = tape.col_slice(q, h * dh, (h + 1) * dh);
      Node* kh = tape.col_slice(k, h * dh, (h + 1) * dh);
      Node* vh = tape.col_slice(v, h * dh, (h + 1) * dh);
      Node* scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
      heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    Node* attn = heads.size() == 1 ? heads[0] : tape.concat_cols(heads);
    attn = affine(tape, attn, at(p, pre + "attn.wo"), at(p, pre + "attn.bo"));
    x = tape.layer_norm_rows(tape.add(x, attn), at(p, pre + "ln1.g"), at(p, pre + "ln1.b"),
                             kLayerNormEps);
    Node* hidden = tape.relu(affine(tape, x, at(p, pre + "ffn.w1"), at(p, pre + "ffn.b1")));
    Node* ffn = affine(tape, hidden, at(p, pre + "ffn.w2"), at(p, pre + "ffn.b2"));
    x = tape.layer_norm_rows(tape.add(x, ffn), at(p, pre + "ln2.g"), at(p, pre + "ln2.b"),
                             kLayerNormEps);
  }
  return tape.mean_rows(x);
}

Node* recurrent_stack(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                      const EncoderConfig& cfg, const std::vector<int>& ids) {
  Node* h = tape.input(Tensor::zeros(1, cfg.d_model));
  Node* ones = tape.input(Tensor::ones(1, cfg.d_model));
  for (int id : ids) {
    Node* x = tape.gather_rows(at(p, "embed"), {id});
    Node* zg = tape.sigmoid(tape.add_rowvec(
        tape.add(tape.matmul(x, at(p, "gru.wz")), tape.matmul(h, at(p, "gru.uz"))),
        at(p, "gru.bz")));
    Node* rg = tape.sigmoid(tape.add_rowvec(
        tape.add(tape.matmul(x, at(p, "gru.wr")), tape.matmul(h, at(p, "gru.ur"))),
        at(p, "gru.br")));
    Node* cand = tape.tanh(tape.add_rowvec(
        tape.add(tape.matmul(x, at(p, "gru.wh")), tape.matmul(tape.mul(rg, h), at(p, "gru.uh"))),
        at(p, "gru.bh")));
    h = tape.add(tape.mul(tape.sub(ones, zg), h), tape.mul(zg, cand));
  }
  return h;  // final-state pooling
}

}  // namespace

Node* encoder_z(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                const EncoderConfig& config, const std::vector<int>& ids) {
  if (ids.empty()) throw Error("encode: empty relation");
  if (static_cast<int>(ids.size()) > config.max_len) {
    throw Error("encode: relation length " + std::to_string(ids.size()) +
                " exceeds max length " + std::to_string(config.max_len));
  }
  Node* pooled = config.kind == EncoderKind::transformer
                     ? transformer_stack(tape, p, config, ids)
                     : recurrent_stack(tape, p, config, ids);
  return affine(tape, pooled, at(p, "pool.w"), at(p, "pool.b"));
}

Node* encoder_logits(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                     const EncoderConfig& config, const std::vector<int>& ids) {
  Node* z = encoder_z(tape, p, config, ids);
  return affine(tape, z, at(p, "out.w"), at(p, "out.b"));
}

std::vector<double> encode(const TextualRelation& t, const EncoderParams& params,
                           const EncoderConfig& config, const Vocab& vocab) {
  Tape tape;
  auto p = register_params(tape, params);
  Node* z = encoder_z(tape, p, config, relation_token_ids(t, vocab));
  return z->val.v;
}

std::vector<double> predict(const TextualRelation& t, const EncoderParams& params,
                            const EncoderConfig& config, const Vocab& vocab) {
  Tape tape;
  auto p = register_params(tape, params);
  Node* logits = encoder_logits(tape, p, config, relation_token_ids(t, vocab));
  return softmax(logits->val.v);
}

std::vector<GraphRow> make_rows(const RelationGraph& graph, const Vocab& vocab,
                                const EncoderConfig& config) {
  std::vector<GraphRow> rows;
  rows.reserve(graph.row_count());
  for (size_t i = 0; i < graph.row_count(); ++i) {
    GraphRow row;
    row.rendered = graph.textual_vocab[i];
    row.ids = relation_token_ids(parse_relation(row.rendered), vocab);
    if (static_cast<int>(row.ids.size()) > config.max_len) {
      throw Error("graph row \"" + row.rendered + "\" exceeds encoder max length");
    }
    for (const GraphEdge& e : graph.rows[i]) row.target.emplace_back(e.kb, e.weight);
    rows.push_back(std::move(row));
  }
  return rows;
}

BatchGrads batch_loss(const std::vector<GraphRow>& batch, const EncoderParams& params,
                      const EncoderConfig& config) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  Tape tape;
  auto p = register_params(tape, params);
  Node* acc = nullptr;
  for (const GraphRow& row : batch) {
    Node* ce = tape.cross_entropy_logits(encoder_logits(tape, p, config, row.ids), row.target);
    acc = acc ? tape.add(acc, ce) : ce;
  }
  Node* loss = tape.scale(acc, 1.0 / static_cast<double>(batch.size()));
  tape.backward(loss);
  BatchGrads out;
  out.loss = loss->val.v[0];
  for (const auto& [name, node] : p) out.grads.emplace(name, node->grad);
  return out;
}

double dataset_loss(const std::vector<GraphRow>& rows, const EncoderParams& params,
                    const EncoderConfig& config) {
  if (rows.empty()) throw Error("dataset_loss: no rows");
  double total = 0.0;
  size_t i = 0;
  while (i < rows.size()) {
    Tape tape;
    auto p = register_params(tape, params);
    for (size_t j = i; j < std::min(rows.size(), i + 64); ++j) {
      Node* ce =
          tape.cross_entropy_logits(encoder_logits(tape, p, config, rows[j].ids), rows[j].target);
      total += ce->val.v[0];
    }
    i += 64;
  }
  return total / static_cast<double>(rows.size());
}

TrainResult train(const RelationGraph& train_graph, const RelationGraph& val_graph,
                  EncoderParams initial, const Vocab& vocab, const EncoderConfig& config,
                  const TrainConfig& tc,
                  const std::function<void(int, const std::vector<std::string>&)>& audit) {
  if (tc.max_epochs < 1) throw Error("train: max_epochs must be at least 1");
  if (tc.batch_size < 1) throw Error("train: batch_size must be at least 1");
  std::vector<GraphRow> train_rows = make_rows(train_graph, vocab, config);
  std::vector<GraphRow> val_rows = make_rows(val_graph, vocab, config);
  if (train_rows.empty() || val_rows.empty()) throw Error("train: empty train or validation set");

  AdamConfig adam;
  adam.base_lr = tc.base_lr;
  adam.warmup_steps = tc.warmup_steps;
  adam.schedule_dim = config.d_model;
  AdamOptimizer opt(adam);

  TrainResult result;
  result.best.config = config;
  result.best.vocab = vocab;
  result.best.kb_vocab = train_graph.kb_vocab;
  double best_val = std::numeric_limits<double>::infinity();

  Rng rng(tc.seed);
  std::vector<size_t> order(train_rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<std::string> used;
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += tc.batch_size) {
      size_t stop = std::min(order.size(), start + tc.batch_size);
      std::vector<GraphRow> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(train_rows[order[i]]);
        used.push_back(train_rows[order[i]].rendered);
      }
      BatchGrads bg = batch_loss(batch, initial, config);
      if (!std::isfinite(bg.loss)) {
        throw Error("training diverged at epoch " + std::to_string(epoch));
      }
      opt.step(initial.tensors, bg.grads);
      loss_sum += bg.loss * static_cast<double>(batch.size());
    }
    double train_loss = loss_sum / static_cast<double>(train_rows.size());
    double val_loss = dataset_loss(val_rows, initial, config);
    if (!std::isfinite(val_loss)) {
      throw Error("training diverged at epoch " + std::to_string(epoch));
    }
    result.log.push_back({epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      result.best.params = initial;
      result.best.epoch = epoch;
      result.best.val_loss = val_loss;
    }
    if (audit) audit(epoch, used);
  }
  return result;
}

std::string Checkpoint::to_json() const {
  nlohmann::json j;
  j["format"] = "glore-checkpoint";
  j["version"] = 1;
  j["config"] = {{"d_model", config.d_model},
                 {"layer_count", config.layer_count},
                 {"head_count", config.head_count},
                 {"ffn_dim", config.ffn_dim},
                 {"z_dim", config.z_dim},
                 {"max_len", config.max_len},
                 {"kind", encoder_kind_name(config.kind)}};
  j["vocab"] = vocab.id_to_token;
  j["kb_vocab"] = kb_vocab;
  j["epoch"] = epoch;
  j["val_loss"] = val_loss;
  nlohmann::json jp = nlohmann::json::object();
  for (const auto& [name, tensor] : params.tensors) {
    jp[name] = {{"rows", tensor.rows}, {"cols", tensor.cols}, {"data", tensor.v}};
  }
  j["params"] = std::move(jp);
  return j.dump();
}

Checkpoint Checkpoint::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "glore-checkpoint") throw Error("not a checkpoint file");
  if (j.value("version", 0) != 1) throw Error("unsupported checkpoint version");
  Checkpoint ckpt;
  const auto& jc = j.at("config");
  ckpt.config.d_model = jc.at("d_model").get<int>();
  ckpt.config.layer_count = jc.at("layer_count").get<int>();
  ckpt.config.head_count = jc.at("head_count").get<int>();
  ckpt.config.ffn_dim = jc.at("ffn_dim").get<int>();
  ckpt.config.z_dim = jc.at("z_dim").get<int>();
  ckpt.config.max_len = jc.at("max_len").get<int>();
  ckpt.config.kind = encoder_kind_from_name(jc.at("kind").get<std::string>());
  ckpt.vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
  ckpt.vocab.token_to_id.clear();
  for (size_t i = 0; i < ckpt.vocab.id_to_token.size(); ++i) {
    ckpt.vocab.token_to_id.emplace(ckpt.vocab.id_to_token[i], static_cast<int>(i));
  }
  ckpt.kb_vocab = j.at("kb_vocab").get<std::vector<std::string>>();
  ckpt.epoch = j.at("epoch").get<int>();
  ckpt.val_loss = j.at("val_loss").get<double>();
  for (const auto& [name, jt] : j.at("params").items()) {
    Tensor t(jt.at("rows").get<int>(), jt.at("cols").get<int>());
    t.v = jt.at("data").get<std::vector<double>>();
    if (t.size() != static_cast<long long>(t.v.size())) {
      throw Error("checkpoint tensor " + name + " has inconsistent shape");
    }
    ckpt.params.tensors.emplace(name, std::move(t));
  }
  return ckpt;
}

Embedder::Embedder(const Checkpoint& ckpt) : ckpt_(ckpt) { refresh(); }

void Embedder::refresh() {
  tape_.clear();
  nodes_ = register_params(tape_, ckpt_.params);
  uses_ = 0;
}

std::vector<double> Embedder::encode(const TextualRelation& t) {
  if (++uses_ > 128) refresh();
  Node* z = encoder_z(tape_, nodes_, ckpt_.config, relation_token_ids(t, ckpt_.vocab));
  return z->val.v;
}

std::vector<double> Embedder::encode(const std::string& rendered) {
  return encode(parse_relation(rendered));
}

std::vector<double> Embedder::predict(const TextualRelation& t) {
  if (++uses_ > 128) refresh();
  Node* logits = encoder_logits(tape_, nodes_, ckpt_.config, relation_token_ids(t, ckpt_.vocab));
  return softmax(logits->val.v);
}

void export_embeddings(const std::vector<std::string>& rendered, const Checkpoint& ckpt,
                       std::ostream& out, const std::string& meta, long* skipped) {
  if (!meta.empty()) {
    out << meta;
    if (meta.back() != '\n') out << '\n';
  }
  out << "#relation\tz\n";
  Embedder embedder(ckpt);
  long skip = 0;
  for (const std::string& r : rendered) {
    TextualRelation rel = parse_relation(r);
    if (relation_length(rel) > ckpt.config.max_len) {
      ++skip;
      continue;
    }
    std::vector<double> z = embedder.encode(rel);
    out << r << '\t';
    for (size_t i = 0; i < z.size(); ++i) {
      if (i) out << ' ';
      out << fmt_g17(z[i]);
    }
    out << '\n';
  }
  if (skipped) *skipped = skip;
}

}  // namespace glore
