#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "glore/autodiff.hpp"
#include "glore/optim.hpp"
#include "glore/relgraph.hpp"

namespace glore {

enum class EncoderKind { transformer, recurrent };

std::string encoder_kind_name(EncoderKind kind);
EncoderKind encoder_kind_from_name(const std::string& name);

struct EncoderConfig {
  int d_model = 72;  // divisible by head_count
  int layer_count = 6;
  int head_count = 6;
  int ffn_dim = 256;
  int z_dim = 64;
  int max_len = 16;
  EncoderKind kind = EncoderKind::transformer;

  void validate() const;
};

// Shared id space for lexical tokens and "<-label>"/"<label>" edge tokens;
// ids 0 and 1 are reserved for padding and unknown.
struct Vocab {
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;

  std::vector<std::string> id_to_token = {"<pad>", "<unk>"};
  std::unordered_map<std::string, int> token_to_id = {{"<pad>", 0}, {"<unk>", 1}};

  int add(const std::string& token);
  int id(const std::string& token) const;  // unk_id for unseen tokens
  int size() const { return static_cast<int>(id_to_token.size()); }
  bool operator==(const Vocab& o) const { return id_to_token == o.id_to_token; }
};

// One id per distinct rendered element across the graph's textual relations.
Vocab build_vocab(const RelationGraph& graph);

struct EncoderParams {
  ParamMap tensors;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool operator==(const EncoderParams&) const = default;
};

// Matrices start symmetric-uniform scaled by fan-in, biases at zero, layer
// norm gains at one. Lexical tokens found in the pretrained vector file copy
// their vector, projected through a seeded random map when the file
// dimension differs from d_model.
EncoderParams init_params(const Vocab& vocab, const EncoderConfig& config, int kb_count,
                          uint64_t seed, const std::string& pretrained_path = "");

std::vector<int> relation_token_ids(const TextualRelation& t, const Vocab& vocab);

// Forward builders on an explicit tape; `params` maps tensor names to their
// tape nodes (see register_params).
std::unordered_map<std::string, Node*> register_params(Tape& tape, const EncoderParams& params);
Node* encoder_z(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                const EncoderConfig& config, const std::vector<int>& ids);
Node* encoder_logits(Tape& tape, const std::unordered_map<std::string, Node*>& p,
                     const EncoderConfig& config, const std::vector<int>& ids);

// Sinusoidal position table, [max_len x d_model].
Tensor sinusoidal_positions(int max_len, int d_model);

std::vector<double> encode(const TextualRelation& t, const EncoderParams& params,
                           const EncoderConfig& config, const Vocab& vocab);
std::vector<double> predict(const TextualRelation& t, const EncoderParams& params,
                            const EncoderConfig& config, const Vocab& vocab);

// One training example: a graph row's token ids and its sparse target
// distribution over kb_vocab.
struct GraphRow {
  std::string rendered;
  std::vector<int> ids;
  std::vector<std::pair<int, double>> target;
};

std::vector<GraphRow> make_rows(const RelationGraph& graph, const Vocab& vocab,
                                const EncoderConfig& config);

struct BatchGrads {
  double loss = 0.0;
  ParamMap grads;
};

// Mean cross-entropy over the batch plus gradients for every parameter.
BatchGrads batch_loss(const std::vector<GraphRow>& batch, const EncoderParams& params,
                      const EncoderConfig& config);

// Mean single-row loss without gradients.
double dataset_loss(const std::vector<GraphRow>& rows, const EncoderParams& params,
                    const EncoderConfig& config);

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 32;
  uint64_t seed = 0;
  std::string pretrained_path;
  double val_fraction = 0.05;
  double base_lr = 1.0;
  int warmup_steps = 400;
};

struct Checkpoint {
  EncoderConfig config;
  Vocab vocab;
  std::vector<std::string> kb_vocab;
  EncoderParams params;
  int epoch = 0;
  double val_loss = 0.0;

  std::string to_json() const;
  static Checkpoint from_json(const std::string& text);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

// Seeded-shuffled minibatch Adam with the warmup schedule; returns the
// checkpoint with minimum validation loss (earliest epoch on ties). The
// audit hook, when set, receives the rendered relations used for each
// epoch's gradient updates. Aborts with the epoch index when the loss stops
// being finite.
TrainResult train(const RelationGraph& train_graph, const RelationGraph& val_graph,
                  EncoderParams initial, const Vocab& vocab, const EncoderConfig& config,
                  const TrainConfig& tc,
                  const std::function<void(int, const std::vector<std::string>&)>& audit = {});

// Reuses one tape across many forward passes against a frozen parameter
// set, refreshing it periodically to bound memory.
class Embedder {
 public:
  explicit Embedder(const Checkpoint& ckpt);
  std::vector<double> encode(const TextualRelation& t);
  std::vector<double> encode(const std::string& rendered);
  std::vector<double> predict(const TextualRelation& t);

 private:
  void refresh();
  const Checkpoint& ckpt_;
  Tape tape_;
  std::unordered_map<std::string, Node*> nodes_;
  int uses_ = 0;
};

// One line per relation: rendered relation, tab, space-separated z values at
// 17 significant digits. Over-length relations are skipped and counted.
void export_embeddings(const std::vector<std::string>& rendered, const Checkpoint& ckpt,
                       std::ostream& out, const std::string& meta = "",
                       long* skipped = nullptr);

}  // namespace glore
