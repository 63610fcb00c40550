#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "glore/tensor.hpp"

namespace glore {

// Reverse-mode differentiation over an explicitly recorded computation
// graph. Nodes are recorded in creation order; backward() visits them in
// exact reverse order, so gradient accumulation order is fixed and results
// are bit-reproducible.
struct Node {
  Tensor val;
  Tensor grad;
  std::function<void(Node&)> back;  // empty for leaves
};

class Tape {
 public:
  Node* input(Tensor t);

  Node* matmul(Node* a, Node* b);     // [m x k] * [k x n]
  Node* matmul_nt(Node* a, Node* b);  // a * b^T
  Node* add(Node* a, Node* b);
  Node* sub(Node* a, Node* b);
  Node* add_rowvec(Node* a, Node* b);  // b is [1 x n], broadcast over rows
  Node* mul(Node* a, Node* b);         // elementwise
  Node* scale(Node* a, double c);
  Node* add_const(Node* a, const Tensor& c);
  Node* relu(Node* a);
  Node* sigmoid(Node* a);
  Node* tanh(Node* a);
  Node* softmax_rows(Node* a);
  Node* layer_norm_rows(Node* x, Node* gain, Node* bias, double eps);
  Node* mean_rows(Node* a);  // [m x n] -> [1 x n]
  Node* sum_all(Node* a);    // -> [1 x 1]
  Node* mean_all(Node* a);   // -> [1 x 1]
  Node* transpose(Node* a);
  Node* gather_rows(Node* table, std::vector<int> ids);
  Node* col_slice(Node* a, int c0, int c1);  // columns [c0, c1)
  Node* concat_cols(const std::vector<Node*>& parts);

  // Scalar cross-entropy of a sparse target distribution against
  // softmax(logits); logits is [1 x n]. Value: sum_t w_t * (lse - logit_t).
  Node* cross_entropy_logits(Node* logits, std::vector<std::pair<int, double>> target);

  // Mean over all entries of softplus(l) - y*l (binary cross-entropy with
  // logits); targets has the same shape as logits.
  Node* bce_logits(Node* logits, Tensor targets);

  // Seeds out->grad with 1 and propagates in reverse recording order.
  // out must be [1 x 1].
  void backward(Node* out);

  void clear();
  size_t node_count() const { return nodes_.size(); }

 private:
  Node* make(Tensor val, std::function<void(Node&)> back = {});
  std::deque<std::unique_ptr<Node>> nodes_;
};

}  // namespace glore
