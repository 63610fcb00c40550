#include "glore/autodiff.hpp"

#include <cmath>

namespace glore {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw Error(std::string("autodiff: ") + what);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

Node* Tape::make(Tensor val, std::function<void(Node&)> back) {
  auto node = std::make_unique<Node>();
  node->grad = Tensor::zeros(val.rows, val.cols);
  node->val = std::move(val);
  node->back = std::move(back);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Tape::input(Tensor t) { return make(std::move(t)); }

Node* Tape::matmul(Node* a, Node* b) {
  check(a->val.cols == b->val.rows, "matmul shape mismatch");
  int m = a->val.rows, k = a->val.cols, n = b->val.cols;
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = a->val(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out(i, j) += av * b->val(p, j);
    }
  }
  return make(std::move(out), [a, b, m, k, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += self.grad(i, j) * b->val(p, j);
        a->grad(i, p) += acc;
      }
    }
    for (int p = 0; p < k; ++p) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += a->val(i, p) * self.grad(i, j);
        b->grad(p, j) += acc;
      }
    }
  });
}

Node* Tape::matmul_nt(Node* a, Node* b) {
  check(a->val.cols == b->val.cols, "matmul_nt shape mismatch");
  int m = a->val.rows, k = a->val.cols, n = b->val.rows;
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a->val(i, p) * b->val(j, p);
      out(i, j) = acc;
    }
  }
  return make(std::move(out), [a, b, m, k, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += self.grad(i, j) * b->val(j, p);
        a->grad(i, p) += acc;
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int p = 0; p < k; ++p) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += self.grad(i, j) * a->val(i, p);
        b->grad(j, p) += acc;
      }
    }
  });
}

Node* Tape::add(Node* a, Node* b) {
  check(a->val.same_shape(b->val), "add shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
  return make(std::move(out), [a, b](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      a->grad.v[i] += self.grad.v[i];
      b->grad.v[i] += self.grad.v[i];
    }
  });
}

Node* Tape::sub(Node* a, Node* b) {
  check(a->val.same_shape(b->val), "sub shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->val.v[i];
  return make(std::move(out), [a, b](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      a->grad.v[i] += self.grad.v[i];
      b->grad.v[i] -= self.grad.v[i];
    }
  });
}

Node* Tape::add_rowvec(Node* a, Node* b) {
  check(b->val.rows == 1 && b->val.cols == a->val.cols, "add_rowvec shape mismatch");
  Tensor out = a->val;
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) out(i, j) += b->val(0, j);
  }
  return make(std::move(out), [a, b](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i];
    for (int i = 0; i < self.grad.rows; ++i) {
      for (int j = 0; j < self.grad.cols; ++j) b->grad(0, j) += self.grad(i, j);
    }
  });
}

Node* Tape::mul(Node* a, Node* b) {
  check(a->val.same_shape(b->val), "mul shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
  return make(std::move(out), [a, b](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      a->grad.v[i] += self.grad.v[i] * b->val.v[i];
      b->grad.v[i] += self.grad.v[i] * a->val.v[i];
    }
  });
}

Node* Tape::scale(Node* a, double c) {
  Tensor out = a->val;
  for (double& x : out.v) x *= c;
  return make(std::move(out), [a, c](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += c * self.grad.v[i];
  });
}

Node* Tape::add_const(Node* a, const Tensor& c) {
  check(a->val.same_shape(c), "add_const shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += c.v[i];
  return make(std::move(out), [a](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i];
  });
}

Node* Tape::relu(Node* a) {
  Tensor out = a->val;
  for (double& x : out.v) x = std::max(x, 0.0);
  return make(std::move(out), [a](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      if (a->val.v[i] > 0.0) a->grad.v[i] += self.grad.v[i];
    }
  });
}

Node* Tape::sigmoid(Node* a) {
  Tensor out = a->val;
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  return make(std::move(out), [a](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      double s = self.val.v[i];
      a->grad.v[i] += self.grad.v[i] * s * (1.0 - s);
    }
  });
}

Node* Tape::tanh(Node* a) {
  Tensor out = a->val;
  for (double& x : out.v) x = std::tanh(x);
  return make(std::move(out), [a](Node& self) {
    for (size_t i = 0; i < self.grad.v.size(); ++i) {
      double t = self.val.v[i];
      a->grad.v[i] += self.grad.v[i] * (1.0 - t * t);
    }
  });
}

Node* Tape::softmax_rows(Node* a) {
  Tensor out = a->val;
  for (int i = 0; i < out.rows; ++i) {
    double mx = out(i, 0);
    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
    double sum = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      out(i, j) = std::exp(out(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < out.cols; ++j) out(i, j) /= sum;
  }
  return make(std::move(out), [a](Node& self) {
    for (int i = 0; i < self.val.rows; ++i) {
      double gs = 0.0;
      for (int j = 0; j < self.val.cols; ++j) gs += self.grad(i, j) * self.val(i, j);
      for (int j = 0; j < self.val.cols; ++j) {
        a->grad(i, j) += self.val(i, j) * (self.grad(i, j) - gs);
      }
    }
  });
}

Node* Tape::layer_norm_rows(Node* x, Node* gain, Node* bias, double eps) {
  int m = x->val.rows, n = x->val.cols;
  check(gain->val.rows == 1 && gain->val.cols == n, "layer_norm gain shape");
  check(bias->val.rows == 1 && bias->val.cols == n, "layer_norm bias shape");
  Tensor out(m, n);
  auto xhat = std::make_shared<Tensor>(m, n);
  auto inv = std::make_shared<std::vector<double>>(m);
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += x->val(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = x->val(i, j) - mean;
      var += d * d;
    }
    var /= n;
    double iv = 1.0 / std::sqrt(var + eps);
    (*inv)[i] = iv;
    for (int j = 0; j < n; ++j) {
      double xh = (x->val(i, j) - mean) * iv;
      (*xhat)(i, j) = xh;
      out(i, j) = gain->val(0, j) * xh + bias->val(0, j);
    }
  }
  return make(std::move(out), [x, gain, bias, xhat, inv, m, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      double mean_dy = 0.0, mean_dyxh = 0.0;
      for (int j = 0; j < n; ++j) {
        double dy = self.grad(i, j) * gain->val(0, j);
        mean_dy += dy;
        mean_dyxh += dy * (*xhat)(i, j);
        gain->grad(0, j) += self.grad(i, j) * (*xhat)(i, j);
        bias->grad(0, j) += self.grad(i, j);
      }
      mean_dy /= n;
      mean_dyxh /= n;
      for (int j = 0; j < n; ++j) {
        double dy = self.grad(i, j) * gain->val(0, j);
        x->grad(i, j) += (*inv)[i] * (dy - mean_dy - (*xhat)(i, j) * mean_dyxh);
      }
    }
  });
}

Node* Tape::mean_rows(Node* a) {
  int m = a->val.rows, n = a->val.cols;
  Tensor out(1, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out(0, j) += a->val(i, j);
  }
  for (int j = 0; j < n; ++j) out(0, j) /= m;
  return make(std::move(out), [a, m, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a->grad(i, j) += self.grad(0, j) / m;
    }
  });
}

Node* Tape::sum_all(Node* a) {
  Tensor out(1, 1);
  for (double x : a->val.v) out.v[0] += x;
  return make(std::move(out), [a](Node& self) {
    for (double& g : a->grad.v) g += self.grad.v[0];
  });
}

Node* Tape::mean_all(Node* a) {
  double n = static_cast<double>(a->val.v.size());
  Tensor out(1, 1);
  for (double x : a->val.v) out.v[0] += x;
  out.v[0] /= n;
  return make(std::move(out), [a, n](Node& self) {
    for (double& g : a->grad.v) g += self.grad.v[0] / n;
  });
}

Node* Tape::transpose(Node* a) {
  int m = a->val.rows, n = a->val.cols;
  Tensor out(n, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out(j, i) = a->val(i, j);
  }
  return make(std::move(out), [a, m, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a->grad(i, j) += self.grad(j, i);
    }
  });
}

Node* Tape::gather_rows(Node* table, std::vector<int> ids) {
  int n = table->val.cols;
  Tensor out(static_cast<int>(ids.size()), n);
  for (size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && ids[i] < table->val.rows, "gather_rows id out of range");
    for (int j = 0; j < n; ++j) out(static_cast<int>(i), j) = table->val(ids[i], j);
  }
  return make(std::move(out), [table, ids = std::move(ids), n](Node& self) {
    for (size_t i = 0; i < ids.size(); ++i) {
      for (int j = 0; j < n; ++j) {
        table->grad(ids[i], j) += self.grad(static_cast<int>(i), j);
      }
    }
  });
}

Node* Tape::col_slice(Node* a, int c0, int c1) {
  check(0 <= c0 && c0 < c1 && c1 <= a->val.cols, "col_slice range");
  int m = a->val.rows, n = c1 - c0;
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out(i, j) = a->val(i, c0 + j);
  }
  return make(std::move(out), [a, c0, m, n](Node& self) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) a->grad(i, c0 + j) += self.grad(i, j);
    }
  });
}

Node* Tape::concat_cols(const std::vector<Node*>& parts) {
  check(!parts.empty(), "concat_cols: empty");
  int m = parts[0]->val.rows;
  int total = 0;
  for (Node* p : parts) {
    check(p->val.rows == m, "concat_cols row mismatch");
    total += p->val.cols;
  }
  Tensor out(m, total);
  int off = 0;
  for (Node* p : parts) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < p->val.cols; ++j) out(i, off + j) = p->val(i, j);
    }
    off += p->val.cols;
  }
  return make(std::move(out), [parts, m](Node& self) {
    int off = 0;
    for (Node* p : parts) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p->val.cols; ++j) p->grad(i, j) += self.grad(i, off + j);
      }
      off += p->val.cols;
    }
  });
}

Node* Tape::cross_entropy_logits(Node* logits, std::vector<std::pair<int, double>> target) {
  check(logits->val.rows == 1, "cross_entropy_logits expects a row vector");
  int n = logits->val.cols;
  double mx = logits->val(0, 0);
  for (int j = 1; j < n; ++j) mx = std::max(mx, logits->val(0, j));
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(logits->val(0, j) - mx);
  double lse = mx + std::log(sum);
  double wsum = 0.0;
  Tensor out(1, 1);
  for (const auto& [idx, w] : target) {
    check(idx >= 0 && idx < n, "cross_entropy_logits target index");
    out.v[0] += w * (lse - logits->val(0, idx));
    wsum += w;
  }
  return make(std::move(out), [logits, target = std::move(target), lse, wsum, n](Node& self) {
    double g = self.grad.v[0];
    for (int j = 0; j < n; ++j) {
      double p = std::exp(logits->val(0, j) - lse);
      logits->grad(0, j) += g * wsum * p;
    }
    for (const auto& [idx, w] : target) logits->grad(0, idx) -= g * w;
  });
}

Node* Tape::bce_logits(Node* logits, Tensor targets) {
  check(logits->val.same_shape(targets), "bce_logits shape mismatch");
  double n = static_cast<double>(logits->val.v.size());
  Tensor out(1, 1);
  for (size_t i = 0; i < logits->val.v.size(); ++i) {
    double l = logits->val.v[i];
    out.v[0] += softplus(l) - targets.v[i] * l;
  }
  out.v[0] /= n;
  return make(std::move(out), [logits, targets = std::move(targets), n](Node& self) {
    double g = self.grad.v[0] / n;
    for (size_t i = 0; i < logits->val.v.size(); ++i) {
      double s = 1.0 / (1.0 + std::exp(-logits->val.v[i]));
      logits->grad.v[i] += g * (s - targets.v[i]);
    }
  });
}

void Tape::backward(Node* out) {
  check(out->val.rows == 1 && out->val.cols == 1, "backward expects a scalar output");
  out->grad.v[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = **it;
    if (node.back) node.back(node);
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace glore
