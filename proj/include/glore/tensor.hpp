#pragma once

#include <map>
#include <string>
#include <vector>

#include "glore/util.hpp"

namespace glore {

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1; everything
// the encoder needs fits in two dimensions.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0);

  static Tensor zeros(int r, int c) { return Tensor(r, c, 0.0); }
  static Tensor ones(int r, int c) { return Tensor(r, c, 1.0); }
  static Tensor row_vector(const std::vector<double>& xs);
  static Tensor col_vector(const std::vector<double>& xs);

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  long long size() const { return static_cast<long long>(v.size()); }
  std::vector<int> shape() const { return {rows, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  bool operator==(const Tensor& o) const = default;
};

using ParamMap = std::map<std::string, Tensor>;

// U(-1/sqrt(fan_in), +1/sqrt(fan_in))
Tensor uniform_init(int r, int c, int fan_in, Rng& rng);

// Max-shifted softmax; output entries are positive and sum to 1 within 1e-12.
std::vector<double> softmax(const std::vector<double>& x);

// -sum_j target_j * ln(predicted_j); terms with target_j == 0 contribute 0.
double cross_entropy(const std::vector<double>& target, const std::vector<double>& predicted);

double vdot(const std::vector<double>& a, const std::vector<double>& b);
double vnorm(const std::vector<double>& a);

}  // namespace glore
