#pragma once

#include <string>
#include <vector>

namespace insyn::nn {

// Row-major 2-D tensor with a value channel and a same-shape gradient
// accumulator. Vectors are [1, n] rows. Everything runs in 64-bit.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;
  std::vector<double> g;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0),
                         g(static_cast<size_t>(r) * c, 0.0) {}

  size_t size() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor row(const std::vector<double>& values) {
    Tensor t(1, static_cast<int>(values.size()));
    t.v = values;
    t.g.assign(values.size(), 0.0);
    return t;
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

std::string shape_str(const Tensor& t);

}  // namespace insyn::nn
