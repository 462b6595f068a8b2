#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gazespot/error.hpp"

namespace gazespot {

// Dense row-major tensor of doubles. Activations use (batch, channels,
// height, width); dense features use (batch, features).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(count(shape)), 0.0);
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d < 1) throw DataError("tensor dimensions must be >= 1");
      n *= d;
    }
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  bool empty() const { return v.empty(); }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  // (n, c, h, w) indexing for 4-D activations.
  double& at4(int n, int c, int y, int x) {
    return v[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  double at4(int n, int c, int y, int x) const {
    return v[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }

  void require_finite(const std::string& what) const {
    for (double x : v)
      if (!std::isfinite(x)) throw NumericError(what + ": non-finite tensor value");
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

inline std::string shape_string(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace gazespot
