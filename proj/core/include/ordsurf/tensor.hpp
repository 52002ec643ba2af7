#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordsurf {

// Dense row-major tensor. Rank 4 shapes are (N, C, H, W); lower ranks are
// used for conv weights/biases. Scalar type is a template parameter so the
// gradient-check harness can rerun everything at f64.
template <typename S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> sh) : shape(std::move(sh)) {
    data.assign(std::size_t(numel()), S(0));
  }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  int dim(int i) const { return shape[std::size_t(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  // Rank-4 element access, unchecked.
  S& at4(int n, int c, int h, int w) {
    return data[((std::size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const S& at4(int n, int c, int h, int w) const {
    return data[((std::size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

template <typename D, typename S>
TensorT<D> tensor_cast(const TensorT<S>& t) {
  TensorT<D> out;
  out.shape = t.shape;
  out.data.resize(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = D(t.data[i]);
  return out;
}

inline void check_shape(bool ok, const char* what) {
  if (!ok) throw std::runtime_error(std::string("tensor: ") + what);
}

}  // namespace ordsurf
