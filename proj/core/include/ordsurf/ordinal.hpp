#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ordsurf/discretize.hpp"
#include "ordsurf/raster.hpp"
#include "ordsurf/tensor.hpp"

namespace ordsurf {

// 2K logit planes, channel-major: plane c holds H*W values row-major, and
// planes (2k, 2k+1) form the softmax pair for class threshold k. Identical
// memory layout to one sample of an (N, 2K, H, W) tensor.
struct OrdinalLogits {
  int width = 0;
  int height = 0;
  int K = 0;
  std::vector<float> values;  // 2K * height * width

  float& at(int c, int x, int y) {
    return values[(std::size_t(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return values[(std::size_t(c) * height + y) * width + x];
  }
};

// K probability planes, p[k] = P(class > k), each strictly inside (0,1).
struct OrdinalProbs {
  int width = 0;
  int height = 0;
  int K = 0;
  std::vector<float> p;

  float& at(int k, int x, int y) { return p[(std::size_t(k) * height + y) * width + x]; }
  float at(int k, int x, int y) const { return p[(std::size_t(k) * height + y) * width + x]; }
};

// K-channel logits for the multi-class-classification ablation head.
struct ClassLogits {
  int width = 0;
  int height = 0;
  int K = 0;
  std::vector<float> values;

  float& at(int c, int x, int y) {
    return values[(std::size_t(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return values[(std::size_t(c) * height + y) * width + x];
  }
};

// P^k = sigma(Y_{2k+1} - Y_{2k}), evaluated stably from the pair difference
// (equivalent to the two-way softmax, and shift-invariant per pair by
// construction). Outputs are clamped to the largest f32 interval strictly
// inside (0,1) so saturated logits cannot materialize exact 0/1.
OrdinalProbs pair_softmax(const OrdinalLogits& logits);

// loss = -(1/HW) sum_pixels [ sum_{k<C} ln P^k + sum_{k>=C} ln(1-P^k) ],
// with each log term clamped at -30.
double ordinal_nll(const OrdinalProbs& probs, const ClassMap& target);

// Closed-form gradient wrt the logits: with s = P^k and b = 1[k < C],
// d/dY_{2k+1} = (s - b)/HW and d/dY_{2k} = (b - s)/HW.
OrdinalLogits ordinal_nll_grad(const OrdinalLogits& logits, const ClassMap& target);

// d = sum_k 1[P^k > 0.5], clamped to K-1.
ClassMap decode_class(const OrdinalProbs& probs);

// Mean softmax cross-entropy over K classes (ablation baseline); gradient is
// (softmax - onehot)/HW.
double mcc_loss(const ClassLogits& logits, const ClassMap& target);
ClassLogits mcc_grad(const ClassLogits& logits, const ClassMap& target);

// Mean squared error over heights (ablation baseline); gradient wrt pred is
// 2(pred - truth)/HW.
double mse_loss(const RasterGrid& pred, const RasterGrid& truth);
RasterGrid mse_grad(const RasterGrid& pred, const RasterGrid& truth);

// Copies sample n out of an (N, 2K, H, W) logits batch.
OrdinalLogits logits_from_batch(const Tensor& t, int n, int K);

namespace detail {

template <typename S>
S softplus(S x) {
  // log(1 + e^x) without overflow; exact enough at both tails.
  if (x > S(30)) return x;
  if (x < S(-30)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

// Batch losses over (N, C, H, W) tensors, shared by the trainer and the f64
// gradient-check harness. Targets are flat per-pixel class indices, sample
// major. Loss is the mean over all N*H*W pixels; when grad is non-null it is
// resized to the logits shape and overwritten.

template <typename S>
double ordinal_nll_batch(const TensorT<S>& logits, const std::vector<std::uint16_t>& target,
                         int K, TensorT<S>* grad) {
  check_shape(logits.shape.size() == 4 && logits.dim(1) == 2 * K, "ordinal loss: logit shape");
  const int N = logits.dim(0), H = logits.dim(2), W = logits.dim(3);
  const std::size_t plane = std::size_t(H) * W;
  check_shape(target.size() == std::size_t(N) * plane, "ordinal loss: target size");
  if (grad) {
    grad->shape = logits.shape;
    grad->data.assign(logits.data.size(), S(0));
  }
  const double inv = 1.0 / (double(N) * plane);
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const std::uint16_t* cls = &target[std::size_t(n) * plane];
    for (int k = 0; k < K; ++k) {
      const S* y0 = &logits.data[(std::size_t(n) * 2 * K + 2 * k) * plane];
      const S* y1 = y0 + plane;
      S* g0 = grad ? &grad->data[(std::size_t(n) * 2 * K + 2 * k) * plane] : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        check_shape(cls[i] < K, "ordinal loss: class out of range");
        const S d = y1[i] - y0[i];
        const bool b = int(cls[i]) > k;
        const S term = b ? detail::softplus(-d) : detail::softplus(d);
        loss += double(std::min(term, S(30)));
        if (grad) {
          const S s = detail::sigmoid(d);
          const S gv = S((double(s) - double(b)) * inv);
          g0[plane + i] = gv;
          g0[i] = -gv;
        }
      }
    }
  }
  return loss * inv;
}

template <typename S>
double mcc_loss_batch(const TensorT<S>& logits, const std::vector<std::uint16_t>& target,
                      TensorT<S>* grad) {
  check_shape(logits.shape.size() == 4, "mcc loss: logit rank");
  const int N = logits.dim(0), K = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
  const std::size_t plane = std::size_t(H) * W;
  check_shape(target.size() == std::size_t(N) * plane, "mcc loss: target size");
  if (grad) {
    grad->shape = logits.shape;
    grad->data.assign(logits.data.size(), S(0));
  }
  const double inv = 1.0 / (double(N) * plane);
  double loss = 0.0;
  std::vector<S> probs(static_cast<std::size_t>(K));
  for (int n = 0; n < N; ++n) {
    const std::uint16_t* cls = &target[std::size_t(n) * plane];
    const S* base = &logits.data[std::size_t(n) * K * plane];
    S* gbase = grad ? &grad->data[std::size_t(n) * K * plane] : nullptr;
    for (std::size_t i = 0; i < plane; ++i) {
      check_shape(cls[i] < K, "mcc loss: class out of range");
      S mx = base[i];
      for (int k = 1; k < K; ++k) mx = std::max(mx, base[std::size_t(k) * plane + i]);
      S sum = S(0);
      for (int k = 0; k < K; ++k) {
        probs[std::size_t(k)] = std::exp(base[std::size_t(k) * plane + i] - mx);
        sum += probs[std::size_t(k)];
      }
      const S lse = mx + std::log(sum);
      const S term = lse - base[std::size_t(cls[i]) * plane + i];
      loss += double(std::min(term, S(30)));
      if (grad) {
        for (int k = 0; k < K; ++k) {
          const S p = probs[std::size_t(k)] / sum;
          gbase[std::size_t(k) * plane + i] = S((double(p) - double(k == int(cls[i]))) * inv);
        }
      }
    }
  }
  return loss * inv;
}

template <typename S>
double mse_loss_batch(const TensorT<S>& pred, const TensorT<S>& truth, TensorT<S>* grad) {
  check_shape(pred.same_shape(truth), "mse loss: shape mismatch");
  if (grad) {
    grad->shape = pred.shape;
    grad->data.assign(pred.data.size(), S(0));
  }
  const double inv = 1.0 / double(pred.numel());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = double(pred.data[i]) - double(truth.data[i]);
    loss += d * d;
    if (grad) grad->data[i] = S(2.0 * d * inv);
  }
  return loss * inv;
}

}  // namespace ordsurf
