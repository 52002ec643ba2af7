#include "ordsurf/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ordsurf {

namespace {

void check_target(int width, int height, int K, const ClassMap& target, const char* who) {
  if (target.width != width || target.height != height) {
    throw std::runtime_error(std::string(who) + ": target dimensions differ");
  }
  for (std::uint16_t c : target.classes) {
    if (int(c) >= K) throw std::runtime_error(std::string(who) + ": class index >= K");
  }
}

}  // namespace

OrdinalProbs pair_softmax(const OrdinalLogits& logits) {
  // Largest f32 interval strictly inside (0,1); 1 - 1e-7f is still below 1.
  constexpr float kLo = 1e-7f, kHi = 1.0f - 1e-7f;
  OrdinalProbs out;
  out.width = logits.width;
  out.height = logits.height;
  out.K = logits.K;
  const std::size_t plane = std::size_t(logits.width) * logits.height;
  out.p.resize(std::size_t(logits.K) * plane);
  for (int k = 0; k < logits.K; ++k) {
    const float* y0 = &logits.values[std::size_t(2 * k) * plane];
    const float* y1 = y0 + plane;
    float* p = &out.p[std::size_t(k) * plane];
    for (std::size_t i = 0; i < plane; ++i) {
      const float d = y1[i] - y0[i];
      if (std::isnan(d)) throw std::runtime_error("pair_softmax: NaN logit");
      p[i] = std::clamp(detail::sigmoid(d), kLo, kHi);
    }
  }
  return out;
}

double ordinal_nll(const OrdinalProbs& probs, const ClassMap& target) {
  check_target(probs.width, probs.height, probs.K, target, "ordinal_nll");
  const std::size_t plane = std::size_t(probs.width) * probs.height;
  double loss = 0.0;
  for (int k = 0; k < probs.K; ++k) {
    const float* p = &probs.p[std::size_t(k) * plane];
    for (std::size_t i = 0; i < plane; ++i) {
      const double q = int(target.classes[i]) > k ? double(p[i]) : 1.0 - double(p[i]);
      loss -= std::max(std::log(q), -30.0);
    }
  }
  return loss / double(plane);
}

OrdinalLogits ordinal_nll_grad(const OrdinalLogits& logits, const ClassMap& target) {
  check_target(logits.width, logits.height, logits.K, target, "ordinal_nll_grad");
  OrdinalLogits g;
  g.width = logits.width;
  g.height = logits.height;
  g.K = logits.K;
  g.values.assign(logits.values.size(), 0.0f);
  const std::size_t plane = std::size_t(logits.width) * logits.height;
  const double inv = 1.0 / double(plane);
  for (int k = 0; k < logits.K; ++k) {
    const float* y0 = &logits.values[std::size_t(2 * k) * plane];
    const float* y1 = y0 + plane;
    float* g0 = &g.values[std::size_t(2 * k) * plane];
    for (std::size_t i = 0; i < plane; ++i) {
      const float s = detail::sigmoid(y1[i] - y0[i]);
      const double b = int(target.classes[i]) > k ? 1.0 : 0.0;
      const float gv = float((double(s) - b) * inv);
      g0[plane + i] = gv;
      g0[i] = -gv;
    }
  }
  return g;
}

ClassMap decode_class(const OrdinalProbs& probs) {
  ClassMap m;
  m.width = probs.width;
  m.height = probs.height;
  m.num_classes = probs.K;
  const std::size_t plane = std::size_t(probs.width) * probs.height;
  m.classes.assign(plane, 0);
  for (int k = 0; k < probs.K; ++k) {
    const float* p = &probs.p[std::size_t(k) * plane];
    for (std::size_t i = 0; i < plane; ++i) {
      if (p[i] > 0.5f) ++m.classes[i];
    }
  }
  const std::uint16_t top = std::uint16_t(probs.K - 1);
  for (std::uint16_t& c : m.classes) c = std::min(c, top);
  return m;
}

double mcc_loss(const ClassLogits& logits, const ClassMap& target) {
  check_target(logits.width, logits.height, logits.K, target, "mcc_loss");
  TensorT<float> t;
  t.shape = {1, logits.K, logits.height, logits.width};
  t.data = logits.values;
  return mcc_loss_batch(t, target.classes, static_cast<TensorT<float>*>(nullptr));
}

ClassLogits mcc_grad(const ClassLogits& logits, const ClassMap& target) {
  check_target(logits.width, logits.height, logits.K, target, "mcc_grad");
  TensorT<float> t;
  t.shape = {1, logits.K, logits.height, logits.width};
  t.data = logits.values;
  TensorT<float> g;
  mcc_loss_batch(t, target.classes, &g);
  ClassLogits out;
  out.width = logits.width;
  out.height = logits.height;
  out.K = logits.K;
  out.values = std::move(g.data);
  return out;
}

double mse_loss(const RasterGrid& pred, const RasterGrid& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw std::runtime_error("mse_loss: dimensions differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = double(pred.data[i]) - double(truth.data[i]);
    acc += d * d;
  }
  return acc / double(pred.data.size());
}

RasterGrid mse_grad(const RasterGrid& pred, const RasterGrid& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw std::runtime_error("mse_grad: dimensions differ");
  }
  RasterGrid g;
  g.width = pred.width;
  g.height = pred.height;
  g.data.resize(pred.data.size());
  const double inv = 2.0 / double(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    g.data[i] = float((double(pred.data[i]) - double(truth.data[i])) * inv);
  }
  return g;
}

OrdinalLogits logits_from_batch(const Tensor& t, int n, int K) {
  OrdinalLogits out;
  out.width = t.dim(3);
  out.height = t.dim(2);
  out.K = K;
  const std::size_t block = std::size_t(2 * K) * t.dim(2) * t.dim(3);
  out.values.assign(t.data.begin() + std::size_t(n) * block,
                    t.data.begin() + std::size_t(n + 1) * block);
  return out;
}

}  // namespace ordsurf
