#include "ordsurf/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ordsurf {

DiscretizationScheme make_scheme(SchemeKind kind, double a, double b, int K) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::runtime_error("scheme: bounds must be finite");
  }
  if (a < 0.0) throw std::runtime_error("scheme: lower bound must be >= 0");
  if (b <= a) throw std::runtime_error("scheme: upper bound must exceed lower bound");
  if (K < 1) throw std::runtime_error("scheme: need at least one sub-interval");

  DiscretizationScheme s;
  s.kind = kind;
  s.a = a;
  s.b = b;
  s.K = K;
  s.thresholds.resize(std::size_t(K) + 1);
  if (kind == SchemeKind::SID) {
    const double ap = a + 1.0, bp = b + 1.0;
    const double la = std::log(ap), span = std::log(bp / ap);
    for (int i = 1; i < K; ++i) {
      s.thresholds[std::size_t(i)] = la + span * (double(i) / K);
    }
    // Endpoints are pinned so they equal the transformed bounds exactly
    // rather than up to rounding of la + span.
    s.thresholds.front() = la;
    s.thresholds.back() = std::log(bp);
  } else {
    for (int i = 1; i < K; ++i) {
      s.thresholds[std::size_t(i)] = a + (b - a) * (double(i) / K);
    }
    s.thresholds.front() = a;
    s.thresholds.back() = b;
  }
  for (int i = 0; i < K; ++i) {
    if (!(s.thresholds[std::size_t(i)] < s.thresholds[std::size_t(i) + 1])) {
      throw std::runtime_error("scheme: thresholds collapse, K too large for interval");
    }
  }
  return s;
}

int encode(double height_m, const DiscretizationScheme& scheme) {
  if (std::isnan(height_m)) throw std::runtime_error("encode: NaN height");
  if (height_m <= scheme.a) return 0;
  const double x = scheme.kind == SchemeKind::SID ? std::log(height_m + 1.0) : height_m;
  auto it = std::upper_bound(scheme.thresholds.begin(), scheme.thresholds.end(), x);
  int i = int(it - scheme.thresholds.begin()) - 1;
  return std::clamp(i, 0, scheme.K - 1);
}

ClassMap encode_map(const RasterGrid& grid, const DiscretizationScheme& scheme) {
  ClassMap m;
  m.width = grid.width;
  m.height = grid.height;
  m.num_classes = scheme.K;
  m.classes.resize(grid.data.size());
  for (std::size_t i = 0; i < grid.data.size(); ++i) {
    m.classes[i] = std::uint16_t(encode(grid.data[i], scheme));
  }
  return m;
}

double decode(int d, const DiscretizationScheme& scheme, Midpoint midpoint) {
  if (d < 0 || d >= scheme.K) throw std::runtime_error("decode: class index out of range");
  const double t0 = scheme.thresholds[std::size_t(d)];
  const double t1 = scheme.thresholds[std::size_t(d) + 1];
  if (scheme.kind == SchemeKind::UD) return 0.5 * (t0 + t1);
  if (midpoint == Midpoint::Linear) {
    return 0.5 * ((std::exp(t0) - 1.0) + (std::exp(t1) - 1.0));
  }
  return std::exp(0.5 * (t0 + t1)) - 1.0;
}

RasterGrid decode_map(const ClassMap& classes, const DiscretizationScheme& scheme,
                      Midpoint midpoint) {
  std::vector<double> lut(std::size_t(scheme.K));
  for (int d = 0; d < scheme.K; ++d) lut[std::size_t(d)] = decode(d, scheme, midpoint);
  RasterGrid g;
  g.width = classes.width;
  g.height = classes.height;
  g.data.resize(classes.classes.size());
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const int d = classes.classes[i];
    if (d >= scheme.K) throw std::runtime_error("decode: class index out of range");
    g.data[i] = float(lut[std::size_t(d)]);
  }
  return g;
}

}  // namespace ordsurf
