#include "ordsurf/autodiff.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "ordsurf/prng.hpp"
#include "ordsurf/tensor.hpp"

using namespace ordsurf;

namespace {

using DT = TensorT<double>;
using DNode = NodePtrT<double>;

DT rand_tensor(std::vector<int> shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  DT t(shape);
  for (auto& v : t.data) v = lo + rng.uniform() * (hi - lo);
  return t;
}

double dot(const DT& a, const DT& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// loss = <r, f(x)> for f = upsample(conv(std(relu(conv(x))))), exercising
// stride, dilation, padding, the normalizer and the resampler in one graph
struct Composite {
  DT x, w1, b1, w2, b2, r;

  double loss(std::vector<DNode>* leaves = nullptr) const {
    auto xn = make_param(x);
    auto w1n = make_param(w1);
    auto b1n = make_param(b1);
    auto w2n = make_param(w2);
    auto b2n = make_param(b2);
    auto h = relu(conv2d(xn, w1n, b1n, 2, 1, 1));
    h = standardize_channels(h, 1e-5);
    h = conv2d(h, w2n, b2n, 1, 2, 2);
    h = bilinear_upsample(h, 2);
    const double out = dot(h->value, r);
    if (leaves) {
      backward(h, r);
      *leaves = {xn, w1n, b1n, w2n, b2n};
    }
    return out;
  }
};

Composite make_composite(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Composite c;
  c.x = rand_tensor({1, 2, 6, 6}, rng);
  c.w1 = rand_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  c.b1 = rand_tensor({3}, rng, -0.2, 0.2);
  c.w2 = rand_tensor({2, 3, 3, 3}, rng, -0.5, 0.5);
  c.b2 = rand_tensor({2}, rng, -0.2, 0.2);
  c.r = rand_tensor({1, 2, 6, 6}, rng);
  return c;
}

// central difference of c.loss() wrt one element of one member tensor
double fd(Composite c, DT Composite::* member, std::size_t i, double h = 1e-6) {
  const double keep = (c.*member).data[i];
  (c.*member).data[i] = keep + h;
  const double up = c.loss();
  (c.*member).data[i] = keep - h;
  const double dn = c.loss();
  return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("conv2d hand examples") {
  DT x({1, 1, 2, 2});
  x.data = {1, 2, 3, 4};
  DT w({1, 1, 2, 2});
  w.data = {1, 0, 0, 1};
  DT b({1});
  b.data = {0.5};

  auto y = kernels::conv2d_forward(x, w, b, 1, 1, 0);
  REQUIRE(y.shape == std::vector<int>{1, 1, 1, 1});
  CHECK(y.data[0] == doctest::Approx(1 + 4 + 0.5));

  // pad 1: top-left output only sees x(0,0) through the bottom-right tap
  y = kernels::conv2d_forward(x, w, b, 1, 1, 1);
  REQUIRE(y.shape == std::vector<int>{1, 1, 3, 3});
  CHECK(y.at4(0, 0, 0, 0) == doctest::Approx(1 + 0.5));
  CHECK(y.at4(0, 0, 1, 1) == doctest::Approx(1 + 4 + 0.5));
  CHECK(y.at4(0, 0, 2, 2) == doctest::Approx(4 + 0.5));

  // 1x1 identity kernel is a passthrough
  DT wi({1, 1, 1, 1});
  wi.data = {1};
  DT bz({1});
  bz.data = {0};
  y = kernels::conv2d_forward(x, wi, bz, 1, 1, 0);
  CHECK(y.data == x.data);
}

TEST_CASE("conv2d stride and dilation geometry") {
  SplitMix64 rng(2);
  DT x = rand_tensor({1, 1, 7, 7}, rng);
  DT w = rand_tensor({1, 1, 3, 3}, rng);
  DT b({1});
  b.data = {0};

  auto y = kernels::conv2d_forward(x, w, b, 2, 1, 0);
  CHECK(y.dim(2) == 3);
  CHECK(y.dim(3) == 3);
  // strided output (i,j) equals dense output (2i,2j)
  auto dense = kernels::conv2d_forward(x, w, b, 1, 1, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(y.at4(0, 0, i, j) == doctest::Approx(dense.at4(0, 0, 2 * i, 2 * j)));

  // dilation d samples the same taps as a dense conv on a stride-d slice
  auto dil = kernels::conv2d_forward(x, w, b, 1, 2, 0);
  CHECK(dil.dim(2) == 3);
  double acc = 0;
  for (int kh = 0; kh < 3; ++kh)
    for (int kw = 0; kw < 3; ++kw) acc += w.at4(0, 0, kh, kw) * x.at4(0, 0, 2 * kh, 2 * kw);
  CHECK(dil.at4(0, 0, 0, 0) == doctest::Approx(acc));
}

TEST_CASE("composite graph gradients match central differences") {
  const Composite base = make_composite(40);
  std::vector<DNode> leaves;
  base.loss(&leaves);
  REQUIRE(leaves.size() == 5);

  const DT Composite::* members[5] = {&Composite::x, &Composite::w1, &Composite::b1,
                                      &Composite::w2, &Composite::b2};
  // won't touch every element of the big tensors, a spread is enough
  for (int m = 0; m < 5; ++m) {
    const auto& g = leaves[std::size_t(m)]->grad;
    REQUIRE(g.data.size() == (base.*members[m]).data.size());
    const std::size_t step = std::max<std::size_t>(1, g.data.size() / 24);
    for (std::size_t i = 0; i < g.data.size(); i += step) {
      const double want = fd(base, const_cast<DT Composite::*>(members[m]), i);
      CHECK_MESSAGE(close(g.data[i], want, 1e-5), "member ", m, " index ", i, " analytic ",
                    g.data[i], " fd ", want);
    }
  }
}

TEST_CASE("upsample preserves constants exactly and matches differences") {
  DT x({1, 1, 3, 4});
  x.fill(3.7);
  auto xn = make_input(x);
  auto y = bilinear_upsample(xn, 3);
  REQUIRE(y->value.shape == std::vector<int>{1, 1, 9, 12});
  for (double v : y->value.data) CHECK(v == 3.7);

  // gradient: loss = <r, up(x)>
  SplitMix64 rng(9);
  DT xr = rand_tensor({1, 2, 3, 3}, rng);
  DT r = rand_tensor({1, 2, 6, 6}, rng);
  auto xp = make_param(xr);
  auto up = bilinear_upsample(xp, 2);
  backward(up, r);
  const double h = 1e-6;
  for (std::size_t i = 0; i < xr.data.size(); ++i) {
    DT lo = xr, hi = xr;
    hi.data[i] += h;
    lo.data[i] -= h;
    auto ty = kernels::lerp_taps(3, 2), tx = kernels::lerp_taps(3, 2);
    const double want = (dot(kernels::upsample_forward(hi, 2, ty, tx), r) -
                         dot(kernels::upsample_forward(lo, 2, ty, tx), r)) /
                        (2 * h);
    CHECK(close(xp->grad.data[i], want, 1e-6));
  }
}

TEST_CASE("upsample with scale 1 is the identity") {
  SplitMix64 rng(10);
  DT x = rand_tensor({2, 3, 4, 5}, rng);
  auto y = bilinear_upsample(make_input(x), 1);
  CHECK(y->value.data == x.data);
}

TEST_CASE("standardize output statistics and gradient") {
  SplitMix64 rng(12);
  DT x = rand_tensor({2, 2, 4, 4}, rng, -3.0, 7.0);
  auto xn = make_param(x);
  auto y = standardize_channels(xn, 1e-5);

  const std::size_t plane = 16;
  for (int j = 0; j < 4; ++j) {
    double mean = 0, var = 0, xvar = 0, xmean = 0;
    for (std::size_t i = 0; i < plane; ++i) xmean += x.data[j * plane + i];
    xmean /= double(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = x.data[j * plane + i] - xmean;
      xvar += d * d;
    }
    xvar /= double(plane);
    for (std::size_t i = 0; i < plane; ++i) mean += y->value.data[j * plane + i];
    mean /= double(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = y->value.data[j * plane + i] - mean;
      var += d * d;
    }
    var /= double(plane);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(xvar / (xvar + 1e-5)).epsilon(1e-9));
  }

  DT r = rand_tensor({2, 2, 4, 4}, rng);
  backward(y, r);
  const double h = 1e-6;
  auto loss_at = [&](const DT& xv) {
    auto node = standardize_channels(make_input(xv), 1e-5);
    return dot(node->value, r);
  };
  for (std::size_t i = 0; i < x.data.size(); i += 3) {
    DT lo = x, hi = x;
    hi.data[i] += h;
    lo.data[i] -= h;
    const double want = (loss_at(hi) - loss_at(lo)) / (2 * h);
    CHECK(close(xn->grad.data[i], want, 1e-5));
  }
}

TEST_CASE("concat layout and gradient routing") {
  DT a({2, 2, 1, 2});
  DT b({2, 1, 1, 2});
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = 100 + double(i);
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = 200 + double(i);
  auto an = make_param(a);
  auto bn = make_param(b);
  auto y = concat_channels<double>({an, bn});
  REQUIRE(y->value.shape == std::vector<int>{2, 3, 1, 2});
  // per-sample interleave: [a(n), b(n)] for each n
  const std::vector<double> want = {100, 101, 102, 103, 200, 201,
                                    104, 105, 106, 107, 202, 203};
  CHECK(y->value.data == want);

  DT seed({2, 3, 1, 2});
  for (std::size_t i = 0; i < seed.data.size(); ++i) seed.data[i] = double(i + 1);
  backward(y, seed);
  CHECK(an->grad.data == std::vector<double>{1, 2, 3, 4, 7, 8, 9, 10});
  CHECK(bn->grad.data == std::vector<double>{5, 6, 11, 12});
}

TEST_CASE("relu gates strictly positive values") {
  DT x({1, 1, 1, 3});
  x.data = {-1.0, 0.0, 2.0};
  auto xn = make_param(x);
  auto y = relu(xn);
  CHECK(y->value.data == std::vector<double>{0, 0, 2});
  DT seed({1, 1, 1, 3});
  seed.fill(1.0);
  backward(y, seed);
  CHECK(xn->grad.data == std::vector<double>{0, 0, 1});
}

TEST_CASE("add broadcasts gradient to both parents and rejects mismatches") {
  SplitMix64 rng(14);
  DT a = rand_tensor({1, 2, 2, 2}, rng);
  DT b = rand_tensor({1, 2, 2, 2}, rng);
  auto an = make_param(a);
  auto bn = make_param(b);
  auto y = add(an, bn);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    CHECK(y->value.data[i] == doctest::Approx(a.data[i] + b.data[i]));
  DT seed = rand_tensor({1, 2, 2, 2}, rng);
  backward(y, seed);
  CHECK(an->grad.data == seed.data);
  CHECK(bn->grad.data == seed.data);

  DT c({1, 2, 2, 3});
  CHECK_THROWS(add(an, make_param(c)));
}

TEST_CASE("shared subgraph gradients accumulate once per use") {
  DT x({1, 1, 1, 2});
  x.data = {3.0, -1.0};
  auto xn = make_param(x);
  auto a = relu(xn);
  auto y = add(a, a);
  DT seed({1, 1, 1, 2});
  seed.fill(1.0);
  backward(y, seed);
  CHECK(xn->grad.data == std::vector<double>{2, 0});
}

TEST_CASE("leaf gradients accumulate across backward calls") {
  SplitMix64 rng(15);
  DT w = rand_tensor({1, 1, 1, 1}, rng);
  DT b({1});
  b.data = {0};
  auto wn = make_param(w);
  auto bn = make_param(b);

  DT x1 = rand_tensor({1, 1, 2, 2}, rng);
  DT x2 = rand_tensor({1, 1, 2, 2}, rng);
  DT s1 = rand_tensor({1, 1, 2, 2}, rng);
  DT s2 = rand_tensor({1, 1, 2, 2}, rng);

  auto run = [&](const DT& x, const DT& s) {
    auto y = conv2d(make_input(x), wn, bn, 1, 1, 0);
    backward(y, s);
  };

  run(x1, s1);
  const std::vector<double> g1 = wn->grad.data;
  wn->grad = DT{};
  bn->grad = DT{};
  run(x2, s2);
  const std::vector<double> g2 = wn->grad.data;
  wn->grad = DT{};
  bn->grad = DT{};
  run(x1, s1);
  run(x2, s2);
  REQUIRE(wn->grad.data.size() == 1);
  CHECK(wn->grad.data[0] == doctest::Approx(g1[0] + g2[0]).epsilon(1e-12));
}

TEST_CASE("inputs without requires_grad stay untouched") {
  SplitMix64 rng(16);
  DT x = rand_tensor({1, 1, 3, 3}, rng);
  DT w = rand_tensor({1, 1, 2, 2}, rng);
  DT b({1});
  b.data = {0.1};
  auto xn = make_input(x);
  auto wn = make_param(w);
  auto bn = make_param(b);
  auto y = conv2d(xn, wn, bn, 1, 1, 0);
  DT seed({1, 1, 2, 2});
  seed.fill(1.0);
  backward(y, seed);
  CHECK(xn->grad.data.empty());
  CHECK_FALSE(wn->grad.data.empty());
  CHECK(bn->grad.data[0] == doctest::Approx(4.0));
}
