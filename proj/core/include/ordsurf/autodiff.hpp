#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ordsurf/parallel.hpp"
#include "ordsurf/tensor.hpp"

// Reverse-mode autodiff over dense NCHW tensors, scalar-templated so the
// whole graph can run at f64 for gradient checks. A forward pass builds a
// fresh DAG of shared nodes; backward() walks it in reverse creation order.
// Leaf gradients accumulate across backward() calls until explicitly zeroed,
// which is what gives microbatch accumulation its additivity.

namespace ordsurf {

template <typename S>
struct NodeT;

template <typename S>
using NodePtrT = std::shared_ptr<NodeT<S>>;

template <typename S>
inline std::atomic<std::int64_t> node_id_counter{0};

template <typename S>
struct NodeT {
  TensorT<S> value;
  TensorT<S> grad;  // allocated on first use
  bool requires_grad = false;
  std::int64_t id = 0;
  std::vector<NodePtrT<S>> parents;
  std::function<void(NodeT<S>&)> backprop;

  void ensure_grad() {
    if (grad.data.empty()) {
      grad.shape = value.shape;
      grad.data.assign(value.data.size(), S(0));
    }
  }
};

template <typename S>
NodePtrT<S> make_node(TensorT<S> value, bool requires_grad) {
  auto n = std::make_shared<NodeT<S>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->id = ++node_id_counter<S>;
  return n;
}

template <typename S>
NodePtrT<S> make_param(TensorT<S> value) {
  return make_node(std::move(value), true);
}

template <typename S>
NodePtrT<S> make_input(TensorT<S> value) {
  return make_node(std::move(value), false);
}

namespace kernels {

template <typename S>
TensorT<S> pad_nchw(const TensorT<S>& x, int pad) {
  if (pad == 0) return x;
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  TensorT<S> out({N, C, H + 2 * pad, W + 2 * pad});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h) {
        const S* src = &x.at4(n, c, h, 0);
        S* dst = &out.at4(n, c, h + pad, pad);
        std::copy(src, src + W, dst);
      }
  return out;
}

inline int conv_out_extent(int in, int pad, int k, int dilation, int stride) {
  return (in + 2 * pad - ((k - 1) * dilation + 1)) / stride + 1;
}

// Direct cross-correlation. x (N,Cin,H,W), w (Cout,Cin,KH,KW), b (Cout).
template <typename S>
TensorT<S> conv2d_forward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                          int stride, int dilation, int pad) {
  check_shape(x.shape.size() == 4 && w.shape.size() == 4, "conv: rank");
  check_shape(x.dim(1) == w.dim(1), "conv: channel mismatch");
  check_shape(b.shape.size() == 1 && b.dim(0) == w.dim(0), "conv: bias shape");
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int OH = conv_out_extent(H, pad, KH, dilation, stride);
  const int OW = conv_out_extent(W, pad, KW, dilation, stride);
  check_shape(OH > 0 && OW > 0, "conv: empty output");

  const TensorT<S> xp = pad_nchw(x, pad);
  const int Wp = W + 2 * pad;
  TensorT<S> out({N, Cout, OH, OW});

  parallel_for(std::int64_t(N) * Cout, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      const int n = int(j / Cout), oc = int(j % Cout);
      S* oplane = &out.at4(n, oc, 0, 0);
      std::fill(oplane, oplane + std::size_t(OH) * OW, b.data[std::size_t(oc)]);
      for (int ic = 0; ic < Cin; ++ic) {
        const S* xplane = &xp.at4(n, ic, 0, 0);
        const S* wk = &w.at4(oc, ic, 0, 0);
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const S wv = wk[kh * KW + kw];
            if (wv == S(0)) continue;
            for (int oh = 0; oh < OH; ++oh) {
              const S* xrow = xplane + std::size_t(oh * stride + kh * dilation) * Wp + kw * dilation;
              S* orow = oplane + std::size_t(oh) * OW;
              if (stride == 1) {
                for (int ow = 0; ow < OW; ++ow) orow[ow] += wv * xrow[ow];
              } else {
                for (int ow = 0; ow < OW; ++ow) orow[ow] += wv * xrow[ow * stride];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

// Gradients wrt weight and bias; gw/gb are accumulated into.
template <typename S>
void conv2d_backward_params(const TensorT<S>& g, const TensorT<S>& x, const TensorT<S>& w,
                            int stride, int dilation, int pad,
                            TensorT<S>& gw, TensorT<S>& gb) {
  const int N = x.dim(0), Cin = x.dim(1), W = x.dim(3);
  const int Cout = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int OH = g.dim(2), OW = g.dim(3);
  const TensorT<S> xp = pad_nchw(x, pad);
  const int Wp = W + 2 * pad;

  parallel_for(Cout, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t oc = lo; oc < hi; ++oc) {
      S bsum = S(0);
      for (int n = 0; n < N; ++n) {
        const S* gplane = &g.at4(n, int(oc), 0, 0);
        for (std::int64_t i = 0; i < std::int64_t(OH) * OW; ++i) bsum += gplane[i];
        for (int ic = 0; ic < Cin; ++ic) {
          const S* xplane = &xp.at4(n, ic, 0, 0);
          S* gwk = &gw.at4(int(oc), ic, 0, 0);
          for (int kh = 0; kh < KH; ++kh) {
            for (int kw = 0; kw < KW; ++kw) {
              S acc = S(0);
              for (int oh = 0; oh < OH; ++oh) {
                const S* xrow = xplane + std::size_t(oh * stride + kh * dilation) * Wp + kw * dilation;
                const S* grow = gplane + std::size_t(oh) * OW;
                if (stride == 1) {
                  for (int ow = 0; ow < OW; ++ow) acc += grow[ow] * xrow[ow];
                } else {
                  for (int ow = 0; ow < OW; ++ow) acc += grow[ow] * xrow[ow * stride];
                }
              }
              gwk[kh * KW + kw] += acc;
            }
          }
        }
      }
      gb.data[std::size_t(oc)] += bsum;
    }
  });
}

// Gradient wrt input, accumulated into gx (same shape as x).
template <typename S>
void conv2d_backward_input(const TensorT<S>& g, const TensorT<S>& w,
                           int stride, int dilation, int pad, TensorT<S>& gx) {
  const int N = gx.dim(0), Cin = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
  const int Cout = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int OH = g.dim(2), OW = g.dim(3);
  const int Hp = H + 2 * pad, Wp = W + 2 * pad;

  parallel_for(std::int64_t(N) * Cin, [&](std::int64_t lo, std::int64_t hi) {
    TensorT<S> gxp({1, 1, Hp, Wp});
    for (std::int64_t j = lo; j < hi; ++j) {
      const int n = int(j / Cin), ic = int(j % Cin);
      gxp.fill(S(0));
      S* gxplane = gxp.ptr();
      for (int oc = 0; oc < Cout; ++oc) {
        const S* gplane = &g.at4(n, oc, 0, 0);
        const S* wk = &w.at4(oc, ic, 0, 0);
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const S wv = wk[kh * KW + kw];
            if (wv == S(0)) continue;
            for (int oh = 0; oh < OH; ++oh) {
              S* gxrow = gxplane + std::size_t(oh * stride + kh * dilation) * Wp + kw * dilation;
              const S* grow = gplane + std::size_t(oh) * OW;
              if (stride == 1) {
                for (int ow = 0; ow < OW; ++ow) gxrow[ow] += wv * grow[ow];
              } else {
                for (int ow = 0; ow < OW; ++ow) gxrow[ow * stride] += wv * grow[ow];
              }
            }
          }
        }
      }
      for (int h = 0; h < H; ++h) {
        const S* src = gxplane + std::size_t(h + pad) * Wp + pad;
        S* dst = &gx.at4(n, ic, h, 0);
        for (int x = 0; x < W; ++x) dst[x] += src[x];
      }
    }
  });
}

// Axis resampling table for bilinear interpolation, align_corners=false:
// src = (dst + 0.5)/scale - 0.5, clamped at the borders.
struct LerpTap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1-w1
};

inline std::vector<LerpTap> lerp_taps(int in_extent, int scale) {
  std::vector<LerpTap> taps(std::size_t(in_extent) * scale);
  for (int o = 0; o < in_extent * scale; ++o) {
    double src = (o + 0.5) / scale - 0.5;
    if (src < 0) src = 0;
    int i0 = int(src);
    if (i0 > in_extent - 1) i0 = in_extent - 1;
    const int i1 = std::min(i0 + 1, in_extent - 1);
    taps[std::size_t(o)] = LerpTap{i0, i1, src - i0};
  }
  return taps;
}

template <typename S>
TensorT<S> upsample_forward(const TensorT<S>& x, int scale,
                            const std::vector<LerpTap>& ty, const std::vector<LerpTap>& tx) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  TensorT<S> out({N, C, H * scale, W * scale});
  parallel_for(std::int64_t(N) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      const int n = int(j / C), c = int(j % C);
      const S* xp = &x.at4(n, c, 0, 0);
      S* op = &out.at4(n, c, 0, 0);
      for (int oy = 0; oy < H * scale; ++oy) {
        const LerpTap& y = ty[std::size_t(oy)];
        const S* r0 = xp + std::size_t(y.i0) * W;
        const S* r1 = xp + std::size_t(y.i1) * W;
        S* orow = op + std::size_t(oy) * (W * scale);
        for (int ox = 0; ox < W * scale; ++ox) {
          const LerpTap& t = tx[std::size_t(ox)];
          const S a = r0[t.i0] + S(t.w1) * (r0[t.i1] - r0[t.i0]);
          const S b = r1[t.i0] + S(t.w1) * (r1[t.i1] - r1[t.i0]);
          orow[ox] = a + S(y.w1) * (b - a);
        }
      }
    }
  });
  return out;
}

template <typename S>
void upsample_backward(const TensorT<S>& g, int scale,
                       const std::vector<LerpTap>& ty, const std::vector<LerpTap>& tx,
                       TensorT<S>& gx) {
  const int N = gx.dim(0), C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
  parallel_for(std::int64_t(N) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t j = lo; j < hi; ++j) {
      const int n = int(j / C), c = int(j % C);
      S* gxp = &gx.at4(n, c, 0, 0);
      const S* gp = &g.at4(n, c, 0, 0);
      for (int oy = 0; oy < H * scale; ++oy) {
        const LerpTap& y = ty[std::size_t(oy)];
        const S wy1 = S(y.w1), wy0 = S(1) - wy1;
        const S* grow = gp + std::size_t(oy) * (W * scale);
        for (int ox = 0; ox < W * scale; ++ox) {
          const LerpTap& t = tx[std::size_t(ox)];
          const S gv = grow[ox];
          const S wx1 = S(t.w1), wx0 = S(1) - wx1;
          gxp[std::size_t(y.i0) * W + t.i0] += wy0 * wx0 * gv;
          gxp[std::size_t(y.i0) * W + t.i1] += wy0 * wx1 * gv;
          gxp[std::size_t(y.i1) * W + t.i0] += wy1 * wx0 * gv;
          gxp[std::size_t(y.i1) * W + t.i1] += wy1 * wx1 * gv;
        }
      }
    }
  });
}

}  // namespace kernels

template <typename S>
NodePtrT<S> conv2d(const NodePtrT<S>& x, const NodePtrT<S>& w, const NodePtrT<S>& b,
                   int stride, int dilation, int pad) {
  auto out = make_node(kernels::conv2d_forward(x->value, w->value, b->value, stride, dilation, pad),
                       x->requires_grad || w->requires_grad || b->requires_grad);
  out->parents = {x, w, b};
  if (out->requires_grad) {
    out->backprop = [stride, dilation, pad](NodeT<S>& self) {
      auto& xn = *self.parents[0];
      auto& wn = *self.parents[1];
      auto& bn = *self.parents[2];
      if (wn.requires_grad || bn.requires_grad) {
        wn.ensure_grad();
        bn.ensure_grad();
        kernels::conv2d_backward_params(self.grad, xn.value, wn.value, stride, dilation, pad,
                                        wn.grad, bn.grad);
      }
      if (xn.requires_grad) {
        xn.ensure_grad();
        kernels::conv2d_backward_input(self.grad, wn.value, stride, dilation, pad, xn.grad);
      }
    };
  }
  return out;
}

template <typename S>
NodePtrT<S> relu(const NodePtrT<S>& x) {
  TensorT<S> v = x->value;
  for (S& e : v.data) e = e > S(0) ? e : S(0);
  auto out = make_node(std::move(v), x->requires_grad);
  out->parents = {x};
  if (out->requires_grad) {
    out->backprop = [](NodeT<S>& self) {
      auto& xn = *self.parents[0];
      xn.ensure_grad();
      for (std::size_t i = 0; i < xn.grad.data.size(); ++i) {
        if (xn.value.data[i] > S(0)) xn.grad.data[i] += self.grad.data[i];
      }
    };
  }
  return out;
}

template <typename S>
NodePtrT<S> add(const NodePtrT<S>& a, const NodePtrT<S>& b) {
  check_shape(a->value.same_shape(b->value), "add: shape mismatch");
  TensorT<S> v = a->value;
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += b->value.data[i];
  auto out = make_node(std::move(v), a->requires_grad || b->requires_grad);
  out->parents = {a, b};
  if (out->requires_grad) {
    out->backprop = [](NodeT<S>& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < p->grad.data.size(); ++i) p->grad.data[i] += self.grad.data[i];
      }
    };
  }
  return out;
}

template <typename S>
NodePtrT<S> concat_channels(const std::vector<NodePtrT<S>>& xs) {
  check_shape(!xs.empty(), "concat: empty input list");
  const int N = xs[0]->value.dim(0), H = xs[0]->value.dim(2), W = xs[0]->value.dim(3);
  int C = 0;
  bool rg = false;
  for (const auto& x : xs) {
    check_shape(x->value.dim(0) == N && x->value.dim(2) == H && x->value.dim(3) == W,
                "concat: spatial/batch mismatch");
    C += x->value.dim(1);
    rg = rg || x->requires_grad;
  }
  TensorT<S> v({N, C, H, W});
  const std::size_t plane = std::size_t(H) * W;
  for (int n = 0; n < N; ++n) {
    std::size_t coff = 0;
    for (const auto& x : xs) {
      const int xc = x->value.dim(1);
      std::copy(&x->value.at4(n, 0, 0, 0), &x->value.at4(n, 0, 0, 0) + std::size_t(xc) * plane,
                &v.data[(std::size_t(n) * C + coff) * plane]);
      coff += std::size_t(xc);
    }
  }
  auto out = make_node(std::move(v), rg);
  out->parents = xs;
  if (out->requires_grad) {
    out->backprop = [](NodeT<S>& self) {
      const int N2 = self.value.dim(0), C2 = self.value.dim(1);
      const std::size_t pl = std::size_t(self.value.dim(2)) * self.value.dim(3);
      for (int n = 0; n < N2; ++n) {
        std::size_t coff = 0;
        for (auto& p : self.parents) {
          const int xc = p->value.dim(1);
          if (p->requires_grad) {
            p->ensure_grad();
            const S* src = &self.grad.data[(std::size_t(n) * C2 + coff) * pl];
            S* dst = &p->grad.at4(n, 0, 0, 0);
            for (std::size_t i = 0; i < std::size_t(xc) * pl; ++i) dst[i] += src[i];
          }
          coff += std::size_t(xc);
        }
      }
    };
  }
  return out;
}

template <typename S>
NodePtrT<S> bilinear_upsample(const NodePtrT<S>& x, int scale) {
  check_shape(scale >= 1, "upsample: scale must be >= 1");
  auto ty = kernels::lerp_taps(x->value.dim(2), scale);
  auto tx = kernels::lerp_taps(x->value.dim(3), scale);
  auto out = make_node(kernels::upsample_forward(x->value, scale, ty, tx), x->requires_grad);
  out->parents = {x};
  if (out->requires_grad) {
    out->backprop = [scale, ty = std::move(ty), tx = std::move(tx)](NodeT<S>& self) {
      auto& xn = *self.parents[0];
      xn.ensure_grad();
      kernels::upsample_backward(self.grad, scale, ty, tx, xn.grad);
    };
  }
  return out;
}

// Parameter-free per-(sample, channel) standardization over the spatial
// plane: y = (x - mean) / sqrt(var + eps). Gradient uses the cached outputs:
// dL/dx_i = (g_i - mean(g) - y_i * mean(g*y)) / sigma.
template <typename S>
NodePtrT<S> standardize_channels(const NodePtrT<S>& x, S eps) {
  const int N = x->value.dim(0), C = x->value.dim(1);
  const std::size_t plane = std::size_t(x->value.dim(2)) * x->value.dim(3);
  TensorT<S> v;
  v.shape = x->value.shape;
  v.data.resize(x->value.data.size());
  std::vector<S> sigmas(std::size_t(N) * C);
  for (int j = 0; j < N * C; ++j) {
    const S* xs = &x->value.data[std::size_t(j) * plane];
    S* ys = &v.data[std::size_t(j) * plane];
    S mean = S(0);
    for (std::size_t i = 0; i < plane; ++i) mean += xs[i];
    mean /= S(plane);
    S var = S(0);
    for (std::size_t i = 0; i < plane; ++i) {
      const S d = xs[i] - mean;
      var += d * d;
    }
    var /= S(plane);
    const S sigma = std::sqrt(var + eps);
    sigmas[std::size_t(j)] = sigma;
    const S inv = S(1) / sigma;
    for (std::size_t i = 0; i < plane; ++i) ys[i] = (xs[i] - mean) * inv;
  }
  auto out = make_node(std::move(v), x->requires_grad);
  out->parents = {x};
  if (out->requires_grad) {
    out->backprop = [plane, sigmas = std::move(sigmas)](NodeT<S>& self) {
      auto& xn = *self.parents[0];
      xn.ensure_grad();
      const std::size_t groups = sigmas.size();
      for (std::size_t j = 0; j < groups; ++j) {
        const S* g = &self.grad.data[j * plane];
        const S* y = &self.value.data[j * plane];
        S* gx = &xn.grad.data[j * plane];
        S gmean = S(0), gymean = S(0);
        for (std::size_t i = 0; i < plane; ++i) {
          gmean += g[i];
          gymean += g[i] * y[i];
        }
        gmean /= S(plane);
        gymean /= S(plane);
        const S inv = S(1) / sigmas[j];
        for (std::size_t i = 0; i < plane; ++i) {
          gx[i] += (g[i] - gmean - y[i] * gymean) * inv;
        }
      }
    };
  }
  return out;
}

// Reverse-topological sweep from root. seed is dL/d(root value); interior
// grads are fresh per forward pass, leaf grads accumulate.
template <typename S>
void backward(const NodePtrT<S>& root, const TensorT<S>& seed) {
  check_shape(root->value.same_shape(seed), "backward: seed shape mismatch");
  std::vector<NodeT<S>*> order;
  std::unordered_set<NodeT<S>*> seen;
  std::vector<NodeT<S>*> stack{root.get()};
  while (!stack.empty()) {
    NodeT<S>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const NodeT<S>* a, const NodeT<S>* b) { return a->id > b->id; });

  root->ensure_grad();
  for (std::size_t i = 0; i < seed.data.size(); ++i) root->grad.data[i] += seed.data[i];
  for (NodeT<S>* n : order) {
    if (n->backprop && !n->grad.data.empty()) n->backprop(*n);
  }
}

}  // namespace ordsurf
