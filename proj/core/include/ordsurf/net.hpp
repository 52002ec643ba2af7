#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordsurf/autodiff.hpp"
#include "ordsurf/prng.hpp"

namespace ordsurf {

enum class HeadKind : std::uint8_t { Ordinal2K = 0, MccK = 1, Mse1 = 2 };

struct NetConfig {
  int stem_channels = 16;
  std::array<int, 4> stage_channels{16, 32, 64, 64};
  std::array<int, 4> blocks_per_stage{2, 2, 2, 2};
  std::array<int, 3> aspp_rates{6, 12, 18};
  int aspp_channels = 64;
  int K = 16;
  HeadKind head = HeadKind::Ordinal2K;
  int patch_size = 256;
};

int head_out_channels(const NetConfig& cfg);

// Throws on structural errors; returns human-readable warnings (currently:
// ASPP rates whose dilated 3x3 kernel exceeds the 1/8-scale feature extent).
std::vector<std::string> validate(const NetConfig& cfg);

const char* head_kind_name(HeadKind k);
HeadKind parse_head_kind(const std::string& s);

// Fully convolutional encoder with output stride 8: 3x3 stride-2 stem with
// parameter-free standardization, four residual stages with strides
// (2,2,1,1) and dilations (1,1,2,2), a four-branch ASPP block (one plain 3x3
// plus three dilated 3x3), a 1x1 compression conv, a 1x1 output head, and a
// bilinear x8 upsample back to input resolution. Scalar-templated so
// gradient checks can run the identical network at f64.
template <typename S>
class NetT {
 public:
  enum class HeadInit { Zero, Random };

  NetT(const NetConfig& cfg, std::uint64_t seed, HeadInit head_init = HeadInit::Zero)
      : cfg_(cfg) {
    validate(cfg);
    SplitMix64 rng(seed);

    stem_ = make_conv("stem.conv", cfg.stem_channels, 3, 3, 2, 1, rng);
    int in_ch = cfg.stem_channels;
    for (int s = 0; s < 4; ++s) {
      const int out_ch = cfg.stage_channels[std::size_t(s)];
      const int stride = s < 2 ? 2 : 1;
      const int dilation = s < 2 ? 1 : 2;
      for (int b = 0; b < cfg.blocks_per_stage[std::size_t(s)]; ++b) {
        const std::string base =
            "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1) + ".";
        Block blk;
        const int bstride = b == 0 ? stride : 1;
        blk.conv1 = make_conv(base + "conv1", out_ch, b == 0 ? in_ch : out_ch, 3, bstride,
                              dilation, rng);
        blk.conv2 = make_conv(base + "conv2", out_ch, out_ch, 3, 1, dilation, rng);
        if (bstride != 1 || (b == 0 ? in_ch : out_ch) != out_ch) {
          blk.skip = make_conv(base + "skip", out_ch, b == 0 ? in_ch : out_ch, 1, bstride, 1, rng);
        }
        stages_[std::size_t(s)].push_back(std::move(blk));
      }
      in_ch = out_ch;
    }
    const std::array<int, 4> rates{1, cfg.aspp_rates[0], cfg.aspp_rates[1], cfg.aspp_rates[2]};
    for (int i = 0; i < 4; ++i) {
      aspp_[std::size_t(i)] = make_conv("aspp.branch" + std::to_string(i) + ".conv",
                                        cfg.aspp_channels, in_ch, 3, 1, rates[std::size_t(i)], rng);
    }
    compress_ = make_conv("head.compress", cfg.aspp_channels, 4 * cfg.aspp_channels, 1, 1, 1, rng);
    out_ = make_conv("head.out", head_out_channels(cfg), cfg.aspp_channels, 1, 1, 1, rng);
    if (head_init == HeadInit::Zero) {
      out_.w->value.fill(S(0));
      out_.b->value.fill(S(0));
    }
  }

  const NetConfig& config() const { return cfg_; }
  int out_channels() const { return head_out_channels(cfg_); }

  // (N, 3, H, W) with H, W divisible by 8 -> (N, out_channels, H, W).
  NodePtrT<S> forward(const TensorT<S>& input) {
    check_shape(input.shape.size() == 4 && input.dim(1) == 3, "net: input must be (N,3,H,W)");
    if (input.dim(2) % 8 != 0 || input.dim(3) % 8 != 0) {
      throw std::runtime_error("net: input extent must be divisible by 8");
    }
    auto x = backbone(make_input(input));
    return bilinear_upsample(aspp_head(x), 8);
  }

  NodePtrT<S> backbone(NodePtrT<S> x) {
    x = relu(standardize_channels(apply(stem_, x), S(1e-5)));
    for (const auto& stage : stages_) {
      for (const auto& blk : stage) {
        auto y = apply(blk.conv2, relu(apply(blk.conv1, x)));
        auto sk = blk.skip ? apply(*blk.skip, x) : x;
        x = relu(add(y, sk));
      }
    }
    return x;
  }

  // ASPP + compression + output head at 1/8 resolution (no upsample).
  NodePtrT<S> aspp_head(const NodePtrT<S>& features) {
    std::vector<NodePtrT<S>> branches;
    branches.reserve(4);
    for (const auto& br : aspp_) branches.push_back(relu(apply(br, features)));
    auto x = relu(apply(compress_, concat_channels(branches)));
    return apply(out_, x);
  }

  struct NamedParam {
    std::string name;
    NodePtrT<S> node;
  };

  const std::vector<NamedParam>& parameters() const { return params_; }

  NodePtrT<S> param(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return p.node;
    }
    throw std::runtime_error("net: no parameter named " + name);
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.node->ensure_grad();
      p.node->grad.fill(S(0));
    }
  }

  static bool is_head_param(const std::string& name) {
    return name.rfind("aspp.", 0) == 0 || name.rfind("head.", 0) == 0;
  }

 private:
  struct Conv {
    NodePtrT<S> w, b;
    int stride = 1, dilation = 1, pad = 0;
  };
  struct Block {
    Conv conv1, conv2;
    std::optional<Conv> skip;
  };

  Conv make_conv(const std::string& name, int out_ch, int in_ch, int k, int stride, int dilation,
                 SplitMix64& rng) {
    Conv c;
    c.stride = stride;
    c.dilation = dilation;
    c.pad = k == 1 ? 0 : dilation;
    TensorT<S> w({out_ch, in_ch, k, k});
    const double bound = std::sqrt(6.0 / (double(in_ch) * k * k));
    for (S& v : w.data) v = S(rng.uniform(-bound, bound));
    c.w = make_param(std::move(w));
    c.b = make_param(TensorT<S>({out_ch}));
    params_.push_back({name + ".weight", c.w});
    params_.push_back({name + ".bias", c.b});
    return c;
  }

  NodePtrT<S> apply(const Conv& c, const NodePtrT<S>& x) {
    return conv2d(x, c.w, c.b, c.stride, c.dilation, c.pad);
  }

  NetConfig cfg_;
  Conv stem_;
  std::array<std::vector<Block>, 4> stages_;
  std::array<Conv, 4> aspp_;
  Conv compress_;
  Conv out_;
  std::vector<NamedParam> params_;
};

using Net = NetT<float>;

}  // namespace ordsurf
