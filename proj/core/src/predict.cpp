#include "ordsurf/predict.hpp"

#include <algorithm>
#include <stdexcept>

#include "ordsurf/ordinal.hpp"

namespace ordsurf {

Tensor tensor_from_tiles(const std::vector<const ImageTile*>& tiles) {
  if (tiles.empty()) throw std::runtime_error("predict: no tiles");
  const int w = tiles[0]->width, h = tiles[0]->height;
  Tensor t({int(tiles.size()), 3, h, w});
  for (std::size_t n = 0; n < tiles.size(); ++n) {
    const ImageTile& tile = *tiles[n];
    if (tile.width != w || tile.height != h || tile.channels != 3) {
      throw std::runtime_error("predict: tiles differ in shape");
    }
    float* dst = t.ptr() + n * std::size_t(3) * h * w;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          dst[(std::size_t(c) * h + y) * w + x] = tile.at(x, y, c);
  }
  return t;
}

RasterGrid decode_sample(const Tensor& out, int sample, HeadKind head,
                         const DiscretizationScheme& scheme) {
  check_shape(out.shape.size() == 4, "decode: expected (N, C, H, W)");
  const int C = out.dim(1), H = out.dim(2), W = out.dim(3);
  check_shape(sample >= 0 && sample < out.dim(0), "decode: sample out of range");
  switch (head) {
    case HeadKind::Ordinal2K: {
      check_shape(C == 2 * scheme.K, "decode: channel count != 2K");
      OrdinalLogits logits = logits_from_batch(out, sample, scheme.K);
      return decode_map(decode_class(pair_softmax(logits)), scheme);
    }
    case HeadKind::MccK: {
      check_shape(C == scheme.K, "decode: channel count != K");
      ClassMap cm;
      cm.width = W;
      cm.height = H;
      cm.num_classes = scheme.K;
      cm.classes.resize(std::size_t(W) * H);
      const float* base = out.ptr() + std::size_t(sample) * C * H * W;
      for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        int best = 0;
        float best_v = base[i];
        for (int k = 1; k < C; ++k) {
          const float v = base[std::size_t(k) * H * W + i];
          if (v > best_v) {
            best_v = v;
            best = k;
          }
        }
        cm.classes[i] = std::uint16_t(best);
      }
      return decode_map(cm, scheme);
    }
    case HeadKind::Mse1: {
      check_shape(C == 1, "decode: channel count != 1");
      RasterGrid g;
      g.width = W;
      g.height = H;
      g.data.resize(std::size_t(W) * H);
      const float* base = out.ptr() + std::size_t(sample) * H * W;
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = std::max(0.0f, base[i]);
      return g;
    }
  }
  throw std::runtime_error("decode: unknown head kind");
}

std::vector<RasterGrid> predict_tiles(Net& net, const std::vector<const ImageTile*>& tiles,
                                      const DiscretizationScheme& scheme, int batch_size) {
  if (batch_size < 1) throw std::runtime_error("predict: batch size must be >= 1");
  const NetConfig& cfg = net.config();
  if (cfg.head != HeadKind::Mse1 && cfg.K != scheme.K) {
    throw std::runtime_error("predict: scheme K does not match network K");
  }
  std::vector<RasterGrid> out;
  out.reserve(tiles.size());
  for (std::size_t start = 0; start < tiles.size(); start += std::size_t(batch_size)) {
    const std::size_t end = std::min(tiles.size(), start + std::size_t(batch_size));
    std::vector<const ImageTile*> batch(tiles.begin() + start, tiles.begin() + end);
    auto y = net.forward(tensor_from_tiles(batch));
    for (std::size_t n = 0; n < batch.size(); ++n) {
      out.push_back(decode_sample(y->value, int(n), cfg.head, scheme));
    }
  }
  return out;
}

PredictResult predict_image(Net& net, const ImageTile& image,
                            const DiscretizationScheme& scheme, int overlap,
                            int batch_size) {
  PredictResult res;
  res.layout = plan_grid(image.width, image.height, net.config().patch_size, overlap);
  std::vector<ImageTile> crops;
  crops.reserve(res.layout.rects.size());
  for (const PatchRect& r : res.layout.rects) {
    ImageTile crop;
    crop.width = r.size;
    crop.height = r.size;
    crop.data.resize(std::size_t(r.size) * r.size * 3);
    for (int y = 0; y < r.size; ++y) {
      const float* src = image.data.data() + (std::size_t(r.y0 + y) * image.width + r.x0) * 3;
      std::copy(src, src + std::size_t(r.size) * 3,
                crop.data.begin() + std::size_t(y) * r.size * 3);
    }
    crops.push_back(std::move(crop));
  }
  std::vector<const ImageTile*> refs;
  refs.reserve(crops.size());
  for (const ImageTile& c : crops) refs.push_back(&c);
  res.patches = predict_tiles(net, refs, scheme, batch_size);
  res.stitched = stitch(res.patches, res.layout);
  return res;
}

}  // namespace ordsurf
