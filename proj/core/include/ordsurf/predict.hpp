#pragma once

#include <vector>

#include "ordsurf/discretize.hpp"
#include "ordsurf/net.hpp"
#include "ordsurf/raster.hpp"
#include "ordsurf/stitch.hpp"

namespace ordsurf {

// (N, 3, H, W) activation tensor from interleaved RGB tiles, all same size.
Tensor tensor_from_tiles(const std::vector<const ImageTile*>& tiles);

// Turns one sample of a head output batch into a relative height raster.
// The ordinal head thresholds rank probabilities and decodes bin midpoints,
// the mcc head takes the per-pixel argmax class, and the mse head reads
// heights directly (clamped at zero since heights are nonnegative).
RasterGrid decode_sample(const Tensor& out, int sample, HeadKind head,
                         const DiscretizationScheme& scheme);

// Forward pass over many tiles in batches; one raster per tile.
std::vector<RasterGrid> predict_tiles(Net& net,
                                      const std::vector<const ImageTile*>& tiles,
                                      const DiscretizationScheme& scheme,
                                      int batch_size = 8);

struct PredictResult {
  PatchLayout layout;
  std::vector<RasterGrid> patches;  // relative heights, one per rect
  StitchResult stitched;
};

// Full-image prediction: plan_grid with the net's patch size, crop, forward,
// decode, stitch.
PredictResult predict_image(Net& net, const ImageTile& image,
                            const DiscretizationScheme& scheme, int overlap = 2,
                            int batch_size = 8);

}  // namespace ordsurf
