#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ordsurf/prng.hpp"

namespace ordsurf {

// Dense single-channel float grid (heights in meters). Row-major, top row
// first. nodata pixels carry the NaN sentinel.
struct RasterGrid {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  float nodata = std::numeric_limits<float>::quiet_NaN();

  static RasterGrid filled(int w, int h, float v) {
    RasterGrid g;
    g.width = w;
    g.height = h;
    g.data.assign(static_cast<std::size_t>(w) * h, v);
    return g;
  }

  float at(int x, int y) const { return data[std::size_t(y) * width + x]; }
  float& at(int x, int y) { return data[std::size_t(y) * width + x]; }
  std::size_t size() const { return data.size(); }

  bool is_nodata(float v) const {
    return std::isnan(nodata) ? std::isnan(v) : v == nodata;
  }
};

// Dense interleaved float image, values in [0, 1], 3 channels.
struct ImageTile {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;  // row-major, interleaved

  static ImageTile filled(int w, int h, float v, int c = 3) {
    ImageTile t;
    t.width = w;
    t.height = h;
    t.channels = c;
    t.data.assign(static_cast<std::size_t>(w) * h * c, v);
    return t;
  }

  float at(int x, int y, int c) const {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  float& at(int x, int y, int c) {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
};

// A square crop plus the height offset removed when it was localized.
struct PatchSpec {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
  float local_min = 0.0f;
};

struct PatchRect {
  int row = 0;
  int col = 0;
  int x0 = 0;
  int y0 = 0;
  int size = 0;
};

// Grid of patch rectangles covering an image, with overlap bookkeeping.
struct PatchLayout {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  int overlap = 0;
  int image_width = 0;
  int image_height = 0;
  std::vector<PatchRect> rects;  // row-major

  const PatchRect& rect(int r, int c) const { return rects[std::size_t(r) * cols + c]; }
};

// HMAP raster file: magic "HMAP", little-endian u32 width, u32 height, then
// width*height little-endian f32, row-major, top row first. Round trips are
// bit exact.
RasterGrid load_raster(const std::string& path);
void save_raster(const RasterGrid& grid, const std::string& path);

// Binary PPM (P6, maxval 255). u8 -> float by /255; float -> u8 by
// round-half-up of 255*v after clamping to [0, 1].
ImageTile load_ppm(const std::string& path);
void save_ppm(const ImageTile& image, const std::string& path);

struct LocalizedPatch {
  RasterGrid grid;
  PatchSpec spec;
};

// Crops grid to the given square and subtracts the crop's own minimum, so the
// result is relative height with min exactly 0. Throws if the rectangle
// leaves the grid or the crop contains nodata.
LocalizedPatch localize_patch(const RasterGrid& grid, int x0, int y0, int size);

struct CropPair {
  ImageTile image;
  RasterGrid dsm;  // localized
  PatchSpec spec;
};

// Crops image and height map at the same uniformly drawn position and
// localizes the height crop. Crops containing nodata are rejected and
// redrawn.
CropPair random_crop_pair(const ImageTile& image, const RasterGrid& dsm,
                          int size, SplitMix64& rng);

// Plans a patch grid: patches advance by patch_size - overlap and the last
// patch of each row/column is clamped so its far edge lands on the image
// edge. Every pixel is covered and adjacent patches share >= overlap pixels.
PatchLayout plan_grid(int width, int height, int patch_size = 256,
                      int overlap = 2);

}  // namespace ordsurf
