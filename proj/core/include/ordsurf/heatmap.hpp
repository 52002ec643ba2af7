#pragma once

#include <array>
#include <cstdint>

#include "ordsurf/raster.hpp"

namespace ordsurf {

struct RampEntry {
  std::uint8_t r, g, b;
};

// Fixed 256-entry lookup tables so rendered images are bit-exact across
// builds. height_ramp runs dark green -> tan -> white; diff_ramp is a signed
// blue -> white -> red ramp with white at the middle.
const std::array<RampEntry, 256>& height_ramp();
const std::array<RampEntry, 256>& diff_ramp();

// Maps [vmin, vmax] linearly onto ramp indices 0..255 (values clamped).
// A constant raster (vmax <= vmin) maps everything to index 0.
ImageTile render_heatmap(const RasterGrid& grid, double vmin, double vmax);

// Renders pred - truth onto the signed ramp: -limit -> 0, 0 -> 128,
// +limit -> 255. limit must be positive.
ImageTile render_diff_heatmap(const RasterGrid& diff, double limit);

}  // namespace ordsurf
