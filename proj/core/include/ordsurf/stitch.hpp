#pragma once

#include <string>
#include <vector>

#include "ordsurf/raster.hpp"

namespace ordsurf {

// Rectangle in a patch's local pixel coordinates.
struct RegionRef {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

// shift = mean(prev over its region) - mean(next over its region); adding it
// to next equalizes the two means exactly. Both regions must have the same
// (nonempty) size.
double estimate_shift(const RasterGrid& prev, const RegionRef& prev_region,
                      const RasterGrid& next, const RegionRef& next_region);

struct StitchResult {
  RasterGrid raster;
  // Additive shift applied to each patch, in layout row-major order. The
  // anchor (row 0, col 0) is always 0; the stitched surface is anchored to
  // it, so callers holding the anchor's true base height can re-add it.
  std::vector<double> shifts;
};

// Merges per-patch relative height maps into one surface. The anchor patch
// is kept as-is; row 0 is aligned left to right, then every column is
// aligned top to bottom against the patch directly above, each time matching
// means over the shared overlap. Pixels covered by several patches get the
// arithmetic mean of all shifted contributors.
StitchResult stitch(const std::vector<RasterGrid>& patches, const PatchLayout& layout);

// Layout CSV: header row,col,x0,y0,size then one line per patch.
void save_layout(const PatchLayout& layout, const std::string& path);
PatchLayout load_layout(const std::string& path);

// Shift report CSV: header row,col,shift.
void save_shifts(const std::vector<double>& shifts, const PatchLayout& layout,
                 const std::string& path);

}  // namespace ordsurf
