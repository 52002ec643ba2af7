#include "ordsurf/stitch.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ordsurf/prng.hpp"
#include "ordsurf/raster.hpp"

using namespace ordsurf;

namespace {

// ground truth surface, then patches cut from it with per-patch offsets, so
// stitching must undo exactly those offsets
RasterGrid ramp_surface(int w, int h, float scale = 1.0f) {
  RasterGrid g = RasterGrid::filled(w, h, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.at(x, y) = scale * (float(x) + 0.25f * float(y));
  return g;
}

std::vector<RasterGrid> cut_patches(const RasterGrid& surface, const PatchLayout& layout,
                                    const std::vector<double>& offsets) {
  std::vector<RasterGrid> patches;
  for (std::size_t i = 0; i < layout.rects.size(); ++i) {
    const PatchRect& r = layout.rects[i];
    RasterGrid p = RasterGrid::filled(r.size, r.size, 0.0f);
    for (int y = 0; y < r.size; ++y)
      for (int x = 0; x < r.size; ++x)
        p.at(x, y) = surface.at(r.x0 + x, r.y0 + y) + float(offsets[i]);
    patches.push_back(std::move(p));
  }
  return patches;
}

double max_abs_diff(const RasterGrid& a, const RasterGrid& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(double(a.data[i]) - double(b.data[i])));
  return worst;
}

std::string temp_path(const char* name) {
  return std::string("stitch_test_") + name + ".tmp";
}

}  // namespace

TEST_CASE("estimate_shift equalizes region means") {
  RasterGrid prev = RasterGrid::filled(4, 4, 10.0f);
  RasterGrid next = RasterGrid::filled(4, 4, 7.0f);
  const RegionRef right{2, 0, 2, 4};
  const RegionRef left{0, 0, 2, 4};
  CHECK(estimate_shift(prev, right, next, left) == doctest::Approx(3.0).epsilon(1e-12));

  // translation equivariance: shifting next by c changes the estimate by -c
  for (float& v : next.data) v += 5.0f;
  CHECK(estimate_shift(prev, right, next, left) == doctest::Approx(-2.0).epsilon(1e-12));

  // identical overlap content gives exactly zero
  RasterGrid a = RasterGrid::filled(3, 3, 0.0f);
  SplitMix64 rng(3);
  for (float& v : a.data) v = float(rng.uniform() * 9);
  CHECK(estimate_shift(a, RegionRef{0, 0, 3, 3}, a, RegionRef{0, 0, 3, 3}) == 0.0);
}

TEST_CASE("estimate_shift validates regions") {
  RasterGrid g = RasterGrid::filled(4, 4, 1.0f);
  CHECK_THROWS(estimate_shift(g, RegionRef{0, 0, 2, 2}, g, RegionRef{0, 0, 2, 3}));
  CHECK_THROWS(estimate_shift(g, RegionRef{3, 3, 2, 2}, g, RegionRef{0, 0, 2, 2}));
  CHECK_THROWS(estimate_shift(g, RegionRef{0, 0, 0, 0}, g, RegionRef{0, 0, 0, 0}));
}

TEST_CASE("two patches in a row reassemble a ramp") {
  const RasterGrid surface = ramp_surface(510, 256);
  const PatchLayout layout = plan_grid(510, 256, 256, 2);
  REQUIRE(layout.rects.size() == 2);
  const auto patches = cut_patches(surface, layout, {0.0, 13.5});
  const StitchResult r = stitch(patches, layout);
  REQUIRE(r.raster.width == 510);
  REQUIRE(r.raster.height == 256);
  CHECK(r.shifts[0] == 0.0);
  CHECK(r.shifts[1] == doctest::Approx(-13.5).epsilon(1e-6));
  CHECK(max_abs_diff(r.raster, surface) < 1e-5);
}

TEST_CASE("three by three grid with constant per-patch offsets") {
  // height-map magnitudes: f32 rounding of the offset patches stays below
  // the reconstruction bound only when values sit in a plausible range
  const RasterGrid surface = ramp_surface(600, 600, 0.05f);
  const PatchLayout layout = plan_grid(600, 600, 256, 2);
  REQUIRE(layout.rows == 3);
  REQUIRE(layout.cols == 3);
  std::vector<double> offsets;
  SplitMix64 rng(7);
  offsets.push_back(0.0);  // anchor offset zero keeps absolute heights
  for (int i = 1; i < 9; ++i) offsets.push_back(rng.uniform() * 40 - 20);
  const auto patches = cut_patches(surface, layout, offsets);
  const StitchResult r = stitch(patches, layout);

  CHECK(max_abs_diff(r.raster, surface) < 1e-5);
  // each recovered shift cancels the offset it was given
  for (int i = 0; i < 9; ++i)
    CHECK(r.shifts[std::size_t(i)] == doctest::Approx(-offsets[std::size_t(i)]).epsilon(1e-4));
}

TEST_CASE("anchored reconstruction is exact up to a global constant") {
  // nonzero anchor offset: the surface comes back rigidly moved by it
  const RasterGrid surface = ramp_surface(384, 384);
  const PatchLayout layout = plan_grid(384, 384, 128, 4);
  std::vector<double> offsets(layout.rects.size());
  SplitMix64 rng(9);
  for (auto& o : offsets) o = rng.uniform() * 10 - 5;
  const auto patches = cut_patches(surface, layout, offsets);
  const StitchResult r = stitch(patches, layout);
  double worst = 0.0;
  for (int y = 0; y < 384; ++y)
    for (int x = 0; x < 384; ++x)
      worst = std::max(worst, std::abs(double(r.raster.at(x, y)) - surface.at(x, y) -
                                       offsets[0]));
  CHECK(worst < 1e-4);
}

TEST_CASE("single patch passes through unchanged") {
  const PatchLayout layout = plan_grid(256, 256, 256, 2);
  REQUIRE(layout.rects.size() == 1);
  RasterGrid p = RasterGrid::filled(256, 256, 0.0f);
  SplitMix64 rng(11);
  for (float& v : p.data) v = float(rng.uniform() * 30);
  const StitchResult r = stitch({p}, layout);
  CHECK(r.shifts == std::vector<double>{0.0});
  CHECK(r.raster.data == p.data);
}

TEST_CASE("overlap pixels average their contributors") {
  // two constant patches differing by 2 after alignment cannot disagree, so
  // force disagreement with non-constant overlap content instead: patch B's
  // overlap columns differ from A's by +-1 around the matched mean
  const PatchLayout layout = plan_grid(30, 16, 16, 2);
  REQUIRE(layout.rects.size() == 2);
  RasterGrid a = RasterGrid::filled(16, 16, 5.0f);
  RasterGrid b = RasterGrid::filled(16, 16, 5.0f);
  // shared columns are x=14,15 of a and x=0,1 of b
  for (int y = 0; y < 16; ++y) {
    b.at(0, y) = 4.0f;
    b.at(1, y) = 6.0f;
  }
  const StitchResult r = stitch({a, b}, layout);
  CHECK(r.shifts[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.raster.at(14, 3) == doctest::Approx((5.0 + 4.0) / 2).epsilon(1e-6));
  CHECK(r.raster.at(15, 3) == doctest::Approx((5.0 + 6.0) / 2).epsilon(1e-6));
  CHECK(r.raster.at(5, 3) == doctest::Approx(5.0));
  CHECK(r.raster.at(20, 3) == doctest::Approx(5.0));
}

TEST_CASE("stitch validates its inputs") {
  const PatchLayout layout = plan_grid(510, 256, 256, 2);
  RasterGrid p = RasterGrid::filled(256, 256, 1.0f);
  CHECK_THROWS(stitch({p}, layout));  // count mismatch
  RasterGrid small = RasterGrid::filled(128, 128, 1.0f);
  CHECK_THROWS(stitch({p, small}, layout));  // size mismatch

  // layouts whose patches do not touch cannot be aligned
  PatchLayout broken = layout;
  broken.rects[1].x0 = 300;  // gap between 256 and 300
  std::vector<RasterGrid> two{p, p};
  CHECK_THROWS(stitch(two, broken));
}

TEST_CASE("layout csv round trip") {
  const PatchLayout layout = plan_grid(600, 510, 256, 2);
  const std::string path = temp_path("layout");
  save_layout(layout, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "row,col,x0,y0,size");
  in.close();

  const PatchLayout back = load_layout(path);
  CHECK(back.rows == layout.rows);
  CHECK(back.cols == layout.cols);
  CHECK(back.patch_size == layout.patch_size);
  CHECK(back.overlap == layout.overlap);
  CHECK(back.image_width == layout.image_width);
  CHECK(back.image_height == layout.image_height);
  REQUIRE(back.rects.size() == layout.rects.size());
  for (std::size_t i = 0; i < layout.rects.size(); ++i) {
    CHECK(back.rects[i].row == layout.rects[i].row);
    CHECK(back.rects[i].col == layout.rects[i].col);
    CHECK(back.rects[i].x0 == layout.rects[i].x0);
    CHECK(back.rects[i].y0 == layout.rects[i].y0);
    CHECK(back.rects[i].size == layout.rects[i].size);
  }
  std::remove(path.c_str());
}

TEST_CASE("layout loader rejects holes and duplicates") {
  const PatchLayout layout = plan_grid(510, 510, 256, 2);
  const std::string path = temp_path("layout_bad");

  {
    std::ofstream out(path, std::ios::trunc);
    out << "row,col,x0,y0,size\n0,0,0,0,256\n0,1,254,0,256\n1,0,0,254,256\n";
  }
  CHECK_THROWS(load_layout(path));  // missing (1,1)

  {
    std::ofstream out(path, std::ios::trunc);
    out << "row,col,x0,y0,size\n0,0,0,0,256\n0,0,0,0,256\n";
  }
  CHECK_THROWS(load_layout(path));  // duplicate cell

  {
    std::ofstream out(path, std::ios::trunc);
    out << "row,col,x0,y0,size\n";
  }
  CHECK_THROWS(load_layout(path));  // empty

  std::remove(path.c_str());
  CHECK_THROWS(load_layout(path));  // missing file
}

TEST_CASE("shift report csv") {
  const PatchLayout layout = plan_grid(510, 256, 256, 2);
  const std::string path = temp_path("shifts");
  save_shifts({0.0, -13.5}, layout, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,col,shift");
  std::getline(in, line);
  CHECK(line == "0,0,0");
  std::getline(in, line);
  CHECK(line == "0,1,-13.5");
  std::remove(path.c_str());
}
