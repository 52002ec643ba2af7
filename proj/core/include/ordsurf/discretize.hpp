#pragma once

#include <cstdint>
#include <vector>

#include "ordsurf/raster.hpp"

namespace ordsurf {

enum class SchemeKind : std::uint8_t { SID = 0, UD = 1 };

// How a bin midpoint in log space is mapped back to meters (SID only; UD bins
// live in meters already). Geometric inverts after averaging the two
// thresholds; Linear averages the two bin edges in meters.
enum class Midpoint { Geometric, Linear };

// Height interval [a, b] split into K sub-intervals. SID thresholds are
// natural-log values t_i = ln(a+1) + (ln(b+1) - ln(a+1)) * i/K; UD thresholds
// are meters t_i = a + (b-a) * i/K. Thresholds are kept at f64 so they agree
// with direct evaluation of the closed form to ~1e-12; checkpoints store only
// (kind, a, b, K) and recompute.
struct DiscretizationScheme {
  SchemeKind kind = SchemeKind::SID;
  double a = 0.0;
  double b = 0.0;
  int K = 0;
  std::vector<double> thresholds;  // K+1, strictly increasing
};

// Per-pixel class indices in [0, num_classes-1], row major.
struct ClassMap {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<std::uint16_t> classes;

  std::uint16_t& at(int x, int y) { return classes[std::size_t(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return classes[std::size_t(y) * width + x]; }
};

DiscretizationScheme make_scheme(SchemeKind kind, double a, double b, int K);

// Largest i with t_i <= transformed height, clamped to [0, K-1]. Heights
// below a map to 0, above b to K-1. NaN throws.
int encode(double height_m, const DiscretizationScheme& scheme);

ClassMap encode_map(const RasterGrid& grid, const DiscretizationScheme& scheme);

// Bin midpoint in meters for class d. Thresholds are averaged in their native
// space; for SID the result is exp(m)-1 (geometric midpoint) unless Linear is
// requested.
double decode(int d, const DiscretizationScheme& scheme,
              Midpoint midpoint = Midpoint::Geometric);

RasterGrid decode_map(const ClassMap& classes, const DiscretizationScheme& scheme,
                      Midpoint midpoint = Midpoint::Geometric);

}  // namespace ordsurf
