#include "ordsurf/heatmap.hpp"

#include <cmath>
#include <stdexcept>

namespace ordsurf {

namespace {

std::uint8_t quant(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return std::uint8_t(std::floor(v * 255.0 + 0.5));
}

// Piecewise-linear ramp through the given stops at t = i/255.
template <std::size_t N>
std::array<RampEntry, 256> build_ramp(const double (&stops)[N][3]) {
  std::array<RampEntry, 256> ramp{};
  for (int i = 0; i < 256; ++i) {
    const double t = double(i) / 255.0 * double(N - 1);
    const std::size_t s = std::min(std::size_t(t), N - 2);
    const double f = t - double(s);
    ramp[i].r = quant(stops[s][0] + f * (stops[s + 1][0] - stops[s][0]));
    ramp[i].g = quant(stops[s][1] + f * (stops[s + 1][1] - stops[s][1]));
    ramp[i].b = quant(stops[s][2] + f * (stops[s + 1][2] - stops[s][2]));
  }
  return ramp;
}

int ramp_index(double v, double vmin, double vmax) {
  if (!(vmax > vmin)) return 0;
  double t = (v - vmin) / (vmax - vmin);
  if (t < 0.0) t = 0.0;
  if (t > 1.0) t = 1.0;
  return int(std::floor(t * 255.0 + 0.5));
}

ImageTile render(const RasterGrid& grid, const std::array<RampEntry, 256>& ramp,
                 double vmin, double vmax) {
  ImageTile img;
  img.width = grid.width;
  img.height = grid.height;
  img.data.resize(std::size_t(grid.width) * grid.height * 3);
  for (std::size_t i = 0; i < grid.data.size(); ++i) {
    const RampEntry& e = ramp[ramp_index(double(grid.data[i]), vmin, vmax)];
    img.data[i * 3 + 0] = float(e.r) / 255.0f;
    img.data[i * 3 + 1] = float(e.g) / 255.0f;
    img.data[i * 3 + 2] = float(e.b) / 255.0f;
  }
  return img;
}

}  // namespace

const std::array<RampEntry, 256>& height_ramp() {
  static const double stops[3][3] = {
      {0.10, 0.30, 0.15},  // low: dark green
      {0.80, 0.70, 0.30},  // mid: tan
      {1.00, 1.00, 1.00},  // high: white
  };
  static const auto ramp = build_ramp(stops);
  return ramp;
}

const std::array<RampEntry, 256>& diff_ramp() {
  static const double stops[3][3] = {
      {0.15, 0.25, 0.80},  // negative: blue
      {1.00, 1.00, 1.00},  // zero: white
      {0.85, 0.15, 0.10},  // positive: red
  };
  static const auto ramp = build_ramp(stops);
  return ramp;
}

ImageTile render_heatmap(const RasterGrid& grid, double vmin, double vmax) {
  if (!std::isfinite(vmin) || !std::isfinite(vmax)) {
    throw std::runtime_error("heatmap: non-finite range");
  }
  return render(grid, height_ramp(), vmin, vmax);
}

ImageTile render_diff_heatmap(const RasterGrid& diff, double limit) {
  if (!(limit > 0.0) || !std::isfinite(limit)) {
    throw std::runtime_error("heatmap: diff limit must be positive");
  }
  return render(diff, diff_ramp(), -limit, limit);
}

}  // namespace ordsurf
