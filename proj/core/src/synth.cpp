#include "ordsurf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace ordsurf {

namespace {

// Smoothstep-eased value noise on a coarse lattice; one draw per lattice
// node, consumed in row-major order so the stream layout is fixed.
struct ValueNoise {
  int cell = 32;
  int nx = 0, ny = 0;
  std::vector<double> lattice;

  ValueNoise(int tile, int cell_px, SplitMix64& rng) : cell(cell_px) {
    nx = tile / cell + 2;
    ny = tile / cell + 2;
    lattice.resize(std::size_t(nx) * ny);
    for (double& v : lattice) v = rng.uniform();
  }

  double at(int px, int py) const {
    const double fx = double(px) / cell, fy = double(py) / cell;
    const int ix = int(fx), iy = int(fy);
    const double tx = smooth(fx - ix), ty = smooth(fy - iy);
    const double v00 = lattice[std::size_t(iy) * nx + ix];
    const double v01 = lattice[std::size_t(iy) * nx + ix + 1];
    const double v10 = lattice[std::size_t(iy + 1) * nx + ix];
    const double v11 = lattice[std::size_t(iy + 1) * nx + ix + 1];
    const double a = v00 + tx * (v01 - v00);
    const double b = v10 + tx * (v11 - v10);
    return a + ty * (b - a);
  }

  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
};

struct Rect {
  int x0, y0, w, h;
  bool intersects(const Rect& o, int gap) const {
    return x0 - gap < o.x0 + o.w && o.x0 - gap < x0 + w && y0 - gap < o.y0 + o.h &&
           o.y0 - gap < y0 + h;
  }
};

// Compass azimuth quantized to the nearest cardinal; returns the direction
// shadows fall, opposite the sun: 0=N -> (0,+1), 90=E -> (-1,0), ...
std::pair<int, int> shadow_direction(double azimuth_deg) {
  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0) az += 360.0;
  const int card = int(std::lround(az / 90.0)) % 4;
  switch (card) {
    case 0: return {0, 1};    // sun north, shadow south
    case 1: return {-1, 0};   // sun east, shadow west
    case 2: return {0, -1};   // sun south, shadow north
    default: return {1, 0};   // sun west, shadow east
  }
}

}  // namespace

double sample_building_height(SplitMix64& rng, const SceneConfig& cfg) {
  const double h = std::exp(cfg.height_mu + cfg.height_sigma * rng.normal());
  return std::clamp(h, 0.0, cfg.max_height);
}

std::pair<ImageTile, RasterGrid> generate_tile(const SceneConfig& cfg, std::uint64_t index) {
  const int T = cfg.tile_size;
  if (T < 1) throw std::runtime_error("synth: zero tile size");
  SplitMix64 rng(SplitMix64::mix(cfg.seed, index));

  const ValueNoise ground_noise(T, std::max(8, T / 10), rng);
  const ValueNoise texture(T, std::max(4, T / 40), rng);

  RasterGrid dsm;
  dsm.width = T;
  dsm.height = T;
  dsm.data.resize(std::size_t(T) * T);
  for (int y = 0; y < T; ++y)
    for (int x = 0; x < T; ++x)
      dsm.at(x, y) = float(cfg.ground_texture_amp * ground_noise.at(x, y));

  // Non-overlapping axis-aligned footprints; a failed placement is skipped
  // rather than retried forever so generation always terminates.
  std::vector<Rect> rects;
  std::vector<double> heights;
  const int span = std::max(1, cfg.max_buildings - cfg.min_buildings + 1);
  const int want = cfg.min_buildings + int(rng.below(std::uint64_t(span)));
  const int lo = std::max(2, int(std::lround(cfg.min_building_frac * T)));
  const int hi = std::max(lo, int(std::lround(cfg.max_building_frac * T)));
  for (int i = 0; i < want; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Rect r;
      r.w = lo + int(rng.below(std::uint64_t(hi - lo + 1)));
      r.h = lo + int(rng.below(std::uint64_t(hi - lo + 1)));
      if (r.w >= T || r.h >= T) continue;
      r.x0 = int(rng.below(std::uint64_t(T - r.w)));
      r.y0 = int(rng.below(std::uint64_t(T - r.h)));
      bool clear = true;
      for (const Rect& o : rects) {
        if (r.intersects(o, 2)) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      rects.push_back(r);
      heights.push_back(sample_building_height(rng, cfg));
      break;
    }
  }

  std::vector<std::uint8_t> roof(std::size_t(T) * T, 0);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    for (int y = r.y0; y < r.y0 + r.h; ++y)
      for (int x = r.x0; x < r.x0 + r.w; ++x) {
        dsm.at(x, y) += float(heights[i]);
        roof[std::size_t(y) * T + x] = 1;
      }
  }

  std::vector<std::uint8_t> shadow(std::size_t(T) * T, 0);
  const auto [sdx, sdy] = shadow_direction(cfg.sun_azimuth_deg);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    const int len = int(std::lround(cfg.shadow_px_per_meter * heights[i]));
    for (int step = 1; step <= len; ++step) {
      if (sdy != 0) {
        const int y = sdy > 0 ? r.y0 + r.h - 1 + step : r.y0 - step;
        if (y < 0 || y >= T) break;
        for (int x = r.x0; x < r.x0 + r.w; ++x) shadow[std::size_t(y) * T + x] = 1;
      } else {
        const int x = sdx > 0 ? r.x0 + r.w - 1 + step : r.x0 - step;
        if (x < 0 || x >= T) break;
        for (int y = r.y0; y < r.y0 + r.h; ++y) shadow[std::size_t(y) * T + x] = 1;
      }
    }
  }

  ImageTile img;
  img.width = T;
  img.height = T;
  img.channels = 3;
  img.data.resize(std::size_t(T) * T * 3);
  for (int y = 0; y < T; ++y) {
    for (int x = 0; x < T; ++x) {
      const std::size_t i = std::size_t(y) * T + x;
      const double tex = texture.at(x, y) - 0.5;
      float r, g, b;
      if (roof[i]) {
        // Roof brightness rises monotonically with height: the primary
        // monocular cue.
        const float h = dsm.at(x, y);
        const float v = float(0.30 + 0.55 * std::min(double(h) / cfg.max_height, 1.0) +
                              0.05 * tex);
        r = v;
        g = 0.97f * v;
        b = 0.92f * v;
      } else {
        const float v = float(0.20 * tex);
        r = 0.32f + v;
        g = 0.38f + v;
        b = 0.30f + v;
        if (shadow[i]) {
          r *= 0.35f;
          g *= 0.35f;
          b *= 0.35f;
        }
      }
      float* px = &img.data[i * 3];
      px[0] = std::clamp(r, 0.0f, 1.0f);
      px[1] = std::clamp(g, 0.0f, 1.0f);
      px[2] = std::clamp(b, 0.0f, 1.0f);
    }
  }
  return {std::move(img), std::move(dsm)};
}

std::vector<ManifestEntry> generate_dataset(const SceneConfig& cfg, int n_tiles,
                                            const std::string& out_dir) {
  if (n_tiles < 0) throw std::runtime_error("synth: negative tile count");
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  entries.reserve(std::size_t(n_tiles));
  for (int i = 0; i < n_tiles; ++i) {
    auto [img, dsm] = generate_tile(cfg, std::uint64_t(i));
    char img_name[32], dsm_name[32];
    std::snprintf(img_name, sizeof img_name, "tile_%04d.ppm", i);
    std::snprintf(dsm_name, sizeof dsm_name, "tile_%04d.hmap", i);
    save_ppm(img, out_dir + "/" + img_name);
    save_raster(dsm, out_dir + "/" + dsm_name);
    float mx = 0.0f;
    for (float v : dsm.data) mx = std::max(mx, v);
    entries.push_back(ManifestEntry{i, img_name, dsm_name, mx});
  }
  std::ofstream out(out_dir + "/manifest.csv", std::ios::trunc);
  if (!out) throw std::runtime_error("synth: cannot write manifest in " + out_dir);
  out << "index,image,dsm,max_height\n";
  for (const auto& e : entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%d,%s,%s,%.9g\n", e.index, e.image.c_str(), e.dsm.c_str(),
                  double(e.max_height));
    out << line;
  }
  if (!out) throw std::runtime_error("synth: manifest write failed in " + out_dir);
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("index,", 0) == 0) continue;
    }
    ManifestEntry e;
    std::size_t p0 = line.find(',');
    std::size_t p1 = p0 == std::string::npos ? p0 : line.find(',', p0 + 1);
    std::size_t p2 = p1 == std::string::npos ? p1 : line.find(',', p1 + 1);
    if (p2 == std::string::npos) throw std::runtime_error("manifest: malformed line: " + line);
    e.index = std::stoi(line.substr(0, p0));
    e.image = line.substr(p0 + 1, p1 - p0 - 1);
    e.dsm = line.substr(p1 + 1, p2 - p1 - 1);
    e.max_height = std::stof(line.substr(p2 + 1));
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string manifest_dir(const std::string& manifest_path) {
  const auto parent = std::filesystem::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

}  // namespace ordsurf
