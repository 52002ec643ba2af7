#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ordsurf/prng.hpp"
#include "ordsurf/raster.hpp"

namespace ordsurf {

// Procedural (image, DSM) tile pairs with monocular height cues: roofs get
// brighter with building height, and each building casts a hard rectangular
// shadow whose length is proportional to its height. Every cue is a
// deterministic function of the DSM, so height is recoverable from the image
// in principle.
struct SceneConfig {
  int tile_size = 320;
  int min_buildings = 5;
  int max_buildings = 12;
  // Footprint edge lengths, as fractions of the tile edge.
  double min_building_frac = 0.10;
  double max_building_frac = 0.20;
  // Heights ~ lognormal(mu, sigma) meters, clamped to max_height.
  double height_mu = 1.791759469228055;  // ln 6
  double height_sigma = 0.6;
  double max_height = 40.0;
  double ground_texture_amp = 0.25;  // meters of smooth ground undulation
  double sun_azimuth_deg = 135.0;    // shadows fall opposite this direction
  double shadow_px_per_meter = 1.5;
  std::uint64_t seed = 0;
};

// One lognormal draw, clamped to [0, max_height]. Consumes exactly one
// normal() (two uniform draws).
double sample_building_height(SplitMix64& rng, const SceneConfig& cfg);

// Deterministic per (cfg.seed, index): tile index selects an independent
// substream, so tiles can be generated in any order or in parallel.
std::pair<ImageTile, RasterGrid> generate_tile(const SceneConfig& cfg, std::uint64_t index);

struct ManifestEntry {
  int index = 0;
  std::string image;  // path relative to the manifest
  std::string dsm;
  float max_height = 0.0f;
};

// Writes tile_<index>.ppm / tile_<index>.hmap pairs plus manifest.csv
// (columns: index,image,dsm,max_height) into out_dir.
std::vector<ManifestEntry> generate_dataset(const SceneConfig& cfg, int n_tiles,
                                            const std::string& out_dir);

std::vector<ManifestEntry> load_manifest(const std::string& path);

// Directory part of a manifest path, for resolving the relative entries.
std::string manifest_dir(const std::string& manifest_path);

}  // namespace ordsurf
