#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ordsurf/discretize.hpp"
#include "ordsurf/net.hpp"

namespace ordsurf {

// Model snapshot: network config, discretization scheme, and named f32
// tensors (parameters, plus optional optimizer state under the "adam."
// prefix).
//
// File format, all integers little-endian:
//   magic "ORDN", u32 version (=1)
//   config: u32 stem_channels, 4x u32 stage_channels, 4x u32 blocks_per_stage,
//           3x u32 aspp_rates, u32 aspp_channels, u32 K, u8 head kind,
//           u32 patch_size
//   scheme: u8 kind, f64 a, f64 b, u32 K   (thresholds recomputed on load)
//   u32 tensor count, then per tensor:
//     u16 name length, name bytes, u8 rank, rank x u32 dims, f32 payload
struct Checkpoint {
  NetConfig config;
  DiscretizationScheme scheme;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot of the net's parameters (optimizer state, if any, is appended by
// the trainer).
Checkpoint checkpoint_from_net(const Net& net, const DiscretizationScheme& scheme);

// Copies parameter tensors into an already-constructed net. Every parameter
// must be present exactly once with a matching shape; unknown non-"adam."
// tensors are an error.
void load_into_net(const Checkpoint& ckpt, Net& net);

}  // namespace ordsurf
