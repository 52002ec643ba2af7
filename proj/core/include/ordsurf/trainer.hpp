#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordsurf/checkpoint.hpp"
#include "ordsurf/discretize.hpp"
#include "ordsurf/net.hpp"
#include "ordsurf/raster.hpp"

namespace ordsurf {

struct OptimConfig {
  float lr_head = 1e-3f;  // ordinal regression part: ASPP + head convs
  float lr_backbone = 1e-4f;
  float weight_decay = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  int batch_size = 8;
  int epochs = 20;
  int patches_per_epoch = 2000;
  int plateau_patience = 2;
  float plateau_factor = 0.1f;
};

void validate(const OptimConfig& cfg);

// Adam with two learning-rate groups split by parameter name (head vs
// backbone) and coupled L2 weight decay added to the gradient. With
// weight_decay == 0 the update is plain Adam, bit for bit.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Net::NamedParam> params, const OptimConfig& cfg);

  // One update from the gradients currently stored on the parameter nodes.
  // Any non-finite gradient rejects the whole step before mutating state.
  void step();

  void set_lrs(float lr_head, float lr_backbone);
  float lr_head() const { return lr_head_; }
  float lr_backbone() const { return lr_backbone_; }
  std::int64_t step_count() const { return step_; }

  // Moment tensors as "adam.m.<param>", "adam.v.<param>" plus "adam.step",
  // for checkpointing. import matches by name and shape.
  std::vector<std::pair<std::string, Tensor>> export_state() const;
  void import_state(const std::vector<std::pair<std::string, Tensor>>& tensors);

 private:
  std::vector<Net::NamedParam> params_;
  std::vector<Tensor> m_, v_;
  std::vector<bool> is_head_;
  float lr_head_, lr_backbone_, wd_, beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
};

// Divide-on-plateau schedule: after `patience` consecutive observations with
// no strict improvement over the best seen, scale() drops by `factor`, at
// most `max_drops` times.
class PlateauLr {
 public:
  PlateauLr(int patience = 2, double factor = 0.1, int max_drops = 2);

  // Feed one epoch-mean loss; returns true when a drop fires.
  bool observe(double loss);
  double scale() const { return scale_; }
  int drops() const { return drops_; }

 private:
  int patience_, max_drops_;
  double factor_;
  double best_;
  int bad_ = 0;
  int drops_ = 0;
  double scale_ = 1.0;
};

struct TilePair {
  ImageTile image;
  RasterGrid dsm;
};

struct Dataset {
  std::vector<TilePair> tiles;
};

// Loads every image/dsm pair listed in a manifest csv (paths resolved
// relative to the manifest).
Dataset load_dataset(const std::string& manifest_path);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr_head = 0.0;
  double lr_backbone = 0.0;
  double val_rmse = 0.0;
  double val_rel = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // final weights + optimizer state + scheme
  std::vector<EpochLog> log;
};

// Full training run: random crops from train tiles, loss by head kind,
// Adam with the two-group rates, plateau schedule on epoch-mean loss,
// per-epoch validation over a fixed patch grid of the val tiles.
// Deterministic given seed. val may be empty (val columns become nan).
TrainResult train(const Dataset& train_data, const Dataset& val_data,
                  const NetConfig& net_cfg, const OptimConfig& opt_cfg,
                  const DiscretizationScheme& scheme, std::uint64_t seed,
                  bool verbose = false);

// CSV: epoch,mean_loss,lr_head,lr_backbone,val_rmse,val_rel
void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path);

// UTF-8 `key = value` lines; keys are exactly the OptimConfig / NetConfig
// field names (betas as "b1,b2"; list fields comma-separated; head by name).
// Unknown keys error. '#' starts a comment.
void parse_train_config(const std::string& path, OptimConfig& opt, NetConfig& net);

}  // namespace ordsurf
