#include "ordsurf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ordsurf/metrics.hpp"
#include "ordsurf/ordinal.hpp"
#include "ordsurf/predict.hpp"
#include "ordsurf/synth.hpp"

namespace ordsurf {

void validate(const OptimConfig& cfg) {
  if (!(cfg.lr_head > 0.0f) || !(cfg.lr_backbone > 0.0f)) {
    throw std::runtime_error("optim: learning rates must be positive");
  }
  if (!(cfg.weight_decay >= 0.0f)) throw std::runtime_error("optim: negative weight decay");
  if (!(cfg.beta1 >= 0.0f && cfg.beta1 < 1.0f) || !(cfg.beta2 >= 0.0f && cfg.beta2 < 1.0f)) {
    throw std::runtime_error("optim: betas must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0f)) throw std::runtime_error("optim: eps must be positive");
  if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.patches_per_epoch < 1) {
    throw std::runtime_error("optim: counts must be >= 1");
  }
  if (cfg.plateau_patience < 1) throw std::runtime_error("optim: patience must be >= 1");
  if (!(cfg.plateau_factor > 0.0f && cfg.plateau_factor < 1.0f)) {
    throw std::runtime_error("optim: plateau factor must lie in (0, 1)");
  }
}

AdamOptimizer::AdamOptimizer(std::vector<Net::NamedParam> params, const OptimConfig& cfg)
    : params_(std::move(params)),
      lr_head_(cfg.lr_head),
      lr_backbone_(cfg.lr_backbone),
      wd_(cfg.weight_decay),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  is_head_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.node->value.shape);
    v_.emplace_back(p.node->value.shape);
    is_head_.push_back(Net::is_head_param(p.name));
  }
}

void AdamOptimizer::step() {
  for (const auto& p : params_) {
    for (float g : p.node->grad.data) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("adam: non-finite gradient in " + p.name + ", step rejected");
      }
    }
  }
  const std::int64_t t = step_ + 1;
  const float bc1 = float(1.0 - std::pow(double(beta1_), double(t)));
  const float bc2 = float(1.0 - std::pow(double(beta2_), double(t)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].node;
    const float lr = is_head_[i] ? lr_head_ : lr_backbone_;
    float* value = node.value.data.data();
    float* m = m_[i].data.data();
    float* v = v_[i].data.data();
    const std::size_t n = node.value.data.size();
    const bool has_grad = node.grad.data.size() == n;
    for (std::size_t j = 0; j < n; ++j) {
      float g = has_grad ? node.grad.data[j] : 0.0f;
      if (wd_ != 0.0f) g += wd_ * value[j];
      m[j] = beta1_ * m[j] + (1.0f - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0f - beta2_) * g * g;
      const float mhat = m[j] / bc1;
      const float vhat = v[j] / bc2;
      value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
  step_ = t;
}

void AdamOptimizer::set_lrs(float lr_head, float lr_backbone) {
  if (!(lr_head > 0.0f) || !(lr_backbone > 0.0f)) {
    throw std::runtime_error("adam: learning rates must be positive");
  }
  lr_head_ = lr_head;
  lr_backbone_ = lr_backbone;
}

std::vector<std::pair<std::string, Tensor>> AdamOptimizer::export_state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(params_.size() * 2 + 1);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("adam.m." + params_[i].name, m_[i]);
    out.emplace_back("adam.v." + params_[i].name, v_[i]);
  }
  Tensor step_t({1});
  step_t.data[0] = float(step_);
  out.emplace_back("adam.step", std::move(step_t));
  return out;
}

void AdamOptimizer::import_state(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("adam.", 0) != 0) continue;
    if (!by_name.emplace(name, &t).second) {
      throw std::runtime_error("adam: duplicate state tensor " + name);
    }
  }
  if (by_name.empty()) throw std::runtime_error("adam: checkpoint has no optimizer state");
  auto take = [&](const std::string& name, const Tensor& like) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("adam: missing state tensor " + name);
    if (!it->second->same_shape(like)) {
      throw std::runtime_error("adam: state shape mismatch for " + name);
    }
    return *it->second;
  };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i] = take("adam.m." + params_[i].name, m_[i]);
    v_[i] = take("adam.v." + params_[i].name, v_[i]);
  }
  auto it = by_name.find("adam.step");
  if (it == by_name.end() || it->second->data.size() != 1) {
    throw std::runtime_error("adam: missing step counter");
  }
  step_ = std::int64_t(it->second->data[0]);
}

PlateauLr::PlateauLr(int patience, double factor, int max_drops)
    : patience_(patience),
      max_drops_(max_drops),
      factor_(factor),
      best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1 || max_drops < 0 || !(factor > 0.0 && factor < 1.0)) {
    throw std::runtime_error("plateau: bad schedule parameters");
  }
}

bool PlateauLr::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_ = 0;
    return false;
  }
  ++bad_;
  if (bad_ >= patience_ && drops_ < max_drops_) {
    ++drops_;
    scale_ *= factor_;
    bad_ = 0;
    return true;
  }
  return false;
}

Dataset load_dataset(const std::string& manifest_path) {
  const std::string dir = manifest_dir(manifest_path);
  Dataset ds;
  for (const ManifestEntry& e : load_manifest(manifest_path)) {
    TilePair pair;
    pair.image = load_ppm(dir + "/" + e.image);
    pair.dsm = load_raster(dir + "/" + e.dsm);
    if (pair.image.width != pair.dsm.width || pair.image.height != pair.dsm.height) {
      throw std::runtime_error("dataset: image/dsm size mismatch for " + e.image);
    }
    ds.tiles.push_back(std::move(pair));
  }
  return ds;
}

namespace {

// Metric pooling over a fixed validation grid: every tile is cut with
// plan_grid, truth patches are localized the same way training crops are,
// and predictions are compared patch by patch.
MetricReport validate_tiles(Net& net, const Dataset& val,
                            const DiscretizationScheme& scheme, int overlap,
                            int batch_size) {
  MetricAccumulator acc;
  const int patch = net.config().patch_size;
  for (const TilePair& tile : val.tiles) {
    const PatchLayout layout = plan_grid(tile.image.width, tile.image.height, patch, overlap);
    std::vector<ImageTile> crops;
    std::vector<RasterGrid> truths;
    crops.reserve(layout.rects.size());
    truths.reserve(layout.rects.size());
    for (const PatchRect& r : layout.rects) {
      LocalizedPatch lp = localize_patch(tile.dsm, r.x0, r.y0, r.size);
      truths.push_back(std::move(lp.grid));
      ImageTile crop;
      crop.width = r.size;
      crop.height = r.size;
      crop.data.resize(std::size_t(r.size) * r.size * 3);
      for (int y = 0; y < r.size; ++y) {
        const float* src =
            tile.image.data.data() + (std::size_t(r.y0 + y) * tile.image.width + r.x0) * 3;
        std::copy(src, src + std::size_t(r.size) * 3,
                  crop.data.begin() + std::size_t(y) * r.size * 3);
      }
      crops.push_back(std::move(crop));
    }
    std::vector<const ImageTile*> refs;
    refs.reserve(crops.size());
    for (const ImageTile& c : crops) refs.push_back(&c);
    const std::vector<RasterGrid> preds = predict_tiles(net, refs, scheme, batch_size);
    for (std::size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], truths[i]);
  }
  return acc.report();
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& val_data,
                  const NetConfig& net_cfg, const OptimConfig& opt_cfg,
                  const DiscretizationScheme& scheme, std::uint64_t seed, bool verbose) {
  validate(net_cfg);
  validate(opt_cfg);
  if (train_data.tiles.empty()) throw std::runtime_error("train: empty dataset");
  if (net_cfg.head != HeadKind::Mse1 && net_cfg.K != scheme.K) {
    throw std::runtime_error("train: scheme K does not match network K");
  }
  const int patch = net_cfg.patch_size;
  for (std::size_t i = 0; i < train_data.tiles.size(); ++i) {
    const TilePair& t = train_data.tiles[i];
    if (t.image.width < patch || t.image.height < patch) {
      throw std::runtime_error("train: tile " + std::to_string(i) + " smaller than patch size");
    }
  }

  Net net(net_cfg, seed);
  AdamOptimizer opt(net.parameters(), opt_cfg);
  PlateauLr plateau(opt_cfg.plateau_patience, opt_cfg.plateau_factor, 2);
  SplitMix64 crop_rng(SplitMix64::mix(seed, 1));

  const int K = net_cfg.K;
  const int N = opt_cfg.batch_size;
  const std::size_t plane = std::size_t(patch) * patch;
  const int steps = std::max(1, opt_cfg.patches_per_epoch / N);

  TrainResult result;
  for (int epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int step = 0; step < steps; ++step) {
      std::vector<CropPair> crops;
      crops.reserve(std::size_t(N));
      std::vector<const ImageTile*> images;
      images.reserve(std::size_t(N));
      for (int b = 0; b < N; ++b) {
        const TilePair& t = train_data.tiles[crop_rng.below(train_data.tiles.size())];
        crops.push_back(random_crop_pair(t.image, t.dsm, patch, crop_rng));
        images.push_back(&crops.back().image);
      }
      // pointers into crops stay valid: reserve was taken up front
      auto y = net.forward(tensor_from_tiles(images));

      double loss = 0.0;
      Tensor grad;
      if (net_cfg.head == HeadKind::Mse1) {
        Tensor truth({N, 1, patch, patch});
        for (int b = 0; b < N; ++b) {
          std::copy(crops[std::size_t(b)].dsm.data.begin(), crops[std::size_t(b)].dsm.data.end(),
                    truth.data.begin() + std::size_t(b) * plane);
        }
        loss = mse_loss_batch(y->value, truth, &grad);
      } else {
        std::vector<std::uint16_t> target(std::size_t(N) * plane);
        for (int b = 0; b < N; ++b) {
          const ClassMap cm = encode_map(crops[std::size_t(b)].dsm, scheme);
          std::copy(cm.classes.begin(), cm.classes.end(),
                    target.begin() + std::size_t(b) * plane);
        }
        loss = net_cfg.head == HeadKind::Ordinal2K
                   ? ordinal_nll_batch(y->value, target, K, &grad)
                   : mcc_loss_batch(y->value, target, &grad);
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: loss became non-finite at epoch " +
                                 std::to_string(epoch) + " step " + std::to_string(step));
      }
      net.zero_grad();
      backward(y, grad);
      opt.step();
      loss_sum += loss;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / steps;
    log.lr_head = double(opt.lr_head());
    log.lr_backbone = double(opt.lr_backbone());
    if (val_data.tiles.empty()) {
      log.val_rmse = std::numeric_limits<double>::quiet_NaN();
      log.val_rel = std::numeric_limits<double>::quiet_NaN();
    } else {
      const MetricReport r = validate_tiles(net, val_data, scheme, 2, N);
      log.val_rmse = r.rmse;
      log.val_rel = r.rel;
    }
    result.log.push_back(log);
    if (verbose) {
      std::fprintf(stderr, "epoch %d: loss %.6g lr (%.3g, %.3g) val_rmse %.4g val_rel %.4g\n",
                   epoch, log.mean_loss, log.lr_head, log.lr_backbone, log.val_rmse,
                   log.val_rel);
    }
    if (plateau.observe(log.mean_loss)) {
      opt.set_lrs(opt.lr_head() * opt_cfg.plateau_factor,
                  opt.lr_backbone() * opt_cfg.plateau_factor);
    }
  }

  result.checkpoint = checkpoint_from_net(net, scheme);
  for (auto& entry : opt.export_state()) result.checkpoint.tensors.push_back(std::move(entry));
  return result;
}

void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("log: cannot write " + path);
  out << "epoch,mean_loss,lr_head,lr_backbone,val_rmse,val_rel\n";
  for (const EpochLog& e : log) {
    char line[240];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.mean_loss,
                  e.lr_head, e.lr_backbone, e.val_rmse, e.val_rel);
    out << line;
  }
  if (!out) throw std::runtime_error("log: write failed for " + path);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  return parts;
}

double parse_num(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad value for " + key + ": " + s);
  }
}

int parse_int(const std::string& key, const std::string& s) {
  const double v = parse_num(key, s);
  if (v != std::floor(v)) throw std::runtime_error("config: " + key + " must be an integer");
  return int(v);
}

template <std::size_t Count>
void parse_int_list(const std::string& key, const std::string& s, std::array<int, Count>& out) {
  const std::vector<std::string> parts = split_commas(s);
  if (parts.size() != Count) {
    throw std::runtime_error("config: " + key + " needs " + std::to_string(Count) + " values");
  }
  for (std::size_t i = 0; i < Count; ++i) out[i] = parse_int(key, parts[i]);
}

}  // namespace

void parse_train_config(const std::string& path, OptimConfig& opt, NetConfig& net) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
    }

    if (key == "lr_head") opt.lr_head = float(parse_num(key, value));
    else if (key == "lr_backbone") opt.lr_backbone = float(parse_num(key, value));
    else if (key == "weight_decay") opt.weight_decay = float(parse_num(key, value));
    else if (key == "betas") {
      const auto parts = split_commas(value);
      if (parts.size() != 2) throw std::runtime_error("config: betas needs two values");
      opt.beta1 = float(parse_num(key, parts[0]));
      opt.beta2 = float(parse_num(key, parts[1]));
    } else if (key == "eps") opt.eps = float(parse_num(key, value));
    else if (key == "batch_size") opt.batch_size = parse_int(key, value);
    else if (key == "epochs") opt.epochs = parse_int(key, value);
    else if (key == "patches_per_epoch") opt.patches_per_epoch = parse_int(key, value);
    else if (key == "plateau_patience") opt.plateau_patience = parse_int(key, value);
    else if (key == "plateau_factor") opt.plateau_factor = float(parse_num(key, value));
    else if (key == "stem_channels") net.stem_channels = parse_int(key, value);
    else if (key == "stage_channels") parse_int_list(key, value, net.stage_channels);
    else if (key == "blocks_per_stage") parse_int_list(key, value, net.blocks_per_stage);
    else if (key == "aspp_rates") parse_int_list(key, value, net.aspp_rates);
    else if (key == "aspp_channels") net.aspp_channels = parse_int(key, value);
    else if (key == "K") net.K = parse_int(key, value);
    else if (key == "head") net.head = parse_head_kind(value);
    else if (key == "patch_size") net.patch_size = parse_int(key, value);
    else throw std::runtime_error("config: unknown key " + key);
  }
}

}  // namespace ordsurf
