#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ordsurf/checkpoint.hpp"
#include "ordsurf/discretize.hpp"
#include "ordsurf/heatmap.hpp"
#include "ordsurf/metrics.hpp"
#include "ordsurf/net.hpp"
#include "ordsurf/predict.hpp"
#include "ordsurf/raster.hpp"
#include "ordsurf/stitch.hpp"
#include "ordsurf/synth.hpp"
#include "ordsurf/trainer.hpp"

namespace fs = std::filesystem;
using namespace ordsurf;

namespace {

SchemeKind parse_kind(const std::string& s) {
  if (s == "sid") return SchemeKind::SID;
  if (s == "ud") return SchemeKind::UD;
  throw std::runtime_error("unknown discretization kind: " + s + " (expected sid or ud)");
}

template <std::size_t Count>
void parse_list_flag(const std::string& flag, const std::string& s, std::array<int, Count>& out) {
  std::array<int, Count> vals{};
  std::size_t i = 0, pos = 0;
  while (i < Count) {
    std::size_t comma = s.find(',', pos);
    const std::string part = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      vals[i] = std::stoi(part);
    } catch (const std::exception&) {
      throw std::runtime_error(flag + ": bad value " + s);
    }
    ++i;
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (i != Count || s.find(',', pos) != std::string::npos) {
    throw std::runtime_error(flag + ": expected " + std::to_string(Count) + " comma-separated values");
  }
  out = vals;
}

void write_prediction(const PredictResult& res, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < res.patches.size(); ++i) {
    const PatchRect& r = res.layout.rects[i];
    char name[64];
    std::snprintf(name, sizeof name, "patch_r%d_c%d.hmap", r.row, r.col);
    save_raster(res.patches[i], out_dir + "/" + name);
  }
  save_layout(res.layout, out_dir + "/layout.csv");
  save_shifts(res.stitched.shifts, res.layout, out_dir + "/shifts.csv");
  save_raster(res.stitched.raster, out_dir + "/stitched.hmap");
}

struct GridRange {
  float lo, hi;
};

GridRange grid_range(const RasterGrid& g) {
  if (g.data.empty()) throw std::runtime_error("empty raster");
  GridRange r{g.data[0], g.data[0]};
  for (float v : g.data) {
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordinal regression height mapping toolkit"};
  app.require_subcommand(1);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("error: ") + e.what() + "\n";
  });

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic aerial tile dataset");
  SceneConfig scene;
  int synth_count = 20;
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--count", synth_count, "number of tiles");
  synth_cmd->add_option("--seed", scene.seed, "rng seed");
  synth_cmd->add_option("--tile_size", scene.tile_size, "tile edge in pixels");
  synth_cmd->add_option("--min_buildings", scene.min_buildings);
  synth_cmd->add_option("--max_buildings", scene.max_buildings);
  synth_cmd->add_option("--min_building_frac", scene.min_building_frac);
  synth_cmd->add_option("--max_building_frac", scene.max_building_frac);
  synth_cmd->add_option("--height_mu", scene.height_mu, "lognormal mu of heights");
  synth_cmd->add_option("--height_sigma", scene.height_sigma);
  synth_cmd->add_option("--max_height", scene.max_height, "clamp height, meters");
  synth_cmd->add_option("--ground_texture_amp", scene.ground_texture_amp);
  synth_cmd->add_option("--sun_azimuth_deg", scene.sun_azimuth_deg);
  synth_cmd->add_option("--shadow_px_per_meter", scene.shadow_px_per_meter);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a height network on a tile manifest");
  std::string tr_manifest, tr_out, tr_config, tr_kind = "sid";
  std::uint64_t tr_seed = 0;
  double tr_a = 0.0, tr_b = 0.0;
  double tr_val_fraction = 0.1;
  int tr_val_count = -1;
  bool tr_quiet = false;
  OptimConfig fopt;
  NetConfig fnet;
  std::string f_betas, f_stages, f_blocks, f_rates, f_head;
  train_cmd->add_option("--manifest", tr_manifest, "manifest.csv of training tiles")->required();
  train_cmd->add_option("--out", tr_out, "output directory")->required();
  train_cmd->add_option("--config", tr_config, "key = value config file");
  train_cmd->add_option("--seed", tr_seed, "training seed");
  train_cmd->add_option("--kind", tr_kind, "discretization: sid|ud");
  train_cmd->add_option("--a", tr_a, "discretization range start, meters");
  auto* o_b = train_cmd->add_option("--b", tr_b, "range end (default: dataset max height)");
  train_cmd->add_option("--val_fraction", tr_val_fraction, "tail fraction held out");
  train_cmd->add_option("--val_count", tr_val_count, "tail tile count held out (overrides fraction)");
  train_cmd->add_flag("--quiet", tr_quiet, "suppress per-epoch progress");
  auto* o_lrh = train_cmd->add_option("--lr_head", fopt.lr_head);
  auto* o_lrb = train_cmd->add_option("--lr_backbone", fopt.lr_backbone);
  auto* o_wd = train_cmd->add_option("--weight_decay", fopt.weight_decay);
  auto* o_betas = train_cmd->add_option("--betas", f_betas, "adam betas, e.g. 0.9,0.999");
  auto* o_eps = train_cmd->add_option("--eps", fopt.eps);
  auto* o_bs = train_cmd->add_option("--batch_size", fopt.batch_size);
  auto* o_ep = train_cmd->add_option("--epochs", fopt.epochs);
  auto* o_ppe = train_cmd->add_option("--patches_per_epoch", fopt.patches_per_epoch);
  auto* o_pp = train_cmd->add_option("--plateau_patience", fopt.plateau_patience);
  auto* o_pf = train_cmd->add_option("--plateau_factor", fopt.plateau_factor);
  auto* o_stem = train_cmd->add_option("--stem_channels", fnet.stem_channels);
  auto* o_stages = train_cmd->add_option("--stage_channels", f_stages, "e.g. 16,32,64,64");
  auto* o_blocks = train_cmd->add_option("--blocks_per_stage", f_blocks, "e.g. 2,2,2,2");
  auto* o_rates = train_cmd->add_option("--aspp_rates", f_rates, "e.g. 6,12,18");
  auto* o_aspp = train_cmd->add_option("--aspp_channels", fnet.aspp_channels);
  auto* o_k = train_cmd->add_option("--K", fnet.K, "number of height bins");
  auto* o_head = train_cmd->add_option("--head", f_head, "ordinal|mcc|mse");
  auto* o_patch = train_cmd->add_option("--patch_size", fnet.patch_size);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict heights for images");
  std::string pd_ckpt, pd_image, pd_dir, pd_out;
  int pd_patch = 0, pd_overlap = 2, pd_batch = 8;
  predict_cmd->add_option("--checkpoint", pd_ckpt, "trained checkpoint")->required();
  auto* o_img = predict_cmd->add_option("--image", pd_image, "one input ppm");
  auto* o_dir = predict_cmd->add_option("--dir", pd_dir, "directory of input ppms");
  predict_cmd->add_option("--out", pd_out, "output directory")->required();
  auto* o_pdp = predict_cmd->add_option("--patch", pd_patch, "must match checkpoint patch size");
  predict_cmd->add_option("--overlap", pd_overlap, "patch overlap in pixels");
  predict_cmd->add_option("--batch", pd_batch, "patches per forward pass");

  // stitch
  auto* stitch_cmd = app.add_subcommand("stitch", "merge per-patch hmaps into one raster");
  std::string st_layout, st_patches, st_out, st_shifts;
  stitch_cmd->add_option("--layout", st_layout, "layout.csv from predict")->required();
  stitch_cmd->add_option("--patches", st_patches, "directory of patch_r*_c*.hmap")->required();
  stitch_cmd->add_option("--out", st_out, "stitched hmap path")->required();
  stitch_cmd->add_option("--shifts", st_shifts, "also write applied shifts csv");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "compare predicted and true hmaps");
  std::string ev_pred, ev_truth, ev_json;
  double ev_eps = 0.01;
  eval_cmd->add_option("--pred", ev_pred, "predicted hmap")->required();
  eval_cmd->add_option("--truth", ev_truth, "reference hmap")->required();
  eval_cmd->add_option("--mask_epsilon", ev_eps, "near-zero mask for ratio metrics, meters");
  eval_cmd->add_option("--json", ev_json, "also write the report as json");

  // thresholds
  auto* thr_cmd = app.add_subcommand("thresholds", "print discretization thresholds");
  std::string th_kind = "sid";
  double th_a = 0.0, th_b = 40.0;
  int th_k = 64;
  thr_cmd->add_option("--kind", th_kind, "sid|ud");
  thr_cmd->add_option("--a", th_a, "range start, meters");
  thr_cmd->add_option("--b", th_b, "range end, meters");
  thr_cmd->add_option("--k", th_k, "number of bins");

  // heatmap
  auto* hm_cmd = app.add_subcommand("heatmap", "render an hmap to a color ppm");
  std::string hm_in, hm_out, hm_truth;
  double hm_min = 0.0, hm_max = 0.0, hm_limit = 0.0;
  hm_cmd->add_option("input", hm_in, "input hmap")->required();
  hm_cmd->add_option("--out", hm_out, "output ppm")->required();
  auto* o_min = hm_cmd->add_option("--min", hm_min, "ramp start (default: data min)");
  auto* o_max = hm_cmd->add_option("--max", hm_max, "ramp end (default: data max)");
  auto* o_truth = hm_cmd->add_option("--truth", hm_truth, "render input - truth on a signed ramp");
  auto* o_limit = hm_cmd->add_option("--limit", hm_limit, "signed ramp extent (default: max |diff|)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth_cmd->parsed()) {
      const auto entries = generate_dataset(scene, synth_count, synth_out);
      std::printf("wrote %zu tiles to %s\n", entries.size(), synth_out.c_str());
      return 0;
    }

    if (train_cmd->parsed()) {
      OptimConfig opt;
      NetConfig net_cfg;
      if (!tr_config.empty()) parse_train_config(tr_config, opt, net_cfg);
      if (o_lrh->count()) opt.lr_head = fopt.lr_head;
      if (o_lrb->count()) opt.lr_backbone = fopt.lr_backbone;
      if (o_wd->count()) opt.weight_decay = fopt.weight_decay;
      if (o_betas->count()) {
        float b1 = 0, b2 = 0;
        if (std::sscanf(f_betas.c_str(), "%f,%f", &b1, &b2) != 2) {
          throw std::runtime_error("--betas: expected two comma-separated values");
        }
        opt.beta1 = b1;
        opt.beta2 = b2;
      }
      if (o_eps->count()) opt.eps = fopt.eps;
      if (o_bs->count()) opt.batch_size = fopt.batch_size;
      if (o_ep->count()) opt.epochs = fopt.epochs;
      if (o_ppe->count()) opt.patches_per_epoch = fopt.patches_per_epoch;
      if (o_pp->count()) opt.plateau_patience = fopt.plateau_patience;
      if (o_pf->count()) opt.plateau_factor = fopt.plateau_factor;
      if (o_stem->count()) net_cfg.stem_channels = fnet.stem_channels;
      if (o_stages->count()) parse_list_flag("--stage_channels", f_stages, net_cfg.stage_channels);
      if (o_blocks->count()) parse_list_flag("--blocks_per_stage", f_blocks, net_cfg.blocks_per_stage);
      if (o_rates->count()) parse_list_flag("--aspp_rates", f_rates, net_cfg.aspp_rates);
      if (o_aspp->count()) net_cfg.aspp_channels = fnet.aspp_channels;
      if (o_k->count()) net_cfg.K = fnet.K;
      if (o_head->count()) net_cfg.head = parse_head_kind(f_head);
      if (o_patch->count()) net_cfg.patch_size = fnet.patch_size;

      Dataset all = load_dataset(tr_manifest);
      const int n = int(all.tiles.size());
      int val_n = tr_val_count >= 0 ? tr_val_count
                                    : int(std::lround(tr_val_fraction * n));
      if (val_n < 0 || val_n >= n) throw std::runtime_error("train: bad validation split");
      Dataset train_set, val_set;
      for (int i = 0; i < n - val_n; ++i) train_set.tiles.push_back(std::move(all.tiles[i]));
      for (int i = n - val_n; i < n; ++i) val_set.tiles.push_back(std::move(all.tiles[i]));

      double b = tr_b;
      if (!o_b->count()) {
        b = 0.0;
        for (const TilePair& t : train_set.tiles) {
          for (float v : t.dsm.data) b = std::max(b, double(v));
        }
      }
      const DiscretizationScheme scheme = make_scheme(parse_kind(tr_kind), tr_a, b, net_cfg.K);

      const TrainResult result =
          train(train_set, val_set, net_cfg, opt, scheme, tr_seed, !tr_quiet);
      fs::create_directories(tr_out);
      save_checkpoint(result.checkpoint, tr_out + "/checkpoint.ordn");
      write_epoch_log(result.log, tr_out + "/epochs.csv");
      const EpochLog& last = result.log.back();
      std::printf("trained %d epochs, final loss %.6g, val_rmse %.4g\n",
                  int(result.log.size()), last.mean_loss, last.val_rmse);
      return 0;
    }

    if (predict_cmd->parsed()) {
      if ((o_img->count() == 0) == (o_dir->count() == 0)) {
        throw std::runtime_error("predict: give exactly one of --image or --dir");
      }
      const Checkpoint ckpt = load_checkpoint(pd_ckpt);
      if (o_pdp->count() && pd_patch != ckpt.config.patch_size) {
        throw std::runtime_error("predict: --patch does not match checkpoint patch size " +
                                 std::to_string(ckpt.config.patch_size));
      }
      if (ckpt.config.head != HeadKind::Mse1 && ckpt.config.K != ckpt.scheme.K) {
        throw std::runtime_error("predict: checkpoint K disagrees with its scheme");
      }
      Net net(ckpt.config, 0);
      load_into_net(ckpt, net);
      if (o_img->count()) {
        const ImageTile img = load_ppm(pd_image);
        write_prediction(predict_image(net, img, ckpt.scheme, pd_overlap, pd_batch), pd_out);
        std::printf("wrote prediction to %s\n", pd_out.c_str());
      } else {
        std::vector<fs::path> inputs;
        for (const auto& entry : fs::directory_iterator(pd_dir)) {
          if (entry.path().extension() == ".ppm") inputs.push_back(entry.path());
        }
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) throw std::runtime_error("predict: no .ppm files in " + pd_dir);
        for (const fs::path& p : inputs) {
          const ImageTile img = load_ppm(p.string());
          const std::string sub = pd_out + "/" + p.stem().string();
          write_prediction(predict_image(net, img, ckpt.scheme, pd_overlap, pd_batch), sub);
        }
        std::printf("wrote %zu predictions to %s\n", inputs.size(), pd_out.c_str());
      }
      return 0;
    }

    if (stitch_cmd->parsed()) {
      const PatchLayout layout = load_layout(st_layout);
      std::vector<RasterGrid> patches;
      patches.reserve(layout.rects.size());
      for (const PatchRect& r : layout.rects) {
        char name[64];
        std::snprintf(name, sizeof name, "patch_r%d_c%d.hmap", r.row, r.col);
        patches.push_back(load_raster(st_patches + "/" + name));
      }
      const StitchResult result = stitch(patches, layout);
      save_raster(result.raster, st_out);
      if (!st_shifts.empty()) save_shifts(result.shifts, layout, st_shifts);
      std::printf("stitched %zu patches into %s\n", patches.size(), st_out.c_str());
      return 0;
    }

    if (eval_cmd->parsed()) {
      const RasterGrid pred = load_raster(ev_pred);
      const RasterGrid truth = load_raster(ev_truth);
      const MetricReport report = evaluate(pred, truth, ev_eps);
      std::fputs(format_table(report).c_str(), stdout);
      if (!ev_json.empty()) {
        std::ofstream out(ev_json, std::ios::trunc);
        if (!out) throw std::runtime_error("eval: cannot write " + ev_json);
        out << to_json(report) << '\n';
      }
      return 0;
    }

    if (thr_cmd->parsed()) {
      const DiscretizationScheme scheme = make_scheme(parse_kind(th_kind), th_a, th_b, th_k);
      std::printf("kind=%s a=%.6g b=%.6g K=%d\n", th_kind.c_str(), th_a, th_b, th_k);
      std::printf("%4s %12s %12s\n", "i", "t_i", "height_m");
      auto height_at = [&](double t) {
        return scheme.kind == SchemeKind::SID ? std::exp(t) - 1.0 : t;
      };
      for (int i = 0; i <= th_k; ++i) {
        std::printf("%4d %12.6f %12.6f\n", i, scheme.thresholds[std::size_t(i)],
                    height_at(scheme.thresholds[std::size_t(i)]));
      }
      std::printf("%4s %12s %12s %12s\n", "bin", "lo_m", "hi_m", "width_m");
      for (int i = 0; i < th_k; ++i) {
        const double lo = height_at(scheme.thresholds[std::size_t(i)]);
        const double hi = height_at(scheme.thresholds[std::size_t(i) + 1]);
        std::printf("%4d %12.6f %12.6f %12.6f\n", i, lo, hi, hi - lo);
      }
      return 0;
    }

    if (hm_cmd->parsed()) {
      const RasterGrid grid = load_raster(hm_in);
      ImageTile img;
      if (o_truth->count()) {
        const RasterGrid truth = load_raster(hm_truth);
        if (truth.width != grid.width || truth.height != grid.height) {
          throw std::runtime_error("heatmap: size mismatch with --truth");
        }
        RasterGrid diff = grid;
        for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= truth.data[i];
        double limit = hm_limit;
        if (!o_limit->count()) {
          limit = 0.0;
          for (float v : diff.data) limit = std::max(limit, double(std::abs(v)));
          if (limit == 0.0) limit = 1.0;
        }
        img = render_diff_heatmap(diff, limit);
      } else {
        const GridRange r = grid_range(grid);
        const double lo = o_min->count() ? hm_min : double(r.lo);
        const double hi = o_max->count() ? hm_max : double(r.hi);
        img = render_heatmap(grid, lo, hi);
      }
      save_ppm(img, hm_out);
      std::printf("wrote %s\n", hm_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
