#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ordsurf/raster.hpp"

namespace ordsurf {

// Evaluation summary over one or more prediction/truth raster pairs.
// rmse covers every pixel; the ratio and log metrics (rel, rel_log10,
// rmse_log10, delta*) only use pixels where both truth and prediction are
// at least the mask epsilon, since localized ground truth is full of exact
// zeros that would blow up the divisions.
struct MetricReport {
  double rel = 0.0;
  double rel_log10 = 0.0;
  double rmse = 0.0;
  double rmse_log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::int64_t n_evaluated = 0;  // pixels that passed the mask
  std::int64_t n_masked = 0;     // pixels excluded from ratio metrics
};

// Streaming pixel accumulator so batch evaluation is exactly pixel pooling.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(double mask_epsilon = 0.01);

  void add(const RasterGrid& pred, const RasterGrid& truth);
  void add_pixel(double pred, double truth);

  // Throws if no pixels were added, or every pixel was masked.
  MetricReport report() const;

 private:
  double eps_;
  double sum_sq_ = 0.0;
  double sum_rel_ = 0.0;
  double sum_rel_log_ = 0.0;
  double sum_sq_log_ = 0.0;
  std::int64_t d1_ = 0, d2_ = 0, d3_ = 0;
  std::int64_t n_total_ = 0;
  std::int64_t n_eval_ = 0;
};

MetricReport evaluate(const RasterGrid& pred, const RasterGrid& truth,
                      double mask_epsilon = 0.01);
MetricReport evaluate_batch(
    const std::vector<std::pair<const RasterGrid*, const RasterGrid*>>& pairs,
    double mask_epsilon = 0.01);

// JSON object with exactly the MetricReport field names.
std::string to_json(const MetricReport& report);
// Two-row fixed-width table (headers, then values).
std::string format_table(const MetricReport& report);

}  // namespace ordsurf
