#include "ordsurf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ordsurf {

namespace {
const double kDelta1 = 1.25;
const double kDelta2 = 1.25 * 1.25;
const double kDelta3 = 1.25 * 1.25 * 1.25;
}  // namespace

MetricAccumulator::MetricAccumulator(double mask_epsilon) : eps_(mask_epsilon) {
  if (!(mask_epsilon >= 0.0)) throw std::runtime_error("metrics: bad mask epsilon");
}

void MetricAccumulator::add_pixel(double pred, double truth) {
  if (!std::isfinite(pred) || !std::isfinite(truth)) {
    throw std::runtime_error("metrics: non-finite pixel");
  }
  const double d = pred - truth;
  sum_sq_ += d * d;
  ++n_total_;
  if (truth < eps_ || pred < eps_) return;
  ++n_eval_;
  sum_rel_ += std::abs(d) / truth;
  const double lp = std::log10(pred), lt = std::log10(truth);
  const double dl = lp - lt;
  // Relative log error normalizes by |log10 h|; h exactly 1 m is a pole the
  // formula itself has, not something we patch over.
  sum_rel_log_ += std::abs(dl) / std::abs(lt);
  sum_sq_log_ += dl * dl;
  const double ratio = pred > truth ? pred / truth : truth / pred;
  if (ratio < kDelta1) ++d1_;
  if (ratio < kDelta2) ++d2_;
  if (ratio < kDelta3) ++d3_;
}

void MetricAccumulator::add(const RasterGrid& pred, const RasterGrid& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw std::runtime_error("metrics: dimension mismatch");
  }
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    add_pixel(double(pred.data[i]), double(truth.data[i]));
  }
}

MetricReport MetricAccumulator::report() const {
  if (n_total_ == 0) throw std::runtime_error("metrics: no pixels");
  if (n_eval_ == 0) throw std::runtime_error("metrics: every pixel masked");
  MetricReport r;
  r.rmse = std::sqrt(sum_sq_ / double(n_total_));
  const double inv = 1.0 / double(n_eval_);
  r.rel = sum_rel_ * inv;
  r.rel_log10 = sum_rel_log_ * inv;
  r.rmse_log10 = std::sqrt(sum_sq_log_ * inv);
  r.delta1 = double(d1_) * inv;
  r.delta2 = double(d2_) * inv;
  r.delta3 = double(d3_) * inv;
  r.n_evaluated = n_eval_;
  r.n_masked = n_total_ - n_eval_;
  return r;
}

MetricReport evaluate(const RasterGrid& pred, const RasterGrid& truth, double mask_epsilon) {
  MetricAccumulator acc(mask_epsilon);
  acc.add(pred, truth);
  return acc.report();
}

MetricReport evaluate_batch(
    const std::vector<std::pair<const RasterGrid*, const RasterGrid*>>& pairs,
    double mask_epsilon) {
  MetricAccumulator acc(mask_epsilon);
  for (const auto& [pred, truth] : pairs) acc.add(*pred, *truth);
  return acc.report();
}

std::string to_json(const MetricReport& report) {
  char buf[640];
  std::snprintf(buf, sizeof buf,
                "{\"rel\": %.17g, \"rel_log10\": %.17g, \"rmse\": %.17g, "
                "\"rmse_log10\": %.17g, \"delta1\": %.17g, \"delta2\": %.17g, "
                "\"delta3\": %.17g, \"n_evaluated\": %lld, \"n_masked\": %lld}",
                report.rel, report.rel_log10, report.rmse, report.rmse_log10,
                report.delta1, report.delta2, report.delta3,
                (long long)report.n_evaluated, (long long)report.n_masked);
  return buf;
}

std::string format_table(const MetricReport& report) {
  char head[256], vals[256];
  std::snprintf(head, sizeof head, "%10s %12s %10s %12s %8s %8s %8s\n", "Rel",
                "Rel(log10)", "RMSE", "RMSE(log10)", "delta1", "delta2", "delta3");
  std::snprintf(vals, sizeof vals, "%10.4f %12.4f %10.4f %12.4f %8.4f %8.4f %8.4f\n",
                report.rel, report.rel_log10, report.rmse, report.rmse_log10,
                report.delta1, report.delta2, report.delta3);
  return std::string(head) + vals;
}

}  // namespace ordsurf
