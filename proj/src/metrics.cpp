#include "stereo/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace stereo {

std::string EvalReport::json_line() const {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "{\"bad_pct\":%.17g,\"mae\":%.17g,\"n_valid\":%ld,\"threshold\":%.17g}",
                bad_pct, mae, n_valid, threshold);
  return buf;
}

std::string EvalReport::text() const {
  char buf[192];
  std::snprintf(buf, sizeof buf, "bad-%.2f: %.4f%%  MAE: %.4f  (%ld pixels)", threshold,
                bad_pct, mae, n_valid);
  return buf;
}

namespace {

template <class Fn>
long for_each_evaluated(const DisparityMap& pred, const DisparityMap& gt,
                        std::optional<double> max_disparity, Fn&& fn) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ContractError("metrics: prediction and ground truth sizes differ");
  long n = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid[i] || !pred.valid[i]) continue;
    if (max_disparity && gt.values[i] > *max_disparity) continue;
    fn(std::abs(pred.values[i] - gt.values[i]));
    ++n;
  }
  if (n == 0) throw DegenerateInputError("metrics: no jointly valid pixels");
  return n;
}

}  // namespace

double bad_threshold(const DisparityMap& pred, const DisparityMap& gt, double tau,
                     std::optional<double> max_disparity) {
  long bad = 0;
  const long n = for_each_evaluated(pred, gt, max_disparity, [&](double err) {
    if (err > tau) ++bad;
  });
  return 100.0 * static_cast<double>(bad) / static_cast<double>(n);
}

double mae(const DisparityMap& pred, const DisparityMap& gt,
           std::optional<double> max_disparity) {
  double sum = 0.0;
  const long n = for_each_evaluated(pred, gt, max_disparity, [&](double err) { sum += err; });
  return sum / static_cast<double>(n);
}

EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt, double tau,
                    std::optional<double> max_disparity) {
  EvalReport r;
  r.threshold = tau;
  r.bad_pct = bad_threshold(pred, gt, tau, max_disparity);
  r.mae = mae(pred, gt, max_disparity);
  r.n_valid = for_each_evaluated(pred, gt, max_disparity, [](double) {});
  return r;
}

}  // namespace stereo
