// Standard stereo evaluation over pixels that have ground truth.

#pragma once

#include <optional>
#include <string>

#include "stereo/field.hpp"

namespace stereo {

struct EvalReport {
  double bad_pct = 0.0;
  double mae = 0.0;
  long n_valid = 0;
  double threshold = 2.0;

  std::string json_line() const;
  std::string text() const;
};

// Percentage of evaluated pixels with |pred - gt| strictly greater than tau.
// Evaluated pixels are those valid in both maps; `max_disparity`, when set,
// additionally drops pixels whose ground truth exceeds it.
double bad_threshold(const DisparityMap& pred, const DisparityMap& gt, double tau,
                     std::optional<double> max_disparity = std::nullopt);

// Mean absolute disparity error over the same pixel set.
double mae(const DisparityMap& pred, const DisparityMap& gt,
           std::optional<double> max_disparity = std::nullopt);

EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt, double tau = 2.0,
                    std::optional<double> max_disparity = std::nullopt);

}  // namespace stereo
