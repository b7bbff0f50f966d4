// Smooth-L1 losses on disparity, PAC-refined gradients, and occlusion, and
// the composite
//
//   L = L_D + lambda1 * L_G + lambda2 * L_O
//
// with exact gradients with respect to the disparity values and the
// GradSmooth filter parameters. All reductions are means over masked pixels
// in fixed row-major order.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stereo/field.hpp"
#include "stereo/occlusion.hpp"
#include "stereo/pac.hpp"

namespace stereo {

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};

struct LossBreakdown {
  double l_d = 0.0;
  double l_g = 0.0;
  double l_o = 0.0;
  double total = 0.0;
  std::vector<double> grad_wrt_disparity;
  // d(total)/d(filter params); zero-shaped when the gradient path was inert.
  FilterBank grad_bank1;
  FilterBank grad_bank2;

  std::string json_line() const;
};

// Huber-style loss with transition point 1: 0.5 e^2 for |e| < 1, |e| - 0.5
// otherwise. Returns the mean over masked pixels and its gradient w.r.t.
// pred (e or sign(e), scaled by 1/N). Throws DegenerateInputError when the
// mask is empty.
std::pair<double, std::vector<double>> smooth_l1(const std::vector<double>& pred,
                                                 const std::vector<double>& target,
                                                 const std::vector<std::uint8_t>& mask);

// Quantities that depend only on the ground truth, the guidance, and the
// prediction's validity mask. Building one once and reusing it across an
// optimization loop skips recomputing affinities, GT gradients, and the
// occlusion target every iteration.
struct TotalLossContext {
  int width = 0;
  int height = 0;
  std::vector<double> gt_values;
  std::vector<std::uint8_t> d_valid;  // prediction mask the context was built for
  std::vector<std::uint8_t> mask_d;   // disparity-loss pixels
  std::vector<std::uint8_t> mask_g;   // gradient-loss pixels
  std::vector<std::uint8_t> mask_o;   // occlusion-loss pixels
  GradientField gt_grad;
  OcclusionMap occ_target;
  FeatureMap guidance;
  std::shared_ptr<const AffinityField> affinity1;
  std::shared_ptr<const AffinityField> affinity2;
  OcclusionConfig occ_cfg;
};

// `ld_mask`, when given, further restricts the disparity term (sparse direct
// supervision); the gradient and occlusion terms keep the full overlap.
TotalLossContext make_total_loss_context(const DisparityMap& d, const DisparityMap& d_gt,
                                         const FeatureMap& guidance,
                                         const GradSmoothParams& params,
                                         const OcclusionConfig& occ_cfg,
                                         const std::vector<std::uint8_t>* ld_mask = nullptr);

LossBreakdown total_loss_with_context(const DisparityMap& d, const TotalLossContext& ctx,
                                      const GradSmoothParams& params, const LossWeights& w);

// One-shot form. L_D compares D with the ground truth on their joint valid
// mask; L_G compares the GradSmooth-refined gradients of D with the raw
// gradients of the ground truth; L_O compares the soft occlusion of D with
// the target derived from the ground truth.
LossBreakdown total_loss(const DisparityMap& d, const DisparityMap& d_gt,
                         const FeatureMap& guidance, const GradSmoothParams& params,
                         const OcclusionConfig& occ_cfg, const LossWeights& w);

}  // namespace stereo
