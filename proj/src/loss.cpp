#include "stereo/loss.hpp"

#include <cmath>
#include <cstdio>

namespace stereo {

std::string LossBreakdown::json_line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"l_d\":%.17g,\"l_g\":%.17g,\"l_o\":%.17g,\"total\":%.17g}", l_d, l_g,
                l_o, total);
  return buf;
}

std::pair<double, std::vector<double>> smooth_l1(const std::vector<double>& pred,
                                                 const std::vector<double>& target,
                                                 const std::vector<std::uint8_t>& mask) {
  if (pred.size() != target.size() || pred.size() != mask.size())
    throw ContractError("smooth_l1: shape mismatch");
  long n = 0;
  for (std::uint8_t m : mask) n += (m != 0);
  if (n == 0) throw DegenerateInputError("smooth_l1: empty mask");

  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  std::vector<double> grad(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double e = pred[i] - target[i];
    if (std::abs(e) < 1.0) {
      acc += 0.5 * e * e;
      grad[i] = e * inv_n;
    } else {
      acc += std::abs(e) - 0.5;
      grad[i] = (e > 0.0 ? 1.0 : -1.0) * inv_n;
    }
  }
  return {acc * inv_n, std::move(grad)};
}

namespace {

std::vector<std::uint8_t> and_masks(const std::vector<std::uint8_t>& a,
                                    const std::vector<std::uint8_t>& b) {
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

bool mask_empty(const std::vector<std::uint8_t>& m) {
  for (std::uint8_t v : m)
    if (v) return false;
  return true;
}

}  // namespace

TotalLossContext make_total_loss_context(const DisparityMap& d, const DisparityMap& d_gt,
                                         const FeatureMap& guidance,
                                         const GradSmoothParams& params,
                                         const OcclusionConfig& occ_cfg,
                                         const std::vector<std::uint8_t>* ld_mask) {
  if (d.width != d_gt.width || d.height != d_gt.height)
    throw ContractError("total_loss: prediction and ground truth sizes differ");
  if (guidance.width != d.width || guidance.height != d.height)
    throw ContractError("total_loss: guidance size differs from disparity");
  if (d_gt.count_valid() == 0)
    throw DegenerateInputError("total_loss: ground truth has no valid pixels");
  if (ld_mask && ld_mask->size() != d.size())
    throw ContractError("total_loss: ld_mask shape mismatch");

  TotalLossContext ctx;
  ctx.width = d.width;
  ctx.height = d.height;
  ctx.gt_values = d_gt.values;
  ctx.d_valid = d.valid;
  ctx.occ_cfg = occ_cfg;
  ctx.guidance = guidance;

  ctx.mask_d = and_masks(d.valid, d_gt.valid);
  ctx.mask_o = ctx.mask_d;
  if (ld_mask) ctx.mask_d = and_masks(ctx.mask_d, *ld_mask);

  ctx.gt_grad = spatial_gradient(d_gt);

  // The prediction's gradient validity depends only on its mask.
  DisparityMap shape;
  shape.width = d.width;
  shape.height = d.height;
  shape.values.assign(d.size(), 0.0);
  shape.valid = d.valid;
  ctx.mask_g = and_masks(spatial_gradient(shape).valid, ctx.gt_grad.valid);

  ctx.occ_target = soft_occlusion(d_gt, occ_cfg);

  ctx.affinity1 = std::make_shared<AffinityField>(
      compute_affinity(guidance, params.config1.kernel_size, params.config1.dilation,
                       params.config1.normalize_affinity));
  ctx.affinity2 = std::make_shared<AffinityField>(
      compute_affinity(guidance, params.config2.kernel_size, params.config2.dilation,
                       params.config2.normalize_affinity));
  return ctx;
}

LossBreakdown total_loss_with_context(const DisparityMap& d, const TotalLossContext& ctx,
                                      const GradSmoothParams& params, const LossWeights& w) {
  if (d.width != ctx.width || d.height != ctx.height)
    throw ContractError("total_loss: disparity does not match context");
  if (w.lambda1 < 0.0 || w.lambda2 < 0.0)
    throw ContractError("total_loss: loss weights must be non-negative");

  LossBreakdown out;
  out.grad_wrt_disparity.assign(d.size(), 0.0);
  out.grad_bank1 = FilterBank::zeros(params.bank1.out_channels, params.bank1.in_channels,
                                     params.bank1.kernel_size);
  out.grad_bank2 = FilterBank::zeros(params.bank2.out_channels, params.bank2.in_channels,
                                     params.bank2.kernel_size);

  // Disparity term.
  if (mask_empty(ctx.mask_d))
    throw DegenerateInputError("total_loss: empty valid intersection");
  auto [l_d, grad_d] = smooth_l1(d.values, ctx.gt_values, ctx.mask_d);
  out.l_d = l_d;
  for (std::size_t i = 0; i < grad_d.size(); ++i) out.grad_wrt_disparity[i] += grad_d[i];

  // Gradient-domain term. A zero weight with an empty mask degrades to an
  // inert component instead of an error, so sparse ground truth works with
  // the prior switched off.
  const bool g_empty = mask_empty(ctx.mask_g);
  if (!g_empty) {
    GradientField g_pred = spatial_gradient(d);
    GradSmoothCache gs_cache;
    GradientField refined = gradsmooth_apply(g_pred, ctx.guidance, params, ctx.affinity1,
                                             ctx.affinity2, &gs_cache);
    auto [lg_x, grad_gx] = smooth_l1(refined.dx, ctx.gt_grad.dx, ctx.mask_g);
    auto [lg_y, grad_gy] = smooth_l1(refined.dy, ctx.gt_grad.dy, ctx.mask_g);
    out.l_g = lg_x + lg_y;

    if (w.lambda1 != 0.0) {
      for (double& v : grad_gx) v *= w.lambda1;
      for (double& v : grad_gy) v *= w.lambda1;
      GradSmoothGrads gs = gradsmooth_backward(grad_gx, grad_gy, gs_cache);
      std::vector<double> grad_from_g =
          spatial_gradient_backward(gs.dx, gs.dy, g_pred);
      for (std::size_t i = 0; i < grad_from_g.size(); ++i)
        out.grad_wrt_disparity[i] += grad_from_g[i];
      out.grad_bank1 = std::move(gs.bank1);
      out.grad_bank2 = std::move(gs.bank2);
    }
  } else if (w.lambda1 != 0.0) {
    throw DegenerateInputError("total_loss: gradient-loss mask is empty");
  }

  // Occlusion term, same empty-mask policy.
  const bool o_empty = mask_empty(ctx.mask_o);
  if (!o_empty) {
    SoftOcclusionCache occ_cache;
    OcclusionMap occ = soft_occlusion(d, ctx.occ_cfg, &occ_cache);
    auto [l_o, grad_o] = smooth_l1(occ.values, ctx.occ_target.values, ctx.mask_o);
    out.l_o = l_o;
    if (w.lambda2 != 0.0) {
      for (double& v : grad_o) v *= w.lambda2;
      std::vector<double> grad_from_o =
          soft_occlusion_backward(grad_o, d, ctx.occ_cfg, occ_cache);
      for (std::size_t i = 0; i < grad_from_o.size(); ++i)
        out.grad_wrt_disparity[i] += grad_from_o[i];
    }
  } else if (w.lambda2 != 0.0) {
    throw DegenerateInputError("total_loss: occlusion-loss mask is empty");
  }

  out.total = out.l_d + w.lambda1 * out.l_g + w.lambda2 * out.l_o;
  return out;
}

LossBreakdown total_loss(const DisparityMap& d, const DisparityMap& d_gt,
                         const FeatureMap& guidance, const GradSmoothParams& params,
                         const OcclusionConfig& occ_cfg, const LossWeights& w) {
  TotalLossContext ctx = make_total_loss_context(d, d_gt, guidance, params, occ_cfg);
  return total_loss_with_context(d, ctx, params, w);
}

}  // namespace stereo
