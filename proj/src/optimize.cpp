#include "stereo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace stereo {

std::pair<FeatureMap, DisparityMap> synth_scene(const SceneSpec& spec) {
  if (spec.width < 1 || spec.height < 1)
    throw ContractError("synth_scene: non-positive dimensions");

  FeatureMap image = FeatureMap::zeros(3, spec.width, spec.height);
  DisparityMap d;
  d.width = spec.width;
  d.height = spec.height;
  d.values.assign(d.size(), 0.0);
  d.valid.assign(d.size(), 0);

  for (const PlaneSpec& p : spec.planes) {
    if (p.w < 1 || p.h < 1 || p.x0 < 0 || p.y0 < 0 || p.x0 + p.w > spec.width ||
        p.y0 + p.h > spec.height)
      throw ContractError("synth_scene: plane rectangle out of bounds");
    for (int y = p.y0; y < p.y0 + p.h; ++y) {
      for (int x = p.x0; x < p.x0 + p.w; ++x) {
        const double disp = p.a * x + p.b * y + p.c;
        if (disp < 0.0)
          throw ContractError("synth_scene: plane produces negative disparity");
        d.at(x, y) = disp;
        d.valid[static_cast<std::size_t>(y) * spec.width + x] = 1;
        for (int c = 0; c < 3; ++c) image.at(c, x, y) = p.color[c];
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!d.valid[i]) continue;
      d.values[i] = std::max(0.0, d.values[i] + noise(rng));
    }
  }
  return {std::move(image), std::move(d)};
}

DisparityMap add_disparity_noise(const DisparityMap& d, double sigma, std::uint64_t seed) {
  DisparityMap out = d;
  if (sigma <= 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.valid[i]) continue;
    out.values[i] = std::max(0.0, out.values[i] + noise(rng));
  }
  return out;
}

DisparityMap sparse_sample(const DisparityMap& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ContractError("sparse_sample: fraction must be in (0, 1]");
  DisparityMap out = d;
  if (fraction == 1.0) return out;

  std::vector<std::size_t> idx;
  idx.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.valid[i]) idx.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t keep =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
  for (std::size_t k = keep; k < idx.size(); ++k) out.valid[idx[k]] = 0;
  return out;
}

namespace {

// Seeded uniform subset of the full raster; intersected with the validity
// masks inside the loss context.
std::vector<std::uint8_t> supervision_mask(std::size_t n, double fraction,
                                           std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::uint8_t> mask(n, 0);
  const std::size_t keep =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  for (std::size_t k = 0; k < keep; ++k) mask[idx[k]] = 1;
  return mask;
}

void apply_field_step(const DisparityMap& from, const std::vector<double>& grad, double step,
                      DisparityMap& to) {
  to = from;
  for (std::size_t i = 0; i < to.values.size(); ++i) {
    if (grad[i] == 0.0) continue;  // keeps unsupervised/invalid pixels bit-identical
    to.values[i] -= step * grad[i];
  }
}

void apply_bank_step(FilterBank& bank, const FilterBank& grad, double step) {
  for (std::size_t i = 0; i < bank.weights.size(); ++i)
    bank.weights[i] -= step * grad.weights[i];
  for (std::size_t i = 0; i < bank.bias.size(); ++i)
    bank.bias[i] -= step * grad.bias[i];
}

// History entries keep the loss values only; the per-iteration gradient
// arrays would dominate memory for long runs.
LossBreakdown scalars_of(const LossBreakdown& full) {
  LossBreakdown s;
  s.l_d = full.l_d;
  s.l_g = full.l_g;
  s.l_o = full.l_o;
  s.total = full.total;
  return s;
}

}  // namespace

RefineResult refine_disparity(const DisparityMap& d_init, const DisparityMap& d_gt,
                              const FeatureMap& guidance, const LossWeights& w,
                              const RefineConfig& cfg, const GradSmoothParams* params,
                              const OcclusionConfig* occ_cfg) {
  if (!(cfg.step_size > 0.0)) throw ContractError("refine_disparity: step_size must be > 0");
  if (cfg.iterations < 1) throw ContractError("refine_disparity: iterations must be >= 1");
  if (!(cfg.gt_fraction > 0.0 && cfg.gt_fraction <= 1.0))
    throw ContractError("refine_disparity: gt_fraction must be in (0, 1]");

  GradSmoothParams p = params ? *params : GradSmoothParams::defaults();
  const OcclusionConfig oc = occ_cfg ? *occ_cfg : OcclusionConfig{};

  std::vector<std::uint8_t> ld_mask;
  const std::vector<std::uint8_t>* ld = nullptr;
  if (cfg.gt_fraction < 1.0) {
    ld_mask = supervision_mask(d_init.size(), cfg.gt_fraction, cfg.rng_seed);
    ld = &ld_mask;
  }
  TotalLossContext ctx = make_total_loss_context(d_init, d_gt, guidance, p, oc, ld);

  const double pixel_count = static_cast<double>(d_init.size());
  double field_step = cfg.step_size * pixel_count;
  double bank_step = cfg.step_size;

  DisparityMap cur = d_init;
  LossBreakdown cur_loss = total_loss_with_context(cur, ctx, p, w);
  std::vector<LossBreakdown> history{scalars_of(cur_loss)};
  history.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

  DisparityMap candidate;
  int halvings = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (;;) {
      apply_field_step(cur, cur_loss.grad_wrt_disparity, field_step, candidate);
      GradSmoothParams cand_p = p;
      if (cfg.optimize_filters) {
        apply_bank_step(cand_p.bank1, cur_loss.grad_bank1, bank_step);
        apply_bank_step(cand_p.bank2, cur_loss.grad_bank2, bank_step);
      }
      LossBreakdown cand_loss = total_loss_with_context(candidate, ctx, cand_p, w);
      const double tol = 1e-12 * std::max(1.0, std::abs(cur_loss.total));
      if (cand_loss.total <= cur_loss.total + tol) {
        cur = std::move(candidate);
        cur_loss = std::move(cand_loss);
        p = std::move(cand_p);
        break;
      }
      if (++halvings > 10) throw OptimizationFailure(std::move(history));
      field_step *= 0.5;
      bank_step *= 0.5;
    }
    history.push_back(scalars_of(cur_loss));
  }

  return {std::move(cur), std::move(history), std::move(p)};
}

std::string history_csv(const std::vector<LossBreakdown>& history) {
  std::string out = "iteration,l_d,l_g,l_o,total\n";
  char line[192];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, history[i].l_d,
                  history[i].l_g, history[i].l_o, history[i].total);
    out += line;
  }
  return out;
}

}  // namespace stereo
