#include "stereo/occlusion.hpp"

#include <cmath>

namespace stereo {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int resolve_max_scan(const DisparityMap& d, const OcclusionConfig& cfg) {
  if (cfg.max_scan) {
    if (*cfg.max_scan < 1) throw ContractError("occlusion: max_scan must be >= 1");
    return *cfg.max_scan;
  }
  const int scan = static_cast<int>(std::ceil(d.max_valid())) + 2;
  return scan < 1 ? 1 : scan;
}

OcclusionMap soft_occlusion(const DisparityMap& d, const OcclusionConfig& cfg,
                            SoftOcclusionCache* cache) {
  if (!(cfg.alpha > 0.0)) throw ContractError("occlusion: alpha must be positive");
  if (d.count_valid() == 0)
    throw DegenerateInputError("soft_occlusion: map has no valid pixels");
  const int scan = resolve_max_scan(d, cfg);

  OcclusionMap o;
  o.width = d.width;
  o.height = d.height;
  o.values.assign(d.size(), 0.0);
  o.hard = false;

  if (cache) {
    cache->width = d.width;
    cache->height = d.height;
    cache->alpha = cfg.alpha;
    cache->argmax_x.assign(d.size(), -1);
    cache->value.assign(d.size(), 0.0);
  }

  // A flat surface continuing past the right border would score dd = dx.
  const double floor_value = sigmoid(-cfg.alpha * (1.0 + cfg.d0));

  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      if (!d.valid[i]) {
        o.values[i] = floor_value;
        if (cache) cache->value[i] = floor_value;
        continue;
      }
      const double dref = d.values[i];
      double best = 0.0;
      int best_x = -1;
      const int end = x + scan < d.width - 1 ? x + scan : d.width - 1;
      for (int xp = x + 1; xp <= end; ++xp) {
        if (!d.is_valid(xp, y)) continue;
        const double m = (d.at(xp, y) - dref) - (xp - x);
        if (best_x < 0 || m > best) {  // strict >: ties keep the nearest
          best = m;
          best_x = xp;
        }
      }
      const double v = best_x < 0 ? floor_value : sigmoid(cfg.alpha * (best - cfg.d0));
      o.values[i] = v;
      if (cache) {
        cache->argmax_x[i] = best_x;
        cache->value[i] = v;
      }
    }
  }
  return o;
}

std::vector<double> soft_occlusion_backward(const std::vector<double>& upstream,
                                            const DisparityMap& d,
                                            const OcclusionConfig& cfg,
                                            const SoftOcclusionCache& cache) {
  if (cache.width != d.width || cache.height != d.height ||
      upstream.size() != d.size() || cache.argmax_x.size() != d.size())
    throw ContractError("soft_occlusion_backward: cache/shape mismatch");

  std::vector<double> grad(d.size(), 0.0);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      const int xp = cache.argmax_x[i];
      if (xp < 0 || upstream[i] == 0.0) continue;
      const double o = cache.value[i];
      const double slope = upstream[i] * cfg.alpha * o * (1.0 - o);
      grad[static_cast<std::size_t>(y) * d.width + xp] += slope;
      grad[i] -= slope;
    }
  }
  return grad;
}

OcclusionMap hard_occlusion_oracle(const DisparityMap& d, double threshold) {
  OcclusionMap o;
  o.width = d.width;
  o.height = d.height;
  o.values.assign(d.size(), 0.0);
  o.hard = true;

  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      if (!d.valid[i]) continue;
      const double dref = d.values[i];
      for (int xp = x + 1; xp < d.width; ++xp) {
        if (!d.is_valid(xp, y)) continue;
        if ((d.at(xp, y) - dref) - (xp - x) >= threshold) {
          o.values[i] = 1.0;
          break;
        }
      }
    }
  }
  return o;
}

OcclusionMap occlusion_target(const DisparityMap& d_gt, const OcclusionConfig& cfg) {
  return soft_occlusion(d_gt, cfg);
}

}  // namespace stereo
