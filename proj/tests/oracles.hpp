// Test-only reference implementations and finite-difference machinery.
// Everything here is written independently of the library's filtering code
// paths: direct nested-loop evaluation of the convolution equations and
// numerical differentiation of opaque scalar functions.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "stereo/field.hpp"
#include "stereo/occlusion.hpp"
#include "stereo/pac.hpp"

namespace oracle {

// Direct evaluation of the standard convolution sum with zero padding.
inline stereo::FeatureMap naive_conv(const stereo::FeatureMap& v,
                                     const stereo::FilterBank& filt, int dilation) {
  stereo::FeatureMap out = stereo::FeatureMap::zeros(filt.out_channels, v.width, v.height);
  const int r = filt.kernel_size / 2;
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x)
      for (int co = 0; co < filt.out_channels; ++co) {
        double acc = filt.bias[co];
        for (int ky = 0; ky < filt.kernel_size; ++ky)
          for (int kx = 0; kx < filt.kernel_size; ++kx) {
            const int yy = y + dilation * (ky - r);
            const int xx = x + dilation * (kx - r);
            if (xx < 0 || xx >= v.width || yy < 0 || yy >= v.height) continue;
            for (int ci = 0; ci < filt.in_channels; ++ci)
              acc += filt.w(co, ci, ky, kx) * v.at(ci, xx, yy);
          }
        out.at(co, x, y) = acc;
      }
  return out;
}

// Direct evaluation of the pixel-adaptive sum, computing each Gaussian
// affinity from scratch.
inline stereo::FeatureMap naive_pac(const stereo::FeatureMap& v, const stereo::FeatureMap& f,
                                    const stereo::FilterBank& filt, int dilation,
                                    bool normalize = false) {
  stereo::FeatureMap out = stereo::FeatureMap::zeros(filt.out_channels, v.width, v.height);
  const int r = filt.kernel_size / 2;
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      double ksum = 0.0;
      if (normalize) {
        for (int ky = 0; ky < filt.kernel_size; ++ky)
          for (int kx = 0; kx < filt.kernel_size; ++kx) {
            const int yy = y + dilation * (ky - r);
            const int xx = x + dilation * (kx - r);
            if (xx < 0 || xx >= v.width || yy < 0 || yy >= v.height) continue;
            double sq = 0.0;
            for (int c = 0; c < f.channels; ++c) {
              const double dd = f.at(c, x, y) - f.at(c, xx, yy);
              sq += dd * dd;
            }
            ksum += std::exp(-0.5 * sq);
          }
      }
      for (int co = 0; co < filt.out_channels; ++co) {
        double acc = filt.bias[co];
        for (int ky = 0; ky < filt.kernel_size; ++ky)
          for (int kx = 0; kx < filt.kernel_size; ++kx) {
            const int yy = y + dilation * (ky - r);
            const int xx = x + dilation * (kx - r);
            if (xx < 0 || xx >= v.width || yy < 0 || yy >= v.height) continue;
            double sq = 0.0;
            for (int c = 0; c < f.channels; ++c) {
              const double dd = f.at(c, x, y) - f.at(c, xx, yy);
              sq += dd * dd;
            }
            double k = std::exp(-0.5 * sq);
            if (normalize) k /= ksum;
            for (int ci = 0; ci < filt.in_channels; ++ci)
              acc += k * filt.w(co, ci, ky, kx) * v.at(ci, xx, yy);
          }
        out.at(co, x, y) = acc;
      }
    }
  return out;
}

// Central finite difference of `eval` with respect to the variable at `x`.
inline double central_fd(double* x, const std::function<double()>& eval, double h = 1e-5) {
  const double saved = *x;
  *x = saved + h;
  const double plus = eval();
  *x = saved - h;
  const double minus = eval();
  *x = saved;
  return (plus - minus) / (2.0 * h);
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  long checked = 0;
  long skipped = 0;
  bool pass(double tol = 1e-4) const { return checked > 0 && max_rel_err < tol; }
};

// Relative error with an absolute floor so that true-zero partials compare
// against finite-difference noise sensibly.
inline double rel_err(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return diff / scale;
}

// Checks every entry of `vars` against a finite difference of `eval`.
// `stable` (optional) may veto entries whose derivative is not well defined
// at the evaluation point (argmax switches, loss kinks).
inline GradCheckResult check_gradient(
    std::vector<double*> vars, const std::vector<double>& analytic,
    const std::function<double()>& eval,
    const std::function<bool(std::size_t)>& stable = nullptr, double h = 1e-5) {
  GradCheckResult r;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (stable && !stable(i)) {
      ++r.skipped;
      continue;
    }
    const double fd = central_fd(vars[i], eval, h);
    r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i], fd));
    ++r.checked;
  }
  return r;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline stereo::FeatureMap random_feature_map(int channels, int width, int height,
                                             std::mt19937_64& rng, double lo = -1.0,
                                             double hi = 1.0) {
  stereo::FeatureMap f = stereo::FeatureMap::zeros(channels, width, height);
  f.values = random_vector(f.values.size(), rng, lo, hi);
  return f;
}

inline stereo::FilterBank random_bank(int co, int ci, int s, std::mt19937_64& rng) {
  stereo::FilterBank b = stereo::FilterBank::zeros(co, ci, s);
  b.weights = random_vector(b.weights.size(), rng, -0.5, 0.5);
  b.bias = random_vector(b.bias.size(), rng, -0.5, 0.5);
  return b;
}

// All-valid disparity map with values in [lo, hi].
inline stereo::DisparityMap random_disparity(int width, int height, std::mt19937_64& rng,
                                             double lo = 0.0, double hi = 8.0) {
  stereo::DisparityMap d;
  d.width = width;
  d.height = height;
  d.values = random_vector(static_cast<std::size_t>(width) * height, rng, lo, hi);
  d.valid.assign(d.values.size(), 1);
  return d;
}

// A pixel's occlusion subgradient is comparable with finite differences only
// when nudging that pixel leaves every argmax choice in the map unchanged.
inline bool occlusion_argmax_stable(stereo::DisparityMap& d,
                                    const stereo::OcclusionConfig& cfg, std::size_t i,
                                    const std::vector<int>& base_argmax, double h = 1e-5) {
  const double saved = d.values[i];
  bool ok = true;
  for (const double delta : {h, -h}) {
    d.values[i] = saved + delta;
    stereo::SoftOcclusionCache cache;
    stereo::soft_occlusion(d, cfg, &cache);
    if (cache.argmax_x != base_argmax) {
      ok = false;
      break;
    }
  }
  d.values[i] = saved;
  return ok;
}

}  // namespace oracle
