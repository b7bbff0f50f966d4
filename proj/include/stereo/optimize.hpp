// Desk-scale refinement: treats a disparity field (and optionally the
// GradSmooth filters) as free variables and descends the composite loss with
// plain fixed-step gradient descent, halving the step on sustained increase.
// Includes the seeded piecewise-planar scene generator used as a fixture.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stereo/loss.hpp"

namespace stereo {

struct RefineConfig {
  // Per-pixel step: the mean-loss gradient is rescaled by the pixel count
  // before the update, so the same value behaves the same at any resolution.
  // Filter parameters (when optimized) use the value directly; their
  // gradients are already averages.
  double step_size = 0.05;
  int iterations = 500;
  bool optimize_filters = false;
  // Fraction of pixels receiving direct disparity supervision. Values below
  // 1 restrict the disparity term to a seeded uniform subset; the gradient
  // and occlusion terms always see the full ground truth.
  double gt_fraction = 1.0;
  std::uint64_t rng_seed = 0;
};

// Axis-aligned rectangle carrying a disparity plane D = a*x + b*y + c and a
// flat RGB color. Later planes paint over earlier ones.
struct PlaneSpec {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  double a = 0.0, b = 0.0, c = 0.0;
  std::array<double, 3> color{0.5, 0.5, 0.5};
};

struct SceneSpec {
  int width = 0;
  int height = 0;
  std::vector<PlaneSpec> planes;
  double noise_sigma = 0.0;  // optional seeded noise on the disparity
  std::uint64_t rng_seed = 0;
};

// Deterministic piecewise-planar scene. Pixels covered by no plane are
// invalid (black). Out-of-bounds rectangles and negative plane disparities
// throw ContractError.
std::pair<FeatureMap, DisparityMap> synth_scene(const SceneSpec& spec);

// Seeded Gaussian perturbation of the valid pixels, clamped at 0.
DisparityMap add_disparity_noise(const DisparityMap& d, double sigma, std::uint64_t seed);

// Keeps a seeded uniform fraction of the valid pixels, invalidating the rest.
DisparityMap sparse_sample(const DisparityMap& d, double fraction, std::uint64_t seed);

// Thrown when the step has been halved 10 times and the loss still rises.
struct OptimizationFailure : std::runtime_error {
  explicit OptimizationFailure(std::vector<LossBreakdown> h)
      : std::runtime_error("refine_disparity: diverged after maximum step halvings"),
        history(std::move(h)) {}
  std::vector<LossBreakdown> history;
};

struct RefineResult {
  DisparityMap refined;
  std::vector<LossBreakdown> history;  // entry 0 is the initial loss
  GradSmoothParams params;             // final filters (changed only when optimized)
};

// Gradient descent on the composite loss. Candidate steps that would raise
// the total are rejected and retried with a halved step (at most 10 halvings
// over the run), so the recorded history never increases beyond rounding.
// The validity mask of the evolving field stays d_init's.
RefineResult refine_disparity(const DisparityMap& d_init, const DisparityMap& d_gt,
                              const FeatureMap& guidance, const LossWeights& w,
                              const RefineConfig& cfg,
                              const GradSmoothParams* params = nullptr,
                              const OcclusionConfig* occ_cfg = nullptr);

// "iteration,l_d,l_g,l_o,total" rows, iteration 0 first.
std::string history_csv(const std::vector<LossBreakdown>& history);

}  // namespace stereo
