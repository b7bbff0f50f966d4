// Occlusion estimation from a left-view disparity map.
//
// Rectified geometry ties the two together: a surface to the right whose
// disparity exceeds the current pixel's by more than their column distance
// hides this pixel in the other view, and the number of occluded pixels
// equals the disparity difference across the boundary. The soft map relaxes
// that step test with a steep sigmoid so it can be back-propagated:
//
//   O(x, y) = max_{x' > x} sigmoid(alpha * (dd - dx - d0)),
//   dd = D(x', y) - D(x, y),  dx = x' - x.

#pragma once

#include <optional>
#include <vector>

#include "stereo/field.hpp"

namespace stereo {

struct OcclusionConfig {
  double alpha = 3.0;  // sigmoid slope
  double d0 = 0.5;     // offset centering the always-positive dx skew
  // Scan window in pixels. Unset means ceil(max valid disparity) + 2, the
  // point past which every candidate's sigmoid argument has decayed to
  // nothing.
  std::optional<int> max_scan;
};

// Numerically stable logistic function.
double sigmoid(double x);

int resolve_max_scan(const DisparityMap& d, const OcclusionConfig& cfg);

// Winning candidate per pixel (for the backward subgradient) and the value
// it produced. argmax_x is -1 where no valid candidate existed (the pixel
// then takes the flat-continuation value) and where the pixel itself is
// invalid.
struct SoftOcclusionCache {
  int width = 0;
  int height = 0;
  double alpha = 0.0;
  std::vector<int> argmax_x;
  std::vector<double> value;
};

// Soft occlusion map per the relaxation above. Candidates are the valid
// pixels in (x, x + max_scan] on the same row; ties keep the nearest.
// Throws DegenerateInputError on an all-invalid map.
OcclusionMap soft_occlusion(const DisparityMap& d, const OcclusionConfig& cfg = {},
                            SoftOcclusionCache* cache = nullptr);

// Subgradient through the hard max: flows only through the cached argmax,
//   dO/dD(x') = alpha * O(1-O),   dO/dD(x) = -alpha * O(1-O),
// accumulated over every pixel that selected x'.
std::vector<double> soft_occlusion_backward(const std::vector<double>& upstream,
                                            const DisparityMap& d,
                                            const OcclusionConfig& cfg,
                                            const SoftOcclusionCache& cache);

// Exact geometric test: occluded iff some valid x' > x in the row satisfies
// (D(x') - D(x)) - (x' - x) >= threshold. Scans to the end of the row.
// threshold 0 reproduces the disparity-difference pixel count.
OcclusionMap hard_occlusion_oracle(const DisparityMap& d, double threshold = 0.0);

// Supervision target: the soft map of the ground truth, so that a perfect
// prediction has exactly zero occlusion loss.
OcclusionMap occlusion_target(const DisparityMap& d_gt, const OcclusionConfig& cfg = {});

}  // namespace stereo
