// Core 2D field types (disparity, features, gradients, occlusion) and the
// basic operators on them: validity-aware spatial gradients and RGBXY
// guidance construction.
//
// Layout conventions used throughout the library:
//   - pixel (x, y): x is the column, y the row; (0, 0) is top-left.
//   - 2D arrays are row-major, index y * width + x.
//   - FeatureMap is channel-planar, index (c * height + y) * width + x.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stereo/error.hpp"

namespace stereo {

// Single-channel disparity field with a validity mask. Invalid pixels carry
// no meaning; their stored value may be anything (including non-finite).
struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int x, int y) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }

  long count_valid() const;
  // Largest disparity over valid pixels. Requires at least one valid pixel.
  double max_valid() const;
};

// C-channel planar image / feature stack.
struct FeatureMap {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static FeatureMap zeros(int channels, int width, int height);

  double& at(int c, int x, int y) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int x, int y) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
};

// Horizontal/vertical disparity derivatives with a joint validity mask.
// Invalid entries are stored as 0 so downstream filters never see garbage.
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;
  std::vector<double> dy;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

// Occlusion field in [0, 1]; `hard` marks {0,1}-valued maps.
struct OcclusionMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  bool hard = false;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

// Central differences at interior pixels, one-sided at borders. The output
// is valid only where the pixel itself and every pixel read by either
// difference stencil are valid. Throws DegenerateInputError if the map is
// narrower than 2 pixels in either axis.
GradientField spatial_gradient(const DisparityMap& d);

// Adjoint of spatial_gradient: scatters upstream gradients on (dx, dy) back
// onto the disparity values. `forward_out` identifies which stencil was used
// where (its valid mask gates the scatter exactly as the forward pass gated
// the write). Returns an array of d's size.
std::vector<double> spatial_gradient_backward(const std::vector<double>& upstream_dx,
                                              const std::vector<double>& upstream_dy,
                                              const GradientField& forward_out);

// RGB + normalized pixel coordinates, the classic 5-channel guidance signal.
// Channels 0-2 copy the input (expected in [0, 1]); channels 3 and 4 are
// x/(width-1) * xy_scale and y/(height-1) * xy_scale (0 when the axis has a
// single pixel). Requires exactly 3 input channels and xy_scale > 0.
FeatureMap rgbxy_guidance(const FeatureMap& image, double xy_scale);

// Builds a DisparityMap from nested rows. A pixel is invalid when its entry
// equals `invalid_marker`, is non-finite, or is negative. Ragged input rows
// throw ContractError.
DisparityMap make_disparity_map(const std::vector<std::vector<double>>& rows,
                                std::optional<double> invalid_marker = std::nullopt);

// Flat-array overload.
DisparityMap make_disparity_map(int width, int height, std::vector<double> values,
                                std::optional<double> invalid_marker = std::nullopt);

}  // namespace stereo
