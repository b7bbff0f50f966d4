#include "stereo/field.hpp"

#include <cmath>
#include <limits>

namespace stereo {

long DisparityMap::count_valid() const {
  long n = 0;
  for (std::uint8_t v : valid) n += (v != 0);
  return n;
}

double DisparityMap::max_valid() const {
  double m = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i]) {
      any = true;
      if (values[i] > m) m = values[i];
    }
  }
  if (!any) throw DegenerateInputError("max_valid: map has no valid pixels");
  return m;
}

FeatureMap FeatureMap::zeros(int channels, int width, int height) {
  FeatureMap f;
  f.channels = channels;
  f.width = width;
  f.height = height;
  f.values.assign(static_cast<std::size_t>(channels) * width * height, 0.0);
  return f;
}

namespace {

// Difference stencil along one axis at position p in [0, n). Returns the
// two sample positions and the divisor: central (p-1, p+1)/2 in the
// interior, one-sided at the ends.
struct Stencil {
  int lo, hi;
  double div;
};

inline Stencil stencil_1d(int p, int n) {
  if (p == 0) return {0, 1, 1.0};
  if (p == n - 1) return {n - 2, n - 1, 1.0};
  return {p - 1, p + 1, 2.0};
}

}  // namespace

GradientField spatial_gradient(const DisparityMap& d) {
  if (d.width < 2 || d.height < 2)
    throw DegenerateInputError("spatial_gradient: need at least 2x2 input");

  GradientField g;
  g.width = d.width;
  g.height = d.height;
  g.dx.assign(d.size(), 0.0);
  g.dy.assign(d.size(), 0.0);
  g.valid.assign(d.size(), 0);

  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const Stencil sx = stencil_1d(x, d.width);
      const Stencil sy = stencil_1d(y, d.height);
      const bool ok = d.is_valid(x, y) && d.is_valid(sx.lo, y) && d.is_valid(sx.hi, y) &&
                      d.is_valid(x, sy.lo) && d.is_valid(x, sy.hi);
      if (!ok) continue;
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      g.dx[i] = (d.at(sx.hi, y) - d.at(sx.lo, y)) / sx.div;
      g.dy[i] = (d.at(x, sy.hi) - d.at(x, sy.lo)) / sy.div;
      g.valid[i] = 1;
    }
  }
  return g;
}

std::vector<double> spatial_gradient_backward(const std::vector<double>& upstream_dx,
                                              const std::vector<double>& upstream_dy,
                                              const GradientField& forward_out) {
  const int w = forward_out.width, h = forward_out.height;
  if (upstream_dx.size() != forward_out.size() || upstream_dy.size() != forward_out.size())
    throw ContractError("spatial_gradient_backward: upstream shape mismatch");

  std::vector<double> grad(forward_out.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!forward_out.valid[i]) continue;  // forward wrote a constant there
      const Stencil sx = stencil_1d(x, w);
      const Stencil sy = stencil_1d(y, h);
      grad[static_cast<std::size_t>(y) * w + sx.hi] += upstream_dx[i] / sx.div;
      grad[static_cast<std::size_t>(y) * w + sx.lo] -= upstream_dx[i] / sx.div;
      grad[static_cast<std::size_t>(sy.hi) * w + x] += upstream_dy[i] / sy.div;
      grad[static_cast<std::size_t>(sy.lo) * w + x] -= upstream_dy[i] / sy.div;
    }
  }
  return grad;
}

FeatureMap rgbxy_guidance(const FeatureMap& image, double xy_scale) {
  if (image.channels != 3)
    throw ContractError("rgbxy_guidance: expected a 3-channel image");
  if (!(xy_scale > 0.0))
    throw ContractError("rgbxy_guidance: xy_scale must be positive");

  FeatureMap g = FeatureMap::zeros(5, image.width, image.height);
  const std::size_t plane = image.plane_size();
  std::copy(image.values.begin(), image.values.begin() + 3 * plane, g.values.begin());

  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      g.at(3, x, y) = image.width > 1 ? xy_scale * x / (image.width - 1) : 0.0;
      g.at(4, x, y) = image.height > 1 ? xy_scale * y / (image.height - 1) : 0.0;
    }
  }
  return g;
}

namespace {

DisparityMap finish_map(int width, int height, std::vector<double> values,
                        std::optional<double> invalid_marker) {
  DisparityMap d;
  d.width = width;
  d.height = height;
  d.values = std::move(values);
  d.valid.assign(d.values.size(), 0);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double v = d.values[i];
    const bool bad = !std::isfinite(v) || v < 0.0 || (invalid_marker && v == *invalid_marker);
    d.valid[i] = bad ? 0 : 1;
  }
  return d;
}

}  // namespace

DisparityMap make_disparity_map(const std::vector<std::vector<double>>& rows,
                                std::optional<double> invalid_marker) {
  const int height = static_cast<int>(rows.size());
  const int width = height > 0 ? static_cast<int>(rows[0].size()) : 0;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(width) * height);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != width)
      throw ContractError("make_disparity_map: ragged input rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return finish_map(width, height, std::move(flat), invalid_marker);
}

DisparityMap make_disparity_map(int width, int height, std::vector<double> values,
                                std::optional<double> invalid_marker) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw ContractError("make_disparity_map: value count does not match dimensions");
  return finish_map(width, height, std::move(values), invalid_marker);
}

}  // namespace stereo
