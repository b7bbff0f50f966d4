// Standard and pixel-adaptive convolution (PAC), with exact analytic
// backward passes, plus the two-layer GradSmooth stack that filters
// disparity gradients under a guidance image.
//
// A PAC layer computes, per output pixel i,
//
//   v'_i = sum_{j in Omega(i)} K(f_i, f_j) * W[tap] * v_j + b
//
// where Omega(i) is the s x s dilated neighborhood, K is the Gaussian
// affinity exp(-0.5 * |f_i - f_j|^2) on the guidance features, and W, b are
// an ordinary filter bank. With constant guidance K == 1 and the layer
// reduces exactly to standard convolution.
//
// Tap convention: weights(co, ci, ky, kx) multiplies the input at spatial
// offset (dx, dy) = dilation * (kx - r, ky - r), r = (s-1)/2. Out-of-image
// neighbors contribute nothing (zero padding; their affinity is stored as 0).

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "stereo/field.hpp"

namespace stereo {

// Dense s x s filter, weights indexed (out-channel, in-channel, ky, kx).
struct FilterBank {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_size = 0;  // odd
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(int co, int ci, int ky, int kx) {
    return weights[((static_cast<std::size_t>(co) * in_channels + ci) * kernel_size + ky) *
                       kernel_size +
                   kx];
  }
  double w(int co, int ci, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(co) * in_channels + ci) * kernel_size + ky) *
                       kernel_size +
                   kx];
  }

  static FilterBank zeros(int out_channels, int in_channels, int kernel_size);
  // All weights 1 / (s*s*in_channels), zero bias: preserves constants.
  static FilterBank uniform(int out_channels, int in_channels, int kernel_size);
  // Delta at the center tap: output = input.
  static FilterBank identity(int channels, int kernel_size);
};

struct PacLayerConfig {
  int kernel_size = 3;
  int dilation = 1;
  int in_channels = 1;
  int out_channels = 1;
  // When set, per-pixel affinities are divided by their in-image sum before
  // use. Off by default: the adaptive kernel is applied as written above.
  bool normalize_affinity = false;
};

// Per-pixel kernel affinities for a fixed guidance map and layer geometry.
// k is laid out (y, x, tap), tap = ky * s + kx; out-of-image taps hold 0.
// Reusable across any number of forward/backward passes while the guidance
// stays fixed.
struct AffinityField {
  int width = 0;
  int height = 0;
  int kernel_size = 0;
  int dilation = 0;
  bool normalized = false;
  std::vector<double> k;
  std::vector<double> sum;  // per-pixel in-image affinity sum; filled when normalized

  std::size_t taps() const { return static_cast<std::size_t>(kernel_size) * kernel_size; }
};

// exp(-0.5 * |fi - fj|^2); 1 at zero difference, in (0, 1] always.
double gaussian_affinity(std::span<const double> fi, std::span<const double> fj);

AffinityField compute_affinity(const FeatureMap& f, int kernel_size, int dilation,
                               bool normalize = false);

// Standard convolution, zero padded so spatial size is preserved.
FeatureMap conv_forward(const FeatureMap& v, const FilterBank& filt, int dilation);

// Everything the backward pass needs, captured by value: the forward inputs
// and the affinities actually applied.
struct PacCache {
  std::shared_ptr<const AffinityField> affinity;
  FeatureMap v;
  FeatureMap f;
  FilterBank bank;
};

// Pixel-adaptive convolution. If `cache` is non-null it is filled for a
// later pac_backward call.
FeatureMap pac_forward(const FeatureMap& v, const FeatureMap& f, const FilterBank& filt,
                       int dilation, bool normalize_affinity = false,
                       PacCache* cache = nullptr);

// Variant taking a precomputed affinity field (guidance fixed, input varying).
FeatureMap pac_forward(const FeatureMap& v, const FeatureMap& f,
                       std::shared_ptr<const AffinityField> affinity, const FilterBank& filt,
                       PacCache* cache = nullptr);

struct PacGrads {
  FeatureMap v;
  FeatureMap f;
  FilterBank bank;  // weight/bias gradients, FilterBank-shaped
};

// Exact partial derivatives of the PAC output with respect to v, f, W and b.
// The guidance gradient flows through the affinity's exponential:
//   dK/df_i = -K (f_i - f_j),   dK/df_j = +K (f_i - f_j).
PacGrads pac_backward(const FeatureMap& upstream, const PacCache& cache);

// Two PAC layers applied in sequence to each gradient component, no
// nonlinearity in between; dx and dy share the parameters.
struct GradSmoothParams {
  PacLayerConfig config1;
  PacLayerConfig config2;
  FilterBank bank1;
  FilterBank bank2;
  bool learnable = false;

  // 3x3 layers with dilations 4 and 8, single channel, uniform 1/9 weights.
  static GradSmoothParams defaults();
  // Both layers pass the field through unchanged.
  static GradSmoothParams identity();
};

struct GradSmoothCache {
  PacCache dx1, dx2, dy1, dy2;
  std::vector<std::uint8_t> valid;
  int width = 0;
  int height = 0;
};

GradientField gradsmooth_apply(const GradientField& g, const FeatureMap& f,
                               const GradSmoothParams& params,
                               GradSmoothCache* cache = nullptr);

// Precomputed-affinity variant for optimization loops.
GradientField gradsmooth_apply(const GradientField& g, const FeatureMap& f,
                               const GradSmoothParams& params,
                               std::shared_ptr<const AffinityField> affinity1,
                               std::shared_ptr<const AffinityField> affinity2,
                               GradSmoothCache* cache = nullptr);

struct GradSmoothGrads {
  std::vector<double> dx;
  std::vector<double> dy;
  FilterBank bank1;
  FilterBank bank2;
};

GradSmoothGrads gradsmooth_backward(const std::vector<double>& upstream_dx,
                                    const std::vector<double>& upstream_dy,
                                    const GradSmoothCache& cache);

// Flat binary record: magic "GPFB1", then out-channels, in-channels, kernel
// size as 32-bit little-endian unsigned, then weights and bias as 64-bit
// little-endian floats in row-major order.
std::vector<std::uint8_t> serialize_filter_bank(const FilterBank& bank);
FilterBank deserialize_filter_bank(std::span<const std::uint8_t> bytes);

// Row-parallelism knob for the forward paths (affinity, conv, PAC). Results
// are bitwise identical for any thread count: per-pixel summation order is
// fixed and writes are disjoint.
void set_num_threads(int n);
int num_threads();

}  // namespace stereo
