#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "stereo/field.hpp"

using namespace stereo;

namespace {

DisparityMap map_from_fn(int w, int h, double (*fn)(int, int)) {
  DisparityMap d;
  d.width = w;
  d.height = h;
  d.values.resize(static_cast<std::size_t>(w) * h);
  d.valid.assign(d.values.size(), 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d.at(x, y) = fn(x, y);
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("field");

TEST_CASE("spatial gradient of a linear field is exact at interior pixels") {
  const DisparityMap d = map_from_fn(8, 8, [](int x, int y) { return 2.0 * x + 3.0 * y; });
  const GradientField g = spatial_gradient(d);
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 7; ++x) {
      CHECK(g.valid[y * 8 + x]);
      CHECK(g.dx[y * 8 + x] == doctest::Approx(2.0).epsilon(1e-12));
      CHECK(g.dy[y * 8 + x] == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("spatial gradient of a constant field is zero everywhere") {
  const DisparityMap d = map_from_fn(6, 4, [](int, int) { return 7.0; });
  const GradientField g = spatial_gradient(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.valid[i]);
    CHECK(g.dx[i] == 0.0);
    CHECK(g.dy[i] == 0.0);
  }
}

TEST_CASE("quadratic row: central difference interior, one-sided border") {
  // D = x^2 on a 5-wide map: dx at x=2 is (9-1)/2 = 4, at x=0 it is 1-0 = 1.
  const DisparityMap d = map_from_fn(5, 3, [](int x, int) { return double(x) * x; });
  const GradientField g = spatial_gradient(d);
  CHECK(g.dx[1 * 5 + 2] == doctest::Approx(4.0));
  CHECK(g.dx[1 * 5 + 0] == doctest::Approx(1.0));
  CHECK(g.dx[1 * 5 + 4] == doctest::Approx(7.0));  // one-sided: 16 - 9
}

TEST_CASE("gradient is linear in the input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 5.0);
  DisparityMap d1 = map_from_fn(7, 6, [](int, int) { return 0.0; });
  DisparityMap d2 = d1;
  for (auto& v : d1.values) v = dist(rng);
  for (auto& v : d2.values) v = dist(rng);
  const double a = 1.7, b = -0.6;

  DisparityMap mix = d1;
  for (std::size_t i = 0; i < mix.values.size(); ++i)
    mix.values[i] = a * d1.values[i] + b * d2.values[i];

  const GradientField g1 = spatial_gradient(d1);
  const GradientField g2 = spatial_gradient(d2);
  const GradientField gm = spatial_gradient(mix);
  for (std::size_t i = 0; i < gm.size(); ++i) {
    CHECK(gm.dx[i] == doctest::Approx(a * g1.dx[i] + b * g2.dx[i]).epsilon(1e-12));
    CHECK(gm.dy[i] == doctest::Approx(a * g1.dy[i] + b * g2.dy[i]).epsilon(1e-12));
  }
}

TEST_CASE("invalid pixels poison every stencil that reads them") {
  DisparityMap d = map_from_fn(5, 5, [](int x, int y) { return double(x + y); });
  d.valid[2 * 5 + 2] = 0;  // center pixel
  const GradientField g = spatial_gradient(d);
  // The hole itself and the four stencil neighbors that read it.
  CHECK_FALSE(g.valid[2 * 5 + 2]);
  CHECK_FALSE(g.valid[2 * 5 + 1]);
  CHECK_FALSE(g.valid[2 * 5 + 3]);
  CHECK_FALSE(g.valid[1 * 5 + 2]);
  CHECK_FALSE(g.valid[3 * 5 + 2]);
  CHECK(g.valid[1 * 5 + 1]);  // diagonal neighbor unaffected
  CHECK(g.dx[2 * 5 + 2] == 0.0);
}

TEST_CASE("degenerate dimensions are rejected") {
  const DisparityMap d = map_from_fn(1, 5, [](int, int) { return 1.0; });
  CHECK_THROWS_AS(spatial_gradient(d), DegenerateInputError);
}

TEST_CASE("gradient adjoint matches the forward stencil (dot-product identity)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  DisparityMap d = map_from_fn(6, 5, [](int, int) { return 0.0; });
  for (auto& v : d.values) v = dist(rng) + 2.0;
  d.valid[7] = 0;

  const GradientField g = spatial_gradient(d);
  std::vector<double> ux(g.size()), uy(g.size());
  for (auto& v : ux) v = dist(rng);
  for (auto& v : uy) v = dist(rng);

  // <u, J d> == <J^T u, d> for the linear stencil map.
  double lhs = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) lhs += ux[i] * g.dx[i] + uy[i] * g.dy[i];
  const std::vector<double> adj = spatial_gradient_backward(ux, uy, g);
  double rhs = 0.0;
  for (std::size_t i = 0; i < adj.size(); ++i) rhs += adj[i] * d.values[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("rgbxy guidance: corner coordinates and scaling") {
  FeatureMap img = FeatureMap::zeros(3, 2, 2);
  for (double& v : img.values) v = 0.25;
  const FeatureMap g = rgbxy_guidance(img, 1.0);
  REQUIRE(g.channels == 5);
  CHECK(g.at(3, 0, 0) == 0.0);
  CHECK(g.at(3, 1, 0) == 1.0);
  CHECK(g.at(4, 0, 1) == 1.0);
  CHECK(g.at(0, 1, 1) == 0.25);

  const FeatureMap g2 = rgbxy_guidance(img, 0.1);
  CHECK(g2.at(3, 1, 1) == doctest::Approx(0.1));
  CHECK(g2.at(4, 1, 1) == doctest::Approx(0.1));
}

TEST_CASE("rgbxy guidance: constant color leaves only XY differences") {
  FeatureMap img = FeatureMap::zeros(3, 4, 3);
  for (double& v : img.values) v = 0.6;
  const FeatureMap g = rgbxy_guidance(img, 0.5);
  for (int c = 0; c < 3; ++c) CHECK(g.at(c, 1, 2) == g.at(c, 3, 0));
  // Shifting x by s changes channel 3 by s * xy_scale / (w - 1), uniformly.
  const double delta = g.at(3, 3, 1) - g.at(3, 1, 1);
  CHECK(delta == doctest::Approx(2.0 * 0.5 / 3.0));
  CHECK(g.at(3, 2, 0) - g.at(3, 0, 0) == doctest::Approx(g.at(3, 3, 2) - g.at(3, 1, 2)));
}

TEST_CASE("rgbxy guidance contract errors") {
  CHECK_THROWS_AS(rgbxy_guidance(FeatureMap::zeros(1, 2, 2), 1.0), ContractError);
  CHECK_THROWS_AS(rgbxy_guidance(FeatureMap::zeros(3, 2, 2), 0.0), ContractError);
}

TEST_CASE("make_disparity_map validity rules") {
  const double inf = std::numeric_limits<double>::infinity();
  const DisparityMap d = make_disparity_map({{1.0, 2.0, inf}, {-1.0, 0.0, 99.0}}, 99.0);
  CHECK(d.width == 3);
  CHECK(d.height == 2);
  CHECK(d.is_valid(0, 0));
  CHECK(d.is_valid(1, 0));
  CHECK_FALSE(d.is_valid(2, 0));  // non-finite
  CHECK_FALSE(d.is_valid(0, 1));  // negative
  CHECK(d.is_valid(1, 1));
  CHECK_FALSE(d.is_valid(2, 1));  // equals the invalid marker

  const DisparityMap all = make_disparity_map({{0.5, 1.5}, {2.5, 3.5}});
  CHECK(all.count_valid() == 4);

  CHECK_THROWS_AS(make_disparity_map({{1.0, 2.0}, {3.0}}), ContractError);
}

TEST_SUITE_END();
