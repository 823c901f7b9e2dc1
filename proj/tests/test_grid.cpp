#include <doctest.h>

#include "diffeo/grid.hpp"
#include "support/oracles.hpp"

using namespace diffeo;

TEST_CASE("interpolate: constant image returns the constant everywhere") {
  ScalarImage img({4, 5}, 5.0);
  const double pts[][2] = {{0, 0}, {1.3, 2.7}, {3, 4}, {0.01, 3.99}};
  for (const auto& p : pts) CHECK(interpolate(img, {p, 2}) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("interpolate: linear along an edge") {
  ScalarImage img({2, 2});
  img.data = {0, 1, 0, 1};
  const double p[2] = {0.0, 0.5};
  CHECK(interpolate(img, {p, 2}) == doctest::Approx(0.5));
}

TEST_CASE("interpolate: out-of-domain points clamp to the boundary") {
  ScalarImage img({3, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i);
  const double p[2] = {-3.2, 0.0};
  CHECK(interpolate(img, {p, 2}) == doctest::Approx(img.data[0]));
  const double q[2] = {10.0, 10.0};
  CHECK(interpolate(img, {q, 2}) == doctest::Approx(img.data[8]));
}

TEST_CASE("interpolate: exact at grid nodes and affine between them") {
  oracles::Rng rng(42);
  ScalarImage img({5, 4});
  for (double& v : img.data) v = rng.uniform(-2, 2);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) {
      const double p[2] = {double(r), double(c)};
      const int idx[2] = {r, c};
      CHECK(interpolate(img, {p, 2}) == doctest::Approx(img.at({idx, 2})).epsilon(1e-14));
    }
  // Affine along one axis: value at midpoint equals mean of endpoints.
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c + 1 < 4; ++c) {
      const double mid[2] = {double(r), c + 0.5};
      const int i0[2] = {r, c}, i1[2] = {r, c + 1};
      CHECK(interpolate(img, {mid, 2}) ==
            doctest::Approx(0.5 * (img.at({i0, 2}) + img.at({i1, 2}))).epsilon(1e-13));
    }
}

TEST_CASE("interpolate_with_gradient matches finite differences at generic points") {
  oracles::Rng rng(7);
  ScalarImage img({6, 7});
  for (double& v : img.data) v = rng.uniform(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    double p[2] = {rng.uniform(0.1, 4.9), rng.uniform(0.1, 5.9)};
    double g[2];
    interpolate_with_gradient(img, {p, 2}, {g, 2});
    for (int a = 0; a < 2; ++a) {
      const double h = 1e-6;
      double pp[2] = {p[0], p[1]}, pm[2] = {p[0], p[1]};
      pp[a] += h;
      pm[a] -= h;
      const double fd = (interpolate(img, {pp, 2}) - interpolate(img, {pm, 2})) / (2 * h);
      CHECK(g[a] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("splat_add is the transpose of interpolate") {
  oracles::Rng rng(11);
  ScalarImage img({5, 5});
  for (double& v : img.data) v = rng.uniform(-1, 1);
  const double p[2] = {2.3, 1.7};
  ScalarImage weights({5, 5}, 0.0);
  splat_add(weights, {p, 2}, 1.0);
  double dot = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) dot += weights[i] * img[i];
  CHECK(dot == doctest::Approx(interpolate(img, {p, 2})).epsilon(1e-13));
}

TEST_CASE("mean_image: duplicates, endpoints, and brute-force means") {
  ScalarImage img({3, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = double(i) * 0.25;
  std::vector<ScalarImage> dup = {img, img};
  CHECK(oracles::linf_diff(mean_image(dup).data, img.data) == 0.0);

  std::vector<ScalarImage> zo = {ScalarImage({2, 2}, 0.0), ScalarImage({2, 2}, 1.0)};
  for (double v : mean_image(zo).data) CHECK(v == doctest::Approx(0.5));

  oracles::Rng rng(3);
  std::vector<ScalarImage> imgs(20, ScalarImage({4, 6}));
  for (auto& im : imgs)
    for (double& v : im.data) v = rng.uniform(-3, 3);
  const ScalarImage m = mean_image(imgs);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double acc = 0.0;
    for (const auto& im : imgs) acc += im[i];
    CHECK(m[i] == doctest::Approx(acc / 20.0).epsilon(1e-13));
  }
}

TEST_CASE("mean_image error cases") {
  CHECK_THROWS(mean_image({}));
  std::vector<ScalarImage> bad = {ScalarImage({2, 2}), ScalarImage({3, 2})};
  CHECK_THROWS(mean_image(bad));
}

TEST_CASE("RoiBox validation") {
  RoiBox roi{{1, 1}, {3, 3}};
  const int shape[2] = {4, 4};
  CHECK_NOTHROW(roi.validate({shape, 2}));
  RoiBox outside{{1, 1}, {5, 3}};
  CHECK_THROWS(outside.validate({shape, 2}));
  RoiBox empty{{2, 2}, {2, 3}};
  CHECK_THROWS(empty.validate({shape, 2}));
  CHECK(roi.volume() == 4);
}
