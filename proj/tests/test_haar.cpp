#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>

#include "diffeo/haar.hpp"
#include "support/oracles.hpp"

using namespace diffeo;

namespace {

std::vector<double> renormalized_fwt_matrix(const TransformMatrices& tm) {
  std::vector<double> m(tm.m_fwt.size());
  const std::size_t n = tm.n;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] = tm.r[r] * tm.m_fwt[r * n + c];
  return m;
}

std::vector<double> renormalized_iwt_matrix(const TransformMatrices& tm) {
  std::vector<double> m(tm.m_iwt.size());
  const std::size_t n = tm.n;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] = tm.m_iwt[r * n + c] / tm.r[c];
  return m;
}

}  // namespace

TEST_CASE("forward fiber step: hand-traced pair") {
  std::vector<double> f = {1, 3};
  haar_forward_1d_step(f, 2, 1);
  CHECK(f[0] == doctest::Approx(2.0));
  CHECK(f[1] == doctest::Approx(-1.0));
}

TEST_CASE("forward fiber step: constant input has zero details") {
  std::vector<double> f(9, 3.25);
  haar_forward_1d_step(f, 9, 1);
  for (int i = 0; i < 5; ++i) CHECK(f[i] == doctest::Approx(3.25));
  for (int i = 5; i < 9; ++i) CHECK(f[i] == doctest::Approx(0.0));
}

TEST_CASE("forward fiber step: weighted border branch on [2,4,6]") {
  std::vector<double> f = {2, 4, 6};
  haar_forward_1d_step(f, 3, 1);
  CHECK(f[0] == doctest::Approx(3.0));
  CHECK(f[1] == doctest::Approx(6.0));
  CHECK(f[2] == doctest::Approx(-1.0));

  std::vector<double> low = {3, 6};
  haar_forward_1d_step(low, 3, 2);  // delta = 3/2 - 1 = 0.5
  CHECK(low[0] == doctest::Approx(4.0));
  CHECK(low[1] == doctest::Approx(-1.0));

  const std::vector<double> x = {2, 4, 6};
  const int shape[1] = {3};
  const WaveletPyramid p = fwt(x, {shape, 1}, 0.0);
  CHECK(p.coeffs[0] == doctest::Approx(4.0));
  CHECK(p.coeffs[1] == doctest::Approx(-1.0));
  CHECK(p.coeffs[2] == doctest::Approx(-1.0));
}

TEST_CASE("backward fiber step inverts the hand traces") {
  std::vector<double> f = {4, -1};
  haar_backward_1d_step(f, 1, 3, 2);
  CHECK(f[0] == doctest::Approx(3.0));
  CHECK(f[1] == doctest::Approx(6.0));

  std::vector<double> g = {3, 6, -1};
  haar_backward_1d_step(g, 2, 3, 1);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(4.0));
  CHECK(g[2] == doctest::Approx(6.0));

  std::vector<double> pair = {1, 3};
  haar_forward_1d_step(pair, 2, 1);
  haar_backward_1d_step(pair, 1, 2, 1);
  CHECK(pair[0] == doctest::Approx(1.0));
  CHECK(pair[1] == doctest::Approx(3.0));
}

TEST_CASE("fwt of a constant 4x4 at rho=1: single energy-preserving coefficient") {
  const double c = 1.7;
  std::vector<double> x(16, c);
  const int shape[2] = {4, 4};
  const WaveletPyramid p = fwt(x, {shape, 2}, 1.0);
  CHECK(p.coeffs[0] == doctest::Approx(4.0 * c).epsilon(1e-12));
  for (std::size_t i = 1; i < p.coeffs.size(); ++i)
    CHECK(std::abs(p.coeffs[i]) < 1e-12);
  CHECK(oracles::l2(p.coeffs) == doctest::Approx(oracles::l2(x)).epsilon(1e-12));

  // Against the explicit matrix oracle.
  const TransformMatrices tm = build_transform_matrices({shape, 2});
  const auto m = renormalized_fwt_matrix(tm);
  const auto via_matrix = oracles::matvec(m, x);
  CHECK(oracles::linf_diff(p.coeffs, via_matrix) < 1e-10);
}

TEST_CASE("fwt preserves the L2 norm at rho=1") {
  oracles::Rng rng(5);
  const std::vector<std::vector<int>> shapes = {{8, 8}, {7, 5}, {28, 28}, {3, 4, 5}, {13, 12, 15}};
  for (const auto& shape : shapes) {
    const auto x = oracles::random_vector(rng, element_count(shape));
    const WaveletPyramid p = fwt(x, shape, 1.0);
    CHECK(oracles::l2(p.coeffs) == doctest::Approx(oracles::l2(x)).epsilon(1e-10));
  }
}

TEST_CASE("fwt on a 3x4 array: in-place pyramid bookkeeping") {
  oracles::Rng rng(6);
  const int shape[2] = {3, 4};
  const auto x = oracles::random_vector(rng, 12);
  const WaveletPyramid p = fwt(x, {shape, 2});
  REQUIRE(p.axis_scales.size() == 2);
  CHECK(p.axis_scales[0] == std::vector<int>{1, 2, 3});
  CHECK(p.axis_scales[1] == std::vector<int>{1, 2, 4});
  CHECK(max_scale({shape, 2}) == 2);
}

TEST_CASE("iwt(fwt(x)) = x on dyadic and non-dyadic shapes, rho in {0,1}") {
  oracles::Rng rng(7);
  const std::vector<std::vector<int>> shapes = {{8, 8}, {7, 5}, {3, 4, 5}};
  for (double rho : {0.0, 1.0}) {
    for (const auto& shape : shapes) {
      for (int rep = 0; rep < 100; ++rep) {
        const auto x = oracles::random_vector(rng, element_count(shape), -10, 10);
        const auto back = iwt(fwt(x, shape, rho));
        CHECK(oracles::linf_diff(x, back) < 1e-10 * std::max(1.0, oracles::linf(x)));
      }
    }
  }
}

TEST_CASE("approximation-only pyramid reconstructs a constant block fill") {
  const int shape[2] = {7, 5};
  const std::size_t n = 35;
  WaveletPyramid p = fwt(std::vector<double>(n, 0.0), {shape, 2}, 1.0);
  const double amp = 2.5;
  p.coeffs[0] = amp;
  const auto back = iwt(p);
  // The single approximation row is the (renormalized) mean functional, so
  // the reconstruction is constant amp / sqrt(n).
  const double expect = amp / std::sqrt(static_cast<double>(n));
  for (double v : back) CHECK(v == doctest::Approx(expect).epsilon(1e-12));

  SUBCASE("all-zero pyramid reconstructs zeros") {
    p.coeffs.assign(n, 0.0);
    for (double v : iwt(p)) CHECK(v == 0.0);
  }
}

TEST_CASE("transform matrices on shape (2,)") {
  const int shape[1] = {2};
  const TransformMatrices tm = build_transform_matrices({shape, 1});
  REQUIRE(tm.n == 2);
  CHECK(tm.m_fwt[0] == doctest::Approx(0.5));
  CHECK(tm.m_fwt[1] == doctest::Approx(0.5));
  CHECK(tm.m_fwt[2] == doctest::Approx(0.5));
  CHECK(tm.m_fwt[3] == doctest::Approx(-0.5));
  CHECK(tm.r[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(tm.r[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("transform matrices: inverse pair and orthonormality after renormalization") {
  const std::vector<std::vector<int>> shapes = {{2}, {3}, {6}, {8, 8}, {7, 5}, {3, 4, 5}, {9, 9}};
  for (const auto& shape : shapes) {
    const TransformMatrices tm = build_transform_matrices(shape);
    const std::size_t n = tm.n;
    // m_fwt * m_iwt = I
    double max_err = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += tm.m_fwt[r * n + k] * tm.m_iwt[k * n + c];
        max_err = std::max(max_err, std::abs(acc - (r == c ? 1.0 : 0.0)));
      }
    CHECK(max_err < 1e-10);
    // transpose(renormalized IWT) = renormalized FWT
    const auto mf = renormalized_fwt_matrix(tm);
    const auto mi = renormalized_iwt_matrix(tm);
    double ortho_err = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        ortho_err = std::max(ortho_err, std::abs(mi[c * n + r] - mf[r * n + c]));
    CHECK(ortho_err < 1e-10);
  }
}

TEST_CASE("analytic renormalization factors match the matrix row norms") {
  const std::vector<std::vector<int>> shapes = {{2}, {5}, {7, 5}, {8, 8}, {3, 4, 5}, {13, 12, 15}};
  for (const auto& shape : shapes) {
    const TransformMatrices tm = build_transform_matrices(shape);
    const auto r = renormalization_factors(shape);
    CHECK(oracles::linf_diff(r, tm.r) < 1e-10);
  }
}

TEST_CASE("fwt agrees with the dense renormalized matrix on random data") {
  oracles::Rng rng(8);
  const std::vector<std::vector<int>> shapes = {{7, 5}, {8, 8}, {3, 4, 5}, {12, 11}};
  for (const auto& shape : shapes) {
    const TransformMatrices tm = build_transform_matrices(shape);
    const auto m = renormalized_fwt_matrix(tm);
    const auto x = oracles::random_vector(rng, element_count(shape), -4, 4);
    const WaveletPyramid p = fwt(x, shape, 1.0);
    CHECK(oracles::linf_diff(p.coeffs, oracles::matvec(m, x)) < 1e-10);
  }
}

TEST_CASE("fwt is linear") {
  oracles::Rng rng(9);
  const int shape[2] = {7, 6};
  const auto x = oracles::random_vector(rng, 42);
  const auto y = oracles::random_vector(rng, 42);
  const double a = 1.7, b = -0.4;
  std::vector<double> z(42);
  for (int i = 0; i < 42; ++i) z[i] = a * x[i] + b * y[i];
  const auto px = fwt(x, {shape, 2}).coeffs;
  const auto py = fwt(y, {shape, 2}).coeffs;
  const auto pz = fwt(z, {shape, 2}).coeffs;
  for (int i = 0; i < 42; ++i)
    CHECK(pz[i] == doctest::Approx(a * px[i] + b * py[i]).epsilon(1e-11));
}

TEST_CASE("zero_below_scale") {
  oracles::Rng rng(10);
  const int shape[2] = {8, 8};
  const auto x = oracles::random_vector(rng, 64);
  const WaveletPyramid p = fwt(x, {shape, 2});

  SUBCASE("S = 1 leaves the pyramid unchanged") {
    const WaveletPyramid q = zero_below_scale(p, 1);
    CHECK(oracles::linf_diff(p.coeffs, q.coeffs) == 0.0);
  }
  SUBCASE("S = S_max keeps the approximation plus the three coarsest blocks") {
    const WaveletPyramid q = zero_below_scale(p, 3);
    std::size_t survivors = 0;
    for (double v : q.coeffs)
      if (v != 0.0) ++survivors;
    CHECK(survivors == 4);  // positions (0,0), (0,1), (1,0), (1,1)
    CHECK(q.coeffs[0] == p.coeffs[0]);
    CHECK(q.coeffs[1] == p.coeffs[1]);
    CHECK(q.coeffs[8] == p.coeffs[8]);
    CHECK(q.coeffs[9] == p.coeffs[9]);
  }
  SUBCASE("idempotent projection") {
    const WaveletPyramid q = zero_below_scale(p, 2);
    const WaveletPyramid qq = zero_below_scale(q, 2);
    CHECK(oracles::linf_diff(q.coeffs, qq.coeffs) == 0.0);
  }
  SUBCASE("scale out of range throws") {
    CHECK_THROWS(zero_below_scale(p, 0));
    CHECK_THROWS(zero_below_scale(p, 4));
  }
}

TEST_CASE("masking commutes with the matrix-space projection") {
  // Zeroing detail coefficients below S and inverting equals projecting onto
  // the span of the >= S basis functions.
  oracles::Rng rng(12);
  const int shape[2] = {6, 7};
  const std::size_t n = 42;
  const auto x = oracles::random_vector(rng, n);
  const WaveletPyramid masked = zero_below_scale(fwt(x, {shape, 2}), 2);
  const auto back = iwt(masked);

  const TransformMatrices tm = build_transform_matrices({shape, 2});
  const auto mf = renormalized_fwt_matrix(tm);
  const auto scales = coefficient_scales({shape, 2});
  auto coeffs = oracles::matvec(mf, x);
  for (std::size_t i = 0; i < n; ++i)
    if (scales[i] < 2) coeffs[i] = 0.0;
  // Orthonormal: inverse = transpose.
  std::vector<double> proj(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) proj[r] += mf[c * n + r] * coeffs[c];
  CHECK(oracles::linf_diff(back, proj) < 1e-10);
}

TEST_CASE("max_scale") {
  const std::vector<std::pair<std::vector<int>, int>> cases = {
      {{28, 28}, 5}, {{2}, 1}, {{105, 100, 120}, 7}, {{50, 50}, 6}, {{25, 25}, 5}};
  for (const auto& [shape, expect] : cases) CHECK(max_scale(shape) == expect);
}

TEST_CASE("fwt runtime grows subquadratically") {
  oracles::Rng rng(13);
  auto time_fwt = [&](int side) {
    const std::vector<int> shape = {side, side};
    const auto x = oracles::random_vector(rng, element_count(shape));
    double best = 1e100;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const WaveletPyramid p = fwt(x, shape, 1.0);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
      CHECK(p.coeffs.size() == x.size());
    }
    return best;
  };
  const double t128 = time_fwt(128);
  const double t256 = time_fwt(256);
  // 4x the entries: O(n log n) predicts ~4.6x, O(n^2) predicts 16x. The
  // bound leaves headroom for cache effects and a loaded machine.
  CHECK(t256 / t128 < 12.0);
}

TEST_CASE("pyramid save/load round trip with sidecar") {
  oracles::Rng rng(14);
  const int shape[2] = {5, 6};
  const auto x = oracles::random_vector(rng, 30);
  const WaveletPyramid p = fwt(x, {shape, 2}, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "diffeo_haar_tests" / "p.rawf";
  std::filesystem::create_directories(path.parent_path());
  save_pyramid(path, p);
  const WaveletPyramid q = load_pyramid(path);
  CHECK(q.source_shape == p.source_shape);
  CHECK(q.axis_scales == p.axis_scales);
  CHECK(q.rho == p.rho);
  CHECK(oracles::linf_diff(q.coeffs, p.coeffs) == 0.0);
  CHECK(oracles::linf_diff(iwt(q), x) < 1e-12);
}

TEST_CASE("iwt rejects inconsistent axis_scales") {
  const int shape[2] = {4, 4};
  WaveletPyramid p = fwt(std::vector<double>(16, 1.0), {shape, 2});
  p.axis_scales[0] = {1, 3, 4};
  CHECK_THROWS(iwt(p));
}
