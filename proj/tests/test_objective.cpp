#include <doctest.h>

#include <cmath>

#include "diffeo/datasets.hpp"
#include "diffeo/objective.hpp"
#include "support/oracles.hpp"

using namespace diffeo;

namespace {

// Small smooth registration instance for gradient checks.
struct Instance {
  ScalarImage tmpl;
  ScalarImage target;
  std::vector<MomentumField> momenta;
  KernelConfig kernel;
  CostConfig cc;
  int steps;
};

Instance make_instance(int side, double sigma_g, int steps, std::uint64_t seed, double amp) {
  Instance inst;
  inst.kernel = KernelConfig{sigma_g, 4.0};
  inst.cc = CostConfig{0.1};
  inst.steps = steps;
  const std::vector<int> shape = {side, side};
  inst.tmpl = make_base_blob(shape);
  oracles::Rng rng(seed);
  // A smooth, distinct target: the blob warped by hand plus a gentle ramp.
  inst.target = inst.tmpl;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      inst.target.data[r * side + c] =
          0.85 * inst.target.data[r * side + c] + 0.002 * r + 0.001 * c;
  MomentumField m = MomentumField::zeros(make_control_grid(shape, sigma_g));
  for (double& a : m.alphas) a = rng.uniform(-amp, amp);
  inst.momenta.push_back(std::move(m));
  return inst;
}

double cost_of(const Instance& inst, std::span<const double> alphas) {
  std::vector<MomentumField> ms = inst.momenta;
  ms[0].alphas.assign(alphas.begin(), alphas.end());
  return cost(inst.tmpl, ms, {&inst.target, 1}, inst.cc, inst.kernel, inst.steps);
}

}  // namespace

TEST_CASE("fd_gradient_oracle: sanity on x^2 and halving order") {
  auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const double x0[1] = {3.0};
  const std::size_t coords[1] = {0};
  const auto g = fd_gradient_oracle(f, {x0, 1}, {coords, 1});
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));

  // Central differences are second order: halving h shrinks the error ~4x.
  auto cubic = [](std::span<const double> x) { return x[0] * x[0] * x[0]; };
  const double e1 = std::abs(fd_gradient_oracle(cubic, {x0, 1}, {coords, 1}, 1e-3)[0] - 27.0);
  const double e2 = std::abs(fd_gradient_oracle(cubic, {x0, 1}, {coords, 1}, 5e-4)[0] - 27.0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("fd oracle recovers the closed-form kinetic-energy gradient") {
  oracles::Rng rng(31);
  ControlPointGrid grid;
  grid.dim = 2;
  grid.shape = {3, 1};
  grid.points = {0.0, 0.0, 1.5, 0.4, 3.1, 2.2};
  const KernelConfig kernel{2.0, 0.0};
  MomentumField m{grid, oracles::random_vector(rng, 6)};
  auto f = [&](std::span<const double> a) {
    MomentumField mm = m;
    mm.alphas.assign(a.begin(), a.end());
    return kinetic_energy(mm, kernel);
  };
  const std::vector<std::size_t> coords = {0, 1, 2, 3, 4, 5};
  const auto fd = fd_gradient_oracle(f, m.alphas, coords, 1e-6);
  const auto analytic = kinetic_energy_gradient(m, kernel);
  for (int i = 0; i < 6; ++i)
    CHECK(fd[i] == doctest::Approx(analytic[i]).epsilon(1e-8));
}

TEST_CASE("cost: zero momenta cases") {
  const std::vector<int> shape = {16, 16};
  const ScalarImage blob = make_base_blob(shape);
  const KernelConfig kernel{4.0, 4.0};
  const CostConfig cc{0.1};
  std::vector<MomentumField> ms;
  ms.push_back(MomentumField::zeros(make_control_grid(shape, 4.0)));

  CHECK(cost(blob, ms, {&blob, 1}, cc, kernel, 5) == doctest::Approx(0.0));

  ScalarImage other = blob;
  for (double& v : other.data) v = 1.0 - v;
  const double expect = ssd(blob, other) / (0.1 * 0.1);
  CHECK(cost(blob, ms, {&other, 1}, cc, kernel, 5) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("cost: hand-set translation momenta beat zero momenta on the toy pair") {
  const ToyPair toy = make_toy_squares(50);
  const KernelConfig kernel{2.0, 4.0};
  const CostConfig cc{0.1};
  const ControlPointGrid grid = make_control_grid(toy.source.shape, 2.0);
  std::vector<MomentumField> zero, translated;
  zero.push_back(MomentumField::zeros(grid));
  MomentumField m = MomentumField::zeros(grid);
  for (int p = 0; p < grid.count(); ++p) {
    const double r = grid.points[p * 2], c = grid.points[p * 2 + 1];
    if (r > 8 && r < 32 && c > 8 && c < 32) {
      m.alphas[p * 2] = 0.30;
      m.alphas[p * 2 + 1] = 0.30;
    }
  }
  translated.push_back(std::move(m));
  const double e_zero = cost(toy.source, zero, {&toy.target, 1}, cc, kernel, 20);
  const double e_trans = cost(toy.source, translated, {&toy.target, 1}, cc, kernel, 20);
  CHECK(e_trans < e_zero);
}

TEST_CASE("gradients vanish at the zero-residual fixed point") {
  const std::vector<int> shape = {12, 12};
  const ScalarImage blob = make_base_blob(shape);
  std::vector<MomentumField> ms;
  ms.push_back(MomentumField::zeros(make_control_grid(shape, 3.0)));
  const std::vector<ScalarImage> targets = {blob, blob};
  std::vector<MomentumField> both = {ms[0], ms[0]};
  const GradientBundle g =
      gradient(blob, both, targets, CostConfig{0.1}, KernelConfig{3.0, 4.0}, 5);
  CHECK(oracles::linf(g.grad_template.data) == 0.0);
  for (const auto& ga : g.grad_alpha) CHECK(oracles::linf(ga) == 0.0);
  CHECK(g.energy == 0.0);
}

TEST_CASE("adjoint momentum gradient matches central finite differences") {
  const Instance inst = make_instance(16, 4.0, 6, 77, 0.6);
  const GradientBundle g =
      gradient(inst.tmpl, inst.momenta, {&inst.target, 1}, inst.cc, inst.kernel, inst.steps);

  oracles::Rng rng(78);
  std::vector<std::size_t> coords;
  for (int i = 0; i < 12; ++i)
    coords.push_back(rng.next_bits() % inst.momenta[0].alphas.size());
  auto f = [&](std::span<const double> a) { return cost_of(inst, a); };
  const auto fd = fd_gradient_oracle(f, inst.momenta[0].alphas, coords);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double ref = fd[i];
    const double got = g.grad_alpha[0][coords[i]];
    const double denom = std::max(std::abs(ref), 1e-6);
    CHECK(std::abs(got - ref) / denom < 1e-4);
  }
}

TEST_CASE("adjoint template gradient matches central finite differences") {
  const Instance inst = make_instance(16, 4.0, 6, 79, 0.6);
  const GradientBundle g =
      gradient(inst.tmpl, inst.momenta, {&inst.target, 1}, inst.cc, inst.kernel, inst.steps);

  oracles::Rng rng(80);
  auto f_tmpl = [&](std::span<const double> t) {
    ScalarImage tt = inst.tmpl;
    tt.data.assign(t.begin(), t.end());
    return cost(tt, inst.momenta, {&inst.target, 1}, inst.cc, inst.kernel, inst.steps);
  };
  std::vector<std::size_t> coords;
  for (int i = 0; i < 12; ++i) coords.push_back(rng.next_bits() % inst.tmpl.size());
  const auto fd = fd_gradient_oracle(f_tmpl, inst.tmpl.data, coords);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double denom = std::max(std::abs(fd[i]), 1e-6);
    CHECK(std::abs(g.grad_template[coords[i]] - fd[i]) / denom < 1e-4);
  }
}

TEST_CASE("cost and gradient are additive over subjects") {
  const Instance a = make_instance(14, 4.0, 5, 90, 0.5);
  Instance b = make_instance(14, 4.0, 5, 91, 0.5);
  b.target.data[30] += 0.2;

  std::vector<MomentumField> both = {a.momenta[0], b.momenta[0]};
  const std::vector<ScalarImage> targets = {a.target, b.target};
  const double joint = cost(a.tmpl, both, targets, a.cc, a.kernel, 5);
  const double split = cost(a.tmpl, a.momenta, {&a.target, 1}, a.cc, a.kernel, 5) +
                       cost(a.tmpl, b.momenta, {&b.target, 1}, b.cc, b.kernel, 5);
  CHECK(joint == doctest::Approx(split).epsilon(1e-12));

  const GradientBundle gj = gradient(a.tmpl, both, targets, a.cc, a.kernel, 5);
  const GradientBundle ga = gradient(a.tmpl, a.momenta, {&a.target, 1}, a.cc, a.kernel, 5);
  const GradientBundle gb = gradient(a.tmpl, b.momenta, {&b.target, 1}, b.cc, b.kernel, 5);
  CHECK(oracles::linf_diff(gj.grad_alpha[0], ga.grad_alpha[0]) < 1e-12);
  CHECK(oracles::linf_diff(gj.grad_alpha[1], gb.grad_alpha[0]) < 1e-12);
  for (std::size_t p = 0; p < gj.grad_template.size(); ++p)
    CHECK(gj.grad_template[p] ==
          doctest::Approx(ga.grad_template[p] + gb.grad_template[p]).epsilon(1e-10));
}

TEST_CASE("input validation") {
  const std::vector<int> shape = {8, 8};
  const ScalarImage img = make_base_blob(shape);
  std::vector<MomentumField> ms;
  ms.push_back(MomentumField::zeros(make_control_grid(shape, 3.0)));
  CHECK_THROWS(cost(img, ms, {}, CostConfig{0.1}, KernelConfig{3.0, 4.0}, 5));
  CHECK_THROWS(cost(img, ms, {&img, 1}, CostConfig{0.0}, KernelConfig{3.0, 4.0}, 5));
  ScalarImage small({4, 4}, 0.0);
  CHECK_THROWS(cost(img, ms, {&small, 1}, CostConfig{0.1}, KernelConfig{3.0, 4.0}, 5));
}
