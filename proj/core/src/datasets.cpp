#include "diffeo/datasets.hpp"

#include <cmath>
#include <stdexcept>

#include "diffeo/geodesic.hpp"

namespace diffeo {

namespace {

void fill_box(ScalarImage& img, int r0, int r1, int c0, int c1, double value) {
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) img.data[static_cast<std::size_t>(r) * img.shape[1] + c] = value;
}

}  // namespace

ToyPair make_toy_squares(int image_side) {
  if (image_side < 40)
    throw std::invalid_argument("make_toy_squares: image side must be >= 40");
  ToyPair pair;
  pair.source = ScalarImage({image_side, image_side}, 0.0);
  pair.target = ScalarImage({image_side, image_side}, 0.0);

  // Large 20x20 square, translated by (+8,+8) in the target.
  fill_box(pair.source, 10, 30, 10, 30, 1.0);
  fill_box(pair.target, 18, 38, 18, 38, 1.0);
  // 4-wide, 2-deep indentation cut from the translated square's far edge.
  fill_box(pair.target, 36, 38, 26, 30, 0.0);
  // Small 4x4 square, identical in both images, away from the action.
  fill_box(pair.source, 2, 6, image_side - 16, image_side - 12, 1.0);
  fill_box(pair.target, 2, 6, image_side - 16, image_side - 12, 1.0);

  pair.roi.lo = {34, 24};
  pair.roi.hi = {40, 32};
  return pair;
}

ScalarImage make_base_blob(std::span<const int> shape) {
  ScalarImage img(std::vector<int>(shape.begin(), shape.end()), 0.0);
  const int d = img.dim();
  double radius = 1e9;
  std::vector<double> center(d);
  for (int a = 0; a < d; ++a) {
    center[a] = 0.5 * (shape[a] - 1);
    radius = std::min(radius, 0.35 * (shape[a] - 1));
  }
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < img.size(); ++p) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double t = idx[a] - center[a];
      r2 += t * t;
    }
    const double t = std::max(0.0, 1.0 - std::sqrt(r2) / radius);
    img[p] = t * t * (3.0 - 2.0 * t);  // smoothstep bump, compact support
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return img;
}

namespace {

// Platform-independent uniform double in [-1, 1).
double signed_unit(std::uint64_t bits) {
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

struct SplitMix {
  // splitmix64; tiny, stable across platforms, good enough for test data
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

}  // namespace

std::vector<ScalarImage> make_blob_population(int n, std::uint64_t seed,
                                              std::span<const int> shape, double deform_scale) {
  if (n < 2) throw std::invalid_argument("make_blob_population: need n >= 2");
  const ScalarImage base = make_base_blob(shape);
  std::vector<ScalarImage> out;
  out.reserve(n);
  if (deform_scale == 0.0) {
    out.assign(n, base);
    return out;
  }

  const KernelConfig kernel{4.0, 4.0};
  const ControlPointGrid grid = make_control_grid(shape, kernel.sigma_g);
  SplitMix rng{seed};
  for (int i = 0; i < n; ++i) {
    MomentumField m = MomentumField::zeros(grid);
    for (double& a : m.alphas) a = deform_scale * signed_unit(rng.next());
    const FlowTrajectory traj = shoot(m, kernel, 10);
    const GridFlow inv = integrate_flow(traj, shape, FlowDirection::kInverse);
    out.push_back(warp_image(base, inv.final_positions(), shape));
  }
  return out;
}

}  // namespace diffeo
