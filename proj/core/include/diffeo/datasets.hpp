#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diffeo/grid.hpp"

namespace diffeo {

/// The two-squares registration pair: a large square that translates toward
/// the upper corner and gains a small indentation, and a small square that
/// stays put. Binary {0,1} intensities.
struct ToyPair {
  ScalarImage source;
  ScalarImage target;
  RoiBox roi;  // indentation region with a 2-pixel margin
};

/// image_side >= 40 so the 20x20 square, its (+8,+8) translation and the
/// fixed 4x4 square all fit.
ToyPair make_toy_squares(int image_side = 50);

/// A smooth radial bump centered in the grid, used as the atlas ground truth.
ScalarImage make_base_blob(std::span<const int> shape);

/// n >= 2 deterministic warps of the base blob: random small momenta scaled
/// by deform_scale are shot through the geodesic model. deform_scale = 0
/// yields identical copies.
std::vector<ScalarImage> make_blob_population(int n, std::uint64_t seed,
                                              std::span<const int> shape, double deform_scale);

}  // namespace diffeo
