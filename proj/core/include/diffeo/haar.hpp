#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "diffeo/grid.hpp"

namespace diffeo {

/// Scale assigned to the single approximation coefficient (and to low bands
/// when classifying per-axis membership): larger than any detail scale.
inline constexpr int kApproxScale = 1 << 28;

/// Multiscale Haar coefficients of a d-dimensional array, stored in place:
/// along every axis the first axis_scales[d][0] indices are the coarsest low
/// band, followed by detail bands of decreasing scale. Supports non-dyadic
/// extents through weighted averages at the borders.
struct WaveletPyramid {
  std::vector<int> source_shape;
  /// Per axis, the strictly increasing list of low-band lengths in ascending
  /// scale order; last entry equals the source extent.
  std::vector<std::vector<int>> axis_scales;
  double rho = 1.0;  // renormalization exponent applied at transform time
  std::vector<double> coeffs;
};

/// ceil(log2(max extent)) — the number of scales the transform visits.
int max_scale(std::span<const int> shape);

/// Scales a single axis of extent k participates in: ceil(log2 k), 0 for k==1.
int axis_scale_count(int k);

/// One lifting pass along a fiber at (1-based) scale `scale`: pairwise
/// (weighted) averages packed first, differences after. Odd lengths carry the
/// unpaired tail into the low band; even lengths whose coverage of the
/// original K_axis cells is partial weight the border pair by
/// delta = K_axis/2^(scale-1) - (len-1).
void haar_forward_1d_step(std::span<double> fiber, int k_axis, int scale);

/// Exact inverse of the forward fiber pass. `n_low` is the low-band length
/// inside the fiber. Requires delta > 0 whenever the weighted-border branch
/// is taken (the forward step never produces delta == 0 there).
void haar_backward_1d_step(std::span<double> fiber, int n_low, int k_axis, int scale);

/// Forward transform. With rho != 0, coefficients are scaled elementwise by
/// R^rho where R[i] is the reciprocal L2 norm of row i of the transform
/// matrix; rho = 1 makes the change of basis orthonormal.
WaveletPyramid fwt(std::span<const double> x, std::span<const int> shape, double rho = 1.0);

/// Inverse transform at the pyramid's own rho.
std::vector<double> iwt(const WaveletPyramid& p);

/// Reciprocal row norms of the rho=0 forward matrix, computed without
/// materializing the matrix (per-axis composite row norms factorize).
std::vector<double> renormalization_factors(std::span<const int> shape);

/// Per-coefficient scale: the creation scale of each detail coefficient,
/// kApproxScale for the approximation coefficient at index 0.
std::vector<int> coefficient_scales(std::span<const int> shape);

/// Detail coefficients with scale < S set to zero; everything else untouched.
/// Throws unless 1 <= S <= max_scale(source_shape).
WaveletPyramid zero_below_scale(WaveletPyramid p, int s);

/// Dense n x n transforms built by pushing unit impulses through fwt/iwt at
/// rho = 0, plus the renormalization vector from the row norms. Oracle /
/// test use only; capped at 4096 entries.
struct TransformMatrices {
  int n = 0;
  std::vector<double> m_fwt;  // row-major, coefficients = m_fwt * x
  std::vector<double> m_iwt;
  std::vector<double> r;
};

TransformMatrices build_transform_matrices(std::span<const int> shape);

/// RAWF coefficients plus a text sidecar (path + ".scales") holding rho and
/// one line of low-band lengths per axis.
void save_pyramid(const std::filesystem::path& path, const WaveletPyramid& p);
WaveletPyramid load_pyramid(const std::filesystem::path& path);

}  // namespace diffeo
