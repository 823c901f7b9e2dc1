#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace diffeo {

/// Scalar intensity image on a regular grid, d in {2, 3}.
/// Intensities are stored as 64-bit reals in row-major order regardless of
/// the bit depth of the source file.
struct ScalarImage {
  std::vector<int> shape;    // voxels per axis, all >= 1
  std::vector<double> data;  // row-major, size == prod(shape)

  ScalarImage() = default;
  ScalarImage(std::vector<int> shape_, double fill = 0.0);

  int dim() const { return static_cast<int>(shape.size()); }
  std::size_t size() const { return data.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// Row-major flat offset of a multi-index.
  std::size_t offset(std::span<const int> idx) const;

  double at(std::span<const int> idx) const { return data[offset(idx)]; }
  double& at(std::span<const int> idx) { return data[offset(idx)]; }

  bool same_shape(const ScalarImage& other) const { return shape == other.shape; }

  /// Throws std::invalid_argument if shape/data sizes disagree or data is
  /// non-finite.
  void validate() const;
};

/// One d-vector per grid node, component-interleaved: data[node*d + c].
struct VectorField {
  std::vector<int> shape;
  int dim = 0;
  std::vector<double> data;

  VectorField() = default;
  VectorField(std::vector<int> shape_, int dim_);

  std::size_t nodes() const;
};

/// Axis-aligned integer box, per-axis [lo, hi).
struct RoiBox {
  std::vector<int> lo;
  std::vector<int> hi;

  bool contains(std::span<const int> idx) const;
  std::size_t volume() const;
  /// Throws if empty or out of the given image shape.
  void validate(std::span<const int> image_shape) const;
};

std::size_t element_count(std::span<const int> shape);

/// Multilinear interpolation of the 2^d neighboring nodes. Coordinates
/// outside the domain are clamped to the boundary first, which makes the
/// function total.
double interpolate(const ScalarImage& img, std::span<const double> point);

/// Interpolated value plus its gradient with respect to the query point.
/// The gradient is zero along axes that were clamped.
double interpolate_with_gradient(const ScalarImage& img, std::span<const double> point,
                                 std::span<double> grad_point);

/// Scatter counterpart of interpolate: distributes `value` onto the 2^d
/// nodes around `point` with the same multilinear weights. Used by adjoint
/// sweeps to accumulate image-space gradients.
void splat_add(ScalarImage& img, std::span<const double> point, double value);

/// Voxelwise arithmetic mean. Throws on an empty list or mismatched shapes.
ScalarImage mean_image(std::span<const ScalarImage> images);

/// Sum over voxels of (a - b)^2. Shapes must match.
double ssd(const ScalarImage& a, const ScalarImage& b);

}  // namespace diffeo
