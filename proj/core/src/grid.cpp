#include "diffeo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diffeo {

ScalarImage::ScalarImage(std::vector<int> shape_, double fill)
    : shape(std::move(shape_)), data(element_count(shape), fill) {}

std::size_t ScalarImage::offset(std::span<const int> idx) const {
  std::size_t off = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) off = off * shape[a] + idx[a];
  return off;
}

void ScalarImage::validate() const {
  if (shape.empty()) throw std::invalid_argument("ScalarImage: empty shape");
  for (int k : shape)
    if (k < 1) throw std::invalid_argument("ScalarImage: non-positive extent");
  if (data.size() != element_count(shape))
    throw std::invalid_argument("ScalarImage: data length does not match shape");
  for (double v : data)
    if (!std::isfinite(v)) throw std::invalid_argument("ScalarImage: non-finite intensity");
}

VectorField::VectorField(std::vector<int> shape_, int dim_)
    : shape(std::move(shape_)), dim(dim_), data(element_count(shape) * dim_, 0.0) {}

std::size_t VectorField::nodes() const { return element_count(shape); }

bool RoiBox::contains(std::span<const int> idx) const {
  for (std::size_t a = 0; a < lo.size(); ++a)
    if (idx[a] < lo[a] || idx[a] >= hi[a]) return false;
  return true;
}

std::size_t RoiBox::volume() const {
  std::size_t v = 1;
  for (std::size_t a = 0; a < lo.size(); ++a) v *= static_cast<std::size_t>(hi[a] - lo[a]);
  return v;
}

void RoiBox::validate(std::span<const int> image_shape) const {
  if (lo.size() != hi.size() || lo.size() != image_shape.size())
    throw std::invalid_argument("RoiBox: dimension mismatch");
  for (std::size_t a = 0; a < lo.size(); ++a) {
    if (lo[a] < 0 || hi[a] > image_shape[a])
      throw std::invalid_argument("RoiBox: bounds outside image");
    if (lo[a] >= hi[a]) throw std::invalid_argument("RoiBox: empty along axis " + std::to_string(a));
  }
}

std::size_t element_count(std::span<const int> shape) {
  std::size_t n = 1;
  for (int k : shape) n *= static_cast<std::size_t>(k);
  return n;
}

namespace {

struct CellWeights {
  int base[3];    // lower corner index per axis
  int step[3];    // 0 when the upper corner collapses onto the lower one
  double frac[3];
  bool clamped[3];
};

CellWeights locate_cell(const ScalarImage& img, std::span<const double> point) {
  CellWeights cw{};
  const int d = img.dim();
  for (int a = 0; a < d; ++a) {
    const double hi = static_cast<double>(img.shape[a] - 1);
    double p = point[a];
    cw.clamped[a] = false;
    if (p <= 0.0) {
      p = 0.0;
      cw.clamped[a] = point[a] < 0.0;
    } else if (p >= hi) {
      cw.clamped[a] = point[a] > hi;
      p = hi;
    }
    double fl = std::floor(p);
    int i0 = static_cast<int>(fl);
    if (i0 >= img.shape[a] - 1) {  // p == hi exactly
      i0 = std::max(0, img.shape[a] - 2);
      fl = static_cast<double>(i0);
    }
    cw.base[a] = i0;
    cw.step[a] = (img.shape[a] > 1) ? 1 : 0;
    cw.frac[a] = (img.shape[a] > 1) ? p - fl : 0.0;
  }
  return cw;
}

}  // namespace

double interpolate(const ScalarImage& img, std::span<const double> point) {
  const int d = img.dim();
  const CellWeights cw = locate_cell(img, point);
  double value = 0.0;
  const int corners = 1 << d;
  int idx[3];
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] = cw.base[a] + bit * cw.step[a];
      w *= bit ? cw.frac[a] : (1.0 - cw.frac[a]);
    }
    if (w != 0.0) value += w * img.at(std::span<const int>(idx, d));
  }
  return value;
}

double interpolate_with_gradient(const ScalarImage& img, std::span<const double> point,
                                 std::span<double> grad_point) {
  const int d = img.dim();
  const CellWeights cw = locate_cell(img, point);
  double value = 0.0;
  for (int a = 0; a < d; ++a) grad_point[a] = 0.0;
  const int corners = 1 << d;
  int idx[3];
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] = cw.base[a] + bit * cw.step[a];
      w *= bit ? cw.frac[a] : (1.0 - cw.frac[a]);
    }
    const double v = img.at(std::span<const int>(idx, d));
    value += w * v;
    for (int a = 0; a < d; ++a) {
      if (cw.clamped[a] || cw.step[a] == 0) continue;
      double dw = 1.0;
      for (int b = 0; b < d; ++b) {
        const int bit = (c >> b) & 1;
        if (b == a)
          dw *= bit ? 1.0 : -1.0;
        else
          dw *= bit ? cw.frac[b] : (1.0 - cw.frac[b]);
      }
      grad_point[a] += dw * v;
    }
  }
  return value;
}

void splat_add(ScalarImage& img, std::span<const double> point, double value) {
  const int d = img.dim();
  const CellWeights cw = locate_cell(img, point);
  const int corners = 1 << d;
  int idx[3];
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] = cw.base[a] + bit * cw.step[a];
      w *= bit ? cw.frac[a] : (1.0 - cw.frac[a]);
    }
    if (w != 0.0) img.at(std::span<const int>(idx, d)) += w * value;
  }
}

ScalarImage mean_image(std::span<const ScalarImage> images) {
  if (images.empty()) throw std::invalid_argument("mean_image: empty image list");
  ScalarImage out(images[0].shape, 0.0);
  for (const ScalarImage& img : images) {
    if (!img.same_shape(out)) throw std::invalid_argument("mean_image: shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += img[i];
  }
  const double inv = 1.0 / static_cast<double>(images.size());
  for (double& v : out.data) v *= inv;
  return out;
}

double ssd(const ScalarImage& a, const ScalarImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssd: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace diffeo
