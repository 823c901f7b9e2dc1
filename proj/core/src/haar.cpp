#include "diffeo/haar.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "diffeo/image_io.hpp"

namespace diffeo {

int axis_scale_count(int k) {
  if (k < 1) throw std::invalid_argument("axis_scale_count: extent must be >= 1");
  int s = 0;
  int cover = 1;
  while (cover < k) {
    cover *= 2;
    ++s;
  }
  return s;
}

int max_scale(std::span<const int> shape) {
  if (shape.empty()) throw std::invalid_argument("max_scale: empty shape");
  int m = 0;
  for (int k : shape) m = std::max(m, axis_scale_count(k));
  return m;
}

namespace {

// Coverage deficit of the border pair: the last low-band entry at scale s
// stands for K/2^(s-1) - (len-1) of a full cell.
double border_delta(int k_axis, int len, int scale) {
  return static_cast<double>(k_axis) / std::ldexp(1.0, scale - 1) -
         static_cast<double>(len - 1);
}

bool has_weighted_border(int k_axis, int len, int scale) {
  // Exact when the current entries tile the original extent evenly.
  return static_cast<long long>(len) << (scale - 1) != k_axis;
}

}  // namespace

void haar_forward_1d_step(std::span<double> fiber, int k_axis, int scale) {
  const int k = static_cast<int>(fiber.size());
  if (k <= 1) return;
  double tmp[2048];
  std::vector<double> heap;
  double* out = tmp;
  if (k > 2048) {
    heap.resize(k);
    out = heap.data();
  }
  const int pairs = k / 2;
  const int n_low = (k + 1) / 2;
  if (k % 2 == 0) {
    for (int j = 0; j < pairs; ++j) out[j] = 0.5 * (fiber[2 * j] + fiber[2 * j + 1]);
    if (has_weighted_border(k_axis, k, scale)) {
      const double delta = border_delta(k_axis, k, scale);
      out[pairs - 1] = (fiber[k - 2] + delta * fiber[k - 1]) / (1.0 + delta);
    }
    for (int j = 0; j < pairs; ++j) out[n_low + j] = fiber[2 * j] - out[j];
  } else {
    for (int j = 0; j < pairs; ++j) out[j] = 0.5 * (fiber[2 * j] + fiber[2 * j + 1]);
    out[pairs] = fiber[k - 1];  // unpaired tail joins the low band
    for (int j = 0; j < pairs; ++j) out[n_low + j] = fiber[2 * j] - out[j];
  }
  std::copy(out, out + k, fiber.begin());
}

void haar_backward_1d_step(std::span<double> fiber, int n_low, int k_axis, int scale) {
  const int k = static_cast<int>(fiber.size());
  if (k <= 1) return;
  if (n_low < 1 || n_low >= k || n_low != (k + 1) / 2)
    throw std::invalid_argument("haar_backward_1d_step: inconsistent low-band length");
  double tmp[2048];
  std::vector<double> heap;
  double* out = tmp;
  if (k > 2048) {
    heap.resize(k);
    out = heap.data();
  }
  const double* low = fiber.data();
  const double* det = fiber.data() + n_low;
  const int pairs = k / 2;
  if (k % 2 == 0) {
    for (int j = 0; j < pairs; ++j) {
      out[2 * j] = low[j] + det[j];
      out[2 * j + 1] = 2.0 * low[j] - out[2 * j];
    }
    if (has_weighted_border(k_axis, k, scale)) {
      const double delta = border_delta(k_axis, k, scale);
      assert(delta > 0.0);
      out[k - 1] = ((1.0 + delta) * low[pairs - 1] - out[k - 2]) / delta;
    }
  } else {
    for (int j = 0; j < pairs; ++j) {
      out[2 * j] = low[j] + det[j];
      out[2 * j + 1] = 2.0 * low[j] - out[2 * j];
    }
    out[k - 1] = low[n_low - 1];
  }
  std::copy(out, out + k, fiber.begin());
}

namespace {

struct FiberWalker {
  // Iterates the start offsets of all fibers along `axis` inside the slab
  // [0, ext[0]) x ... x [0, ext[D-1]) of an array with full extents `shape`.
  std::span<const int> shape;
  std::span<const int> ext;
  int axis;
  std::vector<std::size_t> strides;

  FiberWalker(std::span<const int> shape_, std::span<const int> ext_, int axis_)
      : shape(shape_), ext(ext_), axis(axis_), strides(shape_.size()) {
    std::size_t s = 1;
    for (int a = static_cast<int>(shape.size()) - 1; a >= 0; --a) {
      strides[a] = s;
      s *= static_cast<std::size_t>(shape[a]);
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const int d = static_cast<int>(shape.size());
    std::vector<int> idx(d, 0);
    while (true) {
      std::size_t off = 0;
      for (int a = 0; a < d; ++a)
        if (a != axis) off += static_cast<std::size_t>(idx[a]) * strides[a];
      fn(off, strides[axis]);
      int a = d - 1;
      for (; a >= 0; --a) {
        if (a == axis) continue;
        if (++idx[a] < ext[a]) break;
        idx[a] = 0;
      }
      if (a < 0) break;
    }
  }
};

void apply_axis(std::vector<double>& data, std::span<const int> shape, std::span<const int> ext,
                int axis, auto&& fiber_op) {
  const int len = ext[axis];
  std::vector<double> fiber(len);
  FiberWalker walker(shape, ext, axis);
  walker.for_each([&](std::size_t base, std::size_t stride) {
    if (stride == 1) {
      fiber_op(std::span<double>(data.data() + base, len));
    } else {
      for (int i = 0; i < len; ++i) fiber[i] = data[base + i * stride];
      fiber_op(std::span<double>(fiber));
      for (int i = 0; i < len; ++i) data[base + i * stride] = fiber[i];
    }
  });
}

std::vector<std::vector<int>> make_axis_scales(std::span<const int> shape) {
  std::vector<std::vector<int>> scales(shape.size());
  for (std::size_t a = 0; a < shape.size(); ++a) {
    int k = shape[a];
    scales[a].push_back(k);
    while (k > 1) {
      k = (k + 1) / 2;
      scales[a].insert(scales[a].begin(), k);
    }
  }
  return scales;
}

void check_shape(std::span<const int> shape) {
  if (shape.empty() || shape.size() > 3)
    throw std::invalid_argument("haar: shape must have 1 to 3 axes");
  for (int k : shape)
    if (k < 1) throw std::invalid_argument("haar: extents must be >= 1");
}

}  // namespace

WaveletPyramid fwt(std::span<const double> x, std::span<const int> shape, double rho) {
  check_shape(shape);
  if (x.size() != element_count(shape))
    throw std::invalid_argument("fwt: data length does not match shape");
  WaveletPyramid p;
  p.source_shape.assign(shape.begin(), shape.end());
  p.axis_scales = make_axis_scales(shape);
  p.rho = rho;
  p.coeffs.assign(x.begin(), x.end());

  const int d = static_cast<int>(shape.size());
  const int s_max = max_scale(shape);
  std::vector<int> ext(shape.begin(), shape.end());
  for (int s = 1; s <= s_max; ++s) {
    for (int a = 0; a < d; ++a) {
      if (s > axis_scale_count(shape[a])) continue;
      apply_axis(p.coeffs, shape, ext, a,
                 [&](std::span<double> f) { haar_forward_1d_step(f, shape[a], s); });
    }
    for (int a = 0; a < d; ++a)
      if (s <= axis_scale_count(shape[a])) ext[a] = (ext[a] + 1) / 2;
  }

  if (rho != 0.0) {
    const std::vector<double> r = renormalization_factors(shape);
    if (rho == 1.0)
      for (std::size_t i = 0; i < p.coeffs.size(); ++i) p.coeffs[i] *= r[i];
    else
      for (std::size_t i = 0; i < p.coeffs.size(); ++i) p.coeffs[i] *= std::pow(r[i], rho);
  }
  return p;
}

std::vector<double> iwt(const WaveletPyramid& p) {
  check_shape(p.source_shape);
  const std::span<const int> shape(p.source_shape);
  if (p.coeffs.size() != element_count(shape))
    throw std::invalid_argument("iwt: coefficient length does not match shape");
  if (p.axis_scales != make_axis_scales(shape))
    throw std::invalid_argument("iwt: axis_scales inconsistent with source shape");

  std::vector<double> x(p.coeffs);
  if (p.rho != 0.0) {
    const std::vector<double> r = renormalization_factors(shape);
    if (p.rho == 1.0)
      for (std::size_t i = 0; i < x.size(); ++i) x[i] /= r[i];
    else
      for (std::size_t i = 0; i < x.size(); ++i) x[i] /= std::pow(r[i], p.rho);
  }

  const int d = static_cast<int>(shape.size());
  const int s_max = max_scale(shape);
  std::vector<int> ext(d);
  for (int s = s_max; s >= 1; --s) {
    for (int a = 0; a < d; ++a) {
      const int m = axis_scale_count(shape[a]);
      ext[a] = (s <= m) ? p.axis_scales[a][m - s + 1] : p.axis_scales[a].front();
    }
    for (int a = 0; a < d; ++a) {
      const int m = axis_scale_count(shape[a]);
      if (s > m) continue;
      const int n_low = p.axis_scales[a][m - s];
      apply_axis(x, shape, ext, a,
                 [&](std::span<double> f) { haar_backward_1d_step(f, n_low, shape[a], s); });
    }
  }
  return x;
}

namespace {

// Squared L2 norms of the composite per-axis transform rows after each scale.
// Rows of the low band have pairwise disjoint supports at every scale, so the
// norms propagate through the lifting steps without the rows themselves.
std::vector<std::vector<double>> axis_row_norm2(int k_axis) {
  const int m = axis_scale_count(k_axis);
  std::vector<std::vector<double>> table(m + 1, std::vector<double>(k_axis, 1.0));
  std::vector<double> cur(k_axis, 1.0);
  int len = k_axis;
  for (int s = 1; s <= m; ++s) {
    const int pairs = len / 2;
    const int n_low = (len + 1) / 2;
    std::vector<double> next(len);
    for (int j = 0; j < pairs; ++j) {
      next[j] = 0.25 * (cur[2 * j] + cur[2 * j + 1]);
      next[n_low + j] = next[j];
    }
    if (len % 2 == 0) {
      if (has_weighted_border(k_axis, len, s)) {
        const double delta = border_delta(k_axis, len, s);
        const double w = 1.0 + delta;
        next[pairs - 1] = (cur[len - 2] + delta * delta * cur[len - 1]) / (w * w);
        next[n_low + pairs - 1] =
            delta * delta * (cur[len - 2] + cur[len - 1]) / (w * w);
      }
    } else {
      next[pairs] = cur[len - 1];
    }
    std::copy(next.begin(), next.begin() + len, cur.begin());
    table[s] = cur;
    len = n_low;
  }
  return table;
}

// Per-index band scale along one axis: kApproxScale for the final low band,
// otherwise the scale at which the detail band was created.
std::vector<int> axis_band_scales(std::span<const int> low_lengths, int k_axis) {
  std::vector<int> bands(k_axis, kApproxScale);
  const int m = static_cast<int>(low_lengths.size()) - 1;
  for (int j = 0; j + 1 <= m; ++j)
    for (int i = low_lengths[j]; i < low_lengths[j + 1]; ++i) bands[i] = m - j;
  return bands;
}

}  // namespace

std::vector<int> coefficient_scales(std::span<const int> shape) {
  check_shape(shape);
  const auto scales = make_axis_scales(shape);
  const int d = static_cast<int>(shape.size());
  std::vector<std::vector<int>> bands(d);
  for (int a = 0; a < d; ++a) bands[a] = axis_band_scales(scales[a], shape[a]);

  const std::size_t n = element_count(shape);
  std::vector<int> out(n);
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < n; ++p) {
    int s = kApproxScale;
    for (int a = 0; a < d; ++a) s = std::min(s, bands[a][idx[a]]);
    out[p] = s;
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

std::vector<double> renormalization_factors(std::span<const int> shape) {
  check_shape(shape);
  const auto scales = make_axis_scales(shape);
  const int d = static_cast<int>(shape.size());
  std::vector<std::vector<std::vector<double>>> tables(d);
  std::vector<std::vector<int>> bands(d);
  std::vector<int> m(d);
  for (int a = 0; a < d; ++a) {
    tables[a] = axis_row_norm2(shape[a]);
    bands[a] = axis_band_scales(scales[a], shape[a]);
    m[a] = axis_scale_count(shape[a]);
  }

  const std::size_t n = element_count(shape);
  std::vector<double> r(n);
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < n; ++p) {
    int creation = kApproxScale;
    for (int a = 0; a < d; ++a) creation = std::min(creation, bands[a][idx[a]]);
    double norm2 = 1.0;
    for (int a = 0; a < d; ++a) {
      const int snap = std::min(creation, m[a]);
      norm2 *= tables[a][snap][idx[a]];
    }
    r[p] = 1.0 / std::sqrt(norm2);
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return r;
}

WaveletPyramid zero_below_scale(WaveletPyramid p, int s) {
  const int s_max = max_scale(p.source_shape);
  if (s < 1 || s > s_max)
    throw std::invalid_argument("zero_below_scale: scale out of range [1, S_max]");
  const std::vector<int> scales = coefficient_scales(p.source_shape);
  for (std::size_t i = 0; i < p.coeffs.size(); ++i)
    if (scales[i] < s) p.coeffs[i] = 0.0;
  return p;
}

TransformMatrices build_transform_matrices(std::span<const int> shape) {
  check_shape(shape);
  const std::size_t n = element_count(shape);
  if (n > 4096) throw std::invalid_argument("build_transform_matrices: more than 4096 entries");

  TransformMatrices tm;
  tm.n = static_cast<int>(n);
  tm.m_fwt.assign(n * n, 0.0);
  tm.m_iwt.assign(n * n, 0.0);
  tm.r.assign(n, 0.0);

  std::vector<double> impulse(n, 0.0);
  WaveletPyramid proto = fwt(impulse, shape, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    impulse[i] = 1.0;
    const WaveletPyramid col = fwt(impulse, shape, 0.0);
    for (std::size_t row = 0; row < n; ++row) tm.m_fwt[row * n + i] = col.coeffs[row];
    proto.coeffs.assign(n, 0.0);
    proto.coeffs[i] = 1.0;
    const std::vector<double> inv = iwt(proto);
    for (std::size_t row = 0; row < n; ++row) tm.m_iwt[row * n + i] = inv[row];
    impulse[i] = 0.0;
  }
  for (std::size_t row = 0; row < n; ++row) {
    double norm2 = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
      const double v = tm.m_fwt[row * n + col];
      norm2 += v * v;
    }
    tm.r[row] = 1.0 / std::sqrt(norm2);
  }
  return tm;
}

void save_pyramid(const std::filesystem::path& path, const WaveletPyramid& p) {
  save_rawf(path, p.source_shape, p.coeffs);
  std::ofstream side(path.string() + ".scales");
  if (!side) throw IoError(path.string() + ".scales: cannot open for writing");
  side << "rho " << p.rho << '\n';
  for (const auto& axis : p.axis_scales) {
    for (std::size_t i = 0; i < axis.size(); ++i) side << (i ? " " : "") << axis[i];
    side << '\n';
  }
}

WaveletPyramid load_pyramid(const std::filesystem::path& path) {
  WaveletPyramid p;
  load_rawf(path, p.source_shape, p.coeffs);
  std::ifstream side(path.string() + ".scales");
  if (!side) throw IoError(path.string() + ".scales: cannot open for reading");
  std::string tag;
  if (!(side >> tag >> p.rho) || tag != "rho")
    throw IoError(path.string() + ".scales: malformed rho line");
  std::string line;
  std::getline(side, line);
  while (std::getline(side, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<int> axis;
    int v;
    while (ls >> v) axis.push_back(v);
    p.axis_scales.push_back(std::move(axis));
  }
  if (p.axis_scales != make_axis_scales(p.source_shape))
    throw IoError(path.string() + ".scales: axis scales inconsistent with shape");
  return p;
}

}  // namespace diffeo
