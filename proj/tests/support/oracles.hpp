#pragma once

// Independent reference computations the unit and acceptance suites check
// the library against. Everything here is deliberately written as direct
// brute force, separate from the implementation paths under test.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "diffeo/grid.hpp"

namespace oracles {

// splitmix64-based test RNG: stable across platforms and standard libraries.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next_bits() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Dense row-major n x n matrix times vector.
inline std::vector<double> matvec(std::span<const double> m, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += m[r * n + c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline double linf_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double linf(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline double l2(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return std::sqrt(acc);
}

// Untrucated Gaussian-kernel velocity field, direct double loop.
inline std::vector<double> velocity_brute(std::span<const double> queries,
                                          std::span<const double> points,
                                          std::span<const double> momenta, int dim,
                                          double sigma) {
  const std::size_t nq = queries.size() / dim;
  const std::size_t np = points.size() / dim;
  std::vector<double> out(nq * dim, 0.0);
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t k = 0; k < np; ++k) {
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double t = queries[q * dim + a] - points[k * dim + a];
        r2 += t * t;
      }
      const double e = std::exp(-r2 / (sigma * sigma));
      for (int a = 0; a < dim; ++a) out[q * dim + a] += e * momenta[k * dim + a];
    }
  return out;
}

// Untruncated kinetic energy, direct double loop over all ordered pairs.
inline double kinetic_energy_brute(std::span<const double> points,
                                   std::span<const double> momenta, int dim, double sigma) {
  const std::size_t n = points.size() / dim;
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      double r2 = 0.0, dot = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double t = points[j * dim + a] - points[k * dim + a];
        r2 += t * t;
        dot += momenta[j * dim + a] * momenta[k * dim + a];
      }
      acc += std::exp(-r2 / (sigma * sigma)) * dot;
    }
  return acc;
}

// Windowed SSIM, reimplemented independently of diffeo::ssim: same stated
// convention (uniform window of 7 capped by the smallest extent, population
// statistics, joint dynamic range), different code path (raw moments over
// explicitly enumerated window voxels).
inline double ssim_reference(const diffeo::ScalarImage& a, const diffeo::ScalarImage& b) {
  const int d = a.dim();
  int win = 7;
  for (int k : a.shape) win = std::min(win, k);
  double lo = a[0], hi = a[0];
  for (double v : a.data) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b.data) lo = std::min(lo, v), hi = std::max(hi, v);
  const double L = (hi - lo) > 0.0 ? hi - lo : 1.0;
  const double c1 = 0.0001 * L * L, c2 = 0.0009 * L * L, c3 = c2 / 2.0;

  std::vector<int> base(d, 0);
  double total = 0.0;
  std::size_t count = 0;
  while (true) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::vector<int> rel(d, 0), idx(d);
    std::size_t nwin = 0;
    while (true) {
      for (int ax = 0; ax < d; ++ax) idx[ax] = base[ax] + rel[ax];
      const double va = a.at(idx), vb = b.at(idx);
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
      ++nwin;
      int ax = d - 1;
      for (; ax >= 0; --ax) {
        if (++rel[ax] < win) break;
        rel[ax] = 0;
      }
      if (ax < 0) break;
    }
    const double n = static_cast<double>(nwin);
    const double ma = sa / n, mb = sb / n;
    const double va = std::max(0.0, saa / n - ma * ma);
    const double vb = std::max(0.0, sbb / n - mb * mb);
    const double cab = sab / n - ma * mb;
    const double lum = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double con = (2 * std::sqrt(va) * std::sqrt(vb) + c2) / (va + vb + c2);
    const double str = (cab + c3) / (std::sqrt(va) * std::sqrt(vb) + c3);
    total += lum * con * str;
    ++count;
    int ax = d - 1;
    for (; ax >= 0; --ax) {
      if (++base[ax] <= a.shape[ax] - win) break;
      base[ax] = 0;
    }
    if (ax < 0) break;
  }
  return total / static_cast<double>(count);
}

}  // namespace oracles
