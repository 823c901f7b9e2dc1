#include "diffeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace diffeo {

double relative_residual(double delta_final, double delta_initial) {
  if (delta_initial < 0.0 || delta_final < 0.0)
    throw std::invalid_argument("relative_residual: residuals must be >= 0");
  if (delta_initial == 0.0) return 0.0;  // exact-match sentinel
  return delta_final / delta_initial;
}

namespace {

struct WindowStats {
  double mean_a, mean_b, var_a, var_b, cov;
};

// Population statistics over one window; windows are small so the direct
// two-pass form is fine.
template <typename Fn>
void for_each_window(std::span<const int> shape, int win, Fn&& fn) {
  const int d = static_cast<int>(shape.size());
  std::vector<int> base(d, 0);
  while (true) {
    fn(std::span<const int>(base));
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++base[a] <= shape[a] - win) break;
      base[a] = 0;
    }
    if (a < 0) break;
  }
}

}  // namespace

double ssim(const ScalarImage& a, const ScalarImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const int d = a.dim();
  int win = 7;
  for (int k : a.shape) win = std::min(win, k);

  double lo = a[0], hi = a[0];
  for (double v : a.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : b.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  const double L = range > 0.0 ? range : 1.0;
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const double c3 = c2 / 2.0;

  std::vector<std::size_t> offsets;  // window voxel offsets relative to base
  {
    std::vector<int> rel(d, 0);
    std::vector<std::size_t> strides(d);
    std::size_t s = 1;
    for (int ax = d - 1; ax >= 0; --ax) {
      strides[ax] = s;
      s *= static_cast<std::size_t>(a.shape[ax]);
    }
    while (true) {
      std::size_t off = 0;
      for (int ax = 0; ax < d; ++ax) off += rel[ax] * strides[ax];
      offsets.push_back(off);
      int ax = d - 1;
      for (; ax >= 0; --ax) {
        if (++rel[ax] < win) break;
        rel[ax] = 0;
      }
      if (ax < 0) break;
    }
  }

  const double n = static_cast<double>(offsets.size());
  double acc = 0.0;
  std::size_t windows = 0;
  for_each_window(a.shape, win, [&](std::span<const int> base) {
    const std::size_t base_off = a.offset(base);
    double sa = 0, sb = 0;
    for (std::size_t off : offsets) {
      sa += a[base_off + off];
      sb += b[base_off + off];
    }
    const double ma = sa / n, mb = sb / n;
    double va = 0, vb = 0, cab = 0;
    for (std::size_t off : offsets) {
      const double da = a[base_off + off] - ma;
      const double db = b[base_off + off] - mb;
      va += da * da;
      vb += db * db;
      cab += da * db;
    }
    va /= n;
    vb /= n;
    cab /= n;
    const double sd_a = std::sqrt(va), sd_b = std::sqrt(vb);
    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double con = (2.0 * sd_a * sd_b + c2) / (va + vb + c2);
    const double str = (cab + c3) / (sd_a * sd_b + c3);
    acc += lum * con * str;
    ++windows;
  });
  return acc / static_cast<double>(windows);
}

namespace {

double det2(const double j[2][2]) { return j[0][0] * j[1][1] - j[0][1] * j[1][0]; }

double det3(const double j[3][3]) {
  return j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
         j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
         j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
}

template <typename Fn>
void jacobian_determinants(std::span<const double> positions, std::span<const int> grid_shape,
                           Fn&& per_node) {
  const int d = static_cast<int>(grid_shape.size());
  for (int k : grid_shape)
    if (k < 3)
      throw std::invalid_argument("sd_jacobian: need at least 3 nodes per axis");
  std::vector<std::size_t> strides(d);
  std::size_t s = 1;
  for (int a = d - 1; a >= 0; --a) {
    strides[a] = s;
    s *= static_cast<std::size_t>(grid_shape[a]);
  }
  std::vector<int> idx(d, 1);
  while (true) {
    std::size_t off = 0;
    for (int a = 0; a < d; ++a) off += idx[a] * strides[a];
    double j2[2][2], j3[3][3];
    for (int b = 0; b < d; ++b) {  // direction of differentiation
      const std::size_t plus = off + strides[b];
      const std::size_t minus = off - strides[b];
      for (int a = 0; a < d; ++a) {
        const double g = 0.5 * (positions[plus * d + a] - positions[minus * d + a]);
        if (d == 2)
          j2[a][b] = g;
        else
          j3[a][b] = g;
      }
    }
    per_node(d == 2 ? det2(j2) : det3(j3));
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++idx[a] < grid_shape[a] - 1) break;
      idx[a] = 1;
    }
    if (a < 0) break;
  }
}

}  // namespace

double sd_jacobian(std::span<const double> positions, std::span<const int> grid_shape) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  jacobian_determinants(positions, grid_shape, [&](double det) {
    sum += det;
    sum2 += det * det;
    ++n;
  });
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
  return std::sqrt(var);
}

double mean_jacobian(std::span<const double> positions, std::span<const int> grid_shape) {
  double sum = 0.0;
  std::size_t n = 0;
  jacobian_determinants(positions, grid_shape, [&](double det) {
    sum += det;
    ++n;
  });
  return sum / static_cast<double>(n);
}

double roi_residual(const ScalarImage& a, const ScalarImage& b, const RoiBox& roi) {
  if (!a.same_shape(b)) throw std::invalid_argument("roi_residual: shape mismatch");
  roi.validate(a.shape);
  const int d = a.dim();
  std::vector<int> idx(roi.lo.begin(), roi.lo.end());
  double acc = 0.0;
  while (true) {
    const double diff = a.at(idx) - b.at(idx);
    acc += diff * diff;
    int ax = d - 1;
    for (; ax >= 0; --ax) {
      if (++idx[ax] < roi.hi[ax]) break;
      idx[ax] = roi.lo[ax];
    }
    if (ax < 0) break;
  }
  return acc;
}

std::string metric_report_json(const MetricReport& r) {
  nlohmann::json j;
  j["total_residual"] = r.total_residual;
  j["relative_residual"] = r.relative_residual;
  j["roi_residual"] = r.roi_residual;
  j["ssim"] = r.ssim;
  j["sd_jacobian"] = r.sd_jacobian;
  j["runtime_ms"] = r.runtime_ms;
  j["exact_match"] = r.exact_match;
  return j.dump(2);
}

std::string sweep_csv_header() {
  return "sigma_g,k_g,s0,delta_j,delta_j_roi,sd_j,runtime_ms";
}

std::string sweep_csv_row(const SweepRow& row) {
  std::ostringstream os;
  os.precision(12);
  os << row.sigma_g << ',' << row.k_g << ',' << row.s0 << ',' << row.delta_j << ','
     << row.delta_j_roi << ',' << row.sd_j << ',' << row.runtime_ms;
  return os.str();
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<SweepRow> rows;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == sweep_csv_header()) continue;
    }
    SweepRow r;
    char comma;
    std::istringstream ls(line);
    if (!(ls >> r.sigma_g >> comma >> r.k_g >> comma >> r.s0 >> comma >> r.delta_j >> comma >>
          r.delta_j_roi >> comma >> r.sd_j >> comma >> r.runtime_ms))
      throw std::invalid_argument("parse_sweep_csv: malformed row: " + line);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace diffeo
