#include "diffeo/geodesic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "diffeo/parallel.hpp"

namespace diffeo {

double KernelConfig::cutoff_radius2() const {
  if (cutoff_factor <= 0.0) return std::numeric_limits<double>::infinity();
  const double r = cutoff_factor * sigma_g;
  return r * r;
}

ControlPointGrid make_control_grid(std::span<const int> image_shape, double sigma_g) {
  if (sigma_g <= 0.0) throw std::invalid_argument("make_control_grid: sigma_g must be > 0");
  const int d = static_cast<int>(image_shape.size());
  if (d < 1 || d > 3) throw std::invalid_argument("make_control_grid: dimension must be 1..3");
  ControlPointGrid g;
  g.dim = d;
  g.spacing = sigma_g;
  g.shape.resize(d);
  g.origin.resize(d);
  for (int a = 0; a < d; ++a) {
    const double extent = static_cast<double>(image_shape[a] - 1);
    const int n = static_cast<int>(std::floor(extent / sigma_g)) + 1;
    g.shape[a] = n;
    g.origin[a] = 0.5 * (extent - (n - 1) * sigma_g);
  }
  const int count = g.count();
  g.points.resize(static_cast<std::size_t>(count) * d);
  std::vector<int> idx(d, 0);
  for (int p = 0; p < count; ++p) {
    for (int a = 0; a < d; ++a) g.points[static_cast<std::size_t>(p) * d + a] = g.origin[a] + idx[a] * sigma_g;
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < g.shape[a]) break;
      idx[a] = 0;
    }
  }
  return g;
}

MomentumField MomentumField::zeros(ControlPointGrid grid) {
  MomentumField m;
  m.alphas.assign(static_cast<std::size_t>(grid.count()) * grid.dim, 0.0);
  m.grid = std::move(grid);
  return m;
}

namespace {

// Uniform spatial hash over the truncation radius: a query only has to test
// the points inside its 3^D neighboring cells. Exact with respect to the
// truncated kernel (pure pruning). Optionally skips points whose momentum is
// exactly zero, which forward velocity evaluations may ignore.
template <int D>
struct PointBins {
  bool enabled = false;
  double inv_cell = 0.0;
  double origin[D] = {};
  int dims[D] = {};
  std::vector<std::vector<int>> cells;

  void build(std::span<const double> points, double cutoff_radius,
             std::span<const double> skip_zero_momenta = {}) {
    const std::size_t np = points.size() / D;
    enabled = std::isfinite(cutoff_radius) && cutoff_radius > 0.0 && np >= 32;
    if (!enabled) return;
    double lo[D], hi[D];
    for (int a = 0; a < D; ++a) {
      lo[a] = points[a];
      hi[a] = points[a];
    }
    for (std::size_t k = 1; k < np; ++k)
      for (int a = 0; a < D; ++a) {
        lo[a] = std::min(lo[a], points[k * D + a]);
        hi[a] = std::max(hi[a], points[k * D + a]);
      }
    inv_cell = 1.0 / cutoff_radius;
    std::size_t n_cells = 1;
    for (int a = 0; a < D; ++a) {
      origin[a] = lo[a];
      dims[a] = static_cast<int>((hi[a] - lo[a]) * inv_cell) + 1;
      n_cells *= static_cast<std::size_t>(dims[a]);
    }
    if (n_cells > 16u * np + 64u) {  // degenerate spread, not worth the memory
      enabled = false;
      return;
    }
    cells.assign(n_cells, {});
    for (std::size_t k = 0; k < np; ++k) {
      if (!skip_zero_momenta.empty()) {
        bool all_zero = true;
        for (int a = 0; a < D; ++a) all_zero &= skip_zero_momenta[k * D + a] == 0.0;
        if (all_zero) continue;
      }
      std::size_t cell = 0;
      for (int a = 0; a < D; ++a) {
        int c = static_cast<int>((points[k * D + a] - origin[a]) * inv_cell);
        c = std::clamp(c, 0, dims[a] - 1);
        cell = cell * dims[a] + static_cast<std::size_t>(c);
      }
      cells[cell].push_back(static_cast<int>(k));
    }
  }

  template <typename Fn>
  void for_candidates(const double* x, Fn&& fn) const {
    int lo[D], hi[D];
    for (int a = 0; a < D; ++a) {
      const int c = static_cast<int>(std::floor((x[a] - origin[a]) * inv_cell));
      lo[a] = std::max(0, c - 1);
      hi[a] = std::min(dims[a] - 1, c + 1);
      if (lo[a] > hi[a]) return;
    }
    int idx[D];
    for (int a = 0; a < D; ++a) idx[a] = lo[a];
    while (true) {
      std::size_t cell = 0;
      for (int a = 0; a < D; ++a) cell = cell * dims[a] + static_cast<std::size_t>(idx[a]);
      for (int k : cells[cell]) fn(k);
      int a = D - 1;
      for (; a >= 0; --a) {
        if (++idx[a] <= hi[a]) break;
        idx[a] = lo[a];
      }
      if (a < 0) break;
    }
  }
};

template <int D, typename PerPoint>
inline void scan_points(const PointBins<D>& bins, std::span<const double> points,
                        const double* x, PerPoint&& per_point) {
  if (bins.enabled) {
    bins.for_candidates(x, per_point);
  } else {
    const std::size_t np = points.size() / D;
    for (std::size_t k = 0; k < np; ++k) per_point(static_cast<int>(k));
  }
}

template <int D>
void velocity_at_impl(std::span<const double> queries, std::span<const double> points,
                      std::span<const double> momenta, const KernelConfig& kernel,
                      std::span<double> out) {
  const std::size_t nq = queries.size() / D;
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  PointBins<D> bins;
  if (nq >= 16) bins.build(points, kernel.cutoff_factor * kernel.sigma_g, momenta);
  parallel_for(nq, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q) {
      const double* x = &queries[q * D];
      double acc[D] = {};
      scan_points<D>(bins, points, x, [&](int k) {
        const double* c = &points[static_cast<std::size_t>(k) * D];
        double r2 = 0.0;
        for (int a = 0; a < D; ++a) {
          const double t = x[a] - c[a];
          r2 += t * t;
        }
        if (r2 > cut2) return;
        const double e = std::exp(-r2 * inv_s2);
        const double* al = &momenta[static_cast<std::size_t>(k) * D];
        for (int a = 0; a < D; ++a) acc[a] += e * al[a];
      });
      for (int a = 0; a < D; ++a) out[q * D + a] = acc[a];
    }
  });
}

template <int D>
void velocity_at_vjp_impl(std::span<const double> queries, std::span<const double> points,
                          std::span<const double> momenta, const KernelConfig& kernel,
                          std::span<const double> out_bar, std::span<double> queries_bar,
                          std::span<double> points_bar, std::span<double> momenta_bar) {
  const std::size_t nq = queries.size() / D;
  const std::size_t np = points.size() / D;
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  // Query cotangents are per-query and parallelize cleanly; point/momentum
  // cotangents are shared, so each chunk scatters into a local buffer and
  // buffers are reduced in chunk order for determinism.
  const bool want_q = !queries_bar.empty();
  const bool want_c = !points_bar.empty();
  const bool want_a = !momenta_bar.empty();
  const int workers = worker_count();
  std::vector<std::vector<double>> local_c, local_a;

  PointBins<D> bins;
  if (nq >= 16) bins.build(points, kernel.cutoff_factor * kernel.sigma_g);

  auto body = [&](std::size_t lo, std::size_t hi, std::span<double> cbar,
                  std::span<double> abar) {
    for (std::size_t q = lo; q < hi; ++q) {
      const double* x = &queries[q * D];
      const double* ob = &out_bar[q * D];
      double xbar[D] = {};
      scan_points<D>(bins, points, x, [&](int ki) {
        const std::size_t k = static_cast<std::size_t>(ki);
        const double* c = &points[k * D];
        double diff[D];
        double r2 = 0.0;
        for (int a = 0; a < D; ++a) {
          diff[a] = x[a] - c[a];
          r2 += diff[a] * diff[a];
        }
        if (r2 > cut2) return;
        const double e = std::exp(-r2 * inv_s2);
        const double* al = &momenta[k * D];
        double ob_dot_a = 0.0;
        for (int a = 0; a < D; ++a) ob_dot_a += ob[a] * al[a];
        const double w = 2.0 * inv_s2 * e * ob_dot_a;
        for (int a = 0; a < D; ++a) {
          if (want_q) xbar[a] -= w * diff[a];
          if (want_c) cbar[k * D + a] += w * diff[a];
          if (want_a) abar[k * D + a] += e * ob[a];
        }
      });
      if (want_q)
        for (int a = 0; a < D; ++a) queries_bar[q * D + a] += xbar[a];
    }
  };

  if (!want_c && !want_a) {
    parallel_for(nq, [&](std::size_t lo, std::size_t hi) { body(lo, hi, {}, {}); });
    return;
  }
  if (workers == 1 || nq < 256) {
    body(0, nq, points_bar, momenta_bar);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, nq);
  local_c.assign(chunks, std::vector<double>(want_c ? np * D : 0, 0.0));
  local_a.assign(chunks, std::vector<double>(want_a ? np * D : 0, 0.0));
  const std::size_t step = (nq + chunks - 1) / chunks;
  parallel_for(nq, [&](std::size_t lo, std::size_t hi) {
    const std::size_t c = lo / step;
    body(lo, hi, local_c[c], local_a[c]);
  });
  for (std::size_t c = 0; c < chunks; ++c) {
    if (want_c)
      for (std::size_t i = 0; i < np * D; ++i) points_bar[i] += local_c[c][i];
    if (want_a)
      for (std::size_t i = 0; i < np * D; ++i) momenta_bar[i] += local_a[c][i];
  }
}

template <int D>
void hamiltonian_rhs_impl(std::span<const double> points, std::span<const double> momenta,
                          const KernelConfig& kernel, std::span<double> dc,
                          std::span<double> da) {
  const std::size_t n = points.size() / D;
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  // Diagonal: K(c_k, c_k) = 1 moves each point by its own momentum.
  for (std::size_t i = 0; i < n * D; ++i) {
    dc[i] = momenta[i];
    da[i] = 0.0;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double* ck = &points[k * D];
    const double* ak = &momenta[k * D];
    for (std::size_t l = k + 1; l < n; ++l) {
      const double* cl = &points[l * D];
      double diff[D];
      double r2 = 0.0;
      for (int a = 0; a < D; ++a) {
        diff[a] = ck[a] - cl[a];
        r2 += diff[a] * diff[a];
      }
      if (r2 > cut2) continue;
      const double e = std::exp(-r2 * inv_s2);
      const double* al = &momenta[l * D];
      double dot_aa = 0.0;
      for (int a = 0; a < D; ++a) dot_aa += ak[a] * al[a];
      const double w = 2.0 * inv_s2 * dot_aa * e;
      for (int a = 0; a < D; ++a) {
        dc[k * D + a] += e * al[a];
        dc[l * D + a] += e * ak[a];
        da[k * D + a] += w * diff[a];
        da[l * D + a] -= w * diff[a];
      }
    }
  }
}

template <int D>
void hamiltonian_rhs_vjp_impl(std::span<const double> points, std::span<const double> momenta,
                              const KernelConfig& kernel, std::span<const double> dc_bar,
                              std::span<const double> da_bar, std::span<double> points_bar,
                              std::span<double> momenta_bar) {
  const std::size_t n = points.size() / D;
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double s2 = 2.0 * inv_s2;
  const double cut2 = kernel.cutoff_radius2();
  // Diagonal of dc[k] = a_k.
  for (std::size_t i = 0; i < n * D; ++i) momenta_bar[i] += dc_bar[i];
  for (std::size_t k = 0; k < n; ++k) {
    const double* ck = &points[k * D];
    const double* ak = &momenta[k * D];
    const double* A = &dc_bar[k * D];
    const double* P = &da_bar[k * D];
    for (std::size_t l = k + 1; l < n; ++l) {
      const double* cl = &points[l * D];
      double diff[D];
      double r2 = 0.0;
      for (int a = 0; a < D; ++a) {
        diff[a] = ck[a] - cl[a];
        r2 += diff[a] * diff[a];
      }
      if (r2 > cut2) continue;
      const double e = std::exp(-r2 * inv_s2);
      const double* al = &momenta[l * D];
      const double* B = &dc_bar[l * D];
      const double* Q = &da_bar[l * D];
      double dot_aa = 0.0, a_dot_al = 0.0, b_dot_ak = 0.0, pd = 0.0, qd = 0.0;
      for (int a = 0; a < D; ++a) {
        dot_aa += ak[a] * al[a];
        a_dot_al += A[a] * al[a];
        b_dot_ak += B[a] * ak[a];
        pd += P[a] * diff[a];
        qd += Q[a] * diff[a];
      }
      const double w = s2 * dot_aa * e;          // the da pair weight
      const double pq = pd - qd;
      // d e / d c_k = g = -s2 * e * diff; contributions listed per source term.
      const double g_coeff = -s2 * e * (a_dot_al + b_dot_ak)  // through dc terms
                             - s2 * s2 * dot_aa * e * pq;     // through the e inside w
      for (int a = 0; a < D; ++a) {
        const double cbk = g_coeff * diff[a] + w * (P[a] - Q[a]);
        points_bar[k * D + a] += cbk;
        points_bar[l * D + a] -= cbk;
        momenta_bar[k * D + a] += e * B[a] + s2 * e * pq * al[a];
        momenta_bar[l * D + a] += e * A[a] + s2 * e * pq * ak[a];
      }
    }
  }
}

template <typename Fn2, typename Fn3>
auto dispatch_dim(int dim, Fn2&& f2, Fn3&& f3) {
  if (dim == 2) return f2();
  if (dim == 3) return f3();
  throw std::invalid_argument("geodesic: only dimensions 2 and 3 are supported");
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void velocity_at(std::span<const double> queries, std::span<const double> points,
                 std::span<const double> momenta, int dim, const KernelConfig& kernel,
                 std::span<double> out) {
  if (points.size() != momenta.size())
    throw std::invalid_argument("velocity_at: point/momentum count mismatch");
  dispatch_dim(
      dim, [&] { velocity_at_impl<2>(queries, points, momenta, kernel, out); },
      [&] { velocity_at_impl<3>(queries, points, momenta, kernel, out); });
}

void velocity_at_vjp(std::span<const double> queries, std::span<const double> points,
                     std::span<const double> momenta, int dim, const KernelConfig& kernel,
                     std::span<const double> out_bar, std::span<double> queries_bar,
                     std::span<double> points_bar, std::span<double> momenta_bar) {
  dispatch_dim(
      dim,
      [&] {
        velocity_at_vjp_impl<2>(queries, points, momenta, kernel, out_bar, queries_bar,
                                points_bar, momenta_bar);
      },
      [&] {
        velocity_at_vjp_impl<3>(queries, points, momenta, kernel, out_bar, queries_bar,
                                points_bar, momenta_bar);
      });
}

void hamiltonian_rhs(std::span<const double> points, std::span<const double> momenta, int dim,
                     const KernelConfig& kernel, std::span<double> dc, std::span<double> da) {
  dispatch_dim(
      dim, [&] { hamiltonian_rhs_impl<2>(points, momenta, kernel, dc, da); },
      [&] { hamiltonian_rhs_impl<3>(points, momenta, kernel, dc, da); });
}

void hamiltonian_rhs_vjp(std::span<const double> points, std::span<const double> momenta,
                         int dim, const KernelConfig& kernel, std::span<const double> dc_bar,
                         std::span<const double> da_bar, std::span<double> points_bar,
                         std::span<double> momenta_bar) {
  dispatch_dim(
      dim,
      [&] {
        hamiltonian_rhs_vjp_impl<2>(points, momenta, kernel, dc_bar, da_bar, points_bar,
                                    momenta_bar);
      },
      [&] {
        hamiltonian_rhs_vjp_impl<3>(points, momenta, kernel, dc_bar, da_bar, points_bar,
                                    momenta_bar);
      });
}

FlowTrajectory shoot(const MomentumField& m, const KernelConfig& kernel, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("shoot: need at least one step");
  const int d = m.grid.dim;
  const std::size_t nd = m.alphas.size();
  FlowTrajectory traj;
  traj.n_steps = n_steps;
  traj.dt = 1.0 / n_steps;
  traj.dim = d;
  traj.count = m.grid.count();
  traj.kernel = kernel;
  traj.points.assign(n_steps + 1, std::vector<double>(nd));
  traj.momenta.assign(n_steps + 1, std::vector<double>(nd));
  traj.mid_points.assign(n_steps, std::vector<double>(nd));
  traj.mid_momenta.assign(n_steps, std::vector<double>(nd));
  traj.points[0] = m.grid.points;
  traj.momenta[0] = m.alphas;

  std::vector<double> dc(nd), da(nd);
  for (int j = 0; j < n_steps; ++j) {
    hamiltonian_rhs(traj.points[j], traj.momenta[j], d, kernel, dc, da);
    for (std::size_t i = 0; i < nd; ++i) {
      traj.mid_points[j][i] = traj.points[j][i] + 0.5 * traj.dt * dc[i];
      traj.mid_momenta[j][i] = traj.momenta[j][i] + 0.5 * traj.dt * da[i];
    }
    hamiltonian_rhs(traj.mid_points[j], traj.mid_momenta[j], d, kernel, dc, da);
    for (std::size_t i = 0; i < nd; ++i) {
      traj.points[j + 1][i] = traj.points[j][i] + traj.dt * dc[i];
      traj.momenta[j + 1][i] = traj.momenta[j][i] + traj.dt * da[i];
    }
    if (!all_finite(traj.points[j + 1]) || !all_finite(traj.momenta[j + 1]))
      throw std::runtime_error("shoot: non-finite state at step " + std::to_string(j + 1) +
                               " (increase steps or reduce momenta)");
  }

  // Geodesics conserve the kinetic energy; measurable drift means the step
  // count does not resolve these dynamics and the trajectory is unusable.
  const double e0 = trajectory_energy(traj, kernel, 0);
  if (e0 > 1e-12) {
    const double e_mid = trajectory_energy(traj, kernel, n_steps / 2);
    const double e_end = trajectory_energy(traj, kernel, n_steps);
    const double drift =
        std::max(std::abs(e_mid - e0), std::abs(e_end - e0)) / e0;
    if (drift > 0.02)
      throw std::runtime_error("shoot: kinetic energy drifts by " + std::to_string(drift) +
                               " (step count too small for these momenta)");
  }
  return traj;
}

std::vector<double> identity_positions(std::span<const int> grid_shape) {
  const int d = static_cast<int>(grid_shape.size());
  const std::size_t n = element_count(grid_shape);
  std::vector<double> pos(n * d);
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int a = 0; a < d; ++a) pos[p * d + a] = static_cast<double>(idx[a]);
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < grid_shape[a]) break;
      idx[a] = 0;
    }
  }
  return pos;
}

namespace {

template <int D>
void advect_nodes(std::span<const double> cur, std::span<double> half_out,
                  std::span<double> next, double step_dt, std::span<const double> c_state,
                  std::span<const double> a_state, std::span<const double> c_mid,
                  std::span<const double> a_mid, const KernelConfig& kernel) {
  const std::size_t n = cur.size() / D;
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  const double radius = kernel.cutoff_factor * kernel.sigma_g;
  PointBins<D> state_bins, mid_bins;
  state_bins.build(c_state, radius, a_state);
  mid_bins.build(c_mid, radius, a_mid);
  auto vel_one = [&](const double* x, const PointBins<D>& bins, std::span<const double> cs,
                     std::span<const double> as, double* out) {
    for (int a = 0; a < D; ++a) out[a] = 0.0;
    scan_points<D>(bins, cs, x, [&](int ki) {
      const std::size_t k = static_cast<std::size_t>(ki);
      const double* c = &cs[k * D];
      double r2 = 0.0;
      for (int a = 0; a < D; ++a) {
        const double t = x[a] - c[a];
        r2 += t * t;
      }
      if (r2 > cut2) return;
      const double e = std::exp(-r2 * inv_s2);
      for (int a = 0; a < D; ++a) out[a] += e * as[k * D + a];
    });
  };
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const double* x = &cur[p * D];
      double v1[D], half[D], v2[D];
      vel_one(x, state_bins, c_state, a_state, v1);
      for (int a = 0; a < D; ++a) half[a] = x[a] + 0.5 * step_dt * v1[a];
      vel_one(half, mid_bins, c_mid, a_mid, v2);
      for (int a = 0; a < D; ++a) {
        half_out[p * D + a] = half[a];
        next[p * D + a] = x[a] + step_dt * v2[a];
      }
    }
  });
}

}  // namespace

GridFlow integrate_flow(const FlowTrajectory& traj, std::span<const int> grid_shape,
                        FlowDirection direction) {
  const int d = traj.dim;
  if (static_cast<int>(grid_shape.size()) != d)
    throw std::invalid_argument("integrate_flow: grid dimension mismatch");
  GridFlow flow;
  flow.grid_shape.assign(grid_shape.begin(), grid_shape.end());
  flow.dim = d;
  flow.direction = direction;
  flow.steps.assign(traj.n_steps + 1, {});
  flow.half_steps.assign(traj.n_steps, {});
  flow.steps[0] = identity_positions(grid_shape);
  const bool fwd = direction == FlowDirection::kForward;

  for (int j = 0; j < traj.n_steps; ++j) {
    // Forward walks the trajectory states 0..T; inverse walks them from T
    // down to 0 against the velocity. Half steps use the stored midpoints.
    const int state = fwd ? j : traj.n_steps - j;
    const int mid = fwd ? j : traj.n_steps - 1 - j;
    const double step_dt = fwd ? traj.dt : -traj.dt;
    flow.steps[j + 1].resize(flow.steps[j].size());
    flow.half_steps[j].resize(flow.steps[j].size());
    if (d == 2)
      advect_nodes<2>(flow.steps[j], flow.half_steps[j], flow.steps[j + 1], step_dt,
                      traj.points[state], traj.momenta[state], traj.mid_points[mid],
                      traj.mid_momenta[mid], traj.kernel);
    else
      advect_nodes<3>(flow.steps[j], flow.half_steps[j], flow.steps[j + 1], step_dt,
                      traj.points[state], traj.momenta[state], traj.mid_points[mid],
                      traj.mid_momenta[mid], traj.kernel);
    if (!all_finite(flow.steps[j + 1]))
      throw std::runtime_error("integrate_flow: non-finite node positions at step " +
                               std::to_string(j + 1));
  }
  return flow;
}

ScalarImage warp_image(const ScalarImage& img, std::span<const double> inverse_positions,
                       std::span<const int> grid_shape) {
  const int d = static_cast<int>(grid_shape.size());
  ScalarImage out(std::vector<int>(grid_shape.begin(), grid_shape.end()));
  const std::size_t n = out.size();
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p)
      out[p] = interpolate(img, inverse_positions.subspan(p * d, d));
  });
  return out;
}

double kinetic_energy(const MomentumField& m, const KernelConfig& kernel) {
  const int d = m.grid.dim;
  const std::size_t n = m.grid.count();
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double* ak = &m.alphas[k * d];
    double self = 0.0;
    for (int a = 0; a < d; ++a) self += ak[a] * ak[a];
    acc += self;
    const double* ck = &m.grid.points[k * d];
    for (std::size_t l = k + 1; l < n; ++l) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double t = ck[a] - m.grid.points[l * d + a];
        r2 += t * t;
      }
      if (r2 > cut2) continue;
      double dot = 0.0;
      for (int a = 0; a < d; ++a) dot += ak[a] * m.alphas[l * d + a];
      acc += 2.0 * std::exp(-r2 * inv_s2) * dot;
    }
  }
  return acc;
}

std::vector<double> kinetic_energy_gradient(const MomentumField& m, const KernelConfig& kernel) {
  const int d = m.grid.dim;
  const std::size_t n = m.grid.count();
  const double inv_s2 = 1.0 / (kernel.sigma_g * kernel.sigma_g);
  const double cut2 = kernel.cutoff_radius2();
  std::vector<double> grad(m.alphas.size(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* ck = &m.grid.points[k * d];
    for (int a = 0; a < d; ++a) grad[k * d + a] += 2.0 * m.alphas[k * d + a];
    for (std::size_t l = k + 1; l < n; ++l) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double t = ck[a] - m.grid.points[l * d + a];
        r2 += t * t;
      }
      if (r2 > cut2) continue;
      const double e2 = 2.0 * std::exp(-r2 * inv_s2);
      for (int a = 0; a < d; ++a) {
        grad[k * d + a] += e2 * m.alphas[l * d + a];
        grad[l * d + a] += e2 * m.alphas[k * d + a];
      }
    }
  }
  return grad;
}

double trajectory_energy(const FlowTrajectory& traj, const KernelConfig& kernel, int t_index) {
  MomentumField m;
  m.grid.dim = traj.dim;
  m.grid.shape = {traj.count};  // only count/dim matter here
  m.grid.points = traj.points[t_index];
  m.alphas = traj.momenta[t_index];
  return kinetic_energy(m, kernel);
}

}  // namespace diffeo
