#include "diffeo/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace diffeo {

namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

std::vector<WaveletPyramid> fwt_field(std::span<const double> field,
                                      const ControlPointGrid& grid, double rho) {
  const int d = grid.dim;
  const std::size_t n = grid.count();
  std::vector<double> comp(n);
  std::vector<WaveletPyramid> out;
  out.reserve(d);
  for (int a = 0; a < d; ++a) {
    for (std::size_t p = 0; p < n; ++p) comp[p] = field[p * d + a];
    out.push_back(fwt(comp, grid.shape, rho));
  }
  return out;
}

std::vector<double> iwt_field(std::span<const WaveletPyramid> pyramids,
                              const ControlPointGrid& grid) {
  const int d = grid.dim;
  const std::size_t n = grid.count();
  std::vector<double> field(n * d);
  for (int a = 0; a < d; ++a) {
    const std::vector<double> comp = iwt(pyramids[a]);
    for (std::size_t p = 0; p < n; ++p) field[p * d + a] = comp[p];
  }
  return field;
}

int refine_scale(double delta_prev, double delta_curr, int s_current, int iters_at_scale,
                 const OptimizerConfig& config) {
  if (s_current < 1) throw std::invalid_argument("refine_scale: scale must be >= 1");
  if (s_current == 1) return 1;
  if (iters_at_scale < config.min_iters_per_scale) return s_current;
  const double rel_decrease =
      delta_prev > 0.0 ? (delta_prev - delta_curr) / delta_prev : 0.0;
  return rel_decrease < 0.01 ? s_current - 1 : s_current;
}

OptimizerState init_state(std::span<const ScalarImage> targets,
                          const ScalarImage* fixed_template, const OptimizerConfig& config,
                          RunMode mode) {
  if (targets.empty()) throw std::invalid_argument("optimizer: no target images");
  if (mode == RunMode::kRegister) {
    if (targets.size() != 1)
      throw std::invalid_argument("register mode expects exactly one target");
    if (fixed_template == nullptr)
      throw std::invalid_argument("register mode requires a fixed template (the source)");
  } else if (targets.size() < 2 && fixed_template == nullptr) {
    throw std::invalid_argument("atlas mode requires at least two images");
  }
  for (const ScalarImage& t : targets)
    if (!t.same_shape(targets[0]))
      throw std::invalid_argument("optimizer: target shapes are inconsistent");

  OptimizerState st;
  st.targets.assign(targets.begin(), targets.end());
  st.tmpl = fixed_template ? *fixed_template : mean_image(targets);
  if (!st.tmpl.same_shape(targets[0]))
    throw std::invalid_argument("optimizer: template/target shape mismatch");
  st.freeze_template = mode == RunMode::kRegister || config.freeze_template;

  const ControlPointGrid grid = make_control_grid(st.tmpl.shape, config.sigma_g);
  st.s_max = std::max(1, max_scale(grid.shape));
  int s0 = config.s0;
  if (s0 == 0) s0 = std::max(1, st.s_max - 1);
  if (s0 < 1 || s0 > st.s_max)
    throw std::invalid_argument("optimizer: S0 out of range [1, S_max]");
  st.scale = s0;
  st.coeff_scales = coefficient_scales(grid.shape);

  const std::size_t n_subjects = targets.size();
  st.momenta.reserve(n_subjects);
  st.beta.resize(n_subjects);
  for (std::size_t i = 0; i < n_subjects; ++i) {
    MomentumField m = MomentumField::zeros(grid);
    if (!config.bypass_wavelets) st.beta[i] = fwt_field(m.alphas, grid);
    st.momenta.push_back(std::move(m));
  }

  double total_ssd = 0.0;
  for (std::size_t i = 0; i < n_subjects; ++i) {
    const SubjectEval ev =
        evaluate_subject(st.tmpl, st.momenta[i], st.targets[i], config.kernel(), config.t_steps);
    total_ssd += ev.ssd;
  }
  st.delta0 = total_ssd / static_cast<double>(n_subjects);
  st.delta = st.delta0;
  st.prev_delta = st.delta0;
  st.energy = total_ssd / (config.sigma_eps * config.sigma_eps);  // zero momenta: no reg
  if (config.record_history) st.momenta_history.push_back(st.momenta);
  return st;
}

namespace {

// The optimizer works on one flat parameter vector: the (masked) wavelet
// coefficients of every subject's momenta, or the momenta themselves when
// bypassing, followed by the template intensities when those move.
struct FlatLayout {
  std::size_t per_subject = 0;
  std::size_t n_subjects = 0;
  bool with_template = false;
  std::size_t template_size = 0;

  std::size_t total() const {
    return per_subject * n_subjects + (with_template ? template_size : 0);
  }
};

FlatLayout make_layout(const OptimizerState& st) {
  FlatLayout lay;
  lay.n_subjects = st.targets.size();
  lay.per_subject = st.momenta[0].alphas.size();
  lay.with_template = !st.freeze_template;
  lay.template_size = st.tmpl.size();
  return lay;
}

std::vector<double> flatten_params(const OptimizerState& st, const FlatLayout& lay,
                                   const OptimizerConfig& config) {
  std::vector<double> x;
  x.reserve(lay.total());
  for (std::size_t i = 0; i < lay.n_subjects; ++i) {
    if (config.bypass_wavelets) {
      x.insert(x.end(), st.momenta[i].alphas.begin(), st.momenta[i].alphas.end());
    } else {
      for (const WaveletPyramid& p : st.beta[i])
        x.insert(x.end(), p.coeffs.begin(), p.coeffs.end());
    }
  }
  if (lay.with_template) x.insert(x.end(), st.tmpl.data.begin(), st.tmpl.data.end());
  return x;
}

// Momentum gradients are taken in the velocity-field (RKHS) metric: the
// Euclidean gradient convolved with the kernel at the control points. K is
// positive definite, so descent directions stay descent directions, and
// voxel-localized data pulls become coherent kernel-width pushes instead of
// per-point spikes whose trajectories have explosive sensitivities.
std::vector<double> rkhs_gradient(std::span<const double> grad_alpha,
                                  const ControlPointGrid& grid, const KernelConfig& kernel) {
  std::vector<double> out(grad_alpha.size());
  velocity_at(grid.points, grid.points, grad_alpha, grid.dim, kernel, out);
  return out;
}

// Masked gradient in the same flat layout: the wavelet transform of the
// (metric) momentum gradient with detail coefficients below the current
// scale silenced, then the template gradient.
std::vector<double> flatten_gradient(const OptimizerState& st, const GradientBundle& grad,
                                     const FlatLayout& lay, const OptimizerConfig& config) {
  std::vector<double> g;
  g.reserve(lay.total());
  for (std::size_t i = 0; i < lay.n_subjects; ++i) {
    const std::vector<double> smoothed =
        rkhs_gradient(grad.grad_alpha[i], st.momenta[i].grid, config.kernel());
    if (config.bypass_wavelets) {
      g.insert(g.end(), smoothed.begin(), smoothed.end());
    } else {
      std::vector<WaveletPyramid> pyr = fwt_field(smoothed, st.momenta[i].grid);
      for (WaveletPyramid& p : pyr) {
        for (std::size_t q = 0; q < p.coeffs.size(); ++q)
          if (st.coeff_scales[q] < st.scale) p.coeffs[q] = 0.0;  // finer-scale silencing
        g.insert(g.end(), p.coeffs.begin(), p.coeffs.end());
      }
    }
  }
  if (lay.with_template)
    g.insert(g.end(), grad.grad_template.data.begin(), grad.grad_template.data.end());
  return g;
}

struct TrialPoint {
  std::vector<std::vector<WaveletPyramid>> beta;
  std::vector<MomentumField> momenta;
  ScalarImage tmpl;
  double energy = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  double mean_ssd = 0.0;
};

TrialPoint evaluate_at(const OptimizerState& st, const FlatLayout& lay,
                       std::span<const double> x, const OptimizerConfig& config) {
  TrialPoint tr;
  tr.momenta = st.momenta;
  if (!config.bypass_wavelets) tr.beta = st.beta;
  std::size_t off = 0;
  for (std::size_t i = 0; i < lay.n_subjects; ++i) {
    if (config.bypass_wavelets) {
      std::copy(x.begin() + off, x.begin() + off + lay.per_subject,
                tr.momenta[i].alphas.begin());
      off += lay.per_subject;
    } else {
      for (WaveletPyramid& p : tr.beta[i]) {
        std::copy(x.begin() + off, x.begin() + off + p.coeffs.size(), p.coeffs.begin());
        off += p.coeffs.size();
      }
      tr.momenta[i].alphas = iwt_field(tr.beta[i], tr.momenta[i].grid);
    }
  }
  tr.tmpl = st.tmpl;
  if (lay.with_template) std::copy(x.begin() + off, x.end(), tr.tmpl.data.begin());

  const double inv_se2 = 1.0 / (config.sigma_eps * config.sigma_eps);
  double total_ssd = 0.0, total_reg = 0.0;
  try {
    for (std::size_t i = 0; i < lay.n_subjects; ++i) {
      const SubjectEval ev = evaluate_subject(tr.tmpl, tr.momenta[i], st.targets[i],
                                              config.kernel(), config.t_steps);
      total_ssd += ev.ssd;
      total_reg += ev.reg;
    }
  } catch (const std::runtime_error&) {
    // Exploding integration at an oversized trial step: reject and backtrack.
    tr.energy = std::numeric_limits<double>::infinity();
    return tr;
  }
  tr.data_term = total_ssd * inv_se2;
  tr.reg_term = total_reg;
  tr.energy = tr.data_term + tr.reg_term;
  tr.mean_ssd = total_ssd / static_cast<double>(lay.n_subjects);
  return tr;
}

// Two-loop recursion; returns -H g (-g when the memory is empty).
std::vector<double> lbfgs_direction(const std::vector<LbfgsPair>& memory,
                                    std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  const int m = static_cast<int>(memory.size());
  std::vector<double> alpha(m, 0.0);
  for (int i = m - 1; i >= 0; --i) {
    alpha[i] = memory[i].rho * dot(memory[i].s, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * memory[i].y[k];
  }
  if (m > 0) {
    const LbfgsPair& last = memory.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (int i = 0; i < m; ++i) {
    const double beta = memory[i].rho * dot(memory[i].y, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] += (alpha[i] - beta) * memory[i].s[k];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

StepOutcome multiscale_step(OptimizerState& state, const OptimizerConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const CostConfig cc{config.sigma_eps};
  const GradientBundle grad = gradient(state.tmpl, state.momenta, state.targets, cc,
                                       config.kernel(), config.t_steps);
  state.energy = grad.energy;

  const FlatLayout lay = make_layout(state);
  std::vector<double> g = flatten_gradient(state, grad, lay, config);

  // Complete the curvature pair opened by the previous accepted step.
  if (!state.pending_s.empty() && state.pending_s.size() == g.size()) {
    LbfgsPair pair;
    pair.s = std::move(state.pending_s);
    pair.y.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) pair.y[k] = g[k] - state.prev_gradient[k];
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-12 * std::sqrt(norm2(pair.s) * norm2(pair.y))) {
      pair.rho = 1.0 / sy;
      state.lbfgs.push_back(std::move(pair));
      if (state.lbfgs.size() > kLbfgsMemory) state.lbfgs.erase(state.lbfgs.begin());
    }
  }
  state.pending_s.clear();

  StepOutcome outcome;
  const double prev_energy = state.energy;
  const double g_norm2 = norm2(g);
  double new_delta = state.delta;
  double data_term = grad.data_term;
  double reg_term = grad.reg_term;
  double accepted_step = 0.0;

  if (g_norm2 > 0.0) {
    std::vector<double> d;
    double h = 0.0;
    if (config.use_lbfgs) {
      if (state.trust_radius <= 0.0) state.trust_radius = 100.0 * config.h0;
      d = lbfgs_direction(state.lbfgs, g);
      const double descent = dot(d, g);
      const double d_norm2 = norm2(d);
      // Nonsmooth spots poison curvature pairs; fall back to steepest
      // descent whenever the quasi-Newton direction loses descent.
      if (!(descent < -1e-12 * std::sqrt(d_norm2 * g_norm2))) {
        state.lbfgs.clear();
        d.assign(g.begin(), g.end());
        for (double& v : d) v = -v;
      }
      h = std::min(1.0, state.trust_radius / std::sqrt(norm2(d)));
    } else {
      // Normalized steepest descent: a fresh step removes the fraction h0 of
      // the current energy to first order; accepted steps carry over with
      // 1.5x growth, capped at a small multiple of the fresh value.
      d.assign(g.begin(), g.end());
      for (double& v : d) v = -v;
      const double fresh = config.h0 * state.energy / g_norm2;
      h = state.step_momenta > 0.0 ? std::min(1.5 * state.step_momenta, 10.0 * fresh)
                                   : fresh;
    }
    const std::vector<double> x = flatten_params(state, lay, config);
    std::vector<double> x_trial(x.size());
    bool accepted = false;
    int halvings = 0;
    for (int attempt = 0; attempt <= config.max_halvings; ++attempt) {
      for (std::size_t k = 0; k < x.size(); ++k) x_trial[k] = x[k] + h * d[k];
      TrialPoint tr = evaluate_at(state, lay, x_trial, config);
      if (tr.energy < prev_energy) {
        state.beta = std::move(tr.beta);
        state.momenta = std::move(tr.momenta);
        state.tmpl = std::move(tr.tmpl);
        state.energy = tr.energy;
        new_delta = tr.mean_ssd;
        data_term = tr.data_term;
        reg_term = tr.reg_term;
        accepted = true;
        halvings = attempt;
        break;
      }
      h *= 0.5;
    }
    outcome.accepted = accepted;
    outcome.line_search_failed = !accepted;
    if (accepted) {
      accepted_step = h;
      if (config.use_lbfgs) {
        state.pending_s.resize(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) state.pending_s[k] = h * d[k];
        state.prev_gradient = std::move(g);
        const double moved = h * std::sqrt(norm2(d));
        state.trust_radius = halvings == 0 ? std::min(2.0 * state.trust_radius, 1e4)
                                           : 1.5 * moved;
      }
    } else if (config.use_lbfgs) {
      state.trust_radius = std::max(0.25 * state.trust_radius, 1e-12);
    }
  }

  state.iter += 1;
  state.iters_at_scale += 1;
  state.prev_delta = state.delta;
  state.delta = new_delta;
  state.step_momenta = accepted_step;
  state.step_template = lay.with_template ? accepted_step : 0.0;
  outcome.rel_energy_change =
      prev_energy != 0.0 ? std::abs(prev_energy - state.energy) / std::abs(prev_energy) : 0.0;

  const int scale_used = state.scale;
  const int next_scale =
      refine_scale(state.prev_delta, state.delta, state.scale, state.iters_at_scale, config);
  if (next_scale != state.scale) {
    state.scale = next_scale;
    state.iters_at_scale = 0;
    // The masked subspace changes; curvature history no longer applies.
    state.lbfgs.clear();
    state.pending_s.clear();
    state.prev_gradient.clear();
  }

  const auto t_end = std::chrono::steady_clock::now();
  TraceRecord rec;
  rec.iter = state.iter;
  rec.energy = state.energy;
  rec.data_term = data_term;
  rec.reg_term = reg_term;
  rec.delta = state.delta;
  rec.scale = scale_used;
  rec.step_momenta = state.step_momenta;
  rec.step_template = state.step_template;
  rec.accepted = outcome.accepted;
  rec.ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
  state.trace.push_back(rec);
  if (config.record_history) state.momenta_history.push_back(state.momenta);
  return outcome;
}

RunResult run(std::span<const ScalarImage> targets, const ScalarImage* fixed_template,
              const OptimizerConfig& config, RunMode mode) {
  const auto t_start = std::chrono::steady_clock::now();
  OptimizerState st = init_state(targets, fixed_template, config, mode);
  RunResult out;
  out.s_max = st.s_max;
  out.delta0 = st.delta0;

  if (st.delta0 <= 0.0) {
    // Degenerate exact match: the zero-momentum model already reproduces
    // every target.
    out.exact_match = true;
    out.converged = true;
    out.template_image = std::move(st.tmpl);
    out.momenta = std::move(st.momenta);
    out.delta_final = 0.0;
    out.total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
  }

  int quiet_iters = 0;
  for (int j = 0; j < config.max_iters; ++j) {
    const int scale_used = st.scale;
    const StepOutcome oc = multiscale_step(st, config);
    // Convergence applies only once the scales are exhausted, and a single
    // weak iteration is not enough to stop. A failed search only counts as
    // quiet when retrying with a smaller radius cannot help anymore.
    const bool quiet = oc.accepted ? oc.rel_energy_change < config.conv_threshold
                                   : st.trust_radius <= 1e-10;
    if (scale_used == 1 && quiet)
      ++quiet_iters;
    else
      quiet_iters = 0;
    if (quiet_iters >= config.conv_patience) {
      out.converged = true;
      break;
    }
  }

  out.template_image = std::move(st.tmpl);
  out.momenta = std::move(st.momenta);
  out.trace = std::move(st.trace);
  out.delta_final = st.delta;
  out.iterations = st.iter;
  out.momenta_history = std::move(st.momenta_history);
  out.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

}  // namespace diffeo
