#pragma once

#include <span>
#include <vector>

#include "diffeo/geodesic.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/haar.hpp"
#include "diffeo/objective.hpp"

namespace diffeo {

struct OptimizerConfig {
  double h0 = 0.01;             // initial step size (pre normalization)
  double sigma_eps = 0.1;       // data-term noise scale
  double conv_threshold = 1e-4; // relative cost change, tested at scale 1 only
  int conv_patience = 3;        // consecutive sub-threshold iterations to stop
  int min_iters_per_scale = 5;  // iterations before a scale may refine
  int s0 = 0;                   // initial scale; 0 = auto (S_max - 1)
  int max_iters = 500;
  int t_steps = 40;             // time discretization of the flows
  bool freeze_template = false; // registration mode
  double sigma_g = 2.0;         // kernel width, voxels
  double kernel_cutoff = 4.0;
  int max_halvings = 20;
  bool use_lbfgs = false;       // quasi-Newton directions over the masked space
  bool bypass_wavelets = false; // plain momentum updates, no wavelet domain
  bool record_history = false;  // keep per-iteration momenta snapshots

  KernelConfig kernel() const { return KernelConfig{sigma_g, kernel_cutoff}; }
};

enum class RunMode { kRegister, kAtlas };

struct TraceRecord {
  int iter = 0;
  double energy = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  double delta = 0.0;  // mean residual over subjects after the update
  int scale = 1;
  double step_momenta = 0.0;
  double step_template = 0.0;
  double ms = 0.0;
  bool accepted = false;
};

/// One curvature pair of the limited-memory quasi-Newton direction engine.
struct LbfgsPair {
  std::vector<double> s;
  std::vector<double> y;
  double rho = 0.0;
};

inline constexpr std::size_t kLbfgsMemory = 10;

struct OptimizerState {
  int iter = 0;
  int scale = 1;
  int s_max = 1;
  int iters_at_scale = 0;
  double energy = 0.0;
  double delta = 0.0;
  double prev_delta = 0.0;
  double delta0 = 0.0;
  double step_momenta = 0.0;   // accepted step of the last iteration
  double step_template = 0.0;
  // Quasi-Newton memory over the flat (masked) parameter vector; reset at
  // scale changes.
  std::vector<LbfgsPair> lbfgs;
  std::vector<double> prev_gradient;
  std::vector<double> pending_s;
  double trust_radius = 0.0;  // displacement cap per iteration, 0 = unset
  bool freeze_template = false;
  ScalarImage tmpl;
  std::vector<ScalarImage> targets;
  // beta[i][component]: wavelet coefficients of subject i's momenta.
  std::vector<std::vector<WaveletPyramid>> beta;
  std::vector<MomentumField> momenta;  // always IWT(beta)
  std::vector<int> coeff_scales;       // per-coefficient creation scale
  std::vector<TraceRecord> trace;
  std::vector<std::vector<MomentumField>> momenta_history;
};

struct StepOutcome {
  bool accepted = false;
  bool line_search_failed = false;
  double rel_energy_change = 0.0;
};

/// S_{j+1} = S_j - 1 iff the residual decrease (delta_prev - delta_curr) /
/// delta_prev falls below 1%, S_j > 1 and at least min_iters_per_scale
/// iterations ran at the current scale.
int refine_scale(double delta_prev, double delta_curr, int s_current, int iters_at_scale,
                 const OptimizerConfig& config);

OptimizerState init_state(std::span<const ScalarImage> targets,
                          const ScalarImage* fixed_template, const OptimizerConfig& config,
                          RunMode mode);

/// One iteration of the multiscale loop: gradients, wavelet transform of the
/// momentum gradient, finer-scale silencing, normalized backtracking update,
/// residual bookkeeping and the scale-refinement decision.
StepOutcome multiscale_step(OptimizerState& state, const OptimizerConfig& config);

struct RunResult {
  ScalarImage template_image;
  std::vector<MomentumField> momenta;
  std::vector<TraceRecord> trace;
  double delta0 = 0.0;
  double delta_final = 0.0;
  int s_max = 1;
  int iterations = 0;
  bool exact_match = false;  // delta0 == 0, optimization skipped
  bool converged = false;
  double total_ms = 0.0;
  std::vector<std::vector<MomentumField>> momenta_history;
};

/// Full coarse-to-fine loop. Registration: exactly one target plus the fixed
/// template; atlas: >= 2 targets, template initialized to their mean. Stops
/// when the relative cost change drops below conv_threshold with the scale
/// at 1, or at max_iters.
RunResult run(std::span<const ScalarImage> targets, const ScalarImage* fixed_template,
              const OptimizerConfig& config, RunMode mode);

/// Componentwise forward transform of a momentum-shaped array on the control
/// grid; inverse counterpart below.
std::vector<WaveletPyramid> fwt_field(std::span<const double> field,
                                      const ControlPointGrid& grid, double rho = 1.0);
std::vector<double> iwt_field(std::span<const WaveletPyramid> pyramids,
                              const ControlPointGrid& grid);

}  // namespace diffeo
