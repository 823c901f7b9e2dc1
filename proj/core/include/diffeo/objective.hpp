#pragma once

#include <functional>
#include <span>
#include <vector>

#include "diffeo/geodesic.hpp"
#include "diffeo/grid.hpp"

namespace diffeo {

struct CostConfig {
  double sigma_eps = 0.1;  // data-term noise scale, must be > 0
};

/// Cost, per-subject data terms and both gradients of one evaluation point.
struct GradientBundle {
  std::vector<std::vector<double>> grad_alpha;  // per subject, [count*dim]
  ScalarImage grad_template;
  double energy = 0.0;
  double data_term = 0.0;  // sum_i SSD_i / sigma_eps^2
  double reg_term = 0.0;   // sum_i |v_0,i|_V^2
  std::vector<double> subject_ssd;
};

/// Per-subject evaluation artifacts kept for reuse (deformed template,
/// residual, inverse flow).
struct SubjectEval {
  double ssd = 0.0;
  double reg = 0.0;
  ScalarImage warped;
  GridFlow inverse_flow;
  FlowTrajectory trajectory;
};

SubjectEval evaluate_subject(const ScalarImage& tmpl, const MomentumField& momenta,
                             const ScalarImage& target, const KernelConfig& kernel,
                             int n_steps);

/// E = sum_i ( SSD(I_i, I_ref o Phi_i^{-1}) / sigma_eps^2 + |v_0,i|_V^2 ).
double cost(const ScalarImage& tmpl, std::span<const MomentumField> momenta,
            std::span<const ScalarImage> targets, const CostConfig& cc,
            const KernelConfig& kernel, int n_steps);

/// Exact gradient of the discretized cost: a reverse sweep through the RK2
/// recursions of the shooting, the inverse-flow advection and the warp
/// interpolation. grad_template collects the data-term gradient through the
/// interpolation weights; subjects accumulate in index order.
GradientBundle gradient(const ScalarImage& tmpl, std::span<const MomentumField> momenta,
                        std::span<const ScalarImage> targets, const CostConfig& cc,
                        const KernelConfig& kernel, int n_steps);

/// Central differences (f(x+h) - f(x-h)) / 2h with h = h_scale * max(1,|x|),
/// evaluated at the listed coordinates only. Verification oracle for small
/// instances; independent of any adjoint code path.
std::vector<double> fd_gradient_oracle(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x,
                                       std::span<const std::size_t> coords,
                                       double h_scale = 1e-5);

}  // namespace diffeo
