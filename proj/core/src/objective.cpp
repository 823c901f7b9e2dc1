#include "diffeo/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace diffeo {

namespace {

void check_inputs(const ScalarImage& tmpl, std::span<const MomentumField> momenta,
                  std::span<const ScalarImage> targets, const CostConfig& cc) {
  if (cc.sigma_eps <= 0.0) throw std::invalid_argument("cost: sigma_eps must be > 0");
  if (momenta.size() != targets.size())
    throw std::invalid_argument("cost: one momentum field per target required");
  for (const ScalarImage& t : targets)
    if (!t.same_shape(tmpl)) throw std::invalid_argument("cost: target/template shape mismatch");
}

}  // namespace

SubjectEval evaluate_subject(const ScalarImage& tmpl, const MomentumField& momenta,
                             const ScalarImage& target, const KernelConfig& kernel,
                             int n_steps) {
  SubjectEval ev;
  ev.trajectory = shoot(momenta, kernel, n_steps);
  ev.inverse_flow = integrate_flow(ev.trajectory, tmpl.shape, FlowDirection::kInverse);
  ev.warped = warp_image(tmpl, ev.inverse_flow.final_positions(), tmpl.shape);
  ev.ssd = ssd(ev.warped, target);
  ev.reg = kinetic_energy(momenta, kernel);
  return ev;
}

double cost(const ScalarImage& tmpl, std::span<const MomentumField> momenta,
            std::span<const ScalarImage> targets, const CostConfig& cc,
            const KernelConfig& kernel, int n_steps) {
  check_inputs(tmpl, momenta, targets, cc);
  const double inv_se2 = 1.0 / (cc.sigma_eps * cc.sigma_eps);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const SubjectEval ev = evaluate_subject(tmpl, momenta[i], targets[i], kernel, n_steps);
    total += ev.ssd * inv_se2 + ev.reg;
  }
  return total;
}

namespace {

// Reverse sweep through one subject's forward computation. Accumulates the
// data-term gradient with respect to the template and returns the gradient
// with respect to the initial momenta (data term only; the kinetic-energy
// part is added by the caller).
std::vector<double> adjoint_subject(const ScalarImage& tmpl, const ScalarImage& target,
                                    const KernelConfig& kernel, const SubjectEval& ev,
                                    double inv_se2, ScalarImage& grad_template) {
  const int d = ev.trajectory.dim;
  const int T = ev.trajectory.n_steps;
  const double dt = ev.trajectory.dt;
  const std::size_t n_nodes = tmpl.size();
  const std::size_t nd = ev.trajectory.points[0].size();
  const GridFlow& flow = ev.inverse_flow;

  // Warp + data term backward: node cotangents and the template gradient.
  std::vector<double> y_bar(n_nodes * d, 0.0);
  {
    std::vector<double> g(d);
    for (std::size_t p = 0; p < n_nodes; ++p) {
      const double out_bar = 2.0 * inv_se2 * (ev.warped[p] - target[p]);
      const std::span<const double> pos = flow.final_positions().subspan(p * d, d);
      interpolate_with_gradient(tmpl, pos, g);
      splat_add(grad_template, pos, out_bar);
      for (int a = 0; a < d; ++a) y_bar[p * d + a] = out_bar * g[a];
    }
  }

  // Inverse-flow advection backward. Construction at step j (nodes at
  // trajectory time T-j advected to T-j-1):
  //   half = cur - (dt/2) V(cur; z[T-j])
  //   next = cur - dt V(half; m[T-j-1])
  std::vector<std::vector<double>> state_c_bar(T + 1), state_a_bar(T + 1);
  std::vector<std::vector<double>> mid_c_bar(T), mid_a_bar(T);
  for (int j = 0; j <= T; ++j) {
    state_c_bar[j].assign(nd, 0.0);
    state_a_bar[j].assign(nd, 0.0);
  }
  for (int j = 0; j < T; ++j) {
    mid_c_bar[j].assign(nd, 0.0);
    mid_a_bar[j].assign(nd, 0.0);
  }

  std::vector<double> half_bar(n_nodes * d), v2_bar(n_nodes * d), v1_bar(n_nodes * d);
  for (int j = T - 1; j >= 0; --j) {
    const int state = T - j;
    const int mid = T - 1 - j;
    const std::vector<double>& cur = flow.steps[j];
    const std::vector<double>& half = flow.half_steps[j];
    // y_bar currently holds the cotangent of steps[j+1]; produce steps[j]'s.
    for (std::size_t i = 0; i < n_nodes * static_cast<std::size_t>(d); ++i)
      v2_bar[i] = -dt * y_bar[i];
    std::fill(half_bar.begin(), half_bar.end(), 0.0);
    velocity_at_vjp(half, ev.trajectory.mid_points[mid], ev.trajectory.mid_momenta[mid], d,
                    kernel, v2_bar, half_bar, mid_c_bar[mid], mid_a_bar[mid]);
    for (std::size_t i = 0; i < n_nodes * static_cast<std::size_t>(d); ++i) {
      y_bar[i] += half_bar[i];
      v1_bar[i] = -0.5 * dt * half_bar[i];
    }
    velocity_at_vjp(cur, ev.trajectory.points[state], ev.trajectory.momenta[state], d, kernel,
                    v1_bar, y_bar, state_c_bar[state], state_a_bar[state]);
  }

  // Shooting backward through the RK2 recursion:
  //   m_j = z_j + (dt/2) f(z_j),  z_{j+1} = z_j + dt f(m_j)
  std::vector<double> zc_bar = std::move(state_c_bar[T]);
  std::vector<double> za_bar = std::move(state_a_bar[T]);
  std::vector<double> tc(nd), ta(nd);
  for (int j = T - 1; j >= 0; --j) {
    std::vector<double>& mc = mid_c_bar[j];
    std::vector<double>& ma = mid_a_bar[j];
    for (std::size_t i = 0; i < nd; ++i) {
      tc[i] = dt * zc_bar[i];
      ta[i] = dt * za_bar[i];
    }
    hamiltonian_rhs_vjp(ev.trajectory.mid_points[j], ev.trajectory.mid_momenta[j], d, kernel,
                        tc, ta, mc, ma);
    for (std::size_t i = 0; i < nd; ++i) {
      zc_bar[i] += mc[i];
      za_bar[i] += ma[i];
      tc[i] = 0.5 * dt * mc[i];
      ta[i] = 0.5 * dt * ma[i];
    }
    hamiltonian_rhs_vjp(ev.trajectory.points[j], ev.trajectory.momenta[j], d, kernel, tc, ta,
                        zc_bar, za_bar);
    for (std::size_t i = 0; i < nd; ++i) {
      zc_bar[i] += state_c_bar[j][i];
      za_bar[i] += state_a_bar[j][i];
    }
  }
  // Control points are fixed at t=0; only the momentum cotangent survives.
  return za_bar;
}

}  // namespace

GradientBundle gradient(const ScalarImage& tmpl, std::span<const MomentumField> momenta,
                        std::span<const ScalarImage> targets, const CostConfig& cc,
                        const KernelConfig& kernel, int n_steps) {
  check_inputs(tmpl, momenta, targets, cc);
  const double inv_se2 = 1.0 / (cc.sigma_eps * cc.sigma_eps);
  GradientBundle out;
  out.grad_template = ScalarImage(tmpl.shape, 0.0);
  out.grad_alpha.resize(targets.size());
  out.subject_ssd.resize(targets.size());

  for (std::size_t i = 0; i < targets.size(); ++i) {
    const SubjectEval ev = evaluate_subject(tmpl, momenta[i], targets[i], kernel, n_steps);
    out.subject_ssd[i] = ev.ssd;
    out.data_term += ev.ssd * inv_se2;
    out.reg_term += ev.reg;
    std::vector<double> ga =
        adjoint_subject(tmpl, targets[i], kernel, ev, inv_se2, out.grad_template);
    const std::vector<double> reg_grad = kinetic_energy_gradient(momenta[i], kernel);
    for (std::size_t q = 0; q < ga.size(); ++q) ga[q] += reg_grad[q];
    for (double v : ga)
      if (!std::isfinite(v)) throw std::runtime_error("gradient: non-finite adjoint state");
    out.grad_alpha[i] = std::move(ga);
  }
  out.energy = out.data_term + out.reg_term;
  return out;
}

std::vector<double> fd_gradient_oracle(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x,
                                       std::span<const std::size_t> coords, double h_scale) {
  std::vector<double> work(x.begin(), x.end());
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t c : coords) {
    const double x0 = work[c];
    const double h = h_scale * std::max(1.0, std::abs(x0));
    work[c] = x0 + h;
    const double fp = f(work);
    work[c] = x0 - h;
    const double fm = f(work);
    work[c] = x0;
    out.push_back((fp - fm) / (2.0 * h));
  }
  return out;
}

}  // namespace diffeo
