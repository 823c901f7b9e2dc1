#pragma once

#include <span>
#include <vector>

#include "diffeo/grid.hpp"

namespace diffeo {

/// Gaussian kernel K(x,y) = exp(-|x-y|^2 / sigma_g^2). Pair contributions
/// beyond cutoff_factor * sigma_g are dropped (exp(-16) at the default 4);
/// cutoff_factor <= 0 disables truncation.
struct KernelConfig {
  double sigma_g = 2.0;
  double cutoff_factor = 4.0;

  double cutoff_radius2() const;
};

/// Regular lattice of control points in voxel coordinates. Per axis the
/// count is floor((K-1)/spacing) + 1 and the lattice is centered inside
/// [0, K-1], which reproduces the usual points-per-kernel-width counts.
struct ControlPointGrid {
  std::vector<int> shape;      // points per axis
  int dim = 0;
  double spacing = 0.0;        // sigma_g, in voxels
  std::vector<double> origin;  // per-axis offset of the first point
  std::vector<double> points;  // [count][dim], row-major over shape

  int count() const { return static_cast<int>(element_count(shape)); }
};

ControlPointGrid make_control_grid(std::span<const int> image_shape, double sigma_g);

/// Initial momentum vectors attached to the control points; the optimization
/// variable of registration and atlas estimation.
struct MomentumField {
  ControlPointGrid grid;
  std::vector<double> alphas;  // [count][dim]

  static MomentumField zeros(ControlPointGrid grid);
};

/// States of the Hamiltonian system at the T+1 time points, plus the RK2
/// midpoint states used to evaluate velocities at half steps.
struct FlowTrajectory {
  int n_steps = 0;
  double dt = 0.0;
  int dim = 0;
  int count = 0;
  KernelConfig kernel;
  std::vector<std::vector<double>> points;        // [T+1][count*dim]
  std::vector<std::vector<double>> momenta;       // [T+1][count*dim]
  std::vector<std::vector<double>> mid_points;    // [T][count*dim]
  std::vector<std::vector<double>> mid_momenta;   // [T][count*dim]
};

/// v(x) = sum_k K(x, c_k) a_k for a batch of query points.
void velocity_at(std::span<const double> queries, std::span<const double> points,
                 std::span<const double> momenta, int dim, const KernelConfig& kernel,
                 std::span<double> out);

/// Reverse-mode products of velocity_at: accumulates (does not clear) the
/// cotangents of queries, points and momenta given out_bar. Pass an empty
/// span to skip an output.
void velocity_at_vjp(std::span<const double> queries, std::span<const double> points,
                     std::span<const double> momenta, int dim, const KernelConfig& kernel,
                     std::span<const double> out_bar, std::span<double> queries_bar,
                     std::span<double> points_bar, std::span<double> momenta_bar);

/// Right-hand side of the Hamiltonian system:
///   dc_k/dt = sum_l K(c_k, c_l) a_l
///   da_k/dt = (2/sigma^2) sum_l (a_k . a_l) K(c_k, c_l) (c_k - c_l)
void hamiltonian_rhs(std::span<const double> points, std::span<const double> momenta, int dim,
                     const KernelConfig& kernel, std::span<double> dc, std::span<double> da);

/// Reverse-mode products of hamiltonian_rhs; accumulates into the cotangents.
void hamiltonian_rhs_vjp(std::span<const double> points, std::span<const double> momenta,
                         int dim, const KernelConfig& kernel, std::span<const double> dc_bar,
                         std::span<const double> da_bar, std::span<double> points_bar,
                         std::span<double> momenta_bar);

/// RK2 (midpoint) integration of the Hamiltonian system over t in [0,1].
/// Throws std::runtime_error if the state becomes non-finite (step count too
/// small or exploding momenta).
FlowTrajectory shoot(const MomentumField& m, const KernelConfig& kernel, int n_steps);

enum class FlowDirection { kForward, kInverse };

/// Image-grid node positions advected along a trajectory. steps.front() is
/// the start (identity nodes), steps.back() the result: Phi_1 for the
/// forward direction, Phi_1^{-1} for the inverse.
struct GridFlow {
  std::vector<int> grid_shape;
  int dim = 0;
  FlowDirection direction = FlowDirection::kForward;
  std::vector<std::vector<double>> steps;       // [T+1][n_nodes*dim]
  std::vector<std::vector<double>> half_steps;  // [T][n_nodes*dim], RK2 midpoints

  std::span<const double> final_positions() const { return steps.back(); }
};

GridFlow integrate_flow(const FlowTrajectory& traj, std::span<const int> grid_shape,
                        FlowDirection direction);

/// out(y) = img interpolated at inverse_positions[y].
ScalarImage warp_image(const ScalarImage& img, std::span<const double> inverse_positions,
                       std::span<const int> grid_shape);

/// |v_0|_V^2 = sum_jk a_j . K(c_j, c_k) a_k; always >= 0.
double kinetic_energy(const MomentumField& m, const KernelConfig& kernel);

/// Gradient of kinetic_energy with respect to the momenta: 2 K a.
std::vector<double> kinetic_energy_gradient(const MomentumField& m, const KernelConfig& kernel);

/// |v_t|_V^2 at a stored time index, for conservation checks.
double trajectory_energy(const FlowTrajectory& traj, const KernelConfig& kernel, int t_index);

/// Node positions of the identity map on a grid, [n_nodes][dim].
std::vector<double> identity_positions(std::span<const int> grid_shape);

}  // namespace diffeo
