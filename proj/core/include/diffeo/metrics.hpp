#pragma once

#include <span>
#include <string>
#include <vector>

#include "diffeo/grid.hpp"

namespace diffeo {

struct MetricReport {
  double total_residual = 0.0;     // Delta_J
  double relative_residual = 0.0;  // R = Delta_J / Delta_0
  double roi_residual = 0.0;
  double ssim = 0.0;
  double sd_jacobian = 0.0;
  double runtime_ms = 0.0;
  bool exact_match = false;  // Delta_0 was zero
};

/// R = delta_final / delta_initial. A zero delta_initial marks an exact
/// match and reports 0.
double relative_residual(double delta_final, double delta_initial);

/// Mean of local SSIM over fully contained sliding windows (7 per axis,
/// uniform weights), with the standard constants C1=(0.01 L)^2,
/// C2=(0.03 L)^2, C3=C2/2 and L the joint dynamic range.
double ssim(const ScalarImage& a, const ScalarImage& b);

/// Standard deviation of the per-node Jacobian determinant of a deformation
/// map given by node positions ([n_nodes][d], row-major over grid_shape);
/// central differences at interior nodes only.
double sd_jacobian(std::span<const double> positions, std::span<const int> grid_shape);

/// Mean of the Jacobian determinants over the same interior nodes.
double mean_jacobian(std::span<const double> positions, std::span<const int> grid_shape);

/// SSD restricted to the voxels of a region of interest.
double roi_residual(const ScalarImage& a, const ScalarImage& b, const RoiBox& roi);

std::string metric_report_json(const MetricReport& r);

/// One sweep-table row in Table-1 style CSV:
/// sigma_g,k_g,s0,delta_j,delta_j_roi,sd_j,runtime_ms
struct SweepRow {
  double sigma_g = 0.0;
  int k_g = 0;
  int s0 = 0;
  double delta_j = 0.0;
  double delta_j_roi = 0.0;
  double sd_j = 0.0;
  double runtime_ms = 0.0;
};

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

}  // namespace diffeo
