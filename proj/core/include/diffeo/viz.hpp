#pragma once

#include <filesystem>
#include <span>

#include "diffeo/grid.hpp"

namespace diffeo {

/// |v| per node rendered through a linear blue-to-red colormap, PPM (P6).
void save_norm_heatmap_ppm(const std::filesystem::path& path, const VectorField& field);

/// Warped lattice lines (every `stride` nodes) drawn over a white canvas,
/// PPM (P6). `positions` are deformed node coordinates, [n_nodes][d],
/// row-major over grid_shape; 2D only.
void save_deformation_grid_ppm(const std::filesystem::path& path,
                               std::span<const double> positions,
                               std::span<const int> grid_shape, int stride = 2);

/// Momentum arrows at control points as an SVG, magnified by `scale`.
void save_quiver_svg(const std::filesystem::path& path, std::span<const double> points,
                     std::span<const double> vectors, int dim, double scale = 5.0);

}  // namespace diffeo
