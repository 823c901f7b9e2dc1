#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "diffeo/optimizer.hpp"

// Flat key=value run configuration shared by the CLI subcommands. Files use
// one `key = value` per line with '#' comments; unknown keys are rejected.
// CLI flags override file values, and every run writes the fully resolved
// set next to its outputs.
struct RunConfig {
  double sigma_g = 2.0;
  double sigma_eps = 0.1;
  double h0 = 0.01;
  double conv_threshold = 1e-4;
  int min_iters_per_scale = 5;
  int s0 = 0;  // 0 = auto (S_max - 1)
  int max_iters = 500;
  int t_steps = 40;
  double kernel_cutoff = 4.0;
  bool freeze_template = false;
  std::uint64_t seed = 1;
  bool emit_grids = true;
  bool emit_heatmaps = true;
  bool emit_trace = true;

  void set(const std::string& key, const std::string& value);  // throws on unknown key
  void load_file(const std::filesystem::path& path);
  std::string resolved_text() const;

  diffeo::OptimizerConfig optimizer() const;
};

inline constexpr const char* kDiffeoVersion = "0.1.0";
