#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "diffeo/datasets.hpp"
#include "diffeo/geodesic.hpp"
#include "diffeo/grid.hpp"
#include "diffeo/haar.hpp"
#include "diffeo/image_io.hpp"
#include "diffeo/metrics.hpp"
#include "diffeo/objective.hpp"
#include "diffeo/optimizer.hpp"
#include "diffeo/viz.hpp"

#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json extra;

  void add_output(const fs::path& p) { outputs.push_back(p.filename().string()); }

  void write(const fs::path& dir) {
    json j;
    j["command"] = command;
    j["version"] = kDiffeoVersion;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    if (!extra.is_null()) j["extra"] = extra;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }
};

void verify_outputs(const fs::path& dir, const Manifest& m) {
  for (const std::string& name : m.outputs)
    if (!fs::exists(dir / name))
      throw std::runtime_error("expected output missing: " + (dir / name).string());
}

// Shared optimizer/config flags with file < flag precedence.
struct ConfigCli {
  RunConfig flag_values;
  std::string config_path;
  std::vector<std::function<void(RunConfig&)>> appliers;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value configuration file");
    auto bind = [this, cmd]<typename T>(const char* name, T RunConfig::* field,
                                        const char* desc) {
      CLI::Option* opt = cmd->add_option(name, flag_values.*field, desc);
      appliers.push_back([opt, field, this](RunConfig& rc) {
        if (opt->count() > 0) rc.*field = flag_values.*field;
      });
    };
    bind("--sigma-g", &RunConfig::sigma_g, "Gaussian kernel width in voxels");
    bind("--sigma-eps", &RunConfig::sigma_eps, "data-term noise scale");
    bind("--h0", &RunConfig::h0, "initial step size");
    bind("--conv-threshold", &RunConfig::conv_threshold, "relative cost change threshold");
    bind("--min-iters-per-scale", &RunConfig::min_iters_per_scale,
         "iterations before a coarse-to-fine step");
    bind("--s0", &RunConfig::s0, "initial scale (0 = S_max - 1)");
    bind("--max-iters", &RunConfig::max_iters, "iteration cap");
    bind("--t-steps", &RunConfig::t_steps, "flow integration steps");
    bind("--kernel-cutoff", &RunConfig::kernel_cutoff, "kernel truncation radius in sigmas");
    bind("--freeze-template", &RunConfig::freeze_template, "do not update the template");
    bind("--seed", &RunConfig::seed, "generator seed");
    bind("--emit-grids", &RunConfig::emit_grids, "write deformation-grid PPMs");
    bind("--emit-heatmaps", &RunConfig::emit_heatmaps, "write velocity-norm heatmaps");
    bind("--emit-trace", &RunConfig::emit_trace, "write per-iteration trace JSONL");
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config_path.empty()) rc.load_file(config_path);
    for (const auto& apply : appliers) apply(rc);
    return rc;
  }
};

diffeo::RoiBox parse_roi(const std::string& text) {
  diffeo::RoiBox roi;
  std::vector<int> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stoi(tok));
  if (v.size() % 2 != 0 || v.empty())
    throw std::runtime_error("roi must be lo0,lo1[,lo2],hi0,hi1[,hi2]");
  const std::size_t d = v.size() / 2;
  roi.lo.assign(v.begin(), v.begin() + d);
  roi.hi.assign(v.begin() + d, v.end());
  return roi;
}

std::vector<int> parse_shape(const std::string& text) {
  std::vector<int> shape;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, 'x')) shape.push_back(std::stoi(tok));
  if (shape.empty() || shape.size() > 3)
    throw std::runtime_error("shape must be like 32x32 or 16x16x16");
  return shape;
}

void save_momenta(const fs::path& path, const diffeo::MomentumField& m) {
  std::vector<int> shape = m.grid.shape;
  shape.push_back(m.grid.dim);
  diffeo::save_rawf(path, shape, m.alphas);
  std::ostringstream side;
  side << "sigma_g " << m.grid.spacing << "\norigin";
  for (double o : m.grid.origin) side << ' ' << o;
  side << '\n';
  write_text(path.string() + ".meta", side.str());
}

void save_trace(const fs::path& path, const std::vector<diffeo::TraceRecord>& trace) {
  std::ostringstream os;
  for (const auto& r : trace) {
    json j;
    j["iter"] = r.iter;
    j["E"] = r.energy;
    j["data_term"] = r.data_term;
    j["reg_term"] = r.reg_term;
    j["delta"] = r.delta;
    j["scale"] = r.scale;
    j["step"] = r.step_momenta;
    j["step_template"] = r.step_template;
    j["ms"] = r.ms;
    j["accepted"] = r.accepted;
    os << j.dump() << '\n';
  }
  write_text(path, os.str());
}

struct RegistrationArtifacts {
  diffeo::MetricReport report;
  diffeo::ScalarImage deformed;
};

// Deformed image, metrics and optional visualizations for one subject's
// final momenta.
RegistrationArtifacts finalize_subject(const diffeo::ScalarImage& tmpl,
                                       const diffeo::ScalarImage& target,
                                       const diffeo::MomentumField& momenta,
                                       const diffeo::KernelConfig& kernel, int t_steps,
                                       double delta0, double runtime_ms,
                                       const diffeo::RoiBox* roi) {
  RegistrationArtifacts art;
  const diffeo::FlowTrajectory traj = diffeo::shoot(momenta, kernel, t_steps);
  const diffeo::GridFlow inv =
      diffeo::integrate_flow(traj, tmpl.shape, diffeo::FlowDirection::kInverse);
  const diffeo::GridFlow fwd =
      diffeo::integrate_flow(traj, tmpl.shape, diffeo::FlowDirection::kForward);
  art.deformed = diffeo::warp_image(tmpl, inv.final_positions(), tmpl.shape);

  art.report.total_residual = diffeo::ssd(art.deformed, target);
  art.report.relative_residual = diffeo::relative_residual(art.report.total_residual, delta0);
  art.report.exact_match = delta0 == 0.0;
  art.report.ssim = diffeo::ssim(art.deformed, target);
  art.report.sd_jacobian = diffeo::sd_jacobian(fwd.final_positions(), tmpl.shape);
  if (roi) {
    art.report.roi_residual = diffeo::roi_residual(art.deformed, target, *roi);
  } else {
    art.report.roi_residual = art.report.total_residual;  // full-domain roi
  }
  art.report.runtime_ms = runtime_ms;
  return art;
}

void emit_visuals(const fs::path& out_dir, const diffeo::ScalarImage& shape_ref,
                  const diffeo::MomentumField& momenta, const diffeo::KernelConfig& kernel,
                  int t_steps, const RunConfig& rc, Manifest& manifest,
                  const std::string& prefix) {
  if (rc.emit_grids) {
    const diffeo::FlowTrajectory traj = diffeo::shoot(momenta, kernel, t_steps);
    const diffeo::GridFlow fwd =
        diffeo::integrate_flow(traj, shape_ref.shape, diffeo::FlowDirection::kForward);
    const fs::path p = out_dir / (prefix + "grid.ppm");
    diffeo::save_deformation_grid_ppm(p, fwd.final_positions(), shape_ref.shape);
    manifest.add_output(p);
  }
  if (rc.emit_heatmaps && shape_ref.dim() == 2) {
    const auto nodes = diffeo::identity_positions(shape_ref.shape);
    diffeo::VectorField v0(shape_ref.shape, shape_ref.dim());
    diffeo::velocity_at(nodes, momenta.grid.points, momenta.alphas, momenta.grid.dim, kernel,
                        v0.data);
    const fs::path heat = out_dir / (prefix + "heatmap.ppm");
    diffeo::save_norm_heatmap_ppm(heat, v0);
    manifest.add_output(heat);
    const fs::path quiver = out_dir / (prefix + "quiver.svg");
    diffeo::save_quiver_svg(quiver, momenta.grid.points, momenta.alphas, momenta.grid.dim, 5.0);
    manifest.add_output(quiver);
  }
}

int cmd_gen_data(const std::string& kind, const fs::path& out_dir, int side,
                 const std::string& shape_text, int count, double deform_scale,
                 const RunConfig& rc) {
  fs::create_directories(out_dir);
  Manifest manifest;
  manifest.command = "gen-data";
  if (kind == "toy") {
    const diffeo::ToyPair toy = diffeo::make_toy_squares(side);
    for (const auto& [name, img] :
         {std::pair{"source", &toy.source}, std::pair{"target", &toy.target}}) {
      const fs::path pgm = out_dir / (std::string(name) + ".pgm");
      const fs::path rawf = out_dir / (std::string(name) + ".rawf");
      diffeo::save_pgm(pgm, *img);
      diffeo::save_rawf_image(rawf, *img);
      manifest.add_output(pgm);
      manifest.add_output(rawf);
    }
    manifest.extra["geometry"] = {{"image_side", side},
                                  {"large_square", {10, 10, 30, 30}},
                                  {"translation", {8, 8}},
                                  {"indentation", {36, 26, 38, 30}}};
    manifest.extra["roi"] = {{"lo", toy.roi.lo}, {"hi", toy.roi.hi}};
    manifest.extra["seed"] = rc.seed;
  } else if (kind == "blobs") {
    const std::vector<int> shape = parse_shape(shape_text);
    const auto pop = diffeo::make_blob_population(count, rc.seed, shape, deform_scale);
    const diffeo::ScalarImage base = diffeo::make_base_blob(shape);
    const fs::path base_path = out_dir / "base.rawf";
    diffeo::save_rawf_image(base_path, base);
    manifest.add_output(base_path);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "blob_%02d.rawf", i);
      const fs::path p = out_dir / name;
      diffeo::save_rawf_image(p, pop[i]);
      manifest.add_output(p);
      if (shape.size() == 2) {
        std::snprintf(name, sizeof(name), "blob_%02d.pgm", i);
        const fs::path pg = out_dir / name;
        diffeo::save_pgm(pg, pop[i]);
        manifest.add_output(pg);
      }
    }
    manifest.extra["geometry"] = {{"shape", shape}, {"count", count},
                                  {"deform_scale", deform_scale}};
    manifest.extra["seed"] = rc.seed;
  } else {
    throw std::runtime_error("gen-data kind must be 'toy' or 'blobs'");
  }
  write_text(out_dir / "resolved_config.txt", rc.resolved_text());
  manifest.outputs.push_back("resolved_config.txt");
  manifest.write(out_dir);
  verify_outputs(out_dir, manifest);
  return 0;
}

int cmd_register(const fs::path& source_path, const fs::path& target_path,
                 const fs::path& out_dir, const std::string& roi_text, const RunConfig& rc) {
  const diffeo::ScalarImage source = diffeo::load_image(source_path);
  const diffeo::ScalarImage target = diffeo::load_image(target_path);
  fs::create_directories(out_dir);

  diffeo::OptimizerConfig cfg = rc.optimizer();
  const std::vector<diffeo::ScalarImage> targets = {target};
  const diffeo::RunResult res =
      diffeo::run(targets, &source, cfg, diffeo::RunMode::kRegister);

  Manifest manifest;
  manifest.command = "register";
  manifest.inputs = {source_path.string(), target_path.string()};

  std::unique_ptr<diffeo::RoiBox> roi;
  if (!roi_text.empty()) {
    roi = std::make_unique<diffeo::RoiBox>(parse_roi(roi_text));
    roi->validate(source.shape);
  }
  const RegistrationArtifacts art =
      finalize_subject(source, target, res.momenta[0], cfg.kernel(), cfg.t_steps, res.delta0,
                       res.total_ms, roi.get());

  const fs::path deformed_rawf = out_dir / "deformed.rawf";
  diffeo::save_rawf_image(deformed_rawf, art.deformed);
  manifest.add_output(deformed_rawf);
  if (source.dim() == 2) {
    const fs::path deformed_pgm = out_dir / "deformed.pgm";
    diffeo::save_pgm(deformed_pgm, art.deformed);
    manifest.add_output(deformed_pgm);
  }
  const fs::path momenta_path = out_dir / "momenta.rawf";
  save_momenta(momenta_path, res.momenta[0]);
  manifest.add_output(momenta_path);
  manifest.outputs.push_back("momenta.rawf.meta");

  const fs::path report_path = out_dir / "report.json";
  write_text(report_path, diffeo::metric_report_json(art.report) + "\n");
  manifest.add_output(report_path);

  if (rc.emit_trace) {
    const fs::path trace_path = out_dir / "trace.jsonl";
    save_trace(trace_path, res.trace);
    manifest.add_output(trace_path);
  }
  emit_visuals(out_dir, source, res.momenta[0], cfg.kernel(), cfg.t_steps, rc, manifest, "");

  write_text(out_dir / "resolved_config.txt", rc.resolved_text());
  manifest.outputs.push_back("resolved_config.txt");
  manifest.write(out_dir);
  verify_outputs(out_dir, manifest);
  std::cout << "register: delta_J = " << art.report.total_residual
            << ", R = " << art.report.relative_residual << ", ssim = " << art.report.ssim
            << ", iters = " << res.iterations << '\n';
  return 0;
}

int cmd_atlas(const fs::path& input_dir, const fs::path& out_dir, const RunConfig& rc) {
  std::vector<fs::path> paths;
  if (!fs::is_directory(input_dir))
    throw std::runtime_error(input_dir.string() + ": not a directory");
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    const auto ext = entry.path().extension();
    const auto stem = entry.path().stem().string();
    if ((ext == ".pgm" || ext == ".rawf") && stem != "base") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  // Images may exist in both formats; keep one per stem.
  paths.erase(std::unique(paths.begin(), paths.end(),
                          [](const fs::path& a, const fs::path& b) { return a.stem() == b.stem(); }),
              paths.end());
  if (paths.size() < 2) throw std::runtime_error("atlas needs at least 2 images");

  std::vector<diffeo::ScalarImage> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(diffeo::load_image(p));

  fs::create_directories(out_dir);
  diffeo::OptimizerConfig cfg = rc.optimizer();
  const diffeo::ScalarImage initial_template = diffeo::mean_image(images);
  const diffeo::RunResult res = diffeo::run(images, nullptr, cfg, diffeo::RunMode::kAtlas);

  Manifest manifest;
  manifest.command = "atlas";
  for (const auto& p : paths) manifest.inputs.push_back(p.string());

  const fs::path tmpl_rawf = out_dir / "template.rawf";
  diffeo::save_rawf_image(tmpl_rawf, res.template_image);
  manifest.add_output(tmpl_rawf);
  if (res.template_image.dim() == 2) {
    const fs::path tmpl_pgm = out_dir / "template.pgm";
    diffeo::save_pgm(tmpl_pgm, res.template_image);
    manifest.add_output(tmpl_pgm);
  }

  json reports = json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "momenta_%02zu.rawf", i);
    const fs::path mp = out_dir / name;
    save_momenta(mp, res.momenta[i]);
    manifest.add_output(mp);
    manifest.outputs.push_back(std::string(name) + ".meta");

    const double subject_delta0 = diffeo::ssd(initial_template, images[i]);
    const RegistrationArtifacts art =
        finalize_subject(res.template_image, images[i], res.momenta[i], cfg.kernel(),
                         cfg.t_steps, subject_delta0, res.total_ms, nullptr);
    reports.push_back(json::parse(diffeo::metric_report_json(art.report)));
    reports.back()["subject"] = paths[i].filename().string();
  }
  const fs::path reports_path = out_dir / "reports.json";
  write_text(reports_path, reports.dump(2) + "\n");
  manifest.add_output(reports_path);

  if (rc.emit_trace) {
    const fs::path trace_path = out_dir / "trace.jsonl";
    save_trace(trace_path, res.trace);
    manifest.add_output(trace_path);
  }
  write_text(out_dir / "resolved_config.txt", rc.resolved_text());
  manifest.outputs.push_back("resolved_config.txt");
  manifest.write(out_dir);
  verify_outputs(out_dir, manifest);
  std::cout << "atlas: delta_J = " << res.delta_final << " (from " << res.delta0
            << "), iters = " << res.iterations << '\n';
  return 0;
}

int cmd_sweep(const std::string& scenario, const fs::path& out_dir, int side,
              const RunConfig& rc) {
  const diffeo::ToyPair toy = diffeo::make_toy_squares(side);
  fs::create_directories(out_dir);
  std::vector<diffeo::SweepRow> rows;
  const std::vector<diffeo::ScalarImage> targets = {toy.target};

  auto run_one = [&](double sigma_g, int s0) {
    RunConfig local = rc;
    local.sigma_g = sigma_g;
    local.s0 = s0;
    diffeo::OptimizerConfig cfg = local.optimizer();
    const diffeo::RunResult res =
        diffeo::run(targets, &toy.source, cfg, diffeo::RunMode::kRegister);
    const RegistrationArtifacts art =
        finalize_subject(toy.source, toy.target, res.momenta[0], cfg.kernel(), cfg.t_steps,
                         res.delta0, res.total_ms, &toy.roi);
    diffeo::SweepRow row;
    row.sigma_g = sigma_g;
    row.k_g = diffeo::make_control_grid(toy.source.shape, sigma_g).count();
    row.s0 = s0;
    row.delta_j = art.report.total_residual;
    row.delta_j_roi = art.report.roi_residual;
    row.sd_j = art.report.sd_jacobian;
    row.runtime_ms = res.total_ms;
    rows.push_back(row);
    std::cout << "sweep: sigma_g = " << sigma_g << ", S0 = " << s0
              << ", delta_J = " << row.delta_j << ", " << row.runtime_ms << " ms\n";
  };

  if (scenario == "toy-s0-sweep") {
    const auto grid_shape = diffeo::make_control_grid(toy.source.shape, rc.sigma_g).shape;
    const int s_max = diffeo::max_scale(grid_shape);
    for (int s0 = 1; s0 <= s_max; ++s0) run_one(rc.sigma_g, s0);
  } else if (scenario == "toy-kernel-sweep") {
    for (double sigma_g : {1.7, 2.0, 2.5, 3.0, 7.0}) {
      const auto grid_shape = diffeo::make_control_grid(toy.source.shape, sigma_g).shape;
      const int s_max = diffeo::max_scale(grid_shape);
      run_one(sigma_g, 1);
      run_one(sigma_g, std::max(1, s_max - 1));
    }
  } else {
    throw std::runtime_error("scenario must be toy-s0-sweep or toy-kernel-sweep");
  }

  std::string csv = diffeo::sweep_csv_header() + "\n";
  for (const auto& row : rows) csv += diffeo::sweep_csv_row(row) + "\n";
  write_text(out_dir / "sweep.csv", csv);
  write_text(out_dir / "resolved_config.txt", rc.resolved_text());
  Manifest manifest;
  manifest.command = "sweep";
  manifest.extra["scenario"] = scenario;
  manifest.outputs = {"sweep.csv", "resolved_config.txt"};
  manifest.write(out_dir);
  verify_outputs(out_dir, manifest);
  return 0;
}

int cmd_wavelet(const std::string& shape_text, int trials, const fs::path& input,
                const fs::path& pyramid_out) {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << what << '\n';
    if (!ok) ++failures;
  };

  if (!input.empty()) {
    const diffeo::ScalarImage img = diffeo::load_image(input);
    const diffeo::WaveletPyramid p = diffeo::fwt(img.data, img.shape, 1.0);
    if (!pyramid_out.empty()) diffeo::save_pyramid(pyramid_out, p);
    const auto back = diffeo::iwt(p);
    double err = 0.0, scale = 1e-300;
    for (std::size_t i = 0; i < back.size(); ++i) {
      err = std::max(err, std::abs(back[i] - img.data[i]));
      scale = std::max(scale, std::abs(img.data[i]));
    }
    check(err <= 1e-10 * std::max(1.0, scale), "round trip on " + input.string());
    return failures == 0 ? 0 : 1;
  }

  const std::vector<int> shape = parse_shape(shape_text);
  const std::size_t n = diffeo::element_count(shape);
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  auto next_unit = [&state]() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
  };

  double max_rt = 0.0, max_energy = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(n);
    for (double& v : x) v = next_unit();
    const diffeo::WaveletPyramid p = diffeo::fwt(x, shape, 1.0);
    const auto back = diffeo::iwt(p);
    double linf = 0.0, xinf = 1e-300, e_in = 0.0, e_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      linf = std::max(linf, std::abs(back[i] - x[i]));
      xinf = std::max(xinf, std::abs(x[i]));
      e_in += x[i] * x[i];
      e_out += p.coeffs[i] * p.coeffs[i];
    }
    max_rt = std::max(max_rt, linf / xinf);
    max_energy = std::max(max_energy, std::abs(std::sqrt(e_out) - std::sqrt(e_in)) /
                                          std::sqrt(e_in));
  }
  check(max_rt < 1e-10, "round trip over " + std::to_string(trials) + " random arrays");
  check(max_energy < 1e-10, "energy preservation at rho = 1");

  if (n <= 4096) {
    const diffeo::TransformMatrices tm = diffeo::build_transform_matrices(shape);
    double ortho = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const double fwd = tm.r[r] * tm.m_fwt[r * n + c];
        const double invT = tm.m_iwt[c * n + r] / tm.r[r];
        ortho = std::max(ortho, std::abs(invT - fwd));
      }
    check(ortho < 1e-10, "transpose(M_IWT) = M_FWT after renormalization");
  }
  return failures == 0 ? 0 : 1;
}

int cmd_metrics(const fs::path& a_path, const fs::path& b_path, const std::string& roi_text,
                const fs::path& out) {
  const diffeo::ScalarImage a = diffeo::load_image(a_path);
  const diffeo::ScalarImage b = diffeo::load_image(b_path);
  diffeo::MetricReport report;
  report.total_residual = diffeo::ssd(a, b);
  report.relative_residual = 1.0;
  report.ssim = diffeo::ssim(a, b);
  if (!roi_text.empty()) {
    diffeo::RoiBox roi = parse_roi(roi_text);
    roi.validate(a.shape);
    report.roi_residual = diffeo::roi_residual(a, b, roi);
  } else {
    report.roi_residual = report.total_residual;
  }
  report.sd_jacobian = 0.0;  // no deformation involved
  const std::string text = diffeo::metric_report_json(report) + "\n";
  std::cout << text;
  if (!out.empty()) write_text(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffeomorphic registration and atlas estimation with coarse-to-fine "
               "wavelet optimization of the initial velocity fields"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
  std::string gen_kind = "toy";
  std::string gen_out = "out";
  int gen_side = 50;
  std::string gen_shape = "32x32";
  int gen_count = 10;
  double gen_deform = 0.6;
  gen->add_option("kind", gen_kind, "toy | blobs");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--side", gen_side, "toy image side");
  gen->add_option("--shape", gen_shape, "blob image shape, e.g. 32x32");
  gen->add_option("--count", gen_count, "number of blob subjects");
  gen->add_option("--deform-scale", gen_deform, "momentum amplitude of blob warps");
  ConfigCli gen_cfg;
  gen_cfg.attach(gen);

  // register
  auto* reg = app.add_subcommand("register", "register a source image onto a target");
  std::string reg_source, reg_target, reg_out = "out", reg_roi;
  reg->add_option("source", reg_source, "source image (template)")->required();
  reg->add_option("target", reg_target, "target image")->required();
  reg->add_option("--out", reg_out, "output directory");
  reg->add_option("--roi", reg_roi, "region of interest lo0,lo1,hi0,hi1");
  ConfigCli reg_cfg;
  reg_cfg.attach(reg);

  // atlas
  auto* atl = app.add_subcommand("atlas", "estimate a template from a directory of images");
  std::string atlas_dir, atlas_out = "out";
  atl->add_option("images", atlas_dir, "directory of .pgm/.rawf images")->required();
  atl->add_option("--out", atlas_out, "output directory");
  ConfigCli atlas_cfg;
  atlas_cfg.attach(atl);

  // sweep
  auto* swp = app.add_subcommand("sweep", "toy-experiment sweeps to CSV");
  std::string sweep_scenario, sweep_out = "out";
  int sweep_side = 50;
  swp->add_option("scenario", sweep_scenario, "toy-s0-sweep | toy-kernel-sweep")->required();
  swp->add_option("--out", sweep_out, "output directory");
  swp->add_option("--side", sweep_side, "toy image side");
  ConfigCli sweep_cfg;
  sweep_cfg.attach(swp);

  // wavelet
  auto* wav = app.add_subcommand("wavelet", "wavelet transform self-test / round trip");
  std::string wav_shape = "7x5";
  int wav_trials = 50;
  std::string wav_input, wav_pyramid;
  wav->add_option("--shape", wav_shape, "array shape, e.g. 7x5 or 3x4x5");
  wav->add_option("--trials", wav_trials, "number of random arrays");
  wav->add_option("--input", wav_input, "RAWF image to transform instead");
  wav->add_option("--save-pyramid", wav_pyramid, "write the pyramid (+ .scales sidecar) here");

  // metrics
  auto* met = app.add_subcommand("metrics", "similarity metrics between two images");
  std::string met_a, met_b, met_roi, met_out;
  met->add_option("a", met_a, "first image")->required();
  met->add_option("b", met_b, "second image")->required();
  met->add_option("--roi", met_roi, "region of interest lo0,lo1,hi0,hi1");
  met->add_option("--out", met_out, "metric report JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_kind, gen_out, gen_side, gen_shape, gen_count, gen_deform,
                          gen_cfg.resolve());
    if (reg->parsed()) return cmd_register(reg_source, reg_target, reg_out, reg_roi,
                                           reg_cfg.resolve());
    if (atl->parsed()) return cmd_atlas(atlas_dir, atlas_out, atlas_cfg.resolve());
    if (swp->parsed()) return cmd_sweep(sweep_scenario, sweep_out, sweep_side,
                                        sweep_cfg.resolve());
    if (wav->parsed()) return cmd_wavelet(wav_shape, wav_trials, wav_input, wav_pyramid);
    if (met->parsed()) return cmd_metrics(met_a, met_b, met_roi, met_out);
  } catch (const std::exception& err) {
    std::cerr << "diffeo: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
