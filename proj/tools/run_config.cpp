#include "run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("invalid boolean value: " + v);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "sigma_g")
      sigma_g = std::stod(value);
    else if (key == "sigma_eps")
      sigma_eps = std::stod(value);
    else if (key == "h0")
      h0 = std::stod(value);
    else if (key == "conv_threshold")
      conv_threshold = std::stod(value);
    else if (key == "min_iters_per_scale")
      min_iters_per_scale = std::stoi(value);
    else if (key == "s0")
      s0 = std::stoi(value);
    else if (key == "max_iters")
      max_iters = std::stoi(value);
    else if (key == "t_steps")
      t_steps = std::stoi(value);
    else if (key == "kernel_cutoff")
      kernel_cutoff = std::stod(value);
    else if (key == "freeze_template")
      freeze_template = parse_bool(value);
    else if (key == "seed")
      seed = std::stoull(value);
    else if (key == "emit_grids")
      emit_grids = parse_bool(value);
    else if (key == "emit_heatmaps")
      emit_heatmaps = parse_bool(value);
    else if (key == "emit_trace")
      emit_trace = parse_bool(value);
    else
      throw std::invalid_argument("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid value for " + key + ": " + value);
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config file");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "# resolved configuration (diffeo " << kDiffeoVersion << ")\n";
  os << "sigma_g = " << sigma_g << '\n';
  os << "sigma_eps = " << sigma_eps << '\n';
  os << "h0 = " << h0 << '\n';
  os << "conv_threshold = " << conv_threshold << '\n';
  os << "min_iters_per_scale = " << min_iters_per_scale << '\n';
  os << "s0 = " << s0 << '\n';
  os << "max_iters = " << max_iters << '\n';
  os << "t_steps = " << t_steps << '\n';
  os << "kernel_cutoff = " << kernel_cutoff << '\n';
  os << "freeze_template = " << (freeze_template ? "true" : "false") << '\n';
  os << "seed = " << seed << '\n';
  os << "emit_grids = " << (emit_grids ? "true" : "false") << '\n';
  os << "emit_heatmaps = " << (emit_heatmaps ? "true" : "false") << '\n';
  os << "emit_trace = " << (emit_trace ? "true" : "false") << '\n';
  return os.str();
}

diffeo::OptimizerConfig RunConfig::optimizer() const {
  diffeo::OptimizerConfig cfg;
  cfg.h0 = h0;
  cfg.sigma_eps = sigma_eps;
  cfg.conv_threshold = conv_threshold;
  cfg.min_iters_per_scale = min_iters_per_scale;
  cfg.s0 = s0;
  cfg.max_iters = max_iters;
  cfg.t_steps = t_steps;
  cfg.freeze_template = freeze_template;
  cfg.sigma_g = sigma_g;
  cfg.kernel_cutoff = kernel_cutoff;
  return cfg;
}
