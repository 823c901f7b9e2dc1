#include "diffeo/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "diffeo/image_io.hpp"

namespace diffeo {

namespace {

struct Rgb {
  unsigned char r, g, b;
};

// Blue -> cyan -> yellow -> red ramp.
Rgb colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
  double r, g, b;
  if (t < 1.0 / 3) {
    const double u = t * 3.0;
    r = 0.0, g = lerp(0.0, 0.85, u), b = lerp(0.55, 0.85, u);
  } else if (t < 2.0 / 3) {
    const double u = (t - 1.0 / 3) * 3.0;
    r = lerp(0.0, 0.95, u), g = lerp(0.85, 0.9, u), b = lerp(0.85, 0.1, u);
  } else {
    const double u = (t - 2.0 / 3) * 3.0;
    r = lerp(0.95, 0.9, u), g = lerp(0.9, 0.05, u), b = lerp(0.1, 0.05, u);
  }
  return {static_cast<unsigned char>(std::lround(r * 255)),
          static_cast<unsigned char>(std::lround(g * 255)),
          static_cast<unsigned char>(std::lround(b * 255))};
}

void write_ppm(const std::filesystem::path& path, int height, int width,
               std::span<const Rgb> pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size() * sizeof(Rgb)));
  if (!out) throw IoError(path.string() + ": write failed");
}

void draw_line(std::vector<Rgb>& canvas, int height, int width, double x0, double y0, double x1,
               double y1, Rgb color) {
  // x = column, y = row. Plain DDA is plenty here.
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double u = static_cast<double>(i) / steps;
    const int c = static_cast<int>(std::lround(x0 + u * (x1 - x0)));
    const int r = static_cast<int>(std::lround(y0 + u * (y1 - y0)));
    if (r >= 0 && r < height && c >= 0 && c < width)
      canvas[static_cast<std::size_t>(r) * width + c] = color;
  }
}

}  // namespace

void save_norm_heatmap_ppm(const std::filesystem::path& path, const VectorField& field) {
  if (field.shape.size() != 2) throw std::invalid_argument("heatmap: 2D fields only");
  const int h = field.shape[0], w = field.shape[1];
  std::vector<double> norms(field.nodes());
  double max_norm = 0.0;
  for (std::size_t p = 0; p < norms.size(); ++p) {
    double n2 = 0.0;
    for (int a = 0; a < field.dim; ++a) {
      const double v = field.data[p * field.dim + a];
      n2 += v * v;
    }
    norms[p] = std::sqrt(n2);
    max_norm = std::max(max_norm, norms[p]);
  }
  const double inv = max_norm > 0.0 ? 1.0 / max_norm : 0.0;
  std::vector<Rgb> pixels(norms.size());
  for (std::size_t p = 0; p < norms.size(); ++p) pixels[p] = colormap(norms[p] * inv);
  write_ppm(path, h, w, pixels);
}

void save_deformation_grid_ppm(const std::filesystem::path& path,
                               std::span<const double> positions,
                               std::span<const int> grid_shape, int stride) {
  if (grid_shape.size() != 2) throw std::invalid_argument("deformation grid: 2D only");
  const int h = grid_shape[0], w = grid_shape[1];
  std::vector<Rgb> canvas(static_cast<std::size_t>(h) * w, Rgb{255, 255, 255});
  const Rgb ink{40, 40, 140};
  auto pos = [&](int r, int c, int axis) {
    return positions[(static_cast<std::size_t>(r) * w + c) * 2 + axis];
  };
  for (int r = 0; r < h; r += stride)
    for (int c = 0; c + 1 < w; ++c)
      draw_line(canvas, h, w, pos(r, c, 1), pos(r, c, 0), pos(r, c + 1, 1), pos(r, c + 1, 0), ink);
  for (int c = 0; c < w; c += stride)
    for (int r = 0; r + 1 < h; ++r)
      draw_line(canvas, h, w, pos(r, c, 1), pos(r, c, 0), pos(r + 1, c, 1), pos(r + 1, c, 0), ink);
  write_ppm(path, h, w, canvas);
}

void save_quiver_svg(const std::filesystem::path& path, std::span<const double> points,
                     std::span<const double> vectors, int dim, double scale) {
  if (dim != 2) throw std::invalid_argument("quiver: 2D only");
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  double max_x = 1.0, max_y = 1.0;
  const std::size_t n = points.size() / dim;
  for (std::size_t p = 0; p < n; ++p) {
    max_y = std::max(max_y, points[p * 2]);
    max_x = std::max(max_x, points[p * 2 + 1]);
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << max_x + 2 << ' '
      << max_y + 2 << "\">\n";
  for (std::size_t p = 0; p < n; ++p) {
    const double y = points[p * 2], x = points[p * 2 + 1];
    const double vy = vectors[p * 2] * scale, vx = vectors[p * 2 + 1] * scale;
    out << "  <circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"0.25\" fill=\"#555\"/>\n";
    if (vx != 0.0 || vy != 0.0)
      out << "  <line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + vx << "\" y2=\""
          << y + vy << "\" stroke=\"orange\" stroke-width=\"0.3\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace diffeo
