#include "diffeo/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "RAWF payloads are little-endian; byte swapping is not implemented");

namespace diffeo {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw IoError(path.string() + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  return in;
}

}  // namespace

void save_rawf(const std::filesystem::path& path, std::span<const int> shape,
               std::span<const double> data) {
  if (element_count(shape) != data.size())
    throw IoError(path.string() + ": data length does not match shape");
  std::ofstream out = open_out(path);
  out << "RAWF " << shape.size();
  for (int k : shape) out << ' ' << k;
  out << '\n';
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) fail(path, "write failed");
}

void load_rawf(const std::filesystem::path& path, std::vector<int>& shape,
               std::vector<double>& data) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header)) fail(path, "missing RAWF header");
  std::istringstream hs(header);
  std::string magic;
  int d = 0;
  if (!(hs >> magic >> d) || magic != "RAWF") fail(path, "malformed RAWF header: " + header);
  if (d < 1 || d > 8) fail(path, "unsupported RAWF rank " + std::to_string(d));
  shape.assign(d, 0);
  for (int a = 0; a < d; ++a) {
    if (!(hs >> shape[a]) || shape[a] < 1) fail(path, "malformed RAWF extents: " + header);
  }
  std::string trailing;
  if (hs >> trailing) fail(path, "trailing tokens in RAWF header: " + header);

  const std::size_t n = element_count(shape);
  data.assign(n, 0.0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
    fail(path, "payload shorter than header shape implies");
  char extra;
  if (in.read(&extra, 1)) fail(path, "payload longer than header shape implies");
}

ScalarImage load_rawf_image(const std::filesystem::path& path) {
  ScalarImage img;
  load_rawf(path, img.shape, img.data);
  return img;
}

void save_rawf_image(const std::filesystem::path& path, const ScalarImage& img) {
  save_rawf(path, img.shape, img.data);
}

namespace {

int read_pgm_token(std::istream& in, const std::filesystem::path& path) {
  // Whitespace-separated ASCII integer, with '#' comment lines.
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF) fail(path, "truncated PGM header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) fail(path, "malformed PGM header");
  return value;
}

}  // namespace

ScalarImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') fail(path, "not a binary PGM (P5) file");
  const int width = read_pgm_token(in, path);
  const int height = read_pgm_token(in, path);
  const int maxval = read_pgm_token(in, path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    fail(path, "invalid PGM dimensions or maxval");
  // One whitespace byte separates the header from the raster.
  ScalarImage img({height, width});
  const std::size_t n = img.size();
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail(path, "truncated PGM raster");
  const double inv = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 1 ? raw[i]
                                  : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img[i] = static_cast<double>(v) * inv;
  }
  return img;
}

void save_pgm(const std::filesystem::path& path, const ScalarImage& img, int maxval) {
  if (img.dim() != 2) throw IoError(path.string() + ": PGM output requires a 2D image");
  if (maxval < 1 || maxval > 65535) throw IoError(path.string() + ": invalid PGM maxval");
  std::ofstream out = open_out(path);
  out << "P5\n" << img.shape[1] << ' ' << img.shape[0] << '\n' << maxval << '\n';
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(img.size() * bytes);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double clamped = std::clamp(img[i], 0.0, 1.0);
    const unsigned v = static_cast<unsigned>(std::lround(clamped * maxval));
    if (bytes == 1) {
      raw[i] = static_cast<unsigned char>(v);
    } else {
      raw[2 * i] = static_cast<unsigned char>(v >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

ScalarImage load_image(const std::filesystem::path& path) {
  return path.extension() == ".pgm" ? load_pgm(path) : load_rawf_image(path);
}

void save_image(const std::filesystem::path& path, const ScalarImage& img) {
  if (path.extension() == ".pgm")
    save_pgm(path, img);
  else
    save_rawf_image(path, img);
}

}  // namespace diffeo
