#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "diffeo/grid.hpp"

namespace diffeo {

/// Raised for malformed headers, truncated payloads and unwritable paths.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// RAWF: ASCII header line "RAWF d k1 ... kd" followed by the row-major
/// payload as little-endian 64-bit floats. The canonical interchange format
/// for templates, momenta dumps and deformed outputs; round-trips are
/// bit-exact.
void save_rawf(const std::filesystem::path& path, std::span<const int> shape,
               std::span<const double> data);
void load_rawf(const std::filesystem::path& path, std::vector<int>& shape,
               std::vector<double>& data);

ScalarImage load_rawf_image(const std::filesystem::path& path);
void save_rawf_image(const std::filesystem::path& path, const ScalarImage& img);

/// Binary PGM (P5), 8- or 16-bit. Intensities are mapped to [0,1] on load
/// by dividing by maxval; save clamps to [0,1] and quantizes.
ScalarImage load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const ScalarImage& img, int maxval = 255);

/// Dispatch on extension: .pgm -> PGM, anything else -> RAWF.
ScalarImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ScalarImage& img);

}  // namespace diffeo
