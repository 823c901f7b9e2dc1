#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "diffeo/image_io.hpp"
#include "support/oracles.hpp"

using namespace diffeo;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "diffeo_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("RAWF round-trip is bit-identical") {
  oracles::Rng rng(2024);
  ScalarImage img({7, 5});
  for (double& v : img.data) v = rng.uniform(-1e6, 1e6);
  img.data[3] = 0.1 + 0.2;  // not exactly representable sums survive too
  const fs::path p = temp_file("roundtrip.rawf");
  save_rawf_image(p, img);
  const ScalarImage back = load_rawf_image(p);
  REQUIRE(back.shape == img.shape);
  CHECK(std::memcmp(back.data.data(), img.data.data(), img.size() * sizeof(double)) == 0);
}

TEST_CASE("RAWF header/payload errors") {
  const fs::path p = temp_file("bad.rawf");
  {
    std::ofstream out(p, std::ios::binary);
    out << "RAWF 2 3 4\n";
    double payload[11] = {};
    out.write(reinterpret_cast<const char*>(payload), sizeof(payload));
  }
  CHECK_THROWS_AS(load_rawf_image(p), IoError);  // 11 floats for a 3x4 shape

  {
    std::ofstream out(p, std::ios::binary);
    out << "RAWF 2 3 4\n";
    double payload[13] = {};
    out.write(reinterpret_cast<const char*>(payload), sizeof(payload));
  }
  CHECK_THROWS_AS(load_rawf_image(p), IoError);  // one float too many

  {
    std::ofstream out(p, std::ios::binary);
    out << "RAWX 2 3 4\n";
  }
  CHECK_THROWS_AS(load_rawf_image(p), IoError);
  CHECK_THROWS_AS(load_rawf_image(temp_file("missing.rawf")), IoError);
}

TEST_CASE("PGM maxval endpoints map to [0,1]") {
  ScalarImage img({2, 3});
  img.data = {0.0, 1.0, 0.5, 0.25, 0.75, 1.0};
  const fs::path p = temp_file("gray.pgm");
  save_pgm(p, img, 255);
  const ScalarImage back = load_pgm(p);
  CHECK(back[0] == doctest::Approx(0.0));
  CHECK(back[1] == doctest::Approx(1.0));  // pixel 255 at maxval 255
  CHECK(back[2] == doctest::Approx(0.5).epsilon(1e-2));

  save_pgm(p, img, 65535);
  const ScalarImage back16 = load_pgm(p);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back16[i] == doctest::Approx(img[i]).epsilon(1e-4));
}

TEST_CASE("PGM header parsing with comments") {
  const fs::path p = temp_file("comment.pgm");
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n# a comment\n2 2\n255\n";
    const unsigned char raster[4] = {0, 128, 255, 64};
    out.write(reinterpret_cast<const char*>(raster), 4);
  }
  const ScalarImage img = load_pgm(p);
  REQUIRE(img.shape == std::vector<int>{2, 2});
  CHECK(img[2] == doctest::Approx(1.0));
}

TEST_CASE("load_image dispatches on extension") {
  ScalarImage img({3, 3}, 0.5);
  const fs::path pr = temp_file("dispatch.rawf");
  save_image(pr, img);
  CHECK(load_image(pr).shape == img.shape);
  const fs::path pg = temp_file("dispatch.pgm");
  save_image(pg, img);
  CHECK(load_image(pg).shape == img.shape);
}
