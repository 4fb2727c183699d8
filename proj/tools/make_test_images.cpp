// Regenerates the test images committed under data/.
//
//   mrnet_make_test_images <output-dir>

#include <filesystem>
#include <iostream>

#include "mrnet/image.hpp"

namespace {

// Checkerboard over a diagonal ramp: sharp edges at every scale plus a
// low-frequency component the coarse stages can carry.
mrnet::ImageGrid desk_composite(int side, int square) {
  mrnet::ImageGrid img(side, side, 1);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const bool dark = ((r / square) + (c / square)) % 2 == 0;
      const double ramp = static_cast<double>(r + c) / (2.0 * (side - 1));
      img.at(r, c) = 0.1 + (dark ? 0.0 : 0.4) + 0.5 * ramp;
    }
  }
  return img;
}

mrnet::ImageGrid checkerboard(int side, int square) {
  mrnet::ImageGrid img(side, side, 1);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) img.at(r, c) = ((r / square) + (c / square)) % 2 == 0 ? 0.0 : 1.0;
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: mrnet_make_test_images <output-dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  mrnet::save_image(desk_composite(128, 16), dir / "desk128.pgm");
  mrnet::save_image(checkerboard(64, 8), dir / "checker64.pgm");
  std::cout << "wrote desk128.pgm and checker64.pgm to " << dir << "\n";
  return 0;
}
