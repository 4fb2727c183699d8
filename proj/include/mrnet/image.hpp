#pragma once

#include <filesystem>
#include <vector>

namespace mrnet {

/// Row-major, channel-interleaved image with intensities in [0, 1].
struct ImageGrid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> samples;

  ImageGrid() = default;
  ImageGrid(int w, int h, int c, double fill = 0.0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double& at(int row, int col, int ch = 0) {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  double at(int row, int col, int ch = 0) const {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  bool same_shape(const ImageGrid& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  /// Throws ImageError unless the sample count matches and every value is in [0, 1].
  void validate() const;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Clamps every sample into [0, 1] (used when exporting network output).
ImageGrid clamped(ImageGrid grid);

/// PNG (8/16-bit gray, gray+alpha, RGB, RGBA) and binary PGM/PPM (P5/P6,
/// maxval up to 65535). Alpha is dropped. Codes are divided by the maximum code.
ImageGrid load_image(const std::filesystem::path& path);

/// Writes by extension: .png, .pgm or .ppm. Values are rounded to the
/// nearest code of the given bit depth (8 or 16).
void save_image(const ImageGrid& grid, const std::filesystem::path& path, int bit_depth = 8);

}  // namespace mrnet
