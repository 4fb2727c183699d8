#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mrnet/image.hpp"

namespace mrnet {

enum class PyramidKind { pyramid, tower };

/// Coarse-to-fine sequence of images. A pyramid doubles the side at every
/// level; a tower keeps every level at full resolution.
struct Pyramid {
  PyramidKind kind = PyramidKind::pyramid;
  std::vector<ImageGrid> levels;

  int size() const { return static_cast<int>(levels.size()); }
  const ImageGrid& finest() const { return levels.back(); }
};

/// 5-tap binomial (1,4,6,4,1)/16, separable, half-sample mirror borders.
inline constexpr double kBinomial5[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

/// Maps an out-of-range index onto [0, n) by half-sample reflection
/// (..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...).
int mirror_index(int i, int n);

/// Binomial blur with taps spaced `dilation` samples apart, full resolution.
ImageGrid binomial_blur(const ImageGrid& grid, int dilation = 1);

/// Blur then keep even-indexed rows and columns. Width and height must be even.
ImageGrid gaussian_reduce(const ImageGrid& grid);

/// Repeated reduction down to `base_res`; the input must be square with a
/// power-of-two side >= base_res.
Pyramid build_pyramid(const ImageGrid& grid, int base_res = 8);

/// Undecimated counterpart of build_pyramid: level k (of n, coarse first) is
/// the input blurred with the dilated kernels 1, 2, ..., 2^(n-k-2) (a trous),
/// so each coarser level doubles the blur scale. The finest level is the input.
Pyramid build_tower(const ImageGrid& grid, int num_levels);

/// Levels a pyramid from `side` down to `base_res` would have.
int pyramid_level_count(int side, int base_res);

enum class FitPolicy { pad, crop };
FitPolicy parse_fit_policy(const std::string& s);

/// Makes the image square with a power-of-two side: `pad` mirror-pads up to
/// the next power of two >= max(w, h); `crop` center-crops to the largest
/// power of two <= min(w, h).
ImageGrid fit_to_power_of_two(const ImageGrid& grid, FitPolicy policy);

/// Writes level_0.<ext>, level_1.<ext>, ... (coarse first) into `dir`.
void export_levels(const Pyramid& p, const std::filesystem::path& dir, const std::string& ext = ".png");

bool is_power_of_two(int n);

}  // namespace mrnet
