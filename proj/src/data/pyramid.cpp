#include "mrnet/pyramid.hpp"

#include <algorithm>
#include <cmath>

#include "mrnet/errors.hpp"

namespace mrnet {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int mirror_index(int i, int n) {
  require(n >= 1, "mirror_index: empty axis");
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

namespace {

// One separable pass along rows (horizontal) or columns (vertical).
void blur_pass(const ImageGrid& src, ImageGrid& dst, int dilation, bool horizontal) {
  const int w = src.width, h = src.height, c = src.channels;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) {
          const double k = kBinomial5[t + 2];
          if (horizontal) {
            acc += k * src.at(r, mirror_index(col + t * dilation, w), ch);
          } else {
            acc += k * src.at(mirror_index(r + t * dilation, h), col, ch);
          }
        }
        dst.at(r, col, ch) = acc;
      }
    }
  }
}

}  // namespace

ImageGrid binomial_blur(const ImageGrid& grid, int dilation) {
  require(dilation >= 1, "binomial_blur: dilation must be positive");
  ImageGrid tmp(grid.width, grid.height, grid.channels);
  ImageGrid out(grid.width, grid.height, grid.channels);
  blur_pass(grid, tmp, dilation, true);
  blur_pass(tmp, out, dilation, false);
  // Rounding can push a convex combination a hair past [0, 1].
  for (double& v : out.samples) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ImageGrid gaussian_reduce(const ImageGrid& grid) {
  if (grid.width % 2 != 0 || grid.height % 2 != 0) {
    throw ContractViolation("gaussian_reduce: width and height must be even");
  }
  const ImageGrid blurred = binomial_blur(grid, 1);
  ImageGrid out(grid.width / 2, grid.height / 2, grid.channels);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int ch = 0; ch < grid.channels; ++ch) out.at(r, c, ch) = blurred.at(2 * r, 2 * c, ch);
    }
  }
  return out;
}

int pyramid_level_count(int side, int base_res) {
  require(is_power_of_two(base_res), "pyramid: base resolution must be a power of two");
  require(is_power_of_two(side), "pyramid: image side must be a power of two");
  require(side >= base_res, "pyramid: image is smaller than the base resolution");
  int levels = 1;
  for (int s = side; s > base_res; s /= 2) ++levels;
  return levels;
}

Pyramid build_pyramid(const ImageGrid& grid, int base_res) {
  require(grid.width == grid.height, "build_pyramid: image must be square");
  const int levels = pyramid_level_count(grid.width, base_res);
  Pyramid p;
  p.kind = PyramidKind::pyramid;
  p.levels.resize(levels);
  p.levels[levels - 1] = grid;
  for (int k = levels - 1; k > 0; --k) p.levels[k - 1] = gaussian_reduce(p.levels[k]);
  return p;
}

Pyramid build_tower(const ImageGrid& grid, int num_levels) {
  require(num_levels >= 1, "build_tower: need at least one level");
  Pyramid p;
  p.kind = PyramidKind::tower;
  p.levels.resize(num_levels);
  p.levels[num_levels - 1] = grid;
  int dilation = 1;
  for (int k = num_levels - 1; k > 0; --k) {
    p.levels[k - 1] = binomial_blur(p.levels[k], dilation);
    dilation *= 2;
  }
  return p;
}

FitPolicy parse_fit_policy(const std::string& s) {
  if (s == "pad") return FitPolicy::pad;
  if (s == "crop") return FitPolicy::crop;
  throw ContractViolation("unknown fit policy '" + s + "' (expected pad or crop)");
}

ImageGrid fit_to_power_of_two(const ImageGrid& grid, FitPolicy policy) {
  if (grid.width == grid.height && is_power_of_two(grid.width)) return grid;
  int side = 1;
  if (policy == FitPolicy::pad) {
    const int target = std::max(grid.width, grid.height);
    while (side < target) side *= 2;
  } else {
    const int limit = std::min(grid.width, grid.height);
    while (side * 2 <= limit) side *= 2;
  }
  // Center the source in the output frame (negative offsets crop).
  const int off_x = (side - grid.width) / 2;
  const int off_y = (side - grid.height) / 2;
  ImageGrid out(side, side, grid.channels);
  for (int r = 0; r < side; ++r) {
    const int sr = mirror_index(r - off_y, grid.height);
    for (int c = 0; c < side; ++c) {
      const int sc = mirror_index(c - off_x, grid.width);
      for (int ch = 0; ch < grid.channels; ++ch) out.at(r, c, ch) = grid.at(sr, sc, ch);
    }
  }
  return out;
}

void export_levels(const Pyramid& p, const std::filesystem::path& dir, const std::string& ext) {
  std::filesystem::create_directories(dir);
  for (int k = 0; k < p.size(); ++k) {
    save_image(p.levels[k], dir / ("level_" + std::to_string(k) + ext));
  }
}

}  // namespace mrnet
