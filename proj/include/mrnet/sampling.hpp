#pragma once

#include <cstdint>
#include <vector>

#include "mrnet/image.hpp"

namespace mrnet {

/// Pixel-center coordinates of a res x res grid over [-1, 1]^2, row-major,
/// each sample stored as (x, y) with x along columns and y along rows:
/// x_j = -1 + (2j + 1) / res.
std::vector<double> coords_grid(int res);
std::vector<double> coords_grid(int width, int height);

/// Training pairs drawn from one pyramid level.
struct SampleSet {
  std::vector<double> coords;   // count x 2
  std::vector<double> targets;  // count x channels
  int channels = 1;
  int level_index = 0;

  int count() const { return channels == 0 ? 0 : static_cast<int>(targets.size()) / channels; }
};

struct Sampler {
  enum class Kind { regular, subsampled, stratified };
  Kind kind = Kind::regular;
  int stride = 1;
  std::uint64_t seed = 0;

  static Sampler regular() { return {}; }
  static Sampler subsampled(int stride) { return {Kind::subsampled, stride, 0}; }
  static Sampler stratified(std::uint64_t seed) { return {Kind::stratified, 1, seed}; }
};

/// regular: every pixel center with its value. subsampled: pixels whose row
/// and column are multiples of the stride. stratified: one uniformly jittered
/// point per pixel cell, target bilinearly interpolated between pixel centers
/// (clamped at the border); deterministic per (seed, level_index).
SampleSet make_samples(const ImageGrid& level, int level_index, const Sampler& sampler);

/// Bilinear lookup at continuous coordinates in [-1, 1]^2 (pixel centers as lattice).
void bilinear_sample(const ImageGrid& img, double x, double y, double* out);

}  // namespace mrnet
