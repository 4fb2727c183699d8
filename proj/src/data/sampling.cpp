#include "mrnet/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mrnet/errors.hpp"

namespace mrnet {

std::vector<double> coords_grid(int width, int height) {
  require(width >= 1 && height >= 1, "coords_grid: resolution must be positive");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(width) * height * 2);
  for (int r = 0; r < height; ++r) {
    const double y = -1.0 + (2.0 * r + 1.0) / height;
    for (int c = 0; c < width; ++c) {
      out.push_back(-1.0 + (2.0 * c + 1.0) / width);
      out.push_back(y);
    }
  }
  return out;
}

std::vector<double> coords_grid(int res) { return coords_grid(res, res); }

void bilinear_sample(const ImageGrid& img, double x, double y, double* out) {
  // Continuous pixel coordinates with centers at integers.
  const double fx = std::clamp((x + 1.0) * 0.5 * img.width - 0.5, 0.0, img.width - 1.0);
  const double fy = std::clamp((y + 1.0) * 0.5 * img.height - 0.5, 0.0, img.height - 1.0);
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double tx = fx - x0, ty = fy - y0;
  for (int ch = 0; ch < img.channels; ++ch) {
    const double top = (1 - tx) * img.at(y0, x0, ch) + tx * img.at(y0, x1, ch);
    const double bot = (1 - tx) * img.at(y1, x0, ch) + tx * img.at(y1, x1, ch);
    out[ch] = (1 - ty) * top + ty * bot;
  }
}

SampleSet make_samples(const ImageGrid& level, int level_index, const Sampler& sampler) {
  require(level.width >= 1 && level.height >= 1, "make_samples: empty image");
  SampleSet set;
  set.channels = level.channels;
  set.level_index = level_index;
  const int c = level.channels;

  switch (sampler.kind) {
    case Sampler::Kind::regular: {
      set.coords = coords_grid(level.width, level.height);
      set.targets = level.samples;
      break;
    }
    case Sampler::Kind::subsampled: {
      const int s = sampler.stride;
      if (s < 1 || level.width % s != 0 || level.height % s != 0) {
        throw ContractViolation("make_samples: stride must divide the level resolution");
      }
      for (int r = 0; r < level.height; r += s) {
        for (int col = 0; col < level.width; col += s) {
          set.coords.push_back(-1.0 + (2.0 * col + 1.0) / level.width);
          set.coords.push_back(-1.0 + (2.0 * r + 1.0) / level.height);
          for (int ch = 0; ch < c; ++ch) set.targets.push_back(level.at(r, col, ch));
        }
      }
      break;
    }
    case Sampler::Kind::stratified: {
      std::seed_seq seq{static_cast<std::uint32_t>(sampler.seed), static_cast<std::uint32_t>(sampler.seed >> 32),
                        static_cast<std::uint32_t>(level_index)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> jitter(0.0, 1.0);
      set.coords.reserve(level.pixel_count() * 2);
      set.targets.resize(level.pixel_count() * c);
      const double cw = 2.0 / level.width, chh = 2.0 / level.height;
      std::size_t k = 0;
      for (int r = 0; r < level.height; ++r) {
        for (int col = 0; col < level.width; ++col, ++k) {
          // uniform_real_distribution is half-open, matching the cell box.
          double x = -1.0 + cw * (col + jitter(rng));
          double y = -1.0 + chh * (r + jitter(rng));
          x = std::min(x, std::nextafter(-1.0 + cw * (col + 1), -2.0));
          y = std::min(y, std::nextafter(-1.0 + chh * (r + 1), -2.0));
          set.coords.push_back(x);
          set.coords.push_back(y);
          bilinear_sample(level, x, y, set.targets.data() + k * c);
        }
      }
      break;
    }
  }
  return set;
}

}  // namespace mrnet
