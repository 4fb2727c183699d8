#pragma once

#include <array>
#include <span>
#include <vector>

#include "mrnet/image.hpp"
#include "mrnet/mrnet.hpp"

namespace mrnet {

/// Projective map from normalized screen coordinates (x, y, 1) in [-1, 1]^2 to
/// homogeneous texture coordinates (u, v, w); the texture point is (u/w, v/w).
/// Row-major 3x3.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography from_row_major(std::span<const double> values);

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r) * 3 + c]; }
  double determinant() const;
  /// Throws ContractViolation for a singular or non-finite matrix.
  void validate() const;
  /// Homogeneous denominator w at a normalized screen point.
  double denominator(double x, double y) const { return m[6] * x + m[7] * y + m[8]; }
  /// Maps a normalized screen point; throws DomainError when w == 0.
  std::array<double, 2> apply(double x, double y) const;
};

/// Stage weights for a fractional level: 1 for stages <= floor(level), the
/// fractional part on the next stage, 0 after. `level` is clamped to [1, N].
std::vector<double> lod_weights(double level, int num_stages);

/// Output region in normalized coordinates; the default covers the whole texture.
struct Window {
  double x0 = -1.0, y0 = -1.0, x1 = 1.0, y1 = 1.0;
};

/// Pixel-center coordinates of an out_res x out_res grid over a window.
std::vector<double> window_coords(int out_res, const Window& win);

/// Raw (unclamped) network output at out_res x out_res pixel centers with the
/// weights of `level`.
ImageGrid reconstruct_raw(const MRNet& net, int out_res, double level, const Window& win = {});

/// reconstruct_raw clamped to [0, 1] for export.
ImageGrid reconstruct(const MRNet& net, int out_res, double level, const Window& win = {});

/// Minification: renders the whole texture at out_res using the level picked
/// for a footprint of source_res / out_res texels per pixel.
ImageGrid minify(const MRNet& net, int source_res, int out_res);

/// Texel footprint of a screen pixel: the longer of the two screen-axis
/// derivative vectors of the texture map, in texels per screen pixel.
/// (px, py) are continuous screen pixel coordinates (centers at j + 0.5).
double heckbert_lambda(const Homography& h, double px, double py, int screen_res, int tex_res);

enum class LevelMapping {
  octave,  // N - log2(max(lambda, 1)): one level per doubling of the footprint
  linear,  // affine rescale of the frame's lambda range onto [0, N]
};

/// Footprint to fractional level, clamped to [1, N].
double lambda_to_level(double lambda, int num_stages);

/// Linear mapping: lambda_min maps to N and lambda_max to 0, then clamped to [1, N].
double lambda_to_level_linear(double lambda, double lambda_min, double lambda_max, int num_stages);

struct WarpOptions {
  int out_res = 256;
  bool antialias = false;
  /// Texture resolution used for texel units; 0 means the finest training level
  /// implied by the stage count and base_res.
  int tex_res = 0;
  int base_res = 8;
  LevelMapping mapping = LevelMapping::octave;
  double background = 0.0;
};

/// Per-pixel level of detail over the screen, plus the derived weights.
struct LodField {
  int res = 0;
  std::vector<double> lambda;  // res x res, texels per pixel
  std::vector<double> level;   // res x res, fractional level in [1, N]
};

LodField compute_lod_field(const Homography& h, int num_stages, const WarpOptions& opt);

/// Renders the texture seen through `h`. Screen pixels whose texture point
/// falls outside [-1, 1]^2 get the background value. With antialias, each
/// pixel blends stages by its own level of detail; otherwise all stages are used.
ImageGrid warp_render(const MRNet& net, const Homography& h, const WarpOptions& opt);

/// Texture resolution implied by a net trained on a dyadic pyramid.
int finest_resolution(const MRNet& net, int base_res);

}  // namespace mrnet
