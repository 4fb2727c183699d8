#include "mrnet/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mrnet/errors.hpp"
#include "mrnet/sampling.hpp"

namespace mrnet {

Homography Homography::from_row_major(std::span<const double> values) {
  require(values.size() == 9, "homography needs exactly 9 values");
  Homography h;
  std::copy(values.begin(), values.end(), h.m.begin());
  h.validate();
  return h;
}

double Homography::determinant() const {
  const auto& a = m;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

void Homography::validate() const {
  for (double v : m) require(std::isfinite(v), "homography has a non-finite entry");
  double scale = 0.0;
  for (double v : m) scale = std::max(scale, std::abs(v));
  require(scale > 0.0 && std::abs(determinant()) > 1e-12 * scale * scale * scale, "homography is singular");
}

std::array<double, 2> Homography::apply(double x, double y) const {
  const double w = denominator(x, y);
  if (w == 0.0) throw DomainError("homography maps the point to infinity (horizon)");
  return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

std::vector<double> lod_weights(double level, int num_stages) {
  require(num_stages >= 1, "lod_weights: need at least one stage");
  require(!std::isnan(level), "lod_weights: level is NaN");
  level = std::clamp(level, 1.0, static_cast<double>(num_stages));
  const int whole = static_cast<int>(std::floor(level));
  std::vector<double> w(num_stages, 0.0);
  std::fill_n(w.begin(), whole, 1.0);
  if (whole < num_stages) w[whole] = level - whole;
  return w;
}

std::vector<double> window_coords(int out_res, const Window& win) {
  require(out_res >= 1, "window_coords: resolution must be positive");
  if (win.x0 == -1.0 && win.y0 == -1.0 && win.x1 == 1.0 && win.y1 == 1.0) return coords_grid(out_res);
  require(win.x1 > win.x0 && win.y1 > win.y0, "window_coords: empty window");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(out_res) * out_res * 2);
  for (int r = 0; r < out_res; ++r) {
    const double y = win.y0 + (win.y1 - win.y0) * (2.0 * r + 1.0) / (2.0 * out_res);
    for (int c = 0; c < out_res; ++c) {
      out.push_back(win.x0 + (win.x1 - win.x0) * (2.0 * c + 1.0) / (2.0 * out_res));
      out.push_back(y);
    }
  }
  return out;
}

ImageGrid reconstruct_raw(const MRNet& net, int out_res, double level, const Window& win) {
  require(net.num_stages() >= 1, "reconstruct: network has no stages");
  require(net.input_dim == 2, "reconstruct: image reconstruction needs a 2-D input");
  require(out_res >= 1, "reconstruct: resolution must be positive");
  ImageGrid img(out_res, out_res, net.channels);
  img.samples = forward(net, window_coords(out_res, win), lod_weights(level, net.num_stages()));
  return img;
}

ImageGrid reconstruct(const MRNet& net, int out_res, double level, const Window& win) {
  return clamped(reconstruct_raw(net, out_res, level, win));
}

ImageGrid minify(const MRNet& net, int source_res, int out_res) {
  require(source_res >= 1 && out_res >= 1, "minify: resolutions must be positive");
  const double footprint = static_cast<double>(source_res) / out_res;
  return reconstruct(net, out_res, lambda_to_level(footprint, net.num_stages()));
}

double heckbert_lambda(const Homography& h, double px, double py, int screen_res, int tex_res) {
  require(screen_res >= 1 && tex_res >= 1, "heckbert_lambda: resolutions must be positive");
  const double x = -1.0 + 2.0 * px / screen_res;
  const double y = -1.0 + 2.0 * py / screen_res;
  const double w = h.denominator(x, y);
  if (w == 0.0) throw DomainError("heckbert_lambda: pixel lies on the projective horizon");
  const double u = (h.m[0] * x + h.m[1] * y + h.m[2]) / w;
  const double v = (h.m[3] * x + h.m[4] * y + h.m[5]) / w;
  // Quotient rule on the normalized map, then texels per screen pixel.
  const double units = static_cast<double>(tex_res) / screen_res;
  const double du_dx = (h.m[0] - u * h.m[6]) / w * units;
  const double dv_dx = (h.m[3] - v * h.m[6]) / w * units;
  const double du_dy = (h.m[1] - u * h.m[7]) / w * units;
  const double dv_dy = (h.m[4] - v * h.m[7]) / w * units;
  return std::max(std::hypot(du_dx, dv_dx), std::hypot(du_dy, dv_dy));
}

double lambda_to_level(double lambda, int num_stages) {
  require(num_stages >= 1, "lambda_to_level: need at least one stage");
  require(lambda > 0.0, "lambda_to_level: footprint must be positive");
  const double n = num_stages;
  return std::clamp(n - std::log2(std::max(lambda, 1.0)), 1.0, n);
}

double lambda_to_level_linear(double lambda, double lambda_min, double lambda_max, int num_stages) {
  require(num_stages >= 1, "lambda_to_level_linear: need at least one stage");
  const double n = num_stages;
  if (!(lambda_max > lambda_min)) return n;
  const double t = (lambda - lambda_min) / (lambda_max - lambda_min);
  return std::clamp(n * (1.0 - t), 1.0, n);
}

int finest_resolution(const MRNet& net, int base_res) {
  require(base_res >= 1, "finest_resolution: base resolution must be positive");
  require(net.num_stages() >= 1 && net.num_stages() <= 24, "finest_resolution: unsupported stage count");
  return base_res << (net.num_stages() - 1);
}

namespace {

// Every screen pixel must see the plane on the same side of the horizon.
void check_horizon(const Homography& h, int res) {
  int positive = 0, negative = 0;
  std::vector<double> ws(static_cast<std::size_t>(res) * res);
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const double w = h.denominator(-1.0 + (2.0 * c + 1.0) / res, -1.0 + (2.0 * r + 1.0) / res);
      ws[static_cast<std::size_t>(r) * res + c] = w;
      if (w > 0.0) ++positive;
      if (w < 0.0) ++negative;
    }
  }
  const int total = res * res;
  const bool pos_side = positive >= negative;
  if ((pos_side ? positive : negative) == total) return;
  std::ostringstream msg;
  msg << "warp: projective horizon crosses the rendered domain; "
      << total - (pos_side ? positive : negative) << " offending pixel(s), e.g.";
  int listed = 0;
  for (int k = 0; k < total && listed < 8; ++k) {
    const double w = ws[k];
    if (pos_side ? w > 0.0 : w < 0.0) continue;
    msg << " (x=" << k % res << ", y=" << k / res << ")";
    ++listed;
  }
  throw DomainError(msg.str());
}

}  // namespace

LodField compute_lod_field(const Homography& h, int num_stages, const WarpOptions& opt) {
  h.validate();
  require(opt.out_res >= 1, "warp: output resolution must be positive");
  const int res = opt.out_res;
  const int tex_res = opt.tex_res > 0 ? opt.tex_res : opt.base_res << (num_stages - 1);
  check_horizon(h, res);
  LodField f;
  f.res = res;
  f.lambda.resize(static_cast<std::size_t>(res) * res);
  f.level.resize(f.lambda.size());
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      f.lambda[static_cast<std::size_t>(r) * res + c] = heckbert_lambda(h, c + 0.5, r + 0.5, res, tex_res);
    }
  }
  if (opt.mapping == LevelMapping::octave) {
    for (std::size_t k = 0; k < f.lambda.size(); ++k) f.level[k] = lambda_to_level(f.lambda[k], num_stages);
  } else {
    const auto [lo, hi] = std::minmax_element(f.lambda.begin(), f.lambda.end());
    for (std::size_t k = 0; k < f.lambda.size(); ++k) {
      f.level[k] = lambda_to_level_linear(f.lambda[k], *lo, *hi, num_stages);
    }
  }
  return f;
}

ImageGrid warp_render(const MRNet& net, const Homography& h, const WarpOptions& opt) {
  require(net.input_dim == 2, "warp: image rendering needs a 2-D input");
  const int n = net.num_stages();
  const LodField field = compute_lod_field(h, n, opt);
  const int res = opt.out_res;

  std::vector<double> coords;
  std::vector<double> weights;
  std::vector<std::size_t> where;
  const std::vector<double> all_ones(n, 1.0);
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const auto [u, v] = h.apply(-1.0 + (2.0 * c + 1.0) / res, -1.0 + (2.0 * r + 1.0) / res);
      if (!(std::abs(u) <= 1.0 && std::abs(v) <= 1.0)) continue;
      const std::size_t k = static_cast<std::size_t>(r) * res + c;
      where.push_back(k);
      coords.push_back(u);
      coords.push_back(v);
      if (opt.antialias) {
        const auto w = lod_weights(field.level[k], n);
        weights.insert(weights.end(), w.begin(), w.end());
      } else {
        weights.insert(weights.end(), all_ones.begin(), all_ones.end());
      }
    }
  }
  ImageGrid img(res, res, net.channels, opt.background);
  if (where.empty()) return img;
  const auto values = forward_varying(net, coords, weights);
  const int ch = net.channels;
  for (std::size_t q = 0; q < where.size(); ++q) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(q) * ch, ch,
                img.samples.begin() + static_cast<std::ptrdiff_t>(where[q]) * ch);
  }
  return clamped(std::move(img));
}

}  // namespace mrnet
