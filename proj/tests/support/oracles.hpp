#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the library's numeric code paths; only plain data accessors are used.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mrnet/image.hpp"
#include "mrnet/mrnet.hpp"
#include "mrnet/rendering.hpp"

namespace oracle {

// ---- network

template <class T = double>
std::vector<T> dense(const mrnet::DenseLayer& l, const std::vector<T>& x) {
  std::vector<T> y(l.out_dim());
  for (int r = 0; r < l.out_dim(); ++r) {
    T acc = l.bias()[r];
    for (int c = 0; c < l.in_dim(); ++c) acc += static_cast<T>(l.weight(r, c)) * x[c];
    y[r] = acc;
  }
  return y;
}

template <class T = double>
std::vector<T> sine(std::vector<T> v, double scale) {
  for (T& e : v) e = std::sin(static_cast<T>(scale) * e);
  return v;
}

/// Scalar-loop evaluation of every stage output g_k at one input point.
/// T = long double gives a reference with more precision than the network.
template <class T = double>
std::vector<std::vector<T>> stage_outputs(const mrnet::MRNet& net, const std::vector<T>& x) {
  std::vector<std::vector<T>> out;
  std::vector<T> prev_hidden;
  for (int k = 0; k < net.num_stages(); ++k) {
    const auto& s = net.stages[k];
    std::vector<T> h = sine<T>(dense<T>(s.first, x), 1.0);
    if (net.variant == mrnet::Variant::M && k > 0 && !s.hidden.empty()) {
      if (net.wiring == mrnet::Wiring::concat) {
        h.insert(h.end(), prev_hidden.begin(), prev_hidden.end());
      } else {
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += prev_hidden[i];
      }
    }
    for (const auto& layer : s.hidden) h = sine<T>(dense<T>(layer, h), s.omega_g);
    prev_hidden = h;
    out.push_back(dense<T>(s.linear, h));
  }
  return out;
}

/// Closed-form parameter count.
inline std::size_t param_count(mrnet::Variant v, mrnet::Wiring w, int width, int hidden, int in, int ch,
                               int stages) {
  const std::size_t W = width;
  const std::size_t first = W * in + W;
  const std::size_t linear = static_cast<std::size_t>(ch) * W + ch;
  if (v == mrnet::Variant::S) return stages * (first + linear);
  const std::size_t deep = (hidden - 1) * (W * W + W);
  const std::size_t plain = first + (W * W + W) + deep + linear;
  if (v == mrnet::Variant::L || w == mrnet::Wiring::add) return stages * plain;
  const std::size_t chained = first + (2 * W * W + W) + deep + linear;
  return plain + (stages - 1) * chained;
}

// ---- images

inline int reflect(int i, int n) {
  // Half-sample symmetric extension with period 2n.
  const int period = 2 * n;
  int m = ((i % period) + period) % period;
  return m < n ? m : period - 1 - m;
}

/// Direct 2-D 5x5 convolution with the outer-product binomial kernel, then
/// even-index decimation.
inline mrnet::ImageGrid reduce(const mrnet::ImageGrid& g) {
  const double k[5] = {1, 4, 6, 4, 1};
  mrnet::ImageGrid out(g.width / 2, g.height / 2, g.channels);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int ch = 0; ch < g.channels; ++ch) {
        double acc = 0.0;
        for (int i = -2; i <= 2; ++i) {
          for (int j = -2; j <= 2; ++j) {
            acc += k[i + 2] * k[j + 2] * g.at(reflect(2 * r + i, g.height), reflect(2 * c + j, g.width), ch);
          }
        }
        out.at(r, c, ch) = acc / 256.0;
      }
    }
  }
  return out;
}

inline double psnr(const mrnet::ImageGrid& a, const mrnet::ImageGrid& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) acc += (a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
  const double mse = acc / a.samples.size();
  return mse == 0.0 ? 200.0 : std::min(200.0, -10.0 * std::log10(mse));
}

// ---- footprints

/// Forward-mode dual number: value plus two partials.
struct Dual {
  double v, dx, dy;
};
inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dx + b.dx, a.dy + b.dy}; }
inline Dual operator*(double s, Dual a) { return {s * a.v, s * a.dx, s * a.dy}; }
inline Dual operator/(Dual a, Dual b) {
  return {a.v / b.v, (a.dx * b.v - a.v * b.dx) / (b.v * b.v), (a.dy * b.v - a.v * b.dy) / (b.v * b.v)};
}

/// Texel footprint from exact derivatives of the pixel-to-texel map
/// T(px, py) = (u(x, y) + 1) * tex / 2 with x = -1 + 2 px / screen.
inline double footprint(const mrnet::Homography& h, double px, double py, int screen, int tex) {
  const Dual PX{px, 1, 0}, PY{py, 0, 1};
  const Dual one{1, 0, 0};
  const Dual x = (2.0 / screen) * PX + (-1.0) * one;
  const Dual y = (2.0 / screen) * PY + (-1.0) * one;
  const auto& m = h.m;
  const Dual U = m[0] * x + m[1] * y + m[2] * one;
  const Dual V = m[3] * x + m[4] * y + m[5] * one;
  const Dual Wd = m[6] * x + m[7] * y + m[8] * one;
  const Dual tu = (tex / 2.0) * (U / Wd);
  const Dual tv = (tex / 2.0) * (V / Wd);
  return std::max(std::hypot(tu.dx, tv.dx), std::hypot(tu.dy, tv.dy));
}

// ---- misc

inline double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline mrnet::ImageGrid random_image(int w, int h, int ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mrnet::ImageGrid g(w, h, ch);
  for (double& v : g.samples) v = u(rng);
  return g;
}

}  // namespace oracle
