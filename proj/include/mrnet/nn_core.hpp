#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace mrnet {

/// Storage precision of network parameters. Arithmetic is always carried out
/// in double; a 32-bit network rounds its parameters to float after every
/// mutation so that its file round trip is exact.
enum class Precision : std::uint8_t { f32 = 4, f64 = 8 };

/// Fully connected layer y = W x + b with W stored row-major (out_dim x in_dim).
/// Shapes are fixed at construction.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(int in_dim, int out_dim);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  double& weight(int row, int col) { return weights_[static_cast<std::size_t>(row) * in_dim_ + col]; }
  double weight(int row, int col) const {
    return weights_[static_cast<std::size_t>(row) * in_dim_ + col];
  }

  std::size_t param_count() const { return weights_.size() + bias_.size(); }
  bool same_shape(const DenseLayer& other) const {
    return in_dim_ == other.in_dim_ && out_dim_ == other.out_dim_;
  }
  bool all_finite() const;
  void set_zero();

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// Per-vector layer evaluation. These are the serial reference path; the
// batched kernels in kernels.hpp are checked against them.

/// sin(freq_scale * (W x + b)), elementwise.
std::vector<double> sine_layer_forward(const DenseLayer& layer, std::span<const double> x,
                                       double freq_scale);
/// W x + b.
std::vector<double> linear_layer_forward(const DenseLayer& layer, std::span<const double> x);

/// Mean of squared differences over all scalar entries of a flattened batch.
double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Gradients of one stage, layer order first, hidden..., linear.
using LayerGradients = std::vector<DenseLayer>;

/// Gradients mirroring a network's trainable layout; frozen stages hold no entries.
struct GradientSet {
  std::vector<std::optional<LayerGradients>> stages;

  bool all_finite() const;
  double max_abs() const;
};

/// Central differences of `loss` with respect to every entry of `params`.
/// `params` is perturbed in place and restored; `loss` must read it.
std::vector<double> finite_diff_grad(const std::function<double()>& loss, std::span<double> params,
                                     double h);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update over a group of layers. Moments are
/// allocated on first use. Rejects the whole step (state untouched) if any
/// gradient is non-finite.
void adam_step(std::span<DenseLayer* const> params, std::span<const DenseLayer> grads,
               AdamState& state, double lr);

/// Flat-array form of the same update.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

}  // namespace mrnet
