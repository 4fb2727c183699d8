#include "mrnet/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrnet/errors.hpp"

namespace mrnet {

DenseLayer::DenseLayer(int in_dim, int out_dim)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weights_(static_cast<std::size_t>(in_dim) * out_dim, 0.0),
      bias_(static_cast<std::size_t>(out_dim), 0.0) {
  require(in_dim >= 1 && out_dim >= 1, "DenseLayer: dimensions must be positive");
}

bool DenseLayer::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(weights_.begin(), weights_.end(), finite) &&
         std::all_of(bias_.begin(), bias_.end(), finite);
}

void DenseLayer::set_zero() {
  std::fill(weights_.begin(), weights_.end(), 0.0);
  std::fill(bias_.begin(), bias_.end(), 0.0);
}

namespace {

void check_input(const DenseLayer& layer, std::span<const double> x, const char* op) {
  if (static_cast<int>(x.size()) != layer.in_dim()) {
    throw ContractViolation(std::string(op) + ": input length " + std::to_string(x.size()) +
                            " does not match layer in_dim " + std::to_string(layer.in_dim()));
  }
}

}  // namespace

std::vector<double> linear_layer_forward(const DenseLayer& layer, std::span<const double> x) {
  check_input(layer, x, "linear_layer_forward");
  std::vector<double> y(layer.out_dim());
  for (int o = 0; o < layer.out_dim(); ++o) {
    double acc = layer.bias()[o];
    for (int i = 0; i < layer.in_dim(); ++i) acc += layer.weight(o, i) * x[i];
    y[o] = acc;
  }
  return y;
}

std::vector<double> sine_layer_forward(const DenseLayer& layer, std::span<const double> x,
                                       double freq_scale) {
  check_input(layer, x, "sine_layer_forward");
  require(freq_scale > 0.0, "sine_layer_forward: freq_scale must be positive");
  std::vector<double> y = linear_layer_forward(layer, x);
  for (double& v : y) v = std::sin(freq_scale * v);
  return y;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  require(pred.size() == target.size(), "mse_loss: shape mismatch");
  require(!pred.empty(), "mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - target[k];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

bool GradientSet::all_finite() const {
  for (const auto& stage : stages) {
    if (!stage) continue;
    for (const auto& layer : *stage) {
      if (!layer.all_finite()) return false;
    }
  }
  return true;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& stage : stages) {
    if (!stage) continue;
    for (const auto& layer : *stage) {
      for (double w : layer.weights()) m = std::max(m, std::abs(w));
      for (double b : layer.bias()) m = std::max(m, std::abs(b));
    }
  }
  return m;
}

std::vector<double> finite_diff_grad(const std::function<double()>& loss, std::span<double> params,
                                     double h) {
  require(h > 0.0, "finite_diff_grad: h must be positive");
  std::vector<double> grad(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = loss();
    params[k] = saved - h;
    const double down = loss();
    params[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("finite_diff_grad: non-finite loss at parameter " + std::to_string(k));
    }
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

struct AdamCoefficients {
  double beta1, beta2, eps, step, bias1, bias2;
};

AdamCoefficients begin_step(AdamState& state, std::size_t n, double lr) {
  require(lr > 0.0, "adam_step: learning rate must be positive");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  require(state.m.size() == n && state.v.size() == n, "adam_step: moment shape mismatch");
  const double t = static_cast<double>(state.t + 1);
  return {state.beta1,
          state.beta2,
          state.epsilon,
          lr,
          1.0 - std::pow(state.beta1, t),
          1.0 - std::pow(state.beta2, t)};
}

inline void update(double& p, double g, double& m, double& v, const AdamCoefficients& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g * g;
  const double m_hat = m / c.bias1;
  const double v_hat = v / c.bias2;
  p -= c.step * m_hat / (std::sqrt(v_hat) + c.eps);
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  require(params.size() == grads.size(), "adam_step: gradient shape mismatch");
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
    throw NonFiniteError("adam_step: non-finite gradient, step rejected");
  }
  const auto c = begin_step(state, params.size(), lr);
  for (std::size_t k = 0; k < params.size(); ++k) update(params[k], grads[k], state.m[k], state.v[k], c);
  ++state.t;
}

void adam_step(std::span<DenseLayer* const> params, std::span<const DenseLayer> grads,
               AdamState& state, double lr) {
  require(params.size() == grads.size(), "adam_step: layer count mismatch");
  std::size_t n = 0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    require(params[l]->same_shape(grads[l]), "adam_step: layer shape mismatch");
    if (!grads[l].all_finite()) throw NonFiniteError("adam_step: non-finite gradient, step rejected");
    n += params[l]->param_count();
  }
  const auto c = begin_step(state, n, lr);
  std::size_t k = 0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto w = params[l]->weights();
    auto gw = grads[l].weights();
    for (std::size_t j = 0; j < w.size(); ++j, ++k) update(w[j], gw[j], state.m[k], state.v[k], c);
    auto b = params[l]->bias();
    auto gb = grads[l].bias();
    for (std::size_t j = 0; j < b.size(); ++j, ++k) update(b[j], gb[j], state.m[k], state.v[k], c);
  }
  ++state.t;
}

}  // namespace mrnet
