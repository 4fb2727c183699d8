#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mrnet/nn_core.hpp"

namespace mrnet {

/// S: first + linear only. L: independent full stages. M: each stage's hidden
/// block also consumes the previous stage's hidden-block output.
enum class Variant : std::uint8_t { S = 0, L = 1, M = 2 };

/// How an M-Net stage combines its own first-layer output with the previous
/// stage's hidden output before its hidden block.
enum class Wiring : std::uint8_t { concat = 0, add = 1 };

std::string to_string(Variant v);
std::string to_string(Wiring w);
Variant parse_variant(const std::string& s);
Wiring parse_wiring(const std::string& s);

/// One MR-Module.
struct StageParams {
  DenseLayer first;
  std::vector<DenseLayer> hidden;
  DenseLayer linear;
  double alpha = 1.0;  // control layer, never trained
  bool frozen = false;
  double band_limit = 0.0;
  double omega_g = 30.0;

  std::vector<DenseLayer*> layers();
  std::vector<const DenseLayer*> layers() const;
  std::size_t param_count() const;

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

struct ArchConfig {
  Variant variant = Variant::M;
  Wiring wiring = Wiring::concat;
  int width = 96;
  int hidden_layers = 1;  // forced to 0 for S
  int input_dim = 2;
  int channels = 1;
  std::vector<double> bands{4, 8, 16, 32, 64, 128, 256};
  double omega_g = 30.0;
  Precision precision = Precision::f64;
  std::uint64_t seed = 0;
};

/// Stages are ordered coarse to fine. Stage indices in this API are 0-based;
/// user-facing output (reports, CLI) numbers stages from 1.
struct MRNet {
  Variant variant = Variant::M;
  Wiring wiring = Wiring::concat;
  int input_dim = 2;
  int channels = 1;
  int width = 0;
  int hidden_layers = 0;
  Precision precision = Precision::f64;
  std::uint64_t seed = 0;
  std::vector<StageParams> stages;

  int num_stages() const { return static_cast<int>(stages.size()); }
  std::vector<double> bands() const;
  /// Input width of stage k's first hidden layer.
  int hidden_input_dim(int stage) const;
  /// Whether stage k feeds its hidden-block output into stage k+1.
  bool chained() const { return variant == Variant::M; }
  /// Rounds every parameter to the storage precision (no-op for f64).
  void quantize();

  friend bool operator==(const MRNet&, const MRNet&) = default;
};

/// Band-limited initialization: stage k's first-layer weights are uniform on
/// the open interval (-B_k, B_k) with zero bias; hidden and linear layers use
/// the SIREN scheme U(+-sqrt(6/fan_in)/omega_g) with bias U(+-1/sqrt(fan_in)).
MRNet init_mrnet(const ArchConfig& cfg);

/// Total trainable scalars (weights and biases; alpha excluded).
std::size_t count_params(const MRNet& net);

/// Cached activations of one stage over a block of samples.
struct StageTrace {
  std::vector<double> first_pre, first_act;
  // Combined input of the first hidden layer; only materialized when the stage
  // consumes a previous hidden output, otherwise the input is first_act.
  std::vector<double> hidden_in;
  std::vector<std::vector<double>> hidden_pre, hidden_act;
  std::vector<double> output;  // rows x channels

  std::span<const double> hidden_input(std::size_t layer) const {
    if (layer > 0) return hidden_act[layer - 1];
    return hidden_in.empty() ? std::span<const double>(first_act) : std::span<const double>(hidden_in);
  }

  /// Hidden-block output (last hidden activation, or the first-layer output for S).
  std::span<const double> block_output() const {
    return hidden_act.empty() ? std::span<const double>(first_act) : std::span<const double>(hidden_act.back());
  }
};

/// Forward pass of one stage. `prev_hidden` is the previous stage's hidden
/// block output (M-Net, stage >= 1) and must be empty otherwise.
StageTrace stage_forward(const MRNet& net, int stage, std::span<const double> coords,
                         std::span<const double> prev_hidden, int rows);

/// Backward pass of one stage. `d_output` is dLoss/d g_k (rows x channels);
/// `d_block_out` is the gradient arriving from the next stage through the
/// chain (may be empty). Gradients are accumulated into `grads` when it is
/// non-null; `d_prev_hidden` receives dLoss/d prev_hidden when non-null.
void stage_backward(const MRNet& net, int stage, std::span<const double> coords,
                    std::span<const double> prev_hidden, const StageTrace& trace,
                    std::span<const double> d_output, std::span<const double> d_block_out,
                    LayerGradients* grads, std::vector<double>* d_prev_hidden);

/// Zero gradients shaped like stage k.
LayerGradients zero_gradients(const StageParams& stage);

/// Full forward trace of stages [0, num) over one block of samples.
struct ForwardTrace {
  int rows = 0;
  std::vector<double> coords;
  std::vector<StageTrace> stages;
};

ForwardTrace trace_forward(const MRNet& net, std::span<const double> coords, int rows,
                           int num_stages = -1);

/// Reverse-mode gradients for all unfrozen stages in the trace. `d_stage_outputs[k]`
/// is dLoss/d g_k (rows x channels); an empty entry means zero.
GradientSet backward(const MRNet& net, const ForwardTrace& trace,
                     const std::vector<std::vector<double>>& d_stage_outputs);

/// Per-stage detail outputs g_k over a batch (each rows x channels). Runs
/// chunk-parallel; alpha is not applied.
std::vector<std::vector<double>> stage_outputs(const MRNet& net, std::span<const double> coords,
                                               int num_stages = -1);

/// sum_k lod_weights[k] * g_k, accumulated coarse to fine. Stages past the
/// last non-zero weight are not evaluated.
std::vector<double> forward(const MRNet& net, std::span<const double> coords,
                            std::span<const double> lod_weights);

/// forward() with every stage's control value alpha as its weight.
std::vector<double> forward(const MRNet& net, std::span<const double> coords);

/// Per-sample weights: `row_weights` is rows x num_stages.
std::vector<double> forward_varying(const MRNet& net, std::span<const double> coords,
                                    std::span<const double> row_weights);

/// Network-level finite differences over every unfrozen parameter, laid out
/// like a GradientSet. The network is perturbed in place and restored.
GradientSet finite_diff_grad(MRNet& net, const std::function<double(const MRNet&)>& loss,
                             double h);

}  // namespace mrnet
