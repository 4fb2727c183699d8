#include "mrnet/mrnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mrnet/errors.hpp"
#include "mrnet/kernels.hpp"
#include "mrnet/parallel.hpp"

namespace mrnet {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::S: return "S";
    case Variant::L: return "L";
    case Variant::M: return "M";
  }
  return "?";
}

std::string to_string(Wiring w) { return w == Wiring::concat ? "concat" : "add"; }

Variant parse_variant(const std::string& s) {
  if (s == "S" || s == "s") return Variant::S;
  if (s == "L" || s == "l") return Variant::L;
  if (s == "M" || s == "m") return Variant::M;
  throw ContractViolation("unknown variant '" + s + "' (expected S, L or M)");
}

Wiring parse_wiring(const std::string& s) {
  if (s == "concat") return Wiring::concat;
  if (s == "add") return Wiring::add;
  throw ContractViolation("unknown wiring '" + s + "' (expected concat or add)");
}

std::vector<DenseLayer*> StageParams::layers() {
  std::vector<DenseLayer*> out{&first};
  for (auto& h : hidden) out.push_back(&h);
  out.push_back(&linear);
  return out;
}

std::vector<const DenseLayer*> StageParams::layers() const {
  std::vector<const DenseLayer*> out{&first};
  for (const auto& h : hidden) out.push_back(&h);
  out.push_back(&linear);
  return out;
}

std::size_t StageParams::param_count() const {
  std::size_t n = 0;
  for (const auto* l : layers()) n += l->param_count();
  return n;
}

std::vector<double> MRNet::bands() const {
  std::vector<double> b;
  b.reserve(stages.size());
  for (const auto& s : stages) b.push_back(s.band_limit);
  return b;
}

int MRNet::hidden_input_dim(int stage) const {
  if (chained() && stage > 0 && wiring == Wiring::concat) return 2 * width;
  return width;
}

void MRNet::quantize() {
  if (precision == Precision::f64) return;
  for (auto& s : stages) {
    for (auto* l : s.layers()) {
      for (double& w : l->weights()) w = static_cast<double>(static_cast<float>(w));
      for (double& b : l->bias()) b = static_cast<double>(static_cast<float>(b));
    }
  }
}

namespace {

// Uniform on the open interval (lo, hi).
double uniform_open(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  double x;
  do {
    x = dist(rng);
  } while (x <= lo || x >= hi);
  return x;
}

void fill_uniform(std::mt19937_64& rng, std::span<double> xs, double bound) {
  for (double& x : xs) x = uniform_open(rng, -bound, bound);
}

void siren_init(std::mt19937_64& rng, DenseLayer& layer, double omega_g) {
  const double fan_in = layer.in_dim();
  fill_uniform(rng, layer.weights(), std::sqrt(6.0 / fan_in) / omega_g);
  fill_uniform(rng, layer.bias(), 1.0 / std::sqrt(fan_in));
}

}  // namespace

MRNet init_mrnet(const ArchConfig& cfg) {
  require(!cfg.bands.empty(), "init_mrnet: at least one stage is required");
  require(cfg.width >= 1 && cfg.width <= 65535, "init_mrnet: width must be in [1, 65535]");
  require(cfg.input_dim >= 1 && cfg.input_dim <= 255, "init_mrnet: input_dim must be in [1, 255]");
  require(cfg.channels >= 1 && cfg.channels <= 255, "init_mrnet: channels must be in [1, 255]");
  require(cfg.bands.size() <= 65535, "init_mrnet: too many stages");
  require(cfg.omega_g > 0.0, "init_mrnet: omega_g must be positive");
  for (std::size_t k = 0; k < cfg.bands.size(); ++k) {
    require(cfg.bands[k] > 0.0 && std::isfinite(cfg.bands[k]), "init_mrnet: bands must be positive");
    if (k > 0) require(cfg.bands[k] > cfg.bands[k - 1], "init_mrnet: bands must be strictly increasing");
  }
  const int hidden_layers = cfg.variant == Variant::S ? 0 : cfg.hidden_layers;
  if (cfg.variant != Variant::S) {
    require(hidden_layers >= 1 && hidden_layers <= 255,
            "init_mrnet: L and M variants need 1..255 hidden layers");
  }

  MRNet net;
  net.variant = cfg.variant;
  net.wiring = cfg.wiring;
  net.input_dim = cfg.input_dim;
  net.channels = cfg.channels;
  net.width = cfg.width;
  net.hidden_layers = hidden_layers;
  net.precision = cfg.precision;
  net.seed = cfg.seed;

  for (std::size_t k = 0; k < cfg.bands.size(); ++k) {
    // Per-stage stream: appending stages never changes earlier ones.
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);

    StageParams st;
    st.band_limit = cfg.bands[k];
    st.omega_g = cfg.omega_g;
    st.first = DenseLayer(cfg.input_dim, cfg.width);
    fill_uniform(rng, st.first.weights(), st.band_limit);
    for (int h = 0; h < hidden_layers; ++h) {
      const int in = h == 0 ? net.hidden_input_dim(static_cast<int>(k)) : cfg.width;
      DenseLayer layer(in, cfg.width);
      siren_init(rng, layer, cfg.omega_g);
      st.hidden.push_back(std::move(layer));
    }
    st.linear = DenseLayer(cfg.width, cfg.channels);
    siren_init(rng, st.linear, cfg.omega_g);
    net.stages.push_back(std::move(st));
  }
  net.quantize();
  return net;
}

std::size_t count_params(const MRNet& net) {
  std::size_t n = 0;
  for (const auto& s : net.stages) n += s.param_count();
  return n;
}

LayerGradients zero_gradients(const StageParams& stage) {
  LayerGradients g;
  for (const auto* l : stage.layers()) g.emplace_back(l->in_dim(), l->out_dim());
  return g;
}

StageTrace stage_forward(const MRNet& net, int stage, std::span<const double> coords,
                         std::span<const double> prev_hidden, int rows) {
  require(stage >= 0 && stage < net.num_stages(), "stage_forward: stage index out of range");
  require(coords.size() == static_cast<std::size_t>(rows) * net.input_dim,
          "stage_forward: coordinate block does not match input_dim");
  const StageParams& st = net.stages[stage];
  const bool takes_prev = net.chained() && stage > 0;
  const std::size_t block = static_cast<std::size_t>(rows) * net.width;
  require(takes_prev ? prev_hidden.size() == block : prev_hidden.empty(),
          "stage_forward: previous hidden output has the wrong shape");

  StageTrace t;
  t.first_pre.resize(block);
  t.first_act.resize(block);
  kernels::sine_forward(st.first, coords, rows, 1.0, t.first_pre, t.first_act);

  if (!st.hidden.empty()) {
    if (takes_prev) {
      if (net.wiring == Wiring::concat) {
        const int w = net.width;
        t.hidden_in.resize(2 * block);
        for (int s = 0; s < rows; ++s) {
          std::copy_n(t.first_act.data() + static_cast<std::size_t>(s) * w, w,
                      t.hidden_in.data() + static_cast<std::size_t>(s) * 2 * w);
          std::copy_n(prev_hidden.data() + static_cast<std::size_t>(s) * w, w,
                      t.hidden_in.data() + static_cast<std::size_t>(s) * 2 * w + w);
        }
      } else {
        t.hidden_in = t.first_act;
        kernels::axpy(1.0, prev_hidden, t.hidden_in);
      }
    }
    t.hidden_pre.resize(st.hidden.size());
    t.hidden_act.resize(st.hidden.size());
    for (std::size_t h = 0; h < st.hidden.size(); ++h) {
      t.hidden_pre[h].resize(block);
      t.hidden_act[h].resize(block);
      kernels::sine_forward(st.hidden[h], t.hidden_input(h), rows, st.omega_g, t.hidden_pre[h],
                            t.hidden_act[h]);
    }
  }
  t.output.resize(static_cast<std::size_t>(rows) * net.channels);
  kernels::affine_forward(st.linear, t.block_output(), rows, t.output);
  return t;
}

void stage_backward(const MRNet& net, int stage, std::span<const double> coords,
                    std::span<const double> prev_hidden, const StageTrace& trace,
                    std::span<const double> d_output, std::span<const double> d_block_out,
                    LayerGradients* grads, std::vector<double>* d_prev_hidden) {
  require(stage >= 0 && stage < net.num_stages(), "stage_backward: stage index out of range");
  const StageParams& st = net.stages[stage];
  const int rows = static_cast<int>(trace.output.size()) / net.channels;
  const std::size_t block = static_cast<std::size_t>(rows) * net.width;
  require(d_output.size() == trace.output.size(), "stage_backward: d_output shape mismatch");
  require(d_block_out.empty() || d_block_out.size() == block, "stage_backward: d_block_out shape mismatch");
  const bool takes_prev = net.chained() && stage > 0;
  if (d_prev_hidden != nullptr) require(takes_prev, "stage_backward: stage has no previous hidden input");
  if (grads == nullptr && d_prev_hidden == nullptr) return;
  if (grads != nullptr) require(grads->size() == st.hidden.size() + 2, "stage_backward: gradient layout mismatch");
  (void)prev_hidden;

  const std::size_t n_hidden = st.hidden.size();
  DenseLayer* g_linear = grads ? &(*grads)[n_hidden + 1] : nullptr;

  std::vector<double> d_block(block);
  kernels::affine_backward(st.linear, trace.block_output(), d_output, rows, g_linear, d_block);
  if (!d_block_out.empty()) kernels::axpy(1.0, d_block_out, d_block);

  // d_block now holds dLoss/d(block output); walk the hidden block backwards.
  std::vector<double> d_first;
  if (n_hidden == 0) {
    d_first = std::move(d_block);
  } else {
    std::vector<double> d = std::move(d_block);
    for (std::size_t h = n_hidden; h-- > 0;) {
      kernels::sine_backward_inplace(trace.hidden_pre[h], st.omega_g, d);
      std::vector<double> d_in(static_cast<std::size_t>(rows) * st.hidden[h].in_dim());
      kernels::affine_backward(st.hidden[h], trace.hidden_input(h), d, rows,
                               grads ? &(*grads)[1 + h] : nullptr, d_in);
      d = std::move(d_in);
    }
    // d is dLoss/d(first hidden input).
    if (takes_prev && net.wiring == Wiring::concat) {
      const int w = net.width;
      d_first.resize(block);
      if (d_prev_hidden) d_prev_hidden->assign(block, 0.0);
      for (int s = 0; s < rows; ++s) {
        const double* src = d.data() + static_cast<std::size_t>(s) * 2 * w;
        std::copy_n(src, w, d_first.data() + static_cast<std::size_t>(s) * w);
        if (d_prev_hidden) std::copy_n(src + w, w, d_prev_hidden->data() + static_cast<std::size_t>(s) * w);
      }
    } else {
      if (takes_prev && d_prev_hidden) *d_prev_hidden = d;
      d_first = std::move(d);
    }
  }

  if (grads != nullptr) {
    kernels::sine_backward_inplace(trace.first_pre, 1.0, d_first);
    kernels::affine_backward(st.first, coords, d_first, rows, &(*grads)[0], {});
  }
}

ForwardTrace trace_forward(const MRNet& net, std::span<const double> coords, int rows,
                           int num_stages) {
  if (num_stages < 0) num_stages = net.num_stages();
  require(num_stages <= net.num_stages(), "trace_forward: too many stages requested");
  ForwardTrace ft;
  ft.rows = rows;
  ft.coords.assign(coords.begin(), coords.end());
  ft.stages.reserve(num_stages);
  for (int k = 0; k < num_stages; ++k) {
    std::span<const double> prev;
    if (net.chained() && k > 0) prev = ft.stages[k - 1].block_output();
    ft.stages.push_back(stage_forward(net, k, ft.coords, prev, rows));
  }
  return ft;
}

GradientSet backward(const MRNet& net, const ForwardTrace& trace,
                     const std::vector<std::vector<double>>& d_stage_outputs) {
  const int n = static_cast<int>(trace.stages.size());
  require(n > 0, "backward: missing forward trace");
  require(static_cast<int>(d_stage_outputs.size()) == n, "backward: one output gradient per traced stage");

  GradientSet gs;
  gs.stages.resize(net.num_stages());
  // Does any unfrozen stage precede stage k?
  std::vector<bool> live_before(n + 1, false);
  for (int k = 0; k < n; ++k) live_before[k + 1] = live_before[k] || !net.stages[k].frozen;

  std::vector<double> d_chain;  // gradient flowing into stage k's block output from stage k+1
  for (int k = n - 1; k >= 0; --k) {
    const StageTrace& t = trace.stages[k];
    std::vector<double> zeros;
    std::span<const double> d_out = d_stage_outputs[k];
    if (d_out.empty()) {
      zeros.assign(t.output.size(), 0.0);
      d_out = zeros;
    }
    LayerGradients* g = nullptr;
    if (!net.stages[k].frozen) {
      gs.stages[k] = zero_gradients(net.stages[k]);
      g = &*gs.stages[k];
    }
    const bool need_prev = net.chained() && k > 0 && live_before[k];
    std::vector<double> d_prev;
    std::span<const double> prev;
    if (net.chained() && k > 0) prev = trace.stages[k - 1].block_output();
    stage_backward(net, k, trace.coords, prev, t, d_out, d_chain, g, need_prev ? &d_prev : nullptr);
    d_chain = std::move(d_prev);
  }
  return gs;
}

namespace {

int rows_of(const MRNet& net, std::span<const double> coords) {
  require(coords.size() % net.input_dim == 0, "coordinate batch is not a multiple of input_dim");
  return static_cast<int>(coords.size() / net.input_dim);
}

}  // namespace

std::vector<std::vector<double>> stage_outputs(const MRNet& net, std::span<const double> coords,
                                               int num_stages) {
  if (num_stages < 0) num_stages = net.num_stages();
  require(num_stages <= net.num_stages(), "stage_outputs: too many stages requested");
  const int rows = rows_of(net, coords);
  std::vector<std::vector<double>> out(num_stages,
                                       std::vector<double>(static_cast<std::size_t>(rows) * net.channels));
  parallel_for_chunks(rows, [&](int, int begin, int count) {
    auto ft = trace_forward(net, coords.subspan(static_cast<std::size_t>(begin) * net.input_dim,
                                                static_cast<std::size_t>(count) * net.input_dim),
                            count, num_stages);
    for (int k = 0; k < num_stages; ++k) {
      std::copy(ft.stages[k].output.begin(), ft.stages[k].output.end(),
                out[k].begin() + static_cast<std::ptrdiff_t>(begin) * net.channels);
    }
  });
  return out;
}

std::vector<double> forward_varying(const MRNet& net, std::span<const double> coords,
                                    std::span<const double> row_weights) {
  const int rows = rows_of(net, coords);
  const int n = net.num_stages();
  require(row_weights.size() == static_cast<std::size_t>(rows) * n,
          "forward_varying: need one weight per stage per sample");
  int needed = 0;
  for (std::size_t k = 0; k < row_weights.size(); ++k) {
    const double w = row_weights[k];
    require(w >= 0.0 && w <= 1.0, "forward: lod weights must lie in [0, 1]");
    if (w != 0.0) needed = std::max(needed, static_cast<int>(k % n) + 1);
  }
  const int c = net.channels;
  std::vector<double> out(static_cast<std::size_t>(rows) * c, 0.0);
  if (needed == 0) return out;
  parallel_for_chunks(rows, [&](int, int begin, int count) {
    auto ft = trace_forward(net, coords.subspan(static_cast<std::size_t>(begin) * net.input_dim,
                                                static_cast<std::size_t>(count) * net.input_dim),
                            count, needed);
    for (int s = 0; s < count; ++s) {
      const double* w = row_weights.data() + static_cast<std::size_t>(begin + s) * n;
      double* y = out.data() + static_cast<std::size_t>(begin + s) * c;
      for (int k = 0; k < needed; ++k) {
        const double* g = ft.stages[k].output.data() + static_cast<std::size_t>(s) * c;
        for (int ch = 0; ch < c; ++ch) y[ch] += w[k] * g[ch];
      }
    }
  });
  return out;
}

std::vector<double> forward(const MRNet& net, std::span<const double> coords,
                            std::span<const double> lod_weights) {
  require(static_cast<int>(lod_weights.size()) == net.num_stages(),
          "forward: lod weight vector length must equal the stage count");
  for (double w : lod_weights) require(w >= 0.0 && w <= 1.0, "forward: lod weights must lie in [0, 1]");
  const int rows = rows_of(net, coords);
  std::vector<double> tiled(static_cast<std::size_t>(rows) * lod_weights.size());
  for (int s = 0; s < rows; ++s) {
    std::copy(lod_weights.begin(), lod_weights.end(), tiled.begin() + static_cast<std::ptrdiff_t>(s) * lod_weights.size());
  }
  return forward_varying(net, coords, tiled);
}

std::vector<double> forward(const MRNet& net, std::span<const double> coords) {
  std::vector<double> w;
  for (const auto& s : net.stages) w.push_back(s.alpha);
  return forward(net, coords, w);
}

GradientSet finite_diff_grad(MRNet& net, const std::function<double(const MRNet&)>& loss, double h) {
  GradientSet gs;
  gs.stages.resize(net.num_stages());
  auto eval = [&] { return loss(net); };
  for (int k = 0; k < net.num_stages(); ++k) {
    StageParams& st = net.stages[k];
    if (st.frozen) continue;
    LayerGradients g = zero_gradients(st);
    auto layers = st.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto gw = finite_diff_grad(eval, layers[l]->weights(), h);
      auto gb = finite_diff_grad(eval, layers[l]->bias(), h);
      std::copy(gw.begin(), gw.end(), g[l].weights().begin());
      std::copy(gb.begin(), gb.end(), g[l].bias().begin());
    }
    gs.stages[k] = std::move(g);
  }
  return gs;
}

}  // namespace mrnet
