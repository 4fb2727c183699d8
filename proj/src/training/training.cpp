#include "mrnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mrnet/errors.hpp"
#include "mrnet/kernels.hpp"
#include "mrnet/parallel.hpp"
#include "mrnet/sampling.hpp"

namespace mrnet {

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning_rate must be positive");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(max_epochs_per_stage >= 1, "train: max_epochs_per_stage must be >= 1");
  require(convergence_threshold > 0.0, "train: convergence_threshold must be positive");
  require(patience >= 1, "train: patience must be >= 1");
  require(loss_floor >= 0.0, "train: loss_floor must be non-negative");
}

std::string to_string(StopReason r) { return r == StopReason::converged ? "converged" : "max_epochs"; }

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    j["stages"].push_back({{"stage", s.stage + 1},
                           {"epochs_run", s.epochs_run},
                           {"stop_reason", to_string(s.stop_reason)},
                           {"wall_time", s.wall_time},
                           {"loss", s.losses}});
  }
  j["level_psnr"] = level_psnr;
  j["final_psnr"] = final_psnr;
  return j;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "stage,epoch,loss,elapsed\n";
  for (const auto& s : stages) {
    for (int e = 0; e < s.epochs_run; ++e) {
      os << s.stage + 1 << ',' << e + 1 << ',' << s.losses[e] << ',' << s.elapsed[e] << '\n';
    }
  }
  return os.str();
}

double psnr(const ImageGrid& a, const ImageGrid& b) {
  require(a.same_shape(b), "psnr: image dimensions differ");
  require(!a.samples.empty(), "psnr: empty images");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    const double d = a.samples[k] - b.samples[k];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.samples.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

ImageGrid render_partial(const MRNet& net, int num_stages, int width, int height) {
  require(num_stages >= 1 && num_stages <= net.num_stages(), "render_partial: bad stage count");
  std::vector<double> w(net.num_stages(), 0.0);
  std::fill_n(w.begin(), num_stages, 1.0);
  ImageGrid img(width, height, net.channels);
  img.samples = forward(net, coords_grid(width, height), w);
  return clamped(std::move(img));
}

std::vector<double> level_psnrs(const MRNet& net, const Pyramid& pyramid) {
  require(pyramid.size() == net.num_stages(), "level_psnrs: level count must equal stage count");
  std::vector<double> out;
  for (int k = 0; k < pyramid.size(); ++k) {
    const ImageGrid& lvl = pyramid.levels[k];
    out.push_back(psnr(render_partial(net, k + 1, lvl.width, lvl.height), lvl));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::mt19937_64 epoch_rng(std::uint64_t seed, int stage, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

void add_into(LayerGradients& acc, const LayerGradients& g) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    kernels::axpy(1.0, g[l].weights(), acc[l].weights());
    kernels::axpy(1.0, g[l].bias(), acc[l].bias());
  }
}

// Tracks the adaptive stop rule over epoch-mean losses.
class StopRule {
 public:
  explicit StopRule(const TrainConfig& cfg)
      : threshold_(cfg.convergence_threshold / 100.0), patience_(cfg.patience), floor_(cfg.loss_floor) {}

  bool converged(double loss) {
    if (loss <= floor_) return true;
    if (has_prev_) {
      const double rel = prev_ == 0.0 ? (loss == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                      : std::abs(loss - prev_) / prev_;
      streak_ = rel < threshold_ ? streak_ + 1 : 0;
    }
    prev_ = loss;
    has_prev_ = true;
    return streak_ >= patience_;
  }

 private:
  double threshold_;
  int patience_;
  double floor_;
  double prev_ = 0.0;
  bool has_prev_ = false;
  int streak_ = 0;
};

// Frozen-prefix context for one stage: the summed output of all earlier
// stages and, for chained nets, the previous stage's hidden-block output.
struct PrefixCache {
  std::vector<double> sum;          // n x channels
  std::vector<double> prev_hidden;  // n x width, chained nets only
};

PrefixCache compute_prefix(const MRNet& net, int stage, std::span<const double> coords, int n) {
  PrefixCache pc;
  pc.sum.assign(static_cast<std::size_t>(n) * net.channels, 0.0);
  const bool chain = net.chained() && stage > 0;
  if (chain) pc.prev_hidden.resize(static_cast<std::size_t>(n) * net.width);
  if (stage == 0) return pc;
  parallel_for_chunks(n, [&](int, int begin, int count) {
    auto ft = trace_forward(net, coords.subspan(static_cast<std::size_t>(begin) * 2, static_cast<std::size_t>(count) * 2),
                            count, stage);
    std::span<double> dst(pc.sum.data() + static_cast<std::size_t>(begin) * net.channels,
                          static_cast<std::size_t>(count) * net.channels);
    for (int k = 0; k < stage; ++k) kernels::axpy(1.0, ft.stages[k].output, dst);
    if (chain) {
      auto block = ft.stages[stage - 1].block_output();
      std::copy(block.begin(), block.end(), pc.prev_hidden.begin() + static_cast<std::ptrdiff_t>(begin) * net.width);
    }
  });
  return pc;
}

std::string where(int stage, int epoch) {
  return "stage " + std::to_string(stage + 1) + ", epoch " + std::to_string(epoch + 1);
}

}  // namespace

StageReport train_stage(MRNet& net, int stage, const ImageGrid& target, const TrainConfig& cfg,
                        const TrainObserver* observer) {
  cfg.validate();
  require(stage >= 0 && stage < net.num_stages(), "train_stage: stage index out of range");
  require(net.input_dim == 2, "train_stage: image training needs a 2-D input");
  require(target.channels == net.channels, "train_stage: target channel count differs from the network");
  for (int k = 0; k < stage; ++k) {
    if (!net.stages[k].frozen) {
      throw ContractViolation("train_stage: stage " + std::to_string(k + 1) + " must be frozen before training stage " +
                              std::to_string(stage + 1));
    }
  }
  require(!net.stages[stage].frozen, "train_stage: stage is already frozen");
  StageParams& live = net.stages[stage];
  live.alpha = 1.0;

  const auto t0 = Clock::now();
  const SampleSet samples = make_samples(target, stage, Sampler::regular());
  const int n = samples.count();
  const int c = net.channels;
  const int w = net.width;
  const bool chain = net.chained() && stage > 0;
  const PrefixCache prefix = compute_prefix(net, stage, samples.coords, n);

  const int batch = std::min(cfg.batch_size, n);
  std::vector<int> order(n);
  std::vector<double> b_coords, b_target, b_prefix, b_prev;
  AdamState adam;
  StopRule stop(cfg);
  StageReport report;
  report.stage = stage;

  for (int epoch = 0; epoch < cfg.max_epochs_per_stage; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = epoch_rng(cfg.seed, stage, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_sq = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int rows = std::min(batch, n - start);
      b_coords.resize(static_cast<std::size_t>(rows) * 2);
      b_target.resize(static_cast<std::size_t>(rows) * c);
      b_prefix.resize(static_cast<std::size_t>(rows) * c);
      if (chain) b_prev.resize(static_cast<std::size_t>(rows) * w);
      for (int r = 0; r < rows; ++r) {
        const std::size_t s = static_cast<std::size_t>(order[start + r]);
        std::copy_n(samples.coords.begin() + s * 2, 2, b_coords.begin() + r * 2);
        std::copy_n(samples.targets.begin() + s * c, c, b_target.begin() + r * c);
        std::copy_n(prefix.sum.begin() + s * c, c, b_prefix.begin() + r * c);
        if (chain) std::copy_n(prefix.prev_hidden.begin() + s * w, w, b_prev.begin() + static_cast<std::size_t>(r) * w);
      }

      const int chunks = kernels::chunk_count(rows);
      std::vector<LayerGradients> chunk_grads(chunks);
      std::vector<double> chunk_sq(chunks, 0.0);
      const double scale = 2.0 / (static_cast<double>(rows) * c);
      parallel_for_chunks(rows, [&](int ci, int begin, int count) {
        auto coords = std::span<const double>(b_coords).subspan(static_cast<std::size_t>(begin) * 2,
                                                                 static_cast<std::size_t>(count) * 2);
        std::span<const double> prev;
        if (chain) prev = std::span<const double>(b_prev).subspan(static_cast<std::size_t>(begin) * w,
                                                                  static_cast<std::size_t>(count) * w);
        StageTrace t = stage_forward(net, stage, coords, prev, count);
        std::vector<double> d_out(t.output.size());
        double sq = 0.0;
        for (std::size_t k = 0; k < d_out.size(); ++k) {
          const std::size_t g = static_cast<std::size_t>(begin) * c + k;
          const double r = (b_prefix[g] + t.output[k]) - b_target[g];
          sq += r * r;
          d_out[k] = scale * r;
        }
        chunk_sq[ci] = sq;
        chunk_grads[ci] = zero_gradients(live);
        stage_backward(net, stage, coords, prev, t, d_out, {}, &chunk_grads[ci], nullptr);
      });

      LayerGradients grads = std::move(chunk_grads[0]);
      double sq = chunk_sq[0];
      for (int ci = 1; ci < chunks; ++ci) {
        add_into(grads, chunk_grads[ci]);
        sq += chunk_sq[ci];
      }
      if (!std::isfinite(sq)) throw NonFiniteError("train_stage: non-finite loss at " + where(stage, epoch));
      for (const auto& g : grads) {
        if (!g.all_finite()) throw NonFiniteError("train_stage: non-finite gradient at " + where(stage, epoch));
      }
      auto layers = live.layers();
      adam_step(layers, grads, adam, cfg.learning_rate);
      net.quantize();
      epoch_sq += sq;
    }

    const double loss = epoch_sq / (static_cast<double>(n) * c);
    report.losses.push_back(loss);
    report.elapsed.push_back(seconds_since(t0));
    report.epochs_run = epoch + 1;
    if (observer && observer->on_epoch) observer->on_epoch(stage, epoch, loss, report.elapsed.back());
    if (stop.converged(loss)) {
      report.stop_reason = StopReason::converged;
      break;
    }
  }
  live.frozen = true;
  report.wall_time = seconds_since(t0);
  return report;
}

TrainReport train_schedule(MRNet& net, const Pyramid& pyramid, const TrainConfig& cfg,
                           const TrainObserver* observer) {
  if (pyramid.size() != net.num_stages()) {
    throw ContractViolation("train_schedule: pyramid has " + std::to_string(pyramid.size()) + " levels but the network has " +
                            std::to_string(net.num_stages()) + " stages");
  }
  if (cfg.parallel_stages) return train_joint(net, pyramid, cfg, observer);
  TrainReport report;
  for (int k = 0; k < net.num_stages(); ++k) {
    if (observer && observer->on_stage_begin) observer->on_stage_begin(net, k);
    report.stages.push_back(train_stage(net, k, pyramid.levels[k], cfg, observer));
  }
  report.level_psnr = level_psnrs(net, pyramid);
  report.final_psnr = report.level_psnr.back();
  return report;
}

TrainReport train_joint(MRNet& net, const Pyramid& pyramid, const TrainConfig& cfg,
                        const TrainObserver* observer) {
  cfg.validate();
  require(pyramid.size() == net.num_stages(), "train_joint: level count must equal stage count");
  const int n_stages = net.num_stages();
  const int c = net.channels;
  for (auto& s : net.stages) {
    s.frozen = false;
    s.alpha = 1.0;
  }
  if (observer && observer->on_stage_begin) observer->on_stage_begin(net, 0);

  std::vector<SampleSet> sets;
  for (int k = 0; k < n_stages; ++k) sets.push_back(make_samples(pyramid.levels[k], k, Sampler::regular()));

  const auto t0 = Clock::now();
  std::vector<AdamState> adam(n_stages);
  StopRule stop(cfg);
  StageReport joint;
  for (int epoch = 0; epoch < cfg.max_epochs_per_stage; ++epoch) {
    std::vector<LayerGradients> total(n_stages);
    for (int k = 0; k < n_stages; ++k) total[k] = zero_gradients(net.stages[k]);
    double loss = 0.0;
    for (int lvl = 0; lvl < n_stages; ++lvl) {
      const SampleSet& set = sets[lvl];
      const int n = set.count();
      const int chunks = kernels::chunk_count(n);
      std::vector<GradientSet> chunk_grads(chunks);
      std::vector<double> chunk_sq(chunks, 0.0);
      const double scale = 2.0 / (static_cast<double>(n) * c);
      parallel_for_chunks(n, [&](int ci, int begin, int count) {
        auto ft = trace_forward(net, std::span<const double>(set.coords).subspan(static_cast<std::size_t>(begin) * 2,
                                                                                 static_cast<std::size_t>(count) * 2),
                                count, lvl + 1);
        std::vector<double> d_out(static_cast<std::size_t>(count) * c);
        double sq = 0.0;
        for (std::size_t q = 0; q < d_out.size(); ++q) {
          double y = 0.0;
          for (int k = 0; k <= lvl; ++k) y += ft.stages[k].output[q];
          const double r = y - set.targets[static_cast<std::size_t>(begin) * c + q];
          sq += r * r;
          d_out[q] = scale * r;
        }
        chunk_sq[ci] = sq;
        chunk_grads[ci] = backward(net, ft, std::vector<std::vector<double>>(lvl + 1, d_out));
      });
      double sq = 0.0;
      for (int ci = 0; ci < chunks; ++ci) {
        sq += chunk_sq[ci];
        for (int k = 0; k <= lvl; ++k) add_into(total[k], *chunk_grads[ci].stages[k]);
      }
      loss += sq / (static_cast<double>(n) * c);
    }
    if (!std::isfinite(loss)) throw NonFiniteError("train_joint: non-finite loss at epoch " + std::to_string(epoch + 1));
    for (int k = 0; k < n_stages; ++k) {
      auto layers = net.stages[k].layers();
      adam_step(layers, total[k], adam[k], cfg.learning_rate);
    }
    net.quantize();
    joint.losses.push_back(loss);
    joint.elapsed.push_back(seconds_since(t0));
    joint.epochs_run = epoch + 1;
    if (observer && observer->on_epoch) observer->on_epoch(0, epoch, loss, joint.elapsed.back());
    if (stop.converged(loss)) {
      joint.stop_reason = StopReason::converged;
      break;
    }
  }
  joint.wall_time = seconds_since(t0);
  for (auto& s : net.stages) s.frozen = true;

  TrainReport report;
  for (int k = 0; k < n_stages; ++k) {
    StageReport r = joint;
    r.stage = k;
    report.stages.push_back(std::move(r));
  }
  report.level_psnr = level_psnrs(net, pyramid);
  report.final_psnr = report.level_psnr.back();
  return report;
}

}  // namespace mrnet
