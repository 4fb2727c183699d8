#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrnet/image.hpp"
#include "mrnet/mrnet.hpp"
#include "mrnet/pyramid.hpp"

namespace mrnet {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 65536;  // effective batch is min(batch_size, samples)
  int max_epochs_per_stage = 300;
  /// Relative epoch-loss change, in percent, below which a stage counts as converged.
  double convergence_threshold = 1e-3;
  /// Consecutive sub-threshold epochs required before stopping.
  int patience = 2;
  /// Accuracy threshold: an epoch loss at or below this stops the stage at once.
  double loss_floor = 0.0;
  std::uint64_t seed = 0;
  /// Train all stages jointly instead of coarse-to-fine with freezing.
  bool parallel_stages = false;

  void validate() const;
};

enum class StopReason { converged, max_epochs };
std::string to_string(StopReason r);

struct StageReport {
  int stage = 0;  // 0-based
  int epochs_run = 0;
  std::vector<double> losses;   // epoch-mean training loss
  std::vector<double> elapsed;  // seconds since the stage started, per epoch
  StopReason stop_reason = StopReason::max_epochs;
  double wall_time = 0.0;
};

struct TrainReport {
  std::vector<StageReport> stages;
  /// PSNR of the partial sum of stages 0..k against pyramid level k.
  std::vector<double> level_psnr;
  double final_psnr = 0.0;

  nlohmann::json to_json() const;
  /// One line per epoch: stage,epoch,loss,elapsed (1-based stage and epoch).
  std::string to_csv() const;
};

struct TrainObserver {
  std::function<void(const MRNet&, int stage)> on_stage_begin;
  std::function<void(int stage, int epoch, double loss, double elapsed)> on_epoch;
};

/// Optimizes only stage `stage` so that the full output (frozen earlier stages
/// plus this one) fits `target` at its pixel centers, then freezes the stage.
/// Every earlier stage must already be frozen.
StageReport train_stage(MRNet& net, int stage, const ImageGrid& target, const TrainConfig& cfg,
                        const TrainObserver* observer = nullptr);

/// Coarse-to-fine schedule: stage k trains against level k.
TrainReport train_schedule(MRNet& net, const Pyramid& pyramid, const TrainConfig& cfg,
                           const TrainObserver* observer = nullptr);

/// Joint training of all stages (cfg.parallel_stages); the loss is the sum over
/// levels k of MSE(partial sum 0..k, level k), full batch per level, one Adam
/// step per epoch. All stages are frozen afterwards.
TrainReport train_joint(MRNet& net, const Pyramid& pyramid, const TrainConfig& cfg,
                        const TrainObserver* observer = nullptr);

/// Cap reported for identical images.
inline constexpr double kPsnrCap = 200.0;

/// 10 log10(1 / MSE) with unit peak, capped at kPsnrCap.
double psnr(const ImageGrid& a, const ImageGrid& b);

/// Partial sum of stages [0, num_stages) sampled at the pixel centers of a
/// width x height grid, clamped to [0, 1].
ImageGrid render_partial(const MRNet& net, int num_stages, int width, int height);

/// PSNR of partial sum 0..k against level k, for every level.
std::vector<double> level_psnrs(const MRNet& net, const Pyramid& pyramid);

}  // namespace mrnet
