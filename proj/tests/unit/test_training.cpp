#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <omp.h>

#include "mrnet/errors.hpp"
#include "mrnet/model_io.hpp"
#include "mrnet/training.hpp"
#include "oracles.hpp"

using namespace mrnet;

namespace {

MRNet small_net(int stages, int width, std::uint64_t seed, int channels = 1, Variant v = Variant::M) {
  ArchConfig a;
  a.variant = v;
  a.width = width;
  a.hidden_layers = v == Variant::S ? 0 : 1;
  a.channels = channels;
  a.bands.clear();
  for (int k = 0; k < stages; ++k) a.bands.push_back(4.0 * (1 << k));
  a.seed = seed;
  return init_mrnet(a);
}

TrainConfig quick(int epochs, double lr = 1e-3) {
  TrainConfig c;
  c.learning_rate = lr;
  c.max_epochs_per_stage = epochs;
  return c;
}

}  // namespace

TEST_CASE("TrainConfig validation") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig c;
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = {};
  c.max_epochs_per_stage = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = {};
  c.convergence_threshold = -1;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = {};
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = {};
  c.loss_floor = -1e-3;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
}

TEST_CASE("psnr") {
  const ImageGrid a = oracle::random_image(9, 7, 2, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  ImageGrid b = a;
  for (double& v : b.samples) v = v > 0.5 ? v - 0.1 : v + 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  for (int seed = 0; seed < 20; ++seed) {
    const ImageGrid x = oracle::random_image(8, 8, 1 + seed % 3, seed);
    const ImageGrid y = oracle::random_image(8, 8, 1 + seed % 3, seed + 100);
    CHECK(std::abs(psnr(x, y) - oracle::psnr(x, y)) <= 1e-9);
  }
  CHECK_THROWS_AS(psnr(a, ImageGrid(9, 7, 1)), ContractViolation);
}

TEST_CASE("train_stage: zero target with zeroed linear layers stops at once") {
  MRNet net = small_net(2, 8, 4);
  for (auto& s : net.stages) {
    for (double& w : s.linear.weights()) w = 0.0;
    for (double& b : s.linear.bias()) b = 0.0;
  }
  const ImageGrid zero(8, 8, 1);
  const MRNet before = net;
  const StageReport r = train_stage(net, 0, zero, TrainConfig{});
  CHECK(r.epochs_run <= 2);
  CHECK(r.stop_reason == StopReason::converged);
  for (double l : r.losses) CHECK(l == 0.0);
  CHECK(net.stages[0].frozen);
  CHECK(net.stages[0].first == before.stages[0].first);
}

TEST_CASE("train_stage preconditions") {
  MRNet net = small_net(3, 6, 1);
  const ImageGrid t = oracle::random_image(8, 8, 1, 1);
  CHECK_THROWS_AS(train_stage(net, 1, t, quick(2)), ContractViolation);
  CHECK_THROWS_AS(train_stage(net, 3, t, quick(2)), ContractViolation);
  CHECK_THROWS_AS(train_stage(net, 0, oracle::random_image(8, 8, 3, 1), quick(2)), ContractViolation);
  train_stage(net, 0, t, quick(2));
  CHECK_THROWS_AS(train_stage(net, 0, t, quick(2)), ContractViolation);
  CHECK_NOTHROW(train_stage(net, 1, t, quick(2)));
}

TEST_CASE("train_stage leaves earlier stages bit-identical") {
  for (Variant v : {Variant::S, Variant::L, Variant::M}) {
    MRNet net = small_net(3, 8, 2, 1, v);
    const ImageGrid t = oracle::random_image(16, 16, 1, 2);
    train_stage(net, 0, t, quick(5));
    const auto s0 = serialize_stage(net.stages[0], net.precision);
    train_stage(net, 1, t, quick(5));
    const auto s1 = serialize_stage(net.stages[1], net.precision);
    train_stage(net, 2, t, quick(5));
    CHECK(serialize_stage(net.stages[0], net.precision) == s0);
    CHECK(serialize_stage(net.stages[1], net.precision) == s1);
  }
}

TEST_CASE("one stage fits a 16x16 ramp") {
  ArchConfig a;
  a.width = 32;
  a.bands = {4};
  a.seed = 1;
  MRNet net = init_mrnet(a);
  ImageGrid ramp(16, 16, 1);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) ramp.at(r, c) = c / 15.0;
  }
  const StageReport s = train_stage(net, 0, ramp, quick(300));
  CHECK(s.epochs_run <= 300);
  CHECK(s.losses.back() < 1e-3);
  double mse = 0.0;
  const ImageGrid out = render_partial(net, 1, 16, 16);
  for (std::size_t k = 0; k < out.samples.size(); ++k) mse += std::pow(out.samples[k] - ramp.samples[k], 2);
  CHECK(mse / 256 < 1e-3);
}

TEST_CASE("schedule on a constant image reconstructs it almost exactly") {
  ArchConfig a;
  a.width = 16;
  a.bands = {4, 8};
  a.seed = 2;
  MRNet net = init_mrnet(a);
  const Pyramid p = build_pyramid(ImageGrid(16, 16, 1, 0.5), 8);
  TrainConfig c = quick(6000, 5e-3);
  c.loss_floor = 1e-12;
  c.seed = 2;
  const TrainReport r = train_schedule(net, p, c);
  REQUIRE(r.stages.size() == 2);
  for (const auto& s : r.stages) CHECK(s.stop_reason == StopReason::converged);
  for (const auto& s : net.stages) CHECK(s.frozen);
  const ImageGrid full = render_partial(net, 2, 16, 16);
  double mse = 0.0;
  for (double v : full.samples) mse += (v - 0.5) * (v - 0.5);
  CHECK(mse / 256 < 1e-10);
  CHECK(r.final_psnr > 100.0);
}

TEST_CASE("schedule rejects a level count mismatch") {
  MRNet net = small_net(3, 4, 1);
  CHECK_THROWS_AS(train_schedule(net, build_pyramid(ImageGrid(16, 16, 1), 8), quick(1)), ContractViolation);
  CHECK_THROWS_AS(train_joint(net, build_pyramid(ImageGrid(16, 16, 1), 8), quick(1)), ContractViolation);
}

TEST_CASE("stop rule properties over random configurations") {
  std::mt19937_64 rng(12);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 25; ++trial) {
    MRNet net = small_net(1, 4 + pick(0, 4), trial);
    const ImageGrid t = oracle::random_image(8, 8, 1, trial);
    TrainConfig c;
    c.learning_rate = std::pow(10.0, -4 + 2 * u(rng));
    c.max_epochs_per_stage = pick(1, 40);
    c.convergence_threshold = std::pow(10.0, -3 + 4 * u(rng));
    c.patience = pick(1, 3);
    c.loss_floor = trial % 4 == 0 ? 0.02 : 0.0;
    c.batch_size = pick(1, 3) == 1 ? 20 : 65536;
    c.seed = trial;
    const StageReport s = train_stage(net, 0, t, c);
    CHECK(s.epochs_run >= 1);
    CHECK(s.epochs_run <= c.max_epochs_per_stage);
    CHECK(s.losses.size() == static_cast<std::size_t>(s.epochs_run));
    CHECK(s.elapsed.size() == s.losses.size());
    for (double l : s.losses) CHECK(std::isfinite(l));
    if (s.stop_reason == StopReason::converged) {
      const double last = s.losses.back();
      bool ok = last <= c.loss_floor;
      if (!ok && s.epochs_run > c.patience) {
        ok = true;
        for (int e = s.epochs_run - c.patience; e < s.epochs_run; ++e) {
          ok = ok && std::abs(s.losses[e] - s.losses[e - 1]) / s.losses[e - 1] < c.convergence_threshold / 100;
        }
      }
      CHECK(ok);
    } else {
      CHECK(s.epochs_run == c.max_epochs_per_stage);
    }
  }
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const ImageGrid img = oracle::random_image(32, 32, 1, 3);
  const Pyramid p = build_pyramid(img, 8);
  TrainConfig c = quick(8);
  c.batch_size = 300;
  c.seed = 5;
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    MRNet net = small_net(3, 12, 6);
    const TrainReport r = train_schedule(net, p, c);
    return std::make_pair(serialize_model(net), r.to_csv().size());
  };
  const auto a = run(1);
  const auto b = run(3);
  const auto d = run(1);
  CHECK(a.first == b.first);
  CHECK(a.first == d.first);

  omp_set_num_threads(1);
  MRNet n1 = small_net(3, 12, 6), n2 = small_net(3, 12, 6);
  const TrainReport r1 = train_schedule(n1, p, c);
  const TrainReport r2 = train_schedule(n2, p, c);
  for (int k = 0; k < 3; ++k) CHECK(r1.stages[k].losses == r2.stages[k].losses);
  TrainConfig other = c;
  other.seed = 6;
  MRNet n3 = small_net(3, 12, 6);
  CHECK_FALSE(train_schedule(n3, p, other).stages[0].losses == r1.stages[0].losses);
}

TEST_CASE("later stages refine the reconstruction") {
  const ImageGrid img = oracle::random_image(32, 32, 1, 8);
  const Pyramid p = build_pyramid(img, 8);
  MRNet net = small_net(3, 24, 9);
  const TrainReport r = train_schedule(net, p, quick(150));
  REQUIRE(r.level_psnr.size() == 3);
  for (double v : r.level_psnr) CHECK(std::isfinite(v));
  CHECK(r.final_psnr == r.level_psnr.back());
  CHECK(psnr(render_partial(net, 3, 32, 32), img) >= psnr(render_partial(net, 1, 32, 32), img));
}

TEST_CASE("report serialization") {
  MRNet net = small_net(2, 6, 1);
  const Pyramid p = build_pyramid(oracle::random_image(16, 16, 1, 1), 8);
  const TrainReport r = train_schedule(net, p, quick(3));
  const auto j = r.to_json();
  CHECK(j["stages"].size() == 2);
  CHECK(j["stages"][0]["stage"] == 1);
  CHECK(j["stages"][1]["loss"].size() == static_cast<std::size_t>(r.stages[1].epochs_run));
  CHECK(j["final_psnr"].get<double>() == r.final_psnr);
  std::istringstream csv(r.to_csv());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "stage,epoch,loss,elapsed");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == r.stages[0].epochs_run + r.stages[1].epochs_run);
}

TEST_CASE("observer sees every stage and epoch") {
  MRNet net = small_net(2, 6, 1);
  const Pyramid p = build_pyramid(oracle::random_image(16, 16, 1, 1), 8);
  std::vector<int> begun;
  int epochs = 0;
  TrainObserver obs;
  obs.on_stage_begin = [&](const MRNet& n, int k) {
    begun.push_back(k);
    for (int j = 0; j < k; ++j) CHECK(n.stages[j].frozen);
  };
  obs.on_epoch = [&](int, int, double, double) { ++epochs; };
  const TrainReport r = train_schedule(net, p, quick(4), &obs);
  CHECK(begun == std::vector<int>{0, 1});
  CHECK(epochs == r.stages[0].epochs_run + r.stages[1].epochs_run);
}

TEST_CASE("a NaN target aborts with a diagnostic") {
  MRNet net = small_net(1, 4, 1);
  ImageGrid t(8, 8, 1, 0.5);
  t.samples[17] = std::nan("");
  CHECK_THROWS_AS(train_stage(net, 0, t, quick(3)), NonFiniteError);
}

TEST_CASE("joint training") {
  const Pyramid p = build_pyramid(oracle::random_image(16, 16, 1, 4), 8);
  MRNet net = small_net(2, 8, 3);
  const TrainReport r = train_joint(net, p, quick(60));
  REQUIRE(r.stages.size() == 2);
  CHECK(r.stages[0].losses.front() > r.stages[0].losses.back());
  for (const auto& s : net.stages) CHECK(s.frozen);
  CHECK(r.level_psnr.size() == 2);
}
