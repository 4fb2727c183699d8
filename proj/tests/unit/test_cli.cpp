#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrnet/cli.hpp"
#include "mrnet/errors.hpp"
#include "mrnet/model_io.hpp"
#include "oracles.hpp"

using namespace mrnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Runs the CLI with captured output streams.
struct Captured {
  int code = 0;
  std::string out, err;
};

Captured run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Captured c;
  try {
    c.code = cli::run(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Small image and config shared by the end-to-end cases.
struct Workspace {
  TempDir dir{"mrnet_test_cli"};
  fs::path config;
  Workspace() {
    save_image(oracle::random_image(64, 64, 1, 3), dir.path / "img.pgm");
    config = dir.path / "run.json";
    write_json(config, {{"input", "img.pgm"}, {"width", 12}, {"seed", 4}, {"learning_rate", 1e-3}});
  }
};

}  // namespace

TEST_CASE("run config parsing") {
  const cli::RunConfig c = cli::parse_run_config({{"input", "a.png"}});
  CHECK(c.input == "a.png");
  CHECK(c.base_res == 8);
  CHECK(c.width == 96);
  CHECK(c.variant == Variant::M);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.bands_for(3) == std::vector<double>{4, 8, 16});

  const cli::RunConfig d = cli::parse_run_config(
      {{"input", "a.png"}, {"variant", "L"}, {"wiring", "add"}, {"bands", {2, 5}}, {"precision", 32},
       {"scheme", "tower"}, {"fit", "crop"}, {"max_epochs_per_stage", 7}, {"parallel_stages", true}});
  CHECK(d.variant == Variant::L);
  CHECK(d.wiring == Wiring::add);
  CHECK(d.bands_for(2) == std::vector<double>{2, 5});
  CHECK_THROWS_AS(d.bands_for(3), cli::ConfigError);
  CHECK(d.precision == Precision::f32);
  CHECK(d.scheme == PyramidKind::tower);
  CHECK(d.fit == FitPolicy::crop);
  CHECK(d.train.max_epochs_per_stage == 7);
  CHECK(d.train.parallel_stages);
  CHECK(cli::parse_run_config(d.to_json()).to_json() == d.to_json());

  CHECK_THROWS_AS(cli::parse_run_config(json::object()), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"widht", 3}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"width", -3}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"variant", "Q"}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"learning_rate", 0}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"base_res", 6}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_run_config({{"input", "a"}, {"width", "wide"}}), cli::ConfigError);
}

TEST_CASE("config files resolve paths next to themselves") {
  TempDir dir("mrnet_test_cli_cfg");
  write_json(dir.path / "c.json", {{"input", "pic.png"}, {"output_dir", "out"}});
  const cli::RunConfig c = cli::load_run_config(dir.path / "c.json");
  CHECK(c.input == dir.path / "pic.png");
  CHECK(c.output_dir == dir.path / "out");
  CHECK_THROWS_AS(cli::load_run_config(dir.path / "nope.json"), cli::ConfigError);
  std::ofstream(dir.path / "bad.json") << "{ not json";
  CHECK_THROWS_AS(cli::load_run_config(dir.path / "bad.json"), cli::ConfigError);
}

TEST_CASE("homography inputs") {
  const Homography h = cli::parse_homography("1,0,0.5, 0,2,0, 0,0,1");
  CHECK(h.m == std::array<double, 9>{1, 0, 0.5, 0, 2, 0, 0, 0, 1});
  CHECK_THROWS_AS(cli::parse_homography("1,2,3"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_homography("1,0,0,0,1,0,0,0,x"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_homography("0,0,0,0,0,0,0,0,0"), cli::ConfigError);
  TempDir dir("mrnet_test_cli_h");
  write_json(dir.path / "flat.json", {1, 0, 0, 0, 1, 0, 0, 0.5, 1});
  write_json(dir.path / "nested.json", {{1, 0, 0}, {0, 1, 0}, {0, 0.5, 1}});
  write_json(dir.path / "obj.json", {{"homography", {{1, 0, 0}, {0, 1, 0}, {0, 0.5, 1}}}});
  const auto a = cli::load_homography(dir.path / "flat.json");
  CHECK(cli::load_homography(dir.path / "nested.json").m == a.m);
  CHECK(cli::load_homography(dir.path / "obj.json").m == a.m);
  CHECK(a.m[7] == 0.5);
  write_json(dir.path / "short.json", {1, 2});
  CHECK_THROWS_AS(cli::load_homography(dir.path / "short.json"), cli::ConfigError);
}

TEST_CASE("exit codes for usage errors") {
  ::setenv("MRNET_LOG", "quiet", 1);
  CHECK(run_cli({}).code == cli::kUsage);
  CHECK(run_cli({"--help"}).code == cli::kOk);
  CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(run_cli({"render"}).code == cli::kUsage);
  const Captured missing = run_cli({"train", "/nonexistent/run.json"});
  CHECK(missing.code == cli::kUsage);
  CHECK(missing.err.find("config not found") != std::string::npos);
}

TEST_CASE("end to end: train, info, render, warp, eval") {
  ::setenv("MRNET_LOG", "quiet", 1);
  Workspace ws;
  const fs::path out = ws.dir.path / "out";

  SUBCASE("missing input") {
    const Captured c = run_cli({"train", ws.config.string(), "--input", (ws.dir.path / "gone.png").string()});
    CHECK(c.code == cli::kUsage);
    CHECK(c.err.find("input not found") != std::string::npos);
  }

  const Captured t = run_cli({"train", ws.config.string(), "--output-dir", out.string(), "--max-epochs", "5"});
  REQUIRE(t.code == cli::kOk);
  REQUIRE(fs::exists(out / cli::kModelFile));
  CHECK(fs::exists(out / cli::kLogFile));
  const MRNet net = load_model(out / cli::kModelFile);
  CHECK(net.num_stages() == 4);
  CHECK(net.bands() == std::vector<double>{4, 8, 16, 32});
  CHECK(net.width == 12);
  const json report = read_json(out / cli::kReportFile);
  CHECK(report["num_stages"] == 4);
  CHECK(report["params"] == count_params(net));
  for (const auto& s : report["stages"]) CHECK(s["epochs_run"].get<int>() <= 5);

  SUBCASE("info") {
    const Captured c = run_cli({"info", (out / cli::kModelFile).string()});
    CHECK(c.code == cli::kOk);
    CHECK(c.out.find("stages") != std::string::npos);
    CHECK(c.out.find(std::to_string(count_params(net))) != std::string::npos);
    std::ofstream(ws.dir.path / "junk.mrn") << "nope";
    CHECK(run_cli({"info", (ws.dir.path / "junk.mrn").string()}).code == cli::kRuntimeFailure);
  }

  SUBCASE("render") {
    const fs::path img = ws.dir.path / "r.png";
    CHECK(run_cli({"render", (out / cli::kModelFile).string(), "--out", img.string()}).code == cli::kOk);
    const ImageGrid full = load_image(img);
    CHECK(full.width == 64);
    CHECK(run_cli({"render", (out / cli::kModelFile).string(), "--res", "20", "--lod", "2.5", "--out", img.string()})
              .code == cli::kOk);
    CHECK(load_image(img).width == 20);
    CHECK(run_cli({"render", (out / cli::kModelFile).string(), "--lod", "9", "--out", img.string()}).code ==
          cli::kOk);
    CHECK(run_cli({"render", (out / cli::kModelFile).string(), "--window", "0,0,1", "--out", img.string()}).code ==
          cli::kUsage);
    CHECK(run_cli({"render", (ws.dir.path / "none.mrn").string(), "--out", img.string()}).code != cli::kOk);
  }

  SUBCASE("warp") {
    const fs::path img = ws.dir.path / "w.pgm";
    const std::string model = (out / cli::kModelFile).string();
    CHECK(run_cli({"warp", model, "--homography", "0.25,0,0,0,1,0.75,0,0.75,1", "--res", "24", "--antialias", "--out",
                   img.string()})
              .code == cli::kOk);
    CHECK(load_image(img).width == 24);
    CHECK(run_cli({"warp", model, "--out", img.string()}).code == cli::kUsage);
    CHECK(run_cli({"warp", model, "--homography", "1,2,3,2,4,6,0,0,1", "--out", img.string()}).code == cli::kUsage);
    const Captured horizon = run_cli({"warp", model, "--homography", "1,0,0,0,1,0,1,0,0.2", "--out", img.string()});
    CHECK(horizon.code == cli::kRuntimeFailure);
    CHECK(horizon.err.find("(x=") != std::string::npos);
  }

  SUBCASE("eval agrees with the training report") {
    const fs::path m = ws.dir.path / "metrics.json";
    const Captured c = run_cli({"eval", (out / cli::kModelFile).string(), "--reference", (ws.dir.path / "img.pgm").string(),
                                "--out", m.string()});
    REQUIRE(c.code == cli::kOk);
    const json j = read_json(m);
    CHECK(j["params"] == count_params(net));
    CHECK(j["num_stages"] == 4);
    CHECK(j["final_psnr"].get<double>() == report["final_psnr"].get<double>());
    CHECK(j["level_psnr"] == report["level_psnr"]);
    save_image(oracle::random_image(32, 32, 1, 1), ws.dir.path / "small.pgm");
    CHECK(run_cli({"eval", (out / cli::kModelFile).string(), "--reference", (ws.dir.path / "small.pgm").string()}).code ==
          cli::kUsage);
  }
}

TEST_CASE("eval of an exact constant model reaches the PSNR cap") {
  ::setenv("MRNET_LOG", "quiet", 1);
  TempDir dir("mrnet_test_cli_const");
  save_image(ImageGrid(16, 16, 1, 128.0 / 255.0), dir.path / "c.pgm");
  ArchConfig a;
  a.width = 4;
  a.bands = {4, 8};
  MRNet net = init_mrnet(a);
  for (auto& s : net.stages) {
    for (double& w : s.linear.weights()) w = 0.0;
    s.linear.bias()[0] = 0.0;
    s.frozen = true;
  }
  net.stages[0].linear.bias()[0] = 128.0 / 255.0;
  save_model(net, dir.path / "c.mrn");
  const Captured c = run_cli({"eval", (dir.path / "c.mrn").string(), "--reference", (dir.path / "c.pgm").string()});
  REQUIRE(c.code == cli::kOk);
  const json j = json::parse(c.out);
  CHECK(j["final_psnr"].get<double>() == kPsnrCap);
  CHECK(j["params"] == count_params(net));
}
