#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrnet/cli.hpp"
#include "mrnet/errors.hpp"
#include "mrnet/image.hpp"
#include "mrnet/model_io.hpp"

namespace mrnet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
  const char* env = std::getenv("MRNET_LOG");
  if (env == nullptr) return LogLevel::info;
  const std::string v = env;
  if (v == "quiet" || v == "0") return LogLevel::quiet;
  if (v == "debug" || v == "2") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel at, const std::string& msg) {
  if (log_level() >= at) std::cerr << "mrnet: " << msg << "\n";
}

void warn(const std::string& msg) {
  if (log_level() != LogLevel::quiet) std::cerr << "mrnet: warning: " << msg << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Pyramid make_levels(const ImageGrid& img, PyramidKind kind, int base_res) {
  if (kind == PyramidKind::pyramid) return build_pyramid(img, base_res);
  return build_tower(img, pyramid_level_count(img.width, base_res));
}

MRNet load_model_checked(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("model not found: '" + path.string() + "'");
  return load_model(path);
}

ImageGrid load_input_checked(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: '" + path.string() + "'");
  return load_image(path);
}

Window parse_window(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("window entry '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw ConfigError("window needs x0,y0,x1,y1");
  if (!(v[2] > v[0] && v[3] > v[1])) throw ConfigError("window must have x1 > x0 and y1 > y0");
  return {v[0], v[1], v[2], v[3]};
}

// ---- train

struct TrainArgs {
  std::string config;
  std::string input, output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_epochs, width;
  std::optional<double> lr;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.input.empty()) cfg.input = a.input;
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.max_epochs) cfg.train.max_epochs_per_stage = *a.max_epochs;
  if (a.width) cfg.width = *a.width;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  try {
    cfg.train.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (cfg.width < 1 || cfg.width > 65535) throw ConfigError("width must be in [1, 65535]");
  if (!fs::exists(cfg.input)) throw ConfigError("input not found: '" + cfg.input.string() + "'");

  const ImageGrid source = load_image(cfg.input);
  const ImageGrid img = fit_to_power_of_two(source, cfg.fit);
  if (img.width != source.width || img.height != source.height) {
    log(LogLevel::info, "fitted " + std::to_string(source.width) + "x" + std::to_string(source.height) +
                            " input to " + std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  if (img.width < cfg.base_res) {
    throw ConfigError("input side " + std::to_string(img.width) + " is smaller than base_res " +
                      std::to_string(cfg.base_res));
  }
  const Pyramid pyramid = make_levels(img, cfg.scheme, cfg.base_res);
  const int n = pyramid.size();

  ArchConfig arch;
  arch.variant = cfg.variant;
  arch.wiring = cfg.wiring;
  arch.width = cfg.width;
  arch.hidden_layers = cfg.variant == Variant::S ? 0 : cfg.hidden_layers;
  arch.channels = img.channels;
  arch.bands = cfg.bands_for(n);
  arch.omega_g = cfg.omega_g;
  arch.precision = cfg.precision;
  arch.seed = cfg.train.seed;
  MRNet net = init_mrnet(arch);
  log(LogLevel::info, "training " + to_string(cfg.variant) + "-Net, " + std::to_string(n) + " stages, " +
                          std::to_string(count_params(net)) + " parameters");

  fs::create_directories(cfg.output_dir);
  if (cfg.export_levels) export_levels(pyramid, cfg.output_dir / "levels");

  TrainObserver obs;
  obs.on_stage_begin = [](const MRNet&, int k) { log(LogLevel::info, "stage " + std::to_string(k + 1)); };
  obs.on_epoch = [](int k, int e, double loss, double t) {
    if (log_level() < LogLevel::debug) return;
    std::ostringstream os;
    os << "stage " << k + 1 << " epoch " << e + 1 << " loss " << std::setprecision(6) << loss << " t " << t << "s";
    log(LogLevel::debug, os.str());
  };
  const TrainReport report = train_schedule(net, pyramid, cfg.train, &obs);

  save_model(net, cfg.output_dir / kModelFile);
  write_text(cfg.output_dir / kLogFile, report.to_csv());
  json j = report.to_json();
  j["params"] = count_params(net);
  j["num_stages"] = n;
  j["config"] = cfg.to_json();
  write_text(cfg.output_dir / kReportFile, j.dump(2) + "\n");

  std::ostringstream os;
  os << "final PSNR " << std::fixed << std::setprecision(2) << report.final_psnr << " dB; wrote "
     << (cfg.output_dir / kModelFile).string();
  log(LogLevel::info, os.str());
  return kOk;
}

// ---- render

struct RenderArgs {
  std::string model, out, window;
  int res = 0;
  int base_res = 8;
  std::optional<double> lod;
};

int cmd_render(const RenderArgs& a) {
  const MRNet net = load_model_checked(a.model);
  const int n = net.num_stages();
  const int res = a.res > 0 ? a.res : finest_resolution(net, a.base_res);
  double lod = a.lod.value_or(n);
  if (lod < 1.0 || lod > n) {
    const double c = std::clamp(lod, 1.0, static_cast<double>(n));
    std::ostringstream os;
    os << "lod " << lod << " outside [1, " << n << "], clamped to " << c;
    warn(os.str());
    lod = c;
  }
  const Window win = a.window.empty() ? Window{} : parse_window(a.window);
  save_image(reconstruct(net, res, lod, win), a.out);
  log(LogLevel::info, "wrote " + a.out);
  return kOk;
}

// ---- warp

struct WarpArgs {
  std::string model, out, homography, homography_file, mapping = "octave";
  WarpOptions opt;
};

int cmd_warp(WarpArgs a) {
  const MRNet net = load_model_checked(a.model);
  if (a.homography.empty() == a.homography_file.empty()) {
    throw ConfigError("give exactly one of --homography and --homography-file");
  }
  const Homography h = a.homography.empty() ? load_homography(a.homography_file) : parse_homography(a.homography);
  if (a.mapping == "octave") {
    a.opt.mapping = LevelMapping::octave;
  } else if (a.mapping == "linear") {
    a.opt.mapping = LevelMapping::linear;
  } else {
    throw ConfigError("mapping must be 'octave' or 'linear'");
  }
  save_image(warp_render(net, h, a.opt), a.out);
  log(LogLevel::info, "wrote " + a.out);
  return kOk;
}

// ---- eval

struct EvalArgs {
  std::string model, reference, out, fit = "pad", scheme = "pyramid";
  int base_res = 8;
};

int cmd_eval(const EvalArgs& a) {
  const MRNet net = load_model_checked(a.model);
  const ImageGrid ref = fit_to_power_of_two(load_input_checked(a.reference, "reference"), parse_fit_policy(a.fit));
  if (a.scheme != "pyramid" && a.scheme != "tower") throw ConfigError("scheme must be 'pyramid' or 'tower'");
  const int expected = finest_resolution(net, a.base_res);
  if (ref.width != expected) {
    throw ConfigError("reference is " + std::to_string(ref.width) + "x" + std::to_string(ref.height) +
                      " but the model's finest level is " + std::to_string(expected) + "x" + std::to_string(expected));
  }
  if (ref.channels != net.channels) {
    throw ConfigError("reference has " + std::to_string(ref.channels) + " channel(s), the model has " +
                      std::to_string(net.channels));
  }
  const Pyramid p = make_levels(ref, a.scheme == "tower" ? PyramidKind::tower : PyramidKind::pyramid, a.base_res);
  json j;
  j["params"] = count_params(net);
  j["num_stages"] = net.num_stages();
  j["level_psnr"] = level_psnrs(net, p);
  j["final_psnr"] = psnr(render_partial(net, net.num_stages(), ref.width, ref.height), ref);
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  return kOk;
}

// ---- info

int cmd_info(const std::string& path) {
  const MRNet net = load_model_checked(path);
  std::ostringstream os;
  os << "variant        " << to_string(net.variant) << "-Net\n"
     << "wiring         " << to_string(net.wiring) << "\n"
     << "precision      " << (net.precision == Precision::f32 ? 32 : 64) << "-bit\n"
     << "input_dim      " << net.input_dim << "\n"
     << "channels       " << net.channels << "\n"
     << "width          " << net.width << "\n"
     << "hidden_layers  " << net.hidden_layers << "\n"
     << "stages         " << net.num_stages() << "\n"
     << "params         " << count_params(net) << "\n";
  for (int k = 0; k < net.num_stages(); ++k) {
    const auto& s = net.stages[k];
    os << "  stage " << k + 1 << ": band " << s.band_limit << ", omega_g " << s.omega_g << ", alpha " << s.alpha
       << ", params " << s.param_count() << (s.frozen ? ", frozen" : ", trainable") << "\n";
  }
  std::cout << os.str();
  return kOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Multiresolution sinusoidal networks for images"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Fit a network to an image");
  train->add_option("config", ta.config, "JSON run configuration")->required();
  train->add_option("--input", ta.input, "Override the input image");
  train->add_option("--output-dir", ta.output_dir, "Override the output directory");
  train->add_option("--seed", ta.seed, "Override the seed");
  train->add_option("--max-epochs", ta.max_epochs, "Override max epochs per stage");
  train->add_option("--width", ta.width, "Override the layer width");
  train->add_option("--lr", ta.lr, "Override the learning rate");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Reconstruct the image at a level of detail");
  render->add_option("model", ra.model)->required();
  render->add_option("--res", ra.res, "Output side (default: finest training resolution)");
  render->add_option("--lod", ra.lod, "Level of detail in [1, N] (default N)");
  render->add_option("--window", ra.window, "x0,y0,x1,y1 in [-1,1] coordinates");
  render->add_option("--base-res", ra.base_res, "Coarsest training resolution")->check(CLI::PositiveNumber);
  render->add_option("--out", ra.out, "Output image (.png/.pgm/.ppm)")->required();

  WarpArgs wa;
  auto* warp = app.add_subcommand("warp", "Render the image seen through a homography");
  warp->add_option("model", wa.model)->required();
  warp->add_option("--homography", wa.homography, "9 comma-separated values, row-major");
  warp->add_option("--homography-file", wa.homography_file, "JSON file with the homography");
  warp->add_option("--res", wa.opt.out_res, "Output side")->check(CLI::PositiveNumber);
  warp->add_flag("--antialias", wa.opt.antialias, "Blend stages by per-pixel level of detail");
  warp->add_option("--tex-res", wa.opt.tex_res, "Texture resolution for footprints (default: finest level)");
  warp->add_option("--base-res", wa.opt.base_res, "Coarsest training resolution")->check(CLI::PositiveNumber);
  warp->add_option("--mapping", wa.mapping, "octave or linear");
  warp->add_option("--background", wa.opt.background, "Value outside the texture");
  warp->add_option("--out", wa.out, "Output image")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "PSNR of a model against a reference image");
  eval->add_option("model", ea.model)->required();
  eval->add_option("--reference", ea.reference)->required();
  eval->add_option("--base-res", ea.base_res)->check(CLI::PositiveNumber);
  eval->add_option("--fit", ea.fit, "pad or crop");
  eval->add_option("--scheme", ea.scheme, "pyramid or tower");
  eval->add_option("--out", ea.out, "Write metrics JSON here instead of stdout");

  std::string info_model;
  auto* info = app.add_subcommand("info", "Describe a model file");
  info->add_option("model", info_model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*train) return cmd_train(ta);
  if (*render) return cmd_render(ra);
  if (*warp) return cmd_warp(wa);
  if (*eval) return cmd_eval(ea);
  return cmd_info(info_model);
}

}  // namespace

int run(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "mrnet: error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "mrnet: error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "mrnet: error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("mrnet");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace mrnet::cli
