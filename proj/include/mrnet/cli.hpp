#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrnet/mrnet.hpp"
#include "mrnet/pyramid.hpp"
#include "mrnet/rendering.hpp"
#include "mrnet/training.hpp"

namespace mrnet::cli {

/// Bad configuration or command-line input (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// Everything `mrnet train` needs. JSON keys mirror the field names; unknown
/// keys are rejected.
struct RunConfig {
  // data
  std::filesystem::path input;
  int base_res = 8;
  PyramidKind scheme = PyramidKind::pyramid;
  FitPolicy fit = FitPolicy::pad;
  bool export_levels = false;
  // architecture
  Variant variant = Variant::M;
  Wiring wiring = Wiring::concat;
  int width = 96;
  int hidden_layers = 1;
  double omega_g = 30.0;
  double base_band = 4.0;
  std::vector<double> bands;  // empty: base_band doubling per stage
  Precision precision = Precision::f64;
  // training
  TrainConfig train;
  // outputs
  std::filesystem::path output_dir = "mrnet_out";

  /// Bands for a given stage count (explicit list or base_band * 2^k).
  std::vector<double> bands_for(int num_stages) const;
  nlohmann::json to_json() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Row-major 3x3 from "a,b,c,d,e,f,g,h,i".
Homography parse_homography(const std::string& text);
/// JSON file holding 9 numbers, a 3x3 nested array, or {"homography": ...}.
Homography load_homography(const std::filesystem::path& path);

/// Names of the files `mrnet train` writes into the output directory.
inline constexpr const char* kModelFile = "model.mrn";
inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kReportFile = "train_report.json";

/// Entry point shared by the executable and the tests.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace mrnet::cli
