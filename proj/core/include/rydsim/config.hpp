#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rydsim/measurement.hpp"
#include "rydsim/physics.hpp"

namespace rydsim {

enum class ExperimentKind {
  RamanRabi,
  RydbergSingle,
  RydbergPair,
  EntangleParity,
  Calibrate,
};

const char* to_string(ExperimentKind kind);

struct ScanGrid {
  double start = 0.0;
  double stop = 0.0;
  int points = 0;

  std::vector<double> values() const;
};

struct CalibrateParameter {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

struct CalibrateSpec {
  OutcomeProbs targets;
  int sweeps = 3;
  int grid_points = 7;
  std::vector<CalibrateParameter> parameters;
};

struct ReportInputs {
  double loss_probability = 0.0;
  double fidelity = 0.0;
};

/// One experiment description, loaded from a JSON config document.
/// Frequencies are quoted in Hz in the file and converted to angular
/// rad/s here, at the boundary; rate-like noise entries (*_per_s) pass
/// through unchanged. Unknown keys anywhere in the document are errors.
struct ExperimentConfig {
  std::string description;
  ExperimentKind experiment = ExperimentKind::RamanRabi;

  // physics (angular, rad/s)
  double raman_rabi_rad_per_s = 0.0;
  double raman_detuning_rad_per_s = 0.0;
  double ryd_rabi_rad_per_s = 0.0;
  double map_rabi_rad_per_s = 0.0;
  double ryd_detuning_rad_per_s = 0.0;
  double blockade_shift_rad_per_s = 0.0;

  NoiseSpec noise;
  ScanGrid scan;

  int shots = 1;
  std::uint64_t seed = 0;
  std::string output_path;
  double dt_s = 0.0;          // 0 = automatic step selection
  bool sample_counts = false; // emit finite-shot frequencies instead of means

  std::optional<double> pair_loss_p;  // feeds fidelity renormalization
  std::optional<CalibrateSpec> calibrate;
  std::optional<ReportInputs> report;

  void validate() const;
};

/// Parses a config document; `origin` names the source in diagnostics.
/// Throws ConfigError with a field path or line position on any problem.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin);

ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace rydsim
