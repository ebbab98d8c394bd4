#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rydsim/analysis.hpp"
#include "rydsim/config.hpp"
#include "rydsim/dynamics.hpp"

namespace rydsim {

/// One scan grid point: outcome probabilities of the ensemble plus the
/// shot count and derived seed that produced them.
struct ScanRow {
  double scan_value = 0.0;
  OutcomeProbs probs;
  int n_shots = 0;
  std::uint64_t seed = 0;
};

struct ScanTable {
  std::vector<ScanRow> rows;
};

// Sequence builders for the named experiments. Durations are in seconds;
// the parity rotation angle theta is converted through the Raman Rabi
// frequency. A zero duration (or theta = 0) yields a sequence without that
// pulse.
SequenceSpec raman_rabi_sequence(const ExperimentConfig& cfg, double duration_s);
SequenceSpec rydberg_single_sequence(const ExperimentConfig& cfg,
                                     double duration_s);
SequenceSpec rydberg_pair_sequence(const ExperimentConfig& cfg,
                                   double duration_s);
SequenceSpec entangle_sequence(const ExperimentConfig& cfg);
SequenceSpec entangle_parity_sequence(const ExperimentConfig& cfg,
                                      double theta_rad);

/// Runs the configured experiment over its scan grid. Each grid point uses
/// the seed derived from (config seed, point index); rows are reproducible
/// individually and independent of `threads`.
ScanTable run_experiment(const ExperimentConfig& cfg, int threads = 1);

/// CSV schema: header `scan_value,p11,p10,p01,p00,n_shots,seed`, floats
/// with 9 significant digits. Byte-identical for identical inputs.
std::string scan_table_to_csv(const ScanTable& table);
void write_scan_csv(const ScanTable& table, const std::filesystem::path& path);
ScanTable read_scan_csv(const std::filesystem::path& path);

/// The probability series each scan experiment feeds to fit_rabi:
/// raman_rabi: P(atom a present); rydberg_single: P(atom a absent);
/// rydberg_pair: P(exactly one absent) (the single-excitation signal).
std::vector<std::pair<double, double>> fit_series(ExperimentKind kind,
                                                  const ScanTable& table);

/// Fit result of one scan, serialized to JSON by the CLI.
struct FitReport {
  ExperimentKind experiment = ExperimentKind::RamanRabi;
  std::optional<RabiFit> rabi;
  std::optional<FidelityReport> fidelity;

  std::string to_json() const;
};

FitReport fit_scan(const ExperimentConfig& cfg, const ScanTable& table);

struct CalibrationResult {
  NoiseSpec best;
  OutcomeProbs achieved;
  double objective = 0.0;  // sum of squared deviations from the targets
  int evaluations = 0;

  std::string to_json() const;
};

/// Coordinate descent over the bounded parameter grid of the calibrate
/// section: each sweep scans every parameter on `grid_points` values over
/// a bracket that starts at the full bounds and halves around the running
/// best; a move happens only when the objective improves. The objective is
/// evaluated on the entangle sequence with a fixed evaluation seed, so the
/// search is deterministic.
CalibrationResult run_calibration(const ExperimentConfig& cfg,
                                  int threads = 1);

/// The loss-accounting arithmetic chain: p -> pair loss -> survival ->
/// renormalized fidelity.
struct PaperReport {
  double loss_probability = 0.0;
  double pair_loss = 0.0;
  double survival = 0.0;
  double fidelity = 0.0;
  double fidelity_renormalized = 0.0;

  std::string to_text() const;
};

PaperReport paper_report(double loss_probability, double fidelity);

}  // namespace rydsim
