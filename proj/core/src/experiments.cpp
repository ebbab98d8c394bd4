#include "rydsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "rydsim/errors.hpp"
#include "rydsim/rng.hpp"

namespace rydsim {

namespace {

using nlohmann::json;

SequenceSpec single_pulse_sequence(PulseKind kind, double rabi, double detuning,
                                   double duration_s, double blockade,
                                   PairIndex initial, bool on_a, bool on_b) {
  SequenceSpec seq;
  seq.blockade_shift_rad_per_s = blockade;
  seq.initial_state = initial;
  if (duration_s > 0.0) {
    seq.pulses.push_back(TimedPulse{
        0.0, PulseSpec{kind, rabi, detuning, duration_s, 0.0, on_a, on_b}});
  }
  seq.validate();
  return seq;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

SequenceSpec raman_rabi_sequence(const ExperimentConfig& cfg,
                                 double duration_s) {
  return single_pulse_sequence(
      PulseKind::RamanRotation, cfg.raman_rabi_rad_per_s,
      cfg.raman_detuning_rad_per_s, duration_s, cfg.blockade_shift_rad_per_s,
      PairIndex{AtomLevel::Up, AtomLevel::Absent}, true, false);
}

SequenceSpec rydberg_single_sequence(const ExperimentConfig& cfg,
                                     double duration_s) {
  return single_pulse_sequence(
      PulseKind::RydExcite, cfg.ryd_rabi_rad_per_s, cfg.ryd_detuning_rad_per_s,
      duration_s, cfg.blockade_shift_rad_per_s,
      PairIndex{AtomLevel::Up, AtomLevel::Absent}, true, false);
}

SequenceSpec rydberg_pair_sequence(const ExperimentConfig& cfg,
                                   double duration_s) {
  return single_pulse_sequence(
      PulseKind::RydExcite, cfg.ryd_rabi_rad_per_s, cfg.ryd_detuning_rad_per_s,
      duration_s, cfg.blockade_shift_rad_per_s,
      PairIndex{AtomLevel::Up, AtomLevel::Up}, true, true);
}

SequenceSpec entangle_sequence(const ExperimentConfig& cfg) {
  return build_entangle_sequence(cfg.ryd_rabi_rad_per_s,
                                 cfg.map_rabi_rad_per_s,
                                 cfg.blockade_shift_rad_per_s);
}

SequenceSpec entangle_parity_sequence(const ExperimentConfig& cfg,
                                      double theta_rad) {
  if (theta_rad < 0.0) {
    throw std::invalid_argument(
        "entangle_parity_sequence: rotation angle must be >= 0");
  }
  SequenceSpec seq = entangle_sequence(cfg);
  if (theta_rad > 0.0) {
    const double duration = theta_rad / cfg.raman_rabi_rad_per_s;
    seq.pulses.push_back(TimedPulse{
        seq.end_time_s(),
        PulseSpec{PulseKind::RamanRotation, cfg.raman_rabi_rad_per_s,
                  cfg.raman_detuning_rad_per_s, duration, 0.0, true, true}});
  }
  seq.validate();
  return seq;
}

ScanTable run_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  if (cfg.experiment == ExperimentKind::Calibrate) {
    throw std::invalid_argument(
        "run_experiment: the calibrate experiment runs through "
        "run_calibration");
  }

  const std::vector<double> grid = cfg.scan.values();
  ScanTable table;
  table.rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double value = grid[i];
    SequenceSpec seq;
    switch (cfg.experiment) {
      case ExperimentKind::RamanRabi:
        seq = raman_rabi_sequence(cfg, value);
        break;
      case ExperimentKind::RydbergSingle:
        seq = rydberg_single_sequence(cfg, value);
        break;
      case ExperimentKind::RydbergPair:
        seq = rydberg_pair_sequence(cfg, value);
        break;
      case ExperimentKind::EntangleParity:
        seq = entangle_parity_sequence(cfg, value);
        break;
      case ExperimentKind::Calibrate:
        break;  // unreachable
    }
    const std::uint64_t row_seed = derive_seed(cfg.seed, i);
    EnsembleOptions options;
    options.dt_s = cfg.dt_s;
    options.threads = threads;
    const EnsembleResult ensemble =
        run_ensemble(seq, cfg.noise, cfg.shots, row_seed, options);
    OutcomeProbs probs = pushout_probabilities(ensemble.mean_rho_final);
    if (cfg.sample_counts) {
      probs = sample_counts(probs, cfg.shots, derive_seed(row_seed, 0x5eedull))
                  .frequencies();
    }
    table.rows.push_back(ScanRow{value, probs, cfg.shots, row_seed});
  }
  return table;
}

std::string scan_table_to_csv(const ScanTable& table) {
  std::string out = "scan_value,p11,p10,p01,p00,n_shots,seed\n";
  for (const ScanRow& row : table.rows) {
    out += format_double(row.scan_value);
    out += ',';
    out += format_double(row.probs.p11);
    out += ',';
    out += format_double(row.probs.p10);
    out += ',';
    out += format_double(row.probs.p01);
    out += ',';
    out += format_double(row.probs.p00);
    out += ',';
    out += std::to_string(row.n_shots);
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  return out;
}

void write_scan_csv(const ScanTable& table,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("write_scan_csv: cannot open '" + path.string() + "'");
  }
  out << scan_table_to_csv(table);
}

ScanTable read_scan_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("read_scan_csv: cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) ||
      line != "scan_value,p11,p10,p01,p00,n_shots,seed") {
    throw Error("read_scan_csv: '" + path.string() +
                "' missing the scan_value,p11,p10,p01,p00,n_shots,seed header");
  }
  ScanTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    std::vector<std::string> parts;
    while (std::getline(fields, field, ',')) parts.push_back(field);
    if (parts.size() != 7) {
      throw Error("read_scan_csv: line " + std::to_string(line_no) +
                  " has " + std::to_string(parts.size()) +
                  " fields, expected 7");
    }
    try {
      ScanRow row;
      row.scan_value = std::stod(parts[0]);
      row.probs = OutcomeProbs{std::stod(parts[1]), std::stod(parts[2]),
                               std::stod(parts[3]), std::stod(parts[4])};
      row.n_shots = std::stoi(parts[5]);
      row.seed = std::stoull(parts[6]);
      row.probs.validate();
      table.rows.push_back(row);
    } catch (const InvariantViolation& e) {
      throw Error("read_scan_csv: line " + std::to_string(line_no) + ": " +
                  e.what());
    } catch (const std::exception&) {
      throw Error("read_scan_csv: line " + std::to_string(line_no) +
                  ": malformed number");
    }
  }
  if (table.rows.empty()) {
    throw Error("read_scan_csv: '" + path.string() + "' has no data rows");
  }
  return table;
}

std::vector<std::pair<double, double>> fit_series(ExperimentKind kind,
                                                  const ScanTable& table) {
  std::vector<std::pair<double, double>> series;
  series.reserve(table.rows.size());
  for (const ScanRow& row : table.rows) {
    double y = 0.0;
    switch (kind) {
      case ExperimentKind::RamanRabi:
        y = row.probs.p11 + row.probs.p10;  // atom a present
        break;
      case ExperimentKind::RydbergSingle:
        y = row.probs.p01 + row.probs.p00;  // atom a excited away
        break;
      case ExperimentKind::RydbergPair:
        y = row.probs.p10 + row.probs.p01;  // exactly one excited
        break;
      default:
        throw std::invalid_argument(
            "fit_series: no Rabi series for this experiment");
    }
    series.emplace_back(row.scan_value, y);
  }
  return series;
}

std::string FitReport::to_json() const {
  json doc;
  doc["experiment"] = to_string(experiment);
  if (rabi.has_value()) {
    doc["rabi_fit"] = {
        {"frequency_hz", rabi->frequency_rad_per_s / (2.0 * std::numbers::pi)},
        {"frequency_rad_per_s", rabi->frequency_rad_per_s},
        {"contrast", rabi->contrast},
        {"decay_sigma", rabi->decay_sigma},
        {"offset", rabi->offset},
        {"residual_rms", rabi->residual_rms},
        {"frequency_identified", rabi->frequency_identified},
    };
  }
  if (fidelity.has_value()) {
    doc["fidelity"] = {
        {"F", fidelity->fidelity},
        {"pair_survival", fidelity->pair_survival},
        {"F_renormalized", fidelity->fidelity_renormalized},
        {"coeff_a", fidelity->coeff_a},
        {"coeff_b", fidelity->coeff_b},
        {"coeff_c2", fidelity->coeff_c2},
        {"p_dd", fidelity->p_dd},
        {"p_uu", fidelity->p_uu},
        {"single_present", fidelity->single_present},
        {"coherence", fidelity->coherence},
    };
  }
  return doc.dump(2) + "\n";
}

FitReport fit_scan(const ExperimentConfig& cfg, const ScanTable& table) {
  FitReport report;
  report.experiment = cfg.experiment;
  if (cfg.experiment == ExperimentKind::EntangleParity) {
    ParityScan scan;
    for (const ScanRow& row : table.rows) {
      scan.samples.emplace_back(row.scan_value, row.probs);
    }
    std::optional<double> survival;
    if (cfg.pair_loss_p.has_value()) {
      survival = 1.0 - pair_loss_probability(*cfg.pair_loss_p);
    }
    report.fidelity = extract_fidelity(scan, survival);
  } else {
    report.rabi = fit_rabi(fit_series(cfg.experiment, table));
  }
  return report;
}

std::string CalibrationResult::to_json() const {
  json doc;
  doc["noise"] = {
      {"scatter_rate_per_s", best.scatter_rate_rad_per_s},
      {"scatter_branch_up", best.scatter_branching.to_up},
      {"scatter_branch_down", best.scatter_branching.to_down},
      {"scatter_branch_dark", best.scatter_branching.to_dark},
      {"ryd_dephasing_per_s", best.ryd_dephasing_rad_per_s},
      {"ryd_decay_per_s", best.ryd_decay_rad_per_s},
      {"intensity_sigma", best.intensity_sigma},
      {"detuning_sigma_hz",
       best.detuning_sigma_rad_per_s / (2.0 * std::numbers::pi)},
      {"map_phase_sigma_rad", best.map_phase_sigma_rad},
      {"extra_loss_prob", best.extra_loss_prob},
  };
  doc["achieved"] = {{"p11", achieved.p11},
                     {"p10", achieved.p10},
                     {"p01", achieved.p01},
                     {"p00", achieved.p00}};
  doc["objective"] = objective;
  doc["evaluations"] = evaluations;
  return doc.dump(2) + "\n";
}

namespace {

void set_noise_parameter(NoiseSpec& noise, const std::string& name,
                         double value) {
  if (name == "scatter_rate_per_s") {
    noise.scatter_rate_rad_per_s = value;
  } else if (name == "ryd_dephasing_per_s") {
    noise.ryd_dephasing_rad_per_s = value;
  } else if (name == "ryd_decay_per_s") {
    noise.ryd_decay_rad_per_s = value;
  } else if (name == "intensity_sigma") {
    noise.intensity_sigma = value;
  } else if (name == "detuning_sigma_hz") {
    noise.detuning_sigma_rad_per_s = 2.0 * std::numbers::pi * value;
  } else if (name == "map_phase_sigma_rad") {
    noise.map_phase_sigma_rad = value;
  } else if (name == "extra_loss_prob") {
    noise.extra_loss_prob = value;
  } else {
    throw std::invalid_argument("unknown calibration parameter '" + name +
                                "'");
  }
}

double get_noise_parameter(const NoiseSpec& noise, const std::string& name) {
  if (name == "scatter_rate_per_s") return noise.scatter_rate_rad_per_s;
  if (name == "ryd_dephasing_per_s") return noise.ryd_dephasing_rad_per_s;
  if (name == "ryd_decay_per_s") return noise.ryd_decay_rad_per_s;
  if (name == "intensity_sigma") return noise.intensity_sigma;
  if (name == "detuning_sigma_hz") {
    return noise.detuning_sigma_rad_per_s / (2.0 * std::numbers::pi);
  }
  if (name == "map_phase_sigma_rad") return noise.map_phase_sigma_rad;
  if (name == "extra_loss_prob") return noise.extra_loss_prob;
  throw std::invalid_argument("unknown calibration parameter '" + name + "'");
}

}  // namespace

CalibrationResult run_calibration(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  if (!cfg.calibrate.has_value()) {
    throw std::invalid_argument("run_calibration: config has no calibrate section");
  }
  const CalibrateSpec& spec = *cfg.calibrate;
  const SequenceSpec seq = entangle_sequence(cfg);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, 0xCA11ull);

  int evaluations = 0;
  const auto objective = [&](const NoiseSpec& noise) {
    EnsembleOptions options;
    options.dt_s = cfg.dt_s;
    options.threads = threads;
    const EnsembleResult ens =
        run_ensemble(seq, noise, cfg.shots, eval_seed, options);
    const OutcomeProbs probs = pushout_probabilities(ens.mean_rho_final);
    ++evaluations;
    const double d11 = probs.p11 - spec.targets.p11;
    const double d10 = probs.p10 - spec.targets.p10;
    const double d01 = probs.p01 - spec.targets.p01;
    const double d00 = probs.p00 - spec.targets.p00;
    return std::pair{d11 * d11 + d10 * d10 + d01 * d01 + d00 * d00, probs};
  };

  NoiseSpec best = cfg.noise;
  // Clamp the starting point into the search box.
  for (const CalibrateParameter& param : spec.parameters) {
    const double v = get_noise_parameter(best, param.name);
    set_noise_parameter(best, param.name,
                        std::clamp(v, param.min, param.max));
  }
  auto [best_cost, best_probs] = objective(best);

  for (int sweep = 0; sweep < spec.sweeps; ++sweep) {
    // Full bounds on the first sweep, then brackets halving around the
    // running best.
    const double shrink = std::pow(0.5, sweep);
    for (const CalibrateParameter& param : spec.parameters) {
      if (param.max <= param.min) continue;
      const double center = get_noise_parameter(best, param.name);
      const double half = 0.5 * (param.max - param.min) * shrink;
      const double lo = std::max(param.min, center - half);
      const double hi = std::min(param.max, center + half);
      for (int g = 0; g < spec.grid_points; ++g) {
        const double value =
            lo + (hi - lo) * static_cast<double>(g) /
                     static_cast<double>(spec.grid_points - 1);
        NoiseSpec trial = best;
        set_noise_parameter(trial, param.name, value);
        const auto [cost, probs] = objective(trial);
        if (cost < best_cost) {
          best_cost = cost;
          best_probs = probs;
          best = trial;
        }
      }
    }
  }

  CalibrationResult result;
  result.best = best;
  result.achieved = best_probs;
  result.objective = best_cost;
  result.evaluations = evaluations;
  return result;
}

std::string PaperReport::to_text() const {
  std::string out;
  out += "p " + format_double(loss_probability) + "\n";
  out += "pair_loss " + format_double(pair_loss) + "\n";
  out += "survival " + format_double(survival) + "\n";
  out += "fidelity " + format_double(fidelity) + "\n";
  out += "fidelity_renormalized " + format_double(fidelity_renormalized) + "\n";
  return out;
}

PaperReport paper_report(double loss_probability, double fidelity) {
  PaperReport report;
  report.loss_probability = loss_probability;
  report.pair_loss = pair_loss_probability(loss_probability);
  report.survival = 1.0 - report.pair_loss;
  report.fidelity = fidelity;
  report.fidelity_renormalized =
      renormalized_fidelity(fidelity, report.pair_loss);
  return report;
}

}  // namespace rydsim
