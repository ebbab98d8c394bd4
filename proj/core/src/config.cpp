#include "rydsim/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rydsim/errors.hpp"

namespace rydsim {

namespace {

using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

void reject_unknown_keys(const json& obj, const std::string& origin,
                         const std::string& section,
                         const std::set<std::string>& known) {
  if (!obj.is_object()) {
    fail(origin, "'" + (section.empty() ? std::string("document root")
                                        : section) +
                     "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) {
      fail(origin, "unknown key '" + section + key + "'");
    }
  }
}

json get_section(const json& doc, const std::string& origin,
                 const std::string& name) {
  if (!doc.contains(name)) return json::object();
  const json& section = doc.at(name);
  if (!section.is_object()) {
    fail(origin, "section '" + name + "' must be an object");
  }
  return section;
}

double get_number(const json& obj, const std::string& origin,
                  const std::string& path, const std::string& key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(origin, "field '" + path + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(origin, "field '" + path + key + "' must be finite");
  return x;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::RamanRabi:
      return "raman_rabi";
    case ExperimentKind::RydbergSingle:
      return "rydberg_single";
    case ExperimentKind::RydbergPair:
      return "rydberg_pair";
    case ExperimentKind::EntangleParity:
      return "entangle_parity";
    case ExperimentKind::Calibrate:
      return "calibrate";
  }
  return "?";
}

std::vector<double> ScanGrid::values() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points));
  if (points == 1) {
    out.push_back(start);
    return out;
  }
  for (int i = 0; i < points; ++i) {
    out.push_back(start + (stop - start) * static_cast<double>(i) /
                              static_cast<double>(points - 1));
  }
  return out;
}

void ExperimentConfig::validate() const {
  noise.validate();
  const auto finite = [](double v, const char* name) {
    if (!std::isfinite(v)) {
      throw ConfigError(std::string("config: non-finite ") + name);
    }
  };
  finite(raman_rabi_rad_per_s, "raman rabi");
  finite(ryd_rabi_rad_per_s, "rydberg rabi");
  finite(map_rabi_rad_per_s, "map rabi");
  finite(blockade_shift_rad_per_s, "blockade shift");
  if (shots < 1) throw ConfigError("config: run.shots must be >= 1");
  const bool needs_scan = experiment != ExperimentKind::Calibrate;
  if (needs_scan && scan.points < 2) {
    throw ConfigError("config: scan.points must be >= 2 for scan experiments");
  }
  if (experiment == ExperimentKind::Calibrate && !calibrate.has_value()) {
    throw ConfigError("config: calibrate experiment needs a calibrate section");
  }
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    // byte offset -> line number for the diagnostic
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    fail(origin, "parse error at line " + std::to_string(line) + ": " +
                     e.what());
  }
  if (!doc.is_object()) fail(origin, "document root must be an object");
  reject_unknown_keys(doc, origin, "",
                      {"description", "experiment", "physics", "noise", "scan",
                       "run", "analysis", "calibrate", "report"});

  ExperimentConfig cfg;
  if (doc.contains("description")) {
    if (!doc["description"].is_string()) {
      fail(origin, "field 'description' must be a string");
    }
    cfg.description = doc["description"].get<std::string>();
  }

  if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
    fail(origin, "field 'experiment' is required and must be a string");
  }
  const std::string kind = doc["experiment"].get<std::string>();
  if (kind == "raman_rabi") {
    cfg.experiment = ExperimentKind::RamanRabi;
  } else if (kind == "rydberg_single") {
    cfg.experiment = ExperimentKind::RydbergSingle;
  } else if (kind == "rydberg_pair") {
    cfg.experiment = ExperimentKind::RydbergPair;
  } else if (kind == "entangle_parity") {
    cfg.experiment = ExperimentKind::EntangleParity;
  } else if (kind == "calibrate") {
    cfg.experiment = ExperimentKind::Calibrate;
  } else {
    fail(origin, "unknown experiment '" + kind + "'");
  }

  const json physics = get_section(doc, origin, "physics");
  reject_unknown_keys(physics, origin, "physics.",
                      {"raman_rabi_hz", "raman_detuning_hz", "ryd_rabi_hz",
                       "map_rabi_hz", "ryd_detuning_hz", "blockade_shift_hz"});
  cfg.raman_rabi_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "raman_rabi_hz", 250e3);
  cfg.raman_detuning_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "raman_detuning_hz", 0.0);
  cfg.ryd_rabi_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "ryd_rabi_hz", 7e6);
  cfg.map_rabi_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "map_rabi_hz", 7e6);
  cfg.ryd_detuning_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "ryd_detuning_hz", 0.0);
  cfg.blockade_shift_rad_per_s =
      kTwoPi * get_number(physics, origin, "physics.", "blockade_shift_hz", 50e6);

  const json noise = get_section(doc, origin, "noise");
  reject_unknown_keys(
      noise, origin, "noise.",
      {"scatter_rate_per_s", "scatter_branch_up", "scatter_branch_down",
       "scatter_branch_dark", "ryd_dephasing_per_s", "ryd_decay_per_s",
       "intensity_sigma", "detuning_sigma_hz", "map_phase_sigma_rad",
       "extra_loss_prob"});
  cfg.noise.scatter_rate_rad_per_s =
      get_number(noise, origin, "noise.", "scatter_rate_per_s", 0.0);
  cfg.noise.scatter_branching.to_up =
      get_number(noise, origin, "noise.", "scatter_branch_up", 0.5);
  cfg.noise.scatter_branching.to_down =
      get_number(noise, origin, "noise.", "scatter_branch_down", 0.25);
  cfg.noise.scatter_branching.to_dark =
      get_number(noise, origin, "noise.", "scatter_branch_dark", 0.25);
  cfg.noise.ryd_dephasing_rad_per_s =
      get_number(noise, origin, "noise.", "ryd_dephasing_per_s", 0.0);
  cfg.noise.ryd_decay_rad_per_s =
      get_number(noise, origin, "noise.", "ryd_decay_per_s", 0.0);
  cfg.noise.intensity_sigma =
      get_number(noise, origin, "noise.", "intensity_sigma", 0.0);
  cfg.noise.detuning_sigma_rad_per_s =
      kTwoPi * get_number(noise, origin, "noise.", "detuning_sigma_hz", 0.0);
  cfg.noise.map_phase_sigma_rad =
      get_number(noise, origin, "noise.", "map_phase_sigma_rad", 0.0);
  cfg.noise.extra_loss_prob =
      get_number(noise, origin, "noise.", "extra_loss_prob", 0.0);

  const json scan = get_section(doc, origin, "scan");
  reject_unknown_keys(scan, origin, "scan.", {"start", "stop", "points"});
  cfg.scan.start = get_number(scan, origin, "scan.", "start", 0.0);
  cfg.scan.stop = get_number(scan, origin, "scan.", "stop", 0.0);
  cfg.scan.points =
      static_cast<int>(get_number(scan, origin, "scan.", "points", 0.0));

  const json run = get_section(doc, origin, "run");
  reject_unknown_keys(run, origin, "run.",
                      {"shots", "seed", "output", "dt_s", "sample_counts"});
  cfg.shots = static_cast<int>(get_number(run, origin, "run.", "shots", 1.0));
  if (run.contains("seed")) {
    const json& s = run.at("seed");
    if (!s.is_number_unsigned() && !s.is_number_integer()) {
      fail(origin, "field 'run.seed' must be an integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (run.contains("output")) {
    if (!run["output"].is_string()) {
      fail(origin, "field 'run.output' must be a string");
    }
    cfg.output_path = run["output"].get<std::string>();
  }
  cfg.dt_s = get_number(run, origin, "run.", "dt_s", 0.0);
  if (run.contains("sample_counts")) {
    if (!run["sample_counts"].is_boolean()) {
      fail(origin, "field 'run.sample_counts' must be a boolean");
    }
    cfg.sample_counts = run["sample_counts"].get<bool>();
  }

  if (doc.contains("analysis")) {
    const json& analysis = doc["analysis"];
    reject_unknown_keys(analysis, origin, "analysis.", {"pair_loss_p"});
    if (analysis.contains("pair_loss_p")) {
      cfg.pair_loss_p =
          get_number(analysis, origin, "analysis.", "pair_loss_p", 0.0);
    }
  }

  if (doc.contains("calibrate")) {
    const json& cal = doc["calibrate"];
    reject_unknown_keys(cal, origin, "calibrate.",
                        {"targets", "sweeps", "grid_points", "parameters"});
    CalibrateSpec spec;
    if (!cal.contains("targets")) {
      fail(origin, "calibrate section needs 'targets'");
    }
    const json& targets = cal["targets"];
    reject_unknown_keys(targets, origin, "calibrate.targets.",
                        {"p11", "p10", "p01", "p00"});
    spec.targets.p11 =
        get_number(targets, origin, "calibrate.targets.", "p11", 0.0);
    spec.targets.p10 =
        get_number(targets, origin, "calibrate.targets.", "p10", 0.0);
    spec.targets.p01 =
        get_number(targets, origin, "calibrate.targets.", "p01", 0.0);
    spec.targets.p00 =
        get_number(targets, origin, "calibrate.targets.", "p00", 0.0);
    try {
      spec.targets.validate();
    } catch (const std::exception& e) {
      fail(origin, std::string("calibrate.targets: ") + e.what());
    }
    spec.sweeps = static_cast<int>(
        get_number(cal, origin, "calibrate.", "sweeps", 3.0));
    spec.grid_points = static_cast<int>(
        get_number(cal, origin, "calibrate.", "grid_points", 7.0));
    if (spec.sweeps < 1 || spec.grid_points < 2) {
      fail(origin, "calibrate: sweeps must be >= 1 and grid_points >= 2");
    }
    if (!cal.contains("parameters") || !cal["parameters"].is_object() ||
        cal["parameters"].empty()) {
      fail(origin, "calibrate section needs a nonempty 'parameters' object");
    }
    const std::set<std::string> searchable{
        "scatter_rate_per_s", "ryd_dephasing_per_s", "ryd_decay_per_s",
        "intensity_sigma",    "detuning_sigma_hz",   "map_phase_sigma_rad",
        "extra_loss_prob"};
    for (const auto& [name, bounds] : cal["parameters"].items()) {
      if (!searchable.contains(name)) {
        fail(origin, "calibrate.parameters: unknown parameter '" + name + "'");
      }
      reject_unknown_keys(bounds, origin, "calibrate.parameters." + name + ".",
                          {"min", "max"});
      CalibrateParameter param;
      param.name = name;
      param.min = get_number(bounds, origin,
                             "calibrate.parameters." + name + ".", "min", 0.0);
      param.max = get_number(bounds, origin,
                             "calibrate.parameters." + name + ".", "max", 0.0);
      if (!(param.min <= param.max)) {
        fail(origin, "calibrate.parameters." + name + ": min must be <= max");
      }
      spec.parameters.push_back(std::move(param));
    }
    cfg.calibrate = std::move(spec);
  }

  if (doc.contains("report")) {
    const json& rep = doc["report"];
    reject_unknown_keys(rep, origin, "report.", {"p", "fidelity"});
    ReportInputs inputs;
    inputs.loss_probability = get_number(rep, origin, "report.", "p", 0.0);
    inputs.fidelity = get_number(rep, origin, "report.", "fidelity", 0.0);
    cfg.report = inputs;
  }

  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(origin, e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

}  // namespace rydsim
