#include "rydsim/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rydsim/errors.hpp"

namespace rydsim {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

AtomLevel lower_level(PulseKind kind) {
  switch (kind) {
    case PulseKind::RamanRotation:
      return AtomLevel::Down;
    case PulseKind::RydExcite:
      return AtomLevel::Up;
    case PulseKind::RydMap:
      return AtomLevel::Down;
  }
  throw std::invalid_argument("lower_level: bad PulseKind");
}

AtomLevel upper_level(PulseKind kind) {
  switch (kind) {
    case PulseKind::RamanRotation:
      return AtomLevel::Up;
    case PulseKind::RydExcite:
      return AtomLevel::Ryd;
    case PulseKind::RydMap:
      return AtomLevel::Ryd;
  }
  throw std::invalid_argument("upper_level: bad PulseKind");
}

void PulseSpec::validate() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("PulseSpec: duration must be positive");
  }
  if (rabi_rad_per_s < 0.0 || !std::isfinite(rabi_rad_per_s)) {
    throw std::invalid_argument("PulseSpec: rabi frequency must be >= 0");
  }
  if (!std::isfinite(detuning_rad_per_s) || !std::isfinite(phase_rad)) {
    throw std::invalid_argument("PulseSpec: non-finite detuning or phase");
  }
  if (!target_a && !target_b) {
    throw std::invalid_argument("PulseSpec: target set must be nonempty");
  }
}

void SequenceSpec::validate() const {
  for (const TimedPulse& tp : pulses) {
    tp.pulse.validate();
    if (tp.start_s < 0.0 || !std::isfinite(tp.start_s)) {
      throw std::invalid_argument("SequenceSpec: pulse start must be >= 0");
    }
  }
  if (!std::isfinite(blockade_shift_rad_per_s)) {
    throw std::invalid_argument("SequenceSpec: non-finite blockade shift");
  }
  // Same-atom pulses must not overlap (half-open intervals).
  for (int atom = 0; atom < 2; ++atom) {
    std::vector<const TimedPulse*> on_atom;
    for (const TimedPulse& tp : pulses) {
      if (tp.pulse.targets_atom(atom)) on_atom.push_back(&tp);
    }
    std::sort(on_atom.begin(), on_atom.end(),
              [](const TimedPulse* x, const TimedPulse* y) {
                return x->start_s < y->start_s;
              });
    for (std::size_t i = 1; i < on_atom.size(); ++i) {
      if (on_atom[i]->start_s < on_atom[i - 1]->end_s()) {
        throw std::invalid_argument(
            "SequenceSpec: overlapping pulses on atom " +
            std::string(atom == 0 ? "a" : "b"));
      }
    }
  }
}

double SequenceSpec::end_time_s() const {
  double end = 0.0;
  for (const TimedPulse& tp : pulses) end = std::max(end, tp.end_s());
  return end;
}

double SequenceSpec::shortest_pulse_s() const {
  double shortest = std::numeric_limits<double>::infinity();
  for (const TimedPulse& tp : pulses) {
    shortest = std::min(shortest, tp.pulse.duration_s);
  }
  return shortest;
}

void NoiseSpec::validate() const {
  const auto nonneg = [](double v, const char* name) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("NoiseSpec: ") + name +
                                  " must be >= 0");
    }
  };
  nonneg(scatter_rate_rad_per_s, "scatter_rate");
  nonneg(ryd_dephasing_rad_per_s, "ryd_dephasing");
  nonneg(ryd_decay_rad_per_s, "ryd_decay");
  nonneg(intensity_sigma, "intensity_sigma");
  nonneg(detuning_sigma_rad_per_s, "detuning_sigma");
  nonneg(map_phase_sigma_rad, "map_phase_sigma");
  const auto prob = [](double v, const char* name) {
    if (v < 0.0 || v > 1.0 || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("NoiseSpec: ") + name +
                                  " must lie in [0,1]");
    }
  };
  prob(extra_loss_prob, "extra_loss_prob");
  prob(scatter_branching.to_up, "scatter_branching.to_up");
  prob(scatter_branching.to_down, "scatter_branching.to_down");
  prob(scatter_branching.to_dark, "scatter_branching.to_dark");
  const double sum = scatter_branching.to_up + scatter_branching.to_down +
                     scatter_branching.to_dark;
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("NoiseSpec: scatter branching must sum to 1");
  }
}

bool NoiseSpec::is_quiet() const {
  return scatter_rate_rad_per_s == 0.0 && ryd_dephasing_rad_per_s == 0.0 &&
         ryd_decay_rad_per_s == 0.0 && intensity_sigma == 0.0 &&
         detuning_sigma_rad_per_s == 0.0 && map_phase_sigma_rad == 0.0 &&
         extra_loss_prob == 0.0;
}

ShotParams sample_shot_params(const NoiseSpec& noise, std::mt19937_64& rng) {
  noise.validate();
  ShotParams shot;
  if (noise.intensity_sigma > 0.0) {
    std::normal_distribution<double> dist(1.0, noise.intensity_sigma);
    shot.rabi_scale = std::max(0.01, dist(rng));
  }
  if (noise.detuning_sigma_rad_per_s > 0.0) {
    std::normal_distribution<double> dist(0.0, noise.detuning_sigma_rad_per_s);
    shot.detuning_offset_rad_per_s = dist(rng);
  }
  if (noise.map_phase_sigma_rad > 0.0) {
    std::normal_distribution<double> dist(0.0, noise.map_phase_sigma_rad);
    shot.map_phase_rad = dist(rng);
  }
  if (noise.extra_loss_prob > 0.0) {
    std::bernoulli_distribution dist(noise.extra_loss_prob);
    shot.loss_draws[0] = dist(rng);
    shot.loss_draws[1] = dist(rng);
  }
  return shot;
}

HamiltonianTerms hamiltonian_terms(const SequenceSpec& seq, double t_s,
                                   const ShotParams& shot) {
  seq.validate();
  const double end = seq.end_time_s();
  if (t_s < 0.0 || t_s > end) {
    throw std::invalid_argument("build_hamiltonian: t outside [0, " +
                                std::to_string(end) + "]");
  }
  HamiltonianTerms terms;
  terms.blockade_rr = seq.blockade_shift_rad_per_s;
  for (const TimedPulse& tp : seq.pulses) {
    if (!tp.active_at(t_s)) continue;
    const PulseSpec& p = tp.pulse;
    const int low = static_cast<int>(lower_level(p.kind));
    const int up = static_cast<int>(upper_level(p.kind));
    const double detuning =
        p.detuning_rad_per_s + shot.detuning_offset_rad_per_s;
    for (int atom = 0; atom < 2; ++atom) {
      if (!p.targets_atom(atom)) continue;
      double phase = p.phase_rad;
      if (p.kind == PulseKind::RydMap && atom == 1) {
        phase += shot.map_phase_rad;
      }
      const Complex half_rabi =
          std::polar(0.5 * p.rabi_rad_per_s * shot.rabi_scale, phase);
      Mat5& h5 = atom == 0 ? terms.atom_a : terms.atom_b;
      h5(up, low) += half_rabi;
      h5(low, up) += std::conj(half_rabi);
      h5(up, up) -= Complex{detuning, 0.0};
    }
  }
  return terms;
}

Mat25 build_hamiltonian(const SequenceSpec& seq, double t_s,
                        const ShotParams& shot) {
  const HamiltonianTerms terms = hamiltonian_terms(seq, t_s, shot);
  Mat25 h = Mat25::Zero();
  for (int level = 0; level < kLevelCount; ++level) {
    h.block<kLevelCount, kLevelCount>(kLevelCount * level,
                                      kLevelCount * level) += terms.atom_b;
    for (int other = 0; other < kLevelCount; ++other) {
      const Complex v = terms.atom_a(level, other);
      if (v != Complex{0.0, 0.0}) {
        for (int j = 0; j < kLevelCount; ++j) {
          h(kLevelCount * level + j, kLevelCount * other + j) += v;
        }
      }
    }
  }
  const int rr = flat_index(AtomLevel::Ryd, AtomLevel::Ryd);
  h(rr, rr) += Complex{terms.blockade_rr, 0.0};
  return h;
}

Mat25 JumpOp::matrix() const {
  Mat25 m = Mat25::Zero();
  const double amp = std::sqrt(rate_rad_per_s);
  for (int other = 0; other < kLevelCount; ++other) {
    const auto spectator = static_cast<AtomLevel>(other);
    const int row = atom == 0 ? flat_index(dst, spectator)
                              : flat_index(spectator, dst);
    const int col = atom == 0 ? flat_index(src, spectator)
                              : flat_index(spectator, src);
    m(row, col) = Complex{amp, 0.0};
  }
  return m;
}

std::vector<JumpOp> active_jump_ops(const SequenceSpec& seq, double t_s,
                                    const NoiseSpec& noise) {
  noise.validate();
  std::vector<JumpOp> ops;
  for (int atom = 0; atom < 2; ++atom) {
    const TimedPulse* active = nullptr;
    for (const TimedPulse& tp : seq.pulses) {
      if (tp.pulse.targets_atom(atom) && tp.active_at(t_s)) {
        active = &tp;
        break;
      }
    }
    if (active != nullptr && noise.scatter_rate_rad_per_s > 0.0) {
      const AtomLevel source = lower_level(active->pulse.kind);
      const std::array<std::pair<AtomLevel, double>, 3> branches{
          std::pair{AtomLevel::Up, noise.scatter_branching.to_up},
          std::pair{AtomLevel::Down, noise.scatter_branching.to_down},
          std::pair{AtomLevel::DarkPresent, noise.scatter_branching.to_dark}};
      for (const auto& [dest, weight] : branches) {
        if (weight > 0.0) {
          ops.push_back(JumpOp{atom, source, dest,
                               noise.scatter_rate_rad_per_s * weight});
        }
      }
    }
    if (active != nullptr && noise.ryd_dephasing_rad_per_s > 0.0 &&
        (active->pulse.kind == PulseKind::RydExcite ||
         active->pulse.kind == PulseKind::RydMap)) {
      ops.push_back(JumpOp{atom, AtomLevel::Ryd, AtomLevel::Ryd,
                           noise.ryd_dephasing_rad_per_s});
    }
    if (noise.ryd_decay_rad_per_s > 0.0) {
      ops.push_back(JumpOp{atom, AtomLevel::Ryd, AtomLevel::Absent,
                           noise.ryd_decay_rad_per_s});
    }
  }
  return ops;
}

std::vector<Mat25> build_collapse_operators(const SequenceSpec& seq,
                                            double t_s,
                                            const NoiseSpec& noise) {
  std::vector<Mat25> out;
  for (const JumpOp& op : active_jump_ops(seq, t_s, noise)) {
    out.push_back(op.matrix());
  }
  return out;
}

SequenceSpec build_entangle_sequence(double omega_ryd_rad_per_s,
                                     double omega_map_rad_per_s,
                                     double delta_e_rad_per_s,
                                     const EntanglePhases& phases) {
  if (!(omega_ryd_rad_per_s > 0.0) || !(omega_map_rad_per_s > 0.0)) {
    throw std::invalid_argument(
        "build_entangle_sequence: rabi frequencies must be positive");
  }
  const double excite_duration = kPi / (std::sqrt(2.0) * omega_ryd_rad_per_s);
  const double map_duration = kPi / omega_map_rad_per_s;

  SequenceSpec seq;
  seq.blockade_shift_rad_per_s = delta_e_rad_per_s;
  seq.initial_state = PairIndex{AtomLevel::Up, AtomLevel::Up};

  const auto emit_stage = [&seq](PulseKind kind, double start, double duration,
                                 double rabi, double phase_a, double phase_b) {
    if (phase_a == phase_b) {
      seq.pulses.push_back(
          TimedPulse{start, PulseSpec{kind, rabi, 0.0, duration, phase_a,
                                      true, true}});
    } else {
      seq.pulses.push_back(
          TimedPulse{start, PulseSpec{kind, rabi, 0.0, duration, phase_a,
                                      true, false}});
      seq.pulses.push_back(
          TimedPulse{start, PulseSpec{kind, rabi, 0.0, duration, phase_b,
                                      false, true}});
    }
  };
  emit_stage(PulseKind::RydExcite, 0.0, excite_duration, omega_ryd_rad_per_s,
             phases.excite_a, phases.excite_b);
  emit_stage(PulseKind::RydMap, excite_duration, map_duration,
             omega_map_rad_per_s, phases.map_a, phases.map_b);
  seq.validate();
  return seq;
}

double suggest_dt(const SequenceSpec& seq, const NoiseSpec& noise) {
  seq.validate();
  noise.validate();
  double dt = std::numeric_limits<double>::infinity();
  const double shortest = seq.shortest_pulse_s();
  if (std::isfinite(shortest)) dt = shortest / 100.0;
  double max_rate = std::max({noise.scatter_rate_rad_per_s,
                              noise.ryd_dephasing_rad_per_s,
                              noise.ryd_decay_rad_per_s});
  if (max_rate > 0.0) dt = std::min(dt, 0.1 / max_rate);
  if (!std::isfinite(dt)) dt = 1e-9;  // pulse-free sequence: nothing to resolve
  return dt;
}

}  // namespace rydsim
