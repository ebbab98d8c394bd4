#pragma once

#include <array>
#include <random>
#include <vector>

#include "rydsim/qstate.hpp"

namespace rydsim {

/// Driving transitions. Each kind couples a fixed (lower, upper) level pair:
/// RamanRotation: Down <-> Up, RydExcite: Up <-> Ryd, RydMap: Down <-> Ryd.
enum class PulseKind { RamanRotation, RydExcite, RydMap };

AtomLevel lower_level(PulseKind kind);
AtomLevel upper_level(PulseKind kind);

/// One square driving pulse. Frequencies are angular (rad/s); `phase_rad`
/// is the laser phase including k.r contributions.
struct PulseSpec {
  PulseKind kind = PulseKind::RamanRotation;
  double rabi_rad_per_s = 0.0;
  double detuning_rad_per_s = 0.0;
  double duration_s = 0.0;
  double phase_rad = 0.0;
  bool target_a = true;
  bool target_b = true;

  bool targets_atom(int atom) const { return atom == 0 ? target_a : target_b; }
  void validate() const;
};

struct TimedPulse {
  double start_s = 0.0;
  PulseSpec pulse;

  double end_s() const { return start_s + pulse.duration_s; }
  /// Active on the half-open interval [start, start + duration).
  bool active_at(double t_s) const {
    return t_s >= start_s && t_s < end_s();
  }
};

/// A timed pulse program on the atom pair plus the always-on blockade shift
/// of the doubly excited state |rr>.
struct SequenceSpec {
  std::vector<TimedPulse> pulses;
  double blockade_shift_rad_per_s = 0.0;
  PairIndex initial_state{AtomLevel::Up, AtomLevel::Up};

  /// Start times nonnegative, pulses valid, no same-atom overlap.
  void validate() const;
  double end_time_s() const;
  double shortest_pulse_s() const;
};

/// Branching of an effective scattering event out of the driven lower level,
/// into (Up, Down, DarkPresent). Sums to 1.
struct ScatterBranching {
  double to_up = 1.0;
  double to_down = 0.0;
  double to_dark = 0.0;
};

/// Stochastic noise model. Fast (Markovian) processes become Lindblad
/// collapse operators while a pulse drives an atom; slow shot-to-shot
/// fluctuations are sampled once per shot into ShotParams.
struct NoiseSpec {
  // Markovian, active while a pulse drives the atom.
  double scatter_rate_rad_per_s = 0.0;
  ScatterBranching scatter_branching{};
  double ryd_dephasing_rad_per_s = 0.0;
  // Always-on radiative decay of |r> into Absent. Defaults to 0: the
  // sequences of interest are far shorter than the Rydberg lifetime.
  double ryd_decay_rad_per_s = 0.0;

  // Quasi-static, one draw per shot.
  double intensity_sigma = 0.0;
  double detuning_sigma_rad_per_s = 0.0;
  double map_phase_sigma_rad = 0.0;
  double extra_loss_prob = 0.0;

  void validate() const;
  bool is_quiet() const;
};

/// One realization of the quasi-static part of NoiseSpec.
struct ShotParams {
  double rabi_scale = 1.0;
  double detuning_offset_rad_per_s = 0.0;
  double map_phase_rad = 0.0;
  std::array<bool, 2> loss_draws{false, false};
};

/// Draws ShotParams from `noise`: rabi_scale ~ N(1, intensity_sigma)
/// clamped below at 0.01, detuning_offset ~ N(0, detuning_sigma),
/// map_phase ~ N(0, map_phase_sigma), loss_draws ~ Bernoulli(extra_loss).
/// Deterministic given the engine state; zero-sigma fields consume no
/// randomness.
ShotParams sample_shot_params(const NoiseSpec& noise, std::mt19937_64& rng);

/// The Hamiltonian at one instant, split into its single-atom 5x5 terms and
/// the two-atom blockade shift:
///   H = atom_a (x) I + I (x) atom_b + blockade_rr |rr><rr|.
/// The integrators work on this form directly; build_hamiltonian embeds it
/// densely.
struct HamiltonianTerms {
  Mat5 atom_a = Mat5::Zero();
  Mat5 atom_b = Mat5::Zero();
  double blockade_rr = 0.0;
};

HamiltonianTerms hamiltonian_terms(const SequenceSpec& seq, double t_s,
                                   const ShotParams& shot);

/// H(t)/hbar in rad/s. For every pulse active at t and every targeted atom:
///   (rabi*rabi_scale/2)(e^{i phi}|up><low| + h.c.)
///   - (detuning + detuning_offset)|up><up|
/// plus the blockade term blockade_shift*|rr><rr|. The shot's map_phase is
/// added to the phase of RydMap coupling on atom b (the physical phase of
/// Eq-of-motion interest is only the a/b difference). Hermitian by
/// construction; leak levels (DarkPresent, Absent) are never coupled.
Mat25 build_hamiltonian(const SequenceSpec& seq, double t_s,
                        const ShotParams& shot);

/// A single-atom transfer channel sqrt(rate)|dst><src| acting on one atom.
/// All collapse operators in the model have this shape, which the
/// integrator exploits.
struct JumpOp {
  int atom = 0;  // 0 = a, 1 = b
  AtomLevel src = AtomLevel::Down;
  AtomLevel dst = AtomLevel::Down;
  double rate_rad_per_s = 0.0;

  /// Dense 25x25 embedding sqrt(rate) |dst><src| (x) I.
  Mat25 matrix() const;
};

/// Structured collapse operators active at time t: per driven atom, one
/// scattering channel out of the pulse's lower level per nonzero branching
/// entry, a |r><r| dephasing channel during RydExcite/RydMap, and the
/// always-on Rydberg decay channel when enabled. Empty when nothing drives
/// and decay is off.
std::vector<JumpOp> active_jump_ops(const SequenceSpec& seq, double t_s,
                                    const NoiseSpec& noise);

/// Same channels as dense 25x25 matrices.
std::vector<Mat25> build_collapse_operators(const SequenceSpec& seq,
                                            double t_s,
                                            const NoiseSpec& noise);

/// Static laser phases of the entangling pulses, per atom (k.r terms).
struct EntanglePhases {
  double excite_a = 0.0;
  double excite_b = 0.0;
  double map_a = 0.0;
  double map_b = 0.0;
};

/// The blockade entangling program: RydExcite on both atoms for
/// pi/(sqrt(2) omega_ryd), then RydMap on both atoms for pi/omega_map,
/// starting from |up,up> with the blockade shift delta_e on |rr>.
/// Stages with equal per-atom phases are emitted as one two-atom pulse.
SequenceSpec build_entangle_sequence(double omega_ryd_rad_per_s,
                                     double omega_map_rad_per_s,
                                     double delta_e_rad_per_s,
                                     const EntanglePhases& phases = {});

/// Conservative integrator step for the sequence: respects the
/// shortest-pulse precondition of the evolvers and resolves the fastest
/// Hamiltonian and collapse scales.
double suggest_dt(const SequenceSpec& seq, const NoiseSpec& noise);

}  // namespace rydsim
