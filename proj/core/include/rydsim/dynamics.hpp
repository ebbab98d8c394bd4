#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rydsim/physics.hpp"
#include "rydsim/qstate.hpp"

namespace rydsim {

/// Time-stamped states sampled along one integration, at a fixed stride in
/// integrator steps. Endpoints are always included.
struct UnitaryTrajectory {
  std::vector<double> times_s;
  std::vector<PureState> states;

  const PureState& final_state() const { return states.back(); }
};

struct DensityTrajectory {
  std::vector<double> times_s;
  std::vector<DensityMatrix> states;

  const DensityMatrix& final_state() const { return states.back(); }
};

/// Schroedinger evolution d psi = -i H(t) psi with fixed-step RK4 inside
/// each piecewise-constant segment of the sequence, renormalizing after
/// every step. `dt_s` must satisfy dt <= shortest pulse duration / 100;
/// steps are further refined per segment so that the fastest coupling in
/// that segment stays resolved. `record_stride` of 0 keeps endpoints only.
/// Accumulated norm drift beyond 1e-8 raises InvariantViolation.
UnitaryTrajectory evolve_unitary(const PureState& psi0,
                                 const SequenceSpec& seq,
                                 const ShotParams& shot, double dt_s,
                                 int record_stride = 1);

/// Lindblad master-equation evolution
///   d rho = -i[H, rho] + sum_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho})
/// with the same stepping scheme. After every step the state is
/// re-symmetrized and its trace (1e-8), hermiticity (1e-10) and spectrum
/// floor (-1e-8) are checked; violations raise InvariantViolation.
/// Requires dt <= min(shortest pulse / 100, 0.1 / max collapse rate).
DensityTrajectory evolve_lindblad(const DensityMatrix& rho0,
                                  const SequenceSpec& seq,
                                  const NoiseSpec& noise,
                                  const ShotParams& shot, double dt_s,
                                  int record_stride = 1);

/// Transfers the full state of one atom (0 = a, 1 = b) into Absent,
/// discarding its coherences; the partner atom's state is untouched.
DensityMatrix apply_atom_loss(const DensityMatrix& rho, int atom);

struct ShotRecord {
  std::uint64_t seed = 0;
  ShotParams params;
  std::array<double, kPairDim> final_populations{};
};

struct EnsembleResult {
  DensityMatrix mean_rho_final;
  std::vector<ShotRecord> records;
  int shot_count = 0;
  /// Per-shot final states, kept only on request (memory).
  std::vector<DensityMatrix> final_states;
};

struct EnsembleOptions {
  double dt_s = 0.0;  // 0 = suggest_dt(seq, noise)
  int threads = 1;    // <=0 = hardware concurrency
  bool keep_final_states = false;
};

/// Noise-averaged ensemble: per shot, draw ShotParams from a seed derived
/// by a splittable counter scheme, evolve the Lindblad equation, apply the
/// extra-loss transfers, and average the finals. Deterministic for a given
/// seed and independent of the thread count: shots are summed in fixed
/// blocks that are reduced in index order.
EnsembleResult run_ensemble(const SequenceSpec& seq, const NoiseSpec& noise,
                            int n_shots, std::uint64_t seed,
                            const EnsembleOptions& options = {});

}  // namespace rydsim
