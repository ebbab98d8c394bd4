#include "rydsim/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "rydsim/errors.hpp"
#include "rydsim/rng.hpp"

namespace rydsim {

namespace {

// One piecewise-constant slice of the sequence. `generator` is
// M = -i H - (1/2) sum_k L_k^+ L_k (the collapse sum is diagonal for the
// single-atom transfer channels), so the damped commutator part of the
// master equation is M rho + (M rho)^+. That sum is exactly Hermitian in
// floating point, which pins the integration to the Hermitian manifold.
struct Segment {
  double t0 = 0.0;
  double t1 = 0.0;
  Mat25 generator;
  std::vector<JumpOp> jumps;
  long n_steps = 1;
  double h = 0.0;
};

constexpr double kAccuracyFactor = 0.05;  // phase advance per step, active scales
constexpr double kStabilityFactor = 1.5;  // RK4 imaginary-axis stability margin

std::vector<double> segment_boundaries(const SequenceSpec& seq) {
  std::vector<double> cuts{0.0, seq.end_time_s()};
  for (const TimedPulse& tp : seq.pulses) {
    cuts.push_back(tp.start_s);
    cuts.push_back(tp.end_s());
  }
  std::sort(cuts.begin(), cuts.end());
  const double merge_tol = 1e-12 * std::max(seq.end_time_s(), 1e-30);
  std::vector<double> out;
  for (double c : cuts) {
    if (out.empty() || c - out.back() > merge_tol) out.push_back(c);
  }
  return out;
}

// Upper bounds on the angular scales of one segment, used to refine the
// prescribed step: `drive` covers couplings the dynamics actively explores
// (sets the accuracy step), `total` bounds the spectral radius (sets the
// stability step).
void segment_scales(const SequenceSpec& seq, double t_mid,
                    const ShotParams& shot, double total_jump_rate,
                    double* drive, double* total) {
  double drv = 0.0;
  double coupling_sum = 0.0;
  bool rydberg_active = false;
  for (const TimedPulse& tp : seq.pulses) {
    if (!tp.active_at(t_mid)) continue;
    const PulseSpec& p = tp.pulse;
    const double scale = p.rabi_rad_per_s * shot.rabi_scale +
                         std::abs(p.detuning_rad_per_s +
                                  shot.detuning_offset_rad_per_s);
    drv = std::max(drv, scale);
    coupling_sum += scale * (static_cast<int>(p.target_a) +
                             static_cast<int>(p.target_b));
    if (p.kind != PulseKind::RamanRotation) rydberg_active = true;
  }
  const double blockade = std::abs(seq.blockade_shift_rad_per_s);
  if (rydberg_active) drv = std::max(drv, blockade);
  *drive = drv;
  *total = coupling_sum + blockade + total_jump_rate;
}

std::vector<Segment> build_segments(const SequenceSpec& seq,
                                    const NoiseSpec& noise,
                                    const ShotParams& shot, double dt_s,
                                    bool with_collapse) {
  std::vector<Segment> segments;
  const std::vector<double> cuts = segment_boundaries(seq);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Segment s;
    s.t0 = cuts[i];
    s.t1 = cuts[i + 1];
    const double mid = 0.5 * (s.t0 + s.t1);
    s.generator = Complex{0.0, -1.0} * build_hamiltonian(seq, mid, shot);
    double total_rate = 0.0;
    if (with_collapse) {
      s.jumps = active_jump_ops(seq, mid, noise);
      for (const JumpOp& op : s.jumps) {
        total_rate += op.rate_rad_per_s;
        for (int other = 0; other < kLevelCount; ++other) {
          const int idx =
              op.atom == 0
                  ? flat_index(op.src, static_cast<AtomLevel>(other))
                  : flat_index(static_cast<AtomLevel>(other), op.src);
          s.generator(idx, idx) -= Complex{0.5 * op.rate_rad_per_s, 0.0};
        }
      }
    }
    double drive = 0.0;
    double total = 0.0;
    segment_scales(seq, mid, shot, total_rate, &drive, &total);
    double h = dt_s;
    if (drive > 0.0) h = std::min(h, kAccuracyFactor / drive);
    if (total > 0.0) h = std::min(h, kStabilityFactor / total);
    const double len = s.t1 - s.t0;
    s.n_steps = std::max<long>(1, static_cast<long>(std::ceil(len / h)));
    s.h = len / static_cast<double>(s.n_steps);
    segments.push_back(std::move(s));
  }
  return segments;
}

void check_dt_precondition(const SequenceSpec& seq, const NoiseSpec* noise,
                           double dt_s) {
  if (!(dt_s > 0.0) || !std::isfinite(dt_s)) {
    throw std::invalid_argument("evolve: dt must be positive");
  }
  const double shortest = seq.shortest_pulse_s();
  if (std::isfinite(shortest) && dt_s > (shortest / 100.0) * (1.0 + 1e-12)) {
    throw std::invalid_argument(
        "evolve: dt too large, must be <= shortest pulse / 100 = " +
        std::to_string(shortest / 100.0));
  }
  if (noise != nullptr) {
    // Rates are constant while a pulse is on; probing every pulse midpoint
    // (plus t = 0 for always-on channels) covers all windows.
    double max_rate = 0.0;
    for (const JumpOp& op : active_jump_ops(seq, 0.0, *noise)) {
      max_rate = std::max(max_rate, op.rate_rad_per_s);
    }
    for (const TimedPulse& tp : seq.pulses) {
      const double mid = tp.start_s + 0.5 * tp.pulse.duration_s;
      for (const JumpOp& op : active_jump_ops(seq, mid, *noise)) {
        max_rate = std::max(max_rate, op.rate_rad_per_s);
      }
    }
    if (max_rate > 0.0 && dt_s > (0.1 / max_rate) * (1.0 + 1e-12)) {
      throw std::invalid_argument(
          "evolve: dt too large for collapse rate, must be <= " +
          std::to_string(0.1 / max_rate));
    }
  }
}

// Applies sum_k L_k rho L_k^+ for single-atom transfer channels. For a
// channel on atom a this adds the (src,src) 5x5 block into (dst,dst);
// for atom b the strided analogue.
void add_jump_terms(const std::vector<JumpOp>& jumps, const Mat25& rho,
                    Mat25& out) {
  for (const JumpOp& op : jumps) {
    const double rate = op.rate_rad_per_s;
    const int src = static_cast<int>(op.src);
    const int dst = static_cast<int>(op.dst);
    if (op.atom == 0) {
      out.block<kLevelCount, kLevelCount>(kLevelCount * dst, kLevelCount * dst)
          .noalias() += rate * rho.block<kLevelCount, kLevelCount>(
                                   kLevelCount * src, kLevelCount * src);
    } else {
      for (int i = 0; i < kLevelCount; ++i) {
        for (int j = 0; j < kLevelCount; ++j) {
          out(kLevelCount * i + dst, kLevelCount * j + dst) +=
              rate * rho(kLevelCount * i + src, kLevelCount * j + src);
        }
      }
    }
  }
}

struct LindbladWorkspace {
  Mat25 b;
  Mat25 k1;
  Mat25 k2;
  Mat25 k3;
  Mat25 k4;
  Mat25 stage;
};

void lindblad_rhs(const Segment& seg, const Mat25& rho, Mat25& b, Mat25& out) {
  b.noalias() = seg.generator * rho;
  out = b + b.adjoint();
  add_jump_terms(seg.jumps, rho, out);
}

// Per-step invariant checks. Positivity to tolerance is probed with a
// Cholesky factorization of rho + tol*I; the exact spectrum is only
// computed on the slow path before declaring a violation.
void check_density_step(const Mat25& rho, double t_s) {
  const double asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (asym > DensityMatrix::kHermitianTol) {
    throw InvariantViolation("evolve_lindblad: hermiticity drift " +
                             std::to_string(asym) + " at t = " +
                             std::to_string(t_s));
  }
  const double trace_err = std::abs(rho.trace() - Complex{1.0, 0.0});
  if (trace_err > 1e-8) {
    throw InvariantViolation("evolve_lindblad: trace drift " +
                             std::to_string(trace_err) + " at t = " +
                             std::to_string(t_s));
  }
  Mat25 shifted = rho;
  shifted.diagonal().array() += -DensityMatrix::kEigenvalueFloor;
  Eigen::LLT<Mat25> llt(shifted);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Mat25> solver(rho, Eigen::EigenvaluesOnly);
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < DensityMatrix::kEigenvalueFloor) {
      throw InvariantViolation("evolve_lindblad: eigenvalue " +
                               std::to_string(min_eig) + " at t = " +
                               std::to_string(t_s));
    }
  }
}

}  // namespace

UnitaryTrajectory evolve_unitary(const PureState& psi0,
                                 const SequenceSpec& seq,
                                 const ShotParams& shot, double dt_s,
                                 int record_stride) {
  seq.validate();
  check_dt_precondition(seq, nullptr, dt_s);

  UnitaryTrajectory traj;
  traj.times_s.push_back(0.0);
  traj.states.push_back(psi0);

  Vec25 psi = psi0.amplitudes();
  Vec25 k1;
  Vec25 k2;
  Vec25 k3;
  Vec25 k4;
  NoiseSpec no_noise;
  double norm_drift = 0.0;
  long step_count = 0;
  const auto segments = build_segments(seq, no_noise, shot, dt_s, false);
  for (const Segment& seg : segments) {
    for (long k = 0; k < seg.n_steps; ++k) {
      const double h = seg.h;
      k1.noalias() = seg.generator * psi;
      k2.noalias() = seg.generator * (psi + 0.5 * h * k1).eval();
      k3.noalias() = seg.generator * (psi + 0.5 * h * k2).eval();
      k4.noalias() = seg.generator * (psi + h * k3).eval();
      psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double norm = psi.norm();
      norm_drift += std::abs(norm - 1.0);
      psi /= norm;
      ++step_count;
      const double t = seg.t0 + static_cast<double>(k + 1) * seg.h;
      const bool last = (&seg == &segments.back()) && k + 1 == seg.n_steps;
      if ((record_stride > 0 && step_count % record_stride == 0) || last) {
        traj.times_s.push_back(t);
        traj.states.push_back(PureState(psi));
      }
    }
  }
  if (norm_drift > 1e-8) {
    throw InvariantViolation("evolve_unitary: accumulated norm drift " +
                             std::to_string(norm_drift));
  }
  return traj;
}

DensityTrajectory evolve_lindblad(const DensityMatrix& rho0,
                                  const SequenceSpec& seq,
                                  const NoiseSpec& noise,
                                  const ShotParams& shot, double dt_s,
                                  int record_stride) {
  seq.validate();
  noise.validate();
  check_dt_precondition(seq, &noise, dt_s);

  DensityTrajectory traj;
  traj.times_s.push_back(0.0);
  traj.states.push_back(rho0);

  Mat25 rho = rho0.matrix();
  LindbladWorkspace w;
  long step_count = 0;
  const auto segments = build_segments(seq, noise, shot, dt_s, true);
  for (const Segment& seg : segments) {
    for (long k = 0; k < seg.n_steps; ++k) {
      const double h = seg.h;
      lindblad_rhs(seg, rho, w.b, w.k1);
      w.stage = rho + 0.5 * h * w.k1;
      lindblad_rhs(seg, w.stage, w.b, w.k2);
      w.stage = rho + 0.5 * h * w.k2;
      lindblad_rhs(seg, w.stage, w.b, w.k3);
      w.stage = rho + h * w.k3;
      lindblad_rhs(seg, w.stage, w.b, w.k4);
      rho += (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
      const double t = seg.t0 + static_cast<double>(k + 1) * seg.h;
      check_density_step(rho, t);
      rho = 0.5 * (rho + rho.adjoint()).eval();
      ++step_count;
      const bool last = (&seg == &segments.back()) && k + 1 == seg.n_steps;
      if ((record_stride > 0 && step_count % record_stride == 0) || last) {
        traj.times_s.push_back(t);
        traj.states.push_back(DensityMatrix(rho));
      }
    }
  }
  return traj;
}

DensityMatrix apply_atom_loss(const DensityMatrix& rho, int atom) {
  if (atom != 0 && atom != 1) {
    throw std::invalid_argument("apply_atom_loss: atom must be 0 or 1");
  }
  const Mat25& m = rho.matrix();
  Mat25 out = Mat25::Zero();
  const int absent = static_cast<int>(AtomLevel::Absent);
  if (atom == 0) {
    for (int src = 0; src < kLevelCount; ++src) {
      out.block<kLevelCount, kLevelCount>(kLevelCount * absent,
                                          kLevelCount * absent) +=
          m.block<kLevelCount, kLevelCount>(kLevelCount * src,
                                            kLevelCount * src);
    }
  } else {
    for (int src = 0; src < kLevelCount; ++src) {
      for (int i = 0; i < kLevelCount; ++i) {
        for (int j = 0; j < kLevelCount; ++j) {
          out(kLevelCount * i + absent, kLevelCount * j + absent) +=
              m(kLevelCount * i + src, kLevelCount * j + src);
        }
      }
    }
  }
  return DensityMatrix(out);
}

EnsembleResult run_ensemble(const SequenceSpec& seq, const NoiseSpec& noise,
                            int n_shots, std::uint64_t seed,
                            const EnsembleOptions& options) {
  if (n_shots < 1) {
    throw std::invalid_argument("run_ensemble: n_shots must be >= 1");
  }
  seq.validate();
  noise.validate();
  const double dt = options.dt_s > 0.0 ? options.dt_s : suggest_dt(seq, noise);

  const DensityMatrix rho0 = outer_product(
      pair_basis_state(seq.initial_state.a, seq.initial_state.b));

  // Fixed-size blocks keep the floating-point reduction order independent
  // of the thread count.
  constexpr int kBlock = 16;
  const int n_blocks = (n_shots + kBlock - 1) / kBlock;

  std::vector<Mat25> block_sums(n_blocks, Mat25::Zero());
  std::vector<ShotRecord> records(n_shots);
  std::vector<DensityMatrix> finals;
  if (options.keep_final_states) {
    finals.resize(n_shots, rho0);  // placeholder, overwritten per shot
  }

  std::atomic<int> next_block{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    try {
      for (;;) {
        const int b = next_block.fetch_add(1);
        if (b >= n_blocks) return;
        const int begin = b * kBlock;
        const int end = std::min(n_shots, begin + kBlock);
        Mat25 sum = Mat25::Zero();
        for (int shot = begin; shot < end; ++shot) {
          const std::uint64_t shot_seed =
              derive_seed(seed, static_cast<std::uint64_t>(shot));
          std::mt19937_64 rng = make_engine(shot_seed);
          const ShotParams params = sample_shot_params(noise, rng);
          DensityTrajectory traj =
              evolve_lindblad(rho0, seq, noise, params, dt, 0);
          DensityMatrix rho_final = traj.states.back();
          for (int atom = 0; atom < 2; ++atom) {
            if (params.loss_draws[atom]) {
              rho_final = apply_atom_loss(rho_final, atom);
            }
          }
          sum += rho_final.matrix();
          ShotRecord& rec = records[shot];
          rec.seed = shot_seed;
          rec.params = params;
          for (int i = 0; i < kPairDim; ++i) {
            rec.final_populations[i] = rho_final.matrix()(i, i).real();
          }
          if (options.keep_final_states) {
            finals[shot] = rho_final;
          }
        }
        block_sums[b] = sum;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  int threads = options.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, n_blocks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  Mat25 total = Mat25::Zero();
  for (const Mat25& s : block_sums) total += s;
  total /= static_cast<double>(n_shots);

  EnsembleResult result{DensityMatrix(total), std::move(records), n_shots,
                        std::move(finals)};
  return result;
}

}  // namespace rydsim
