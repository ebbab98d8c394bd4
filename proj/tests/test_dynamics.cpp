#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rydsim/dynamics.hpp"
#include "rydsim/errors.hpp"

using namespace rydsim;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SequenceSpec raman_pulse_on_a(double omega, double duration) {
  SequenceSpec seq;
  seq.initial_state = PairIndex{AtomLevel::Up, AtomLevel::Absent};
  seq.pulses.push_back(
      TimedPulse{0.0, PulseSpec{PulseKind::RamanRotation, omega, 0.0, duration,
                                0.0, true, false}});
  return seq;
}

double operator_norm(const Mat25& m) {
  Eigen::SelfAdjointEigenSolver<Mat25> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("unitary raman evolution reproduces the two-level solution") {
  const double omega = kTwoPi * 250e3;
  const PureState psi0 = pair_basis_state(AtomLevel::Up, AtomLevel::Absent);

  SUBCASE("a pi pulse transfers everything to down") {
    const SequenceSpec seq = raman_pulse_on_a(omega, 2.0e-6);
    const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 2e-9, 0);
    CHECK(traj.final_state().population({AtomLevel::Down, AtomLevel::Absent}) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("a half pulse leaves half the population") {
    const SequenceSpec seq = raman_pulse_on_a(omega, 1.0e-6);
    const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 2e-9, 0);
    CHECK(traj.final_state().population({AtomLevel::Down, AtomLevel::Absent}) ==
          doctest::Approx(0.5).epsilon(1e-6));
  }

  SUBCASE("trajectory times are strictly increasing") {
    const SequenceSpec seq = raman_pulse_on_a(omega, 1.0e-6);
    const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 1e-8, 7);
    REQUIRE(traj.times_s.size() >= 3);
    for (std::size_t i = 1; i < traj.times_s.size(); ++i) {
      CHECK(traj.times_s[i] > traj.times_s[i - 1]);
    }
    CHECK(traj.times_s.back() == doctest::Approx(1.0e-6).epsilon(1e-12));
  }

  SUBCASE("oversized dt is rejected") {
    const SequenceSpec seq = raman_pulse_on_a(omega, 1.0e-6);
    CHECK_THROWS_AS(evolve_unitary(psi0, seq, {}, 2e-8, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("unblockaded pair drive is two independent pi flips") {
  const double omega = kTwoPi * 7e6;
  SequenceSpec seq;
  seq.initial_state = PairIndex{AtomLevel::Up, AtomLevel::Up};
  seq.blockade_shift_rad_per_s = 0.0;
  seq.pulses.push_back(
      TimedPulse{0.0, PulseSpec{PulseKind::RydExcite, omega, 0.0,
                                std::numbers::pi / omega, 0.0, true, true}});
  const PureState psi0 = pair_basis_state(AtomLevel::Up, AtomLevel::Up);
  const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 5e-10, 0);
  CHECK(traj.final_state().population({AtomLevel::Ryd, AtomLevel::Ryd}) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("blockaded excitation stays in the collective three-state model") {
  const double omega = kTwoPi * 7e6;
  const double delta_e = kTwoPi * 50e6;
  SequenceSpec seq;
  seq.initial_state = PairIndex{AtomLevel::Up, AtomLevel::Up};
  seq.blockade_shift_rad_per_s = delta_e;
  seq.pulses.push_back(TimedPulse{
      0.0, PulseSpec{PulseKind::RydExcite, omega, 0.0, 300e-9, 0.0, true,
                     true}});
  const PureState psi0 = pair_basis_state(AtomLevel::Up, AtomLevel::Up);
  const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 2e-9, 1);

  const oracles::BlockadeOracle oracle(omega, delta_e);
  double max_rr = 0.0;
  for (std::size_t i = 0; i < traj.times_s.size(); ++i) {
    const double t = traj.times_s[i];
    const PureState& psi = traj.states[i];
    const double p_rr = psi.population({AtomLevel::Ryd, AtomLevel::Ryd});
    const double p_single = psi.population({AtomLevel::Ryd, AtomLevel::Up}) +
                            psi.population({AtomLevel::Up, AtomLevel::Ryd});
    const double p_uu = psi.population({AtomLevel::Up, AtomLevel::Up});
    CHECK(std::abs(p_rr - oracle.p_rr(t)) < 1e-6);
    CHECK(std::abs(p_single - oracle.p_single(t)) < 1e-6);
    CHECK(std::abs(p_uu - oracle.p_uu(t)) < 1e-6);
    max_rr = std::max(max_rr, p_rr);
  }
  CHECK(max_rr < 0.03);
}

TEST_CASE("deep blockade limit oscillates at sqrt(2) omega") {
  const double omega = kTwoPi * 7e6;
  const double delta_e = 1000.0 * omega;
  const double period = kTwoPi / (std::sqrt(2.0) * omega);
  SequenceSpec seq;
  seq.initial_state = PairIndex{AtomLevel::Up, AtomLevel::Up};
  seq.blockade_shift_rad_per_s = delta_e;
  seq.pulses.push_back(TimedPulse{
      0.0,
      PulseSpec{PulseKind::RydExcite, omega, 0.0, period, 0.0, true, true}});
  const PureState psi0 = pair_basis_state(AtomLevel::Up, AtomLevel::Up);
  const UnitaryTrajectory traj = evolve_unitary(psi0, seq, {}, 1e-9, 400);
  REQUIRE(traj.times_s.size() > 10);
  for (std::size_t i = 0; i < traj.times_s.size(); ++i) {
    const double t = traj.times_s[i];
    const double p_single =
        traj.states[i].population({AtomLevel::Ryd, AtomLevel::Up}) +
        traj.states[i].population({AtomLevel::Up, AtomLevel::Ryd});
    const double expected =
        oracles::two_level_transfer(std::sqrt(2.0) * omega, t);
    CHECK(std::abs(p_single - expected) < 1e-4);
  }
}

TEST_CASE("lindblad evolution") {
  const double omega = kTwoPi * 7e6;
  const double delta_e = kTwoPi * 50e6;
  const SequenceSpec entangle =
      build_entangle_sequence(omega, omega, delta_e);
  const DensityMatrix rho0 =
      outer_product(pair_basis_state(AtomLevel::Up, AtomLevel::Up));

  SUBCASE("quiet noise reduces to the unitary evolution") {
    const NoiseSpec quiet;
    const DensityTrajectory lind =
        evolve_lindblad(rho0, entangle, quiet, {}, 5e-11, 0);
    const UnitaryTrajectory unit = evolve_unitary(
        pair_basis_state(AtomLevel::Up, AtomLevel::Up), entangle, {}, 5e-11, 0);
    const Mat25 diff = lind.final_state().matrix() -
                       outer_product(unit.final_state()).matrix();
    CHECK(operator_norm(diff) < 1e-8);
  }

  SUBCASE("the noiseless entangling sequence lands on the Bell state") {
    const NoiseSpec quiet;
    const DensityTrajectory traj =
        evolve_lindblad(rho0, entangle, quiet, {}, 5e-11, 0);
    const PureState bell =
        entangled_pair_state(AtomLevel::Down, AtomLevel::Up, 0.0);
    CHECK(fidelity(traj.final_state(), bell) > 0.999);
  }

  SUBCASE("scattering drives toward a mixture while the trace stays pinned") {
    const double raman_omega = kTwoPi * 1e6;
    SequenceSpec seq = raman_pulse_on_a(raman_omega, 3.0e-5);
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 3.0e5;
    noise.scatter_branching = {1.0, 0.0, 0.0};
    const DensityMatrix start =
        outer_product(pair_basis_state(AtomLevel::Up, AtomLevel::Absent));
    const DensityTrajectory traj =
        evolve_lindblad(start, seq, noise, {}, 3.0e-7, 25);
    for (const DensityMatrix& state : traj.states) {
      CHECK(std::abs(state.trace() - 1.0) < 1e-8);
    }
    const double p_down = traj.final_state().population(
        {AtomLevel::Down, AtomLevel::Absent});
    const double p_up =
        traj.final_state().population({AtomLevel::Up, AtomLevel::Absent});
    CHECK(p_down + p_up == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(p_down > 0.4);
    CHECK(p_down < 0.6);
  }

  SUBCASE("halving dt moves final populations by less than 1e-7") {
    const NoiseSpec quiet;
    const DensityTrajectory coarse =
        evolve_lindblad(rho0, entangle, quiet, {}, 5e-11, 0);
    const DensityTrajectory fine =
        evolve_lindblad(rho0, entangle, quiet, {}, 2.5e-11, 0);
    for (int i = 0; i < kPairDim; ++i) {
      const PairIndex idx = PairIndex::from_flat(i);
      CHECK(std::abs(coarse.final_state().population(idx) -
                     fine.final_state().population(idx)) < 1e-7);
    }
  }

  SUBCASE("symmetric noise keeps the state exchange symmetric") {
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 1.5e6;
    noise.scatter_branching = {0.5, 0.25, 0.25};
    noise.ryd_dephasing_rad_per_s = 1e6;
    const DensityTrajectory traj =
        evolve_lindblad(rho0, entangle, noise, {}, 1e-10, 0);
    const Mat25 rho = traj.final_state().matrix();
    CHECK((exchange_atoms(rho) - rho).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("dt precondition covers the collapse rate") {
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 1e10;
    noise.scatter_branching = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(evolve_lindblad(rho0, entangle, noise, {}, 5e-10, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("atom loss channel") {
  const PureState bell =
      entangled_pair_state(AtomLevel::Down, AtomLevel::Up, 0.0);
  const DensityMatrix rho = outer_product(bell);

  SUBCASE("losing atom a absorbs it and mixes atom b") {
    const DensityMatrix lost = apply_atom_loss(rho, 0);
    CHECK(lost.trace() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lost.population({AtomLevel::Absent, AtomLevel::Up}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lost.population({AtomLevel::Absent, AtomLevel::Down}) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("the partner atom keeps its internal coherence") {
    // Atom b in (|down>+|up>)/sqrt(2), atom a in |up>.
    Vec25 v = Vec25::Zero();
    v[flat_index(AtomLevel::Up, AtomLevel::Down)] = 1.0 / std::sqrt(2.0);
    v[flat_index(AtomLevel::Up, AtomLevel::Up)] = 1.0 / std::sqrt(2.0);
    const DensityMatrix lost = apply_atom_loss(outer_product(PureState(v)), 0);
    const Complex coherence = lost.matrix()(
        flat_index(AtomLevel::Absent, AtomLevel::Down),
        flat_index(AtomLevel::Absent, AtomLevel::Up));
    CHECK(coherence.real() == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("atom index is validated") {
    CHECK_THROWS_AS(apply_atom_loss(rho, 2), std::invalid_argument);
  }
}

TEST_CASE("ensembles") {
  const double omega = kTwoPi * 7e6;
  const SequenceSpec entangle =
      build_entangle_sequence(omega, omega, kTwoPi * 50e6);

  SUBCASE("quiet ensemble equals the single-shot evolution bitwise") {
    const NoiseSpec quiet;
    const EnsembleResult ens = run_ensemble(entangle, quiet, 4, 42);
    const DensityMatrix rho0 =
        outer_product(pair_basis_state(AtomLevel::Up, AtomLevel::Up));
    const DensityTrajectory single =
        evolve_lindblad(rho0, entangle, quiet, {}, suggest_dt(entangle, quiet),
                        0);
    CHECK((ens.mean_rho_final.matrix() - single.final_state().matrix())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SUBCASE("same seed twice reproduces the result bitwise") {
    NoiseSpec noise;
    noise.intensity_sigma = 0.05;
    noise.extra_loss_prob = 0.1;
    const EnsembleResult a = run_ensemble(entangle, noise, 24, 7);
    const EnsembleResult b = run_ensemble(entangle, noise, 24, 7);
    CHECK((a.mean_rho_final.matrix() - b.mean_rho_final.matrix())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].seed == b.records[i].seed);
      CHECK(a.records[i].params.rabi_scale == b.records[i].params.rabi_scale);
      CHECK(a.records[i].final_populations == b.records[i].final_populations);
    }
  }

  SUBCASE("thread count does not change the reduction") {
    NoiseSpec noise;
    noise.intensity_sigma = 0.05;
    noise.detuning_sigma_rad_per_s = kTwoPi * 200e3;
    EnsembleOptions serial;
    serial.threads = 1;
    EnsembleOptions parallel;
    parallel.threads = 4;
    const EnsembleResult a = run_ensemble(entangle, noise, 40, 99, serial);
    const EnsembleResult b = run_ensemble(entangle, noise, 40, 99, parallel);
    CHECK((a.mean_rho_final.matrix() - b.mean_rho_final.matrix())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SUBCASE("the mean is the average of the per-shot finals") {
    NoiseSpec noise;
    noise.intensity_sigma = 0.08;
    EnsembleOptions options;
    options.keep_final_states = true;
    const EnsembleResult ens = run_ensemble(entangle, noise, 10, 5, options);
    REQUIRE(ens.final_states.size() == 10);
    Mat25 mean = Mat25::Zero();
    for (const DensityMatrix& rho : ens.final_states) mean += rho.matrix();
    mean /= 10.0;
    CHECK((mean - ens.mean_rho_final.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("extra loss statistics match the pair-loss arithmetic") {
    // Pulse-free sequence: the loss draws, not the dynamics, are under test.
    SequenceSpec cheap;
    cheap.initial_state = PairIndex{AtomLevel::Down, AtomLevel::Up};
    NoiseSpec noise;
    noise.extra_loss_prob = 0.22;
    const int n = 10000;
    const EnsembleResult ens = run_ensemble(cheap, noise, n, 20090401);
    int lost_any = 0;
    for (const ShotRecord& rec : ens.records) {
      if (rec.params.loss_draws[0] || rec.params.loss_draws[1]) ++lost_any;
    }
    const double expected = 0.3916;
    const double sigma =
        std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
    CHECK(std::abs(static_cast<double>(lost_any) / n - expected) <
          3.0 * sigma);
  }

  SUBCASE("shot count is validated") {
    CHECK_THROWS_AS(run_ensemble(entangle, NoiseSpec{}, 0, 1),
                    std::invalid_argument);
  }
}
