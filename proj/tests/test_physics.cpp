#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rydsim/physics.hpp"
#include "rydsim/rng.hpp"

using namespace rydsim;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SequenceSpec both_atom_pulse(PulseKind kind, double rabi, double detuning,
                             double duration, double blockade) {
  SequenceSpec seq;
  seq.blockade_shift_rad_per_s = blockade;
  seq.pulses.push_back(
      TimedPulse{0.0, PulseSpec{kind, rabi, detuning, duration, 0.0, true,
                                true}});
  return seq;
}

}  // namespace

TEST_CASE("pulse and sequence validation") {
  PulseSpec pulse{PulseKind::RamanRotation, 1.0, 0.0, 1e-6, 0.0, true, false};
  CHECK_NOTHROW(pulse.validate());

  SUBCASE("zero duration is rejected") {
    pulse.duration_s = 0.0;
    CHECK_THROWS_AS(pulse.validate(), std::invalid_argument);
  }
  SUBCASE("negative rabi frequency is rejected") {
    pulse.rabi_rad_per_s = -1.0;
    CHECK_THROWS_AS(pulse.validate(), std::invalid_argument);
  }
  SUBCASE("empty target set is rejected") {
    pulse.target_a = pulse.target_b = false;
    CHECK_THROWS_AS(pulse.validate(), std::invalid_argument);
  }
  SUBCASE("same-atom overlap is rejected, cross-atom overlap is fine") {
    SequenceSpec seq;
    seq.pulses.push_back(TimedPulse{0.0, pulse});
    seq.pulses.push_back(TimedPulse{0.5e-6, pulse});
    CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
    seq.pulses[1].pulse.target_a = false;
    seq.pulses[1].pulse.target_b = true;
    CHECK_NOTHROW(seq.validate());
  }
  SUBCASE("negative start time is rejected") {
    SequenceSpec seq;
    seq.pulses.push_back(TimedPulse{-1e-9, pulse});
    CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
  }
}

TEST_CASE("hamiltonian matrix elements") {
  const double omega = kTwoPi * 7e6;
  const double delta_e = kTwoPi * 50e6;
  const ShotParams shot;

  SUBCASE("rydberg drive couples with omega/2 and shifts rr by delta_e") {
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, omega, 0.0, 1e-7, delta_e);
    const Mat25 h = build_hamiltonian(seq, 0.5e-7, shot);
    const int uu = flat_index(AtomLevel::Up, AtomLevel::Up);
    const int ru = flat_index(AtomLevel::Ryd, AtomLevel::Up);
    const int rr = flat_index(AtomLevel::Ryd, AtomLevel::Ryd);
    CHECK(std::abs(h(ru, uu)) == doctest::Approx(omega / 2).epsilon(1e-12));
    CHECK(h(rr, rr).real() == doctest::Approx(delta_e).epsilon(1e-12));
  }

  SUBCASE("no active pulse and zero blockade gives exactly zero") {
    SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, omega, 0.0, 1e-7, 0.0);
    seq.pulses[0].start_s = 1e-7;  // gap before the pulse
    const Mat25 h = build_hamiltonian(seq, 0.5e-7, shot);
    CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("raman detuning sits on the upper level for every spectator") {
    const double delta = kTwoPi * 30e3;
    SequenceSpec seq;
    seq.pulses.push_back(
        TimedPulse{0.0, PulseSpec{PulseKind::RamanRotation, kTwoPi * 250e3,
                                  delta, 4e-6, 0.0, true, false}});
    const Mat25 h = build_hamiltonian(seq, 1e-6, shot);
    for (AtomLevel x : kAllLevels) {
      const int idx = flat_index(AtomLevel::Up, x);
      CHECK(h(idx, idx).real() == doctest::Approx(-delta).epsilon(1e-12));
    }
  }

  SUBCASE("hermitian for randomized pulse parameters") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 16; ++trial) {
      SequenceSpec seq;
      seq.blockade_shift_rad_per_s = kTwoPi * 50e6 * unif(rng);
      seq.pulses.push_back(TimedPulse{
          0.0, PulseSpec{PulseKind::RydExcite, kTwoPi * 7e6 * (1 + unif(rng)),
                         kTwoPi * 1e6 * unif(rng), 1e-7, 3.0 * unif(rng), true,
                         false}});
      seq.pulses.push_back(TimedPulse{
          0.0,
          PulseSpec{PulseKind::RamanRotation, kTwoPi * 250e3 * (1 + unif(rng)),
                    kTwoPi * 1e5 * unif(rng), 1e-7, 3.0 * unif(rng), false,
                    true}});
      ShotParams jittered;
      jittered.rabi_scale = 1.0 + 0.1 * unif(rng);
      jittered.detuning_offset_rad_per_s = kTwoPi * 1e5 * unif(rng);
      jittered.map_phase_rad = unif(rng);
      const Mat25 h = build_hamiltonian(seq, 0.5e-7, jittered);
      CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * omega);
    }
  }

  SUBCASE("leak levels never couple to the drive") {
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, omega, kTwoPi * 1e6, 1e-7,
                        delta_e);
    const Mat25 h = build_hamiltonian(seq, 0.5e-7, shot);
    for (int atom = 0; atom < 2; ++atom) {
      Mat25 projector = Mat25::Zero();
      for (int i = 0; i < kPairDim; ++i) {
        const PairIndex pair = PairIndex::from_flat(i);
        const AtomLevel level = atom == 0 ? pair.a : pair.b;
        if (level == AtomLevel::DarkPresent || level == AtomLevel::Absent) {
          projector(i, i) = 1.0;
        }
      }
      CHECK((h * projector - projector * h).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("symmetric drive commutes with atom exchange") {
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, omega, kTwoPi * 1e6, 1e-7, 0.0);
    const Mat25 h = build_hamiltonian(seq, 0.5e-7, shot);
    CHECK((exchange_atoms(h) - h).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("the shot map phase lands on atom b's map coupling only") {
    SequenceSpec seq;
    seq.pulses.push_back(TimedPulse{
        0.0, PulseSpec{PulseKind::RydMap, omega, 0.0, 1e-7, 0.0, true, true}});
    ShotParams kicked;
    kicked.map_phase_rad = 0.7;
    const Mat25 h = build_hamiltonian(seq, 0.5e-7, kicked);
    const int b_up = flat_index(AtomLevel::Up, AtomLevel::Ryd);
    const int b_low = flat_index(AtomLevel::Up, AtomLevel::Down);
    const int a_up = flat_index(AtomLevel::Ryd, AtomLevel::Up);
    const int a_low = flat_index(AtomLevel::Down, AtomLevel::Up);
    CHECK(std::arg(h(b_up, b_low)) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(std::arg(h(a_up, a_low)) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("time outside the sequence is rejected") {
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, omega, 0.0, 1e-7, 0.0);
    CHECK_THROWS_AS(build_hamiltonian(seq, 2e-7, shot), std::invalid_argument);
    CHECK_THROWS_AS(build_hamiltonian(seq, -1e-9, shot),
                    std::invalid_argument);
  }
}

TEST_CASE("collapse operators") {
  const double omega = kTwoPi * 250e3;
  SequenceSpec raman_a;
  raman_a.pulses.push_back(
      TimedPulse{0.0, PulseSpec{PulseKind::RamanRotation, omega, 0.0, 4e-6,
                                0.0, true, false}});

  SUBCASE("quiet noise yields no operators at any time") {
    const NoiseSpec quiet;
    CHECK(build_collapse_operators(raman_a, 0.0, quiet).empty());
    CHECK(build_collapse_operators(raman_a, 2e-6, quiet).empty());
  }

  SUBCASE("single branch raman scattering gives one operator of rate gamma") {
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 3.0e5;
    noise.scatter_branching = {1.0, 0.0, 0.0};
    const auto ops = active_jump_ops(raman_a, 2e-6, noise);
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].atom == 0);
    CHECK(ops[0].src == AtomLevel::Down);
    CHECK(ops[0].dst == AtomLevel::Up);
    CHECK(ops[0].rate_rad_per_s == 3.0e5);
    // Spectral norm squared of the dense operator equals the rate.
    const Mat25 m = ops[0].matrix();
    Eigen::JacobiSVD<Mat25> svd(m);
    CHECK(svd.singularValues()[0] * svd.singularValues()[0] ==
          doctest::Approx(3.0e5).epsilon(1e-12));
    // Inactive outside the pulse window.
    CHECK(active_jump_ops(raman_a, 3.9999e-6, noise).size() == 1);
    SequenceSpec gap = raman_a;
    gap.pulses[0].start_s = 1e-6;
    CHECK(active_jump_ops(gap, 0.5e-6, noise).empty());
  }

  SUBCASE("rydberg dephasing acts per driven atom with projector support") {
    NoiseSpec noise;
    noise.ryd_dephasing_rad_per_s = 2.0e5;
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydExcite, kTwoPi * 7e6, 0.0, 1e-7, 0.0);
    const auto ops = active_jump_ops(seq, 0.5e-7, noise);
    REQUIRE(ops.size() == 2);
    for (const JumpOp& op : ops) {
      CHECK(op.src == AtomLevel::Ryd);
      CHECK(op.dst == AtomLevel::Ryd);
      const Mat25 m = op.matrix();
      CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() == 0.0);
      // m / sqrt(rate) is a projector.
      const Mat25 p = m / std::sqrt(op.rate_rad_per_s);
      CHECK((p * p - p).cwiseAbs().maxCoeff() <= 1e-12);
    }
    // Raman pulses carry no rydberg dephasing.
    CHECK(active_jump_ops(raman_a, 2e-6, noise).empty());
  }

  SUBCASE("map pulses scatter out of the lower (down) level") {
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 1e5;
    noise.scatter_branching = {0.5, 0.25, 0.25};
    const SequenceSpec seq =
        both_atom_pulse(PulseKind::RydMap, kTwoPi * 7e6, 0.0, 1e-7, 0.0);
    const auto ops = active_jump_ops(seq, 0.5e-7, noise);
    REQUIRE(ops.size() == 6);  // 3 branches x 2 atoms
    for (const JumpOp& op : ops) CHECK(op.src == AtomLevel::Down);
  }

  SUBCASE("rydberg decay is active even without pulses") {
    NoiseSpec noise;
    noise.ryd_decay_rad_per_s = 10.0;
    SequenceSpec gap = raman_a;
    gap.pulses[0].start_s = 1e-6;
    const auto ops = active_jump_ops(gap, 0.5e-6, noise);
    REQUIRE(ops.size() == 2);
    CHECK(ops[0].src == AtomLevel::Ryd);
    CHECK(ops[0].dst == AtomLevel::Absent);
  }

  SUBCASE("bad branching is rejected") {
    NoiseSpec noise;
    noise.scatter_rate_rad_per_s = 1.0;
    noise.scatter_branching = {0.6, 0.25, 0.25};
    CHECK_THROWS_AS(noise.validate(), std::invalid_argument);
  }
}

TEST_CASE("shot parameter sampling") {
  SUBCASE("quiet noise produces the identity shot without consuming rng") {
    const NoiseSpec quiet;
    std::mt19937_64 rng = make_engine(99);
    const ShotParams shot = sample_shot_params(quiet, rng);
    CHECK(shot.rabi_scale == 1.0);
    CHECK(shot.detuning_offset_rad_per_s == 0.0);
    CHECK(shot.map_phase_rad == 0.0);
    CHECK_FALSE(shot.loss_draws[0]);
    CHECK_FALSE(shot.loss_draws[1]);
    std::mt19937_64 untouched = make_engine(99);
    CHECK(rng() == untouched());
  }

  SUBCASE("identical seeds give identical draws") {
    NoiseSpec noise;
    noise.intensity_sigma = 0.05;
    noise.detuning_sigma_rad_per_s = kTwoPi * 100e3;
    noise.map_phase_sigma_rad = 0.3;
    noise.extra_loss_prob = 0.2;
    std::mt19937_64 rng1 = make_engine(1234);
    std::mt19937_64 rng2 = make_engine(1234);
    const ShotParams a = sample_shot_params(noise, rng1);
    const ShotParams b = sample_shot_params(noise, rng2);
    CHECK(a.rabi_scale == b.rabi_scale);
    CHECK(a.detuning_offset_rad_per_s == b.detuning_offset_rad_per_s);
    CHECK(a.map_phase_rad == b.map_phase_rad);
    CHECK(a.loss_draws == b.loss_draws);
  }

  SUBCASE("sample mean of the rabi scale matches the gaussian within 3 sigma") {
    NoiseSpec noise;
    noise.intensity_sigma = 0.05;
    const int n = 100000;
    std::mt19937_64 rng = make_engine(20090401);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      mean += sample_shot_params(noise, rng).rabi_scale;
    }
    mean /= n;
    const double standard_error = 0.05 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - 1.0) < 3.0 * standard_error);
  }
}

TEST_CASE("entangling sequence construction") {
  const double omega = kTwoPi * 7e6;

  SUBCASE("pulse durations follow pi/(sqrt2 omega) and pi/omega") {
    const SequenceSpec seq = build_entangle_sequence(omega, omega, kTwoPi * 50e6);
    REQUIRE(seq.pulses.size() == 2);
    CHECK(seq.pulses[0].pulse.duration_s ==
          doctest::Approx(5.05e-8).epsilon(2e-3));
    CHECK(seq.pulses[1].pulse.duration_s ==
          doctest::Approx(7.14e-8).epsilon(2e-3));
    CHECK(seq.pulses[0].pulse.duration_s ==
          doctest::Approx(std::numbers::pi / (std::sqrt(2.0) * omega))
              .epsilon(1e-14));
    CHECK(seq.pulses[1].pulse.duration_s ==
          doctest::Approx(std::numbers::pi / omega).epsilon(1e-14));
  }

  SUBCASE("pulses are contiguous and ordered") {
    const SequenceSpec seq = build_entangle_sequence(omega, omega, kTwoPi * 50e6);
    CHECK(seq.pulses[0].start_s == 0.0);
    CHECK(seq.pulses[1].start_s == seq.pulses[0].end_s());
    CHECK(seq.initial_state == PairIndex{AtomLevel::Up, AtomLevel::Up});
    CHECK(seq.pulses[0].pulse.kind == PulseKind::RydExcite);
    CHECK(seq.pulses[1].pulse.kind == PulseKind::RydMap);
    CHECK(seq.blockade_shift_rad_per_s == kTwoPi * 50e6);
  }

  SUBCASE("asymmetric phases split into per-atom pulses") {
    EntanglePhases phases;
    phases.map_b = 0.4;
    const SequenceSpec seq =
        build_entangle_sequence(omega, omega, kTwoPi * 50e6, phases);
    REQUIRE(seq.pulses.size() == 3);
    CHECK(seq.pulses[1].pulse.phase_rad == 0.0);
    CHECK(seq.pulses[2].pulse.phase_rad == 0.4);
    CHECK(seq.pulses[1].pulse.target_a);
    CHECK_FALSE(seq.pulses[1].pulse.target_b);
  }

  SUBCASE("non-positive frequencies are rejected") {
    CHECK_THROWS_AS(build_entangle_sequence(0.0, omega, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_entangle_sequence(omega, -1.0, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("suggested integrator step respects the preconditions") {
  const SequenceSpec seq =
      build_entangle_sequence(kTwoPi * 7e6, kTwoPi * 7e6, kTwoPi * 50e6);
  NoiseSpec noise;
  noise.scatter_rate_rad_per_s = 2e6;
  const double dt = suggest_dt(seq, noise);
  CHECK(dt <= seq.shortest_pulse_s() / 100.0);
  CHECK(dt <= 0.1 / noise.scatter_rate_rad_per_s);
}
