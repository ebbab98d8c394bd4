#include "rydsim/qstate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rydsim/errors.hpp"

namespace rydsim {

const char* to_string(AtomLevel level) {
  switch (level) {
    case AtomLevel::Down:
      return "down";
    case AtomLevel::Up:
      return "up";
    case AtomLevel::Ryd:
      return "ryd";
    case AtomLevel::DarkPresent:
      return "dark";
    case AtomLevel::Absent:
      return "absent";
  }
  return "?";
}

PairIndex PairIndex::from_flat(int index) {
  if (index < 0 || index >= kPairDim) {
    throw std::invalid_argument("PairIndex::from_flat: index " +
                                std::to_string(index) + " outside 0..24");
  }
  return PairIndex{static_cast<AtomLevel>(index / kLevelCount),
                   static_cast<AtomLevel>(index % kLevelCount)};
}

PureState::PureState(const Vec25& amplitudes) : amps_(amplitudes) {
  const double n = amps_.norm();
  if (std::abs(n - 1.0) > 1e-10) {
    throw InvariantViolation("PureState: norm deviates from 1 by " +
                             std::to_string(std::abs(n - 1.0)));
  }
}

PureState PureState::normalized(const Vec25& amplitudes) {
  const double n = amplitudes.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("PureState::normalized: zero or non-finite vector");
  }
  return PureState(amplitudes / n, unchecked_t{});
}

PureState PureState::canonical() const {
  for (int i = 0; i < kPairDim; ++i) {
    const double mag = std::abs(amps_[i]);
    if (mag > 0.0) {
      return PureState(amps_ * (std::conj(amps_[i]) / mag), unchecked_t{});
    }
  }
  return *this;
}

PureState pair_basis_state(AtomLevel a, AtomLevel b) {
  Vec25 amps = Vec25::Zero();
  amps[flat_index(a, b)] = Complex{1.0, 0.0};
  return PureState(amps);
}

PureState entangled_pair_state(AtomLevel a, AtomLevel b, double phase_rad) {
  if (a == b) {
    throw std::invalid_argument(
        "entangled_pair_state: levels must differ, got " +
        std::string(to_string(a)) + " twice");
  }
  Vec25 amps = Vec25::Zero();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  amps[flat_index(a, b)] = Complex{inv_sqrt2, 0.0};
  amps[flat_index(b, a)] = std::polar(inv_sqrt2, phase_rad);
  return PureState(amps).canonical();
}

DensityMatrix::DensityMatrix(const Mat25& elements) : m_(elements) {
  const double asym = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTol) {
    throw InvariantViolation("DensityMatrix: hermiticity violated by " +
                             std::to_string(asym));
  }
  const Complex tr = m_.trace();
  if (std::abs(tr - Complex{1.0, 0.0}) > kTraceTol) {
    throw InvariantViolation("DensityMatrix: trace deviates from 1 by " +
                             std::to_string(std::abs(tr - Complex{1.0, 0.0})));
  }
  Eigen::SelfAdjointEigenSolver<Mat25> solver(m_, Eigen::EigenvaluesOnly);
  const double min_eig = solver.eigenvalues().minCoeff();
  if (min_eig < kEigenvalueFloor) {
    throw InvariantViolation("DensityMatrix: negative eigenvalue " +
                             std::to_string(min_eig));
  }
}

DensityMatrix outer_product(const PureState& psi) {
  const Vec25& a = psi.amplitudes();
  return DensityMatrix(a * a.adjoint());
}

double fidelity(const DensityMatrix& rho, const PureState& target) {
  const Vec25& t = target.amplitudes();
  const Complex value = (t.adjoint() * rho.matrix() * t)(0, 0);
  if (std::abs(value.imag()) > 1e-10) {
    throw InvariantViolation("fidelity: expectation has imaginary part " +
                             std::to_string(value.imag()));
  }
  return value.real();
}

Mat25 exchange_atoms(const Mat25& m) {
  Mat25 out;
  for (int r = 0; r < kPairDim; ++r) {
    const int rs = kLevelCount * (r % kLevelCount) + r / kLevelCount;
    for (int c = 0; c < kPairDim; ++c) {
      const int cs = kLevelCount * (c % kLevelCount) + c / kLevelCount;
      out(r, c) = m(rs, cs);
    }
  }
  return out;
}

Vec25 exchange_atoms(const Vec25& v) {
  Vec25 out;
  for (int i = 0; i < kPairDim; ++i) {
    out[i] = v[kLevelCount * (i % kLevelCount) + i / kLevelCount];
  }
  return out;
}

}  // namespace rydsim
