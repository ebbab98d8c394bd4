#pragma once

#include <array>
#include <complex>

#include <Eigen/Dense>

namespace rydsim {

/// Single-atom levels. `Down`/`Up` are the logical hyperfine qubit states,
/// `Ryd` the Rydberg state used for the blockade interaction. `DarkPresent`
/// collects non-logical population that still scatters light at detection
/// (reads "present"); `Absent` collects everything that reads "absent":
/// physically lost atoms, push-out leaks and un-recaptured Rydberg atoms.
/// Loss and depumping are therefore trace-preserving transfers inside the
/// basis, never trace leakage.
enum class AtomLevel : int {
  Down = 0,
  Up = 1,
  Ryd = 2,
  DarkPresent = 3,
  Absent = 4,
};

inline constexpr int kLevelCount = 5;
inline constexpr int kPairDim = kLevelCount * kLevelCount;

inline constexpr std::array<AtomLevel, kLevelCount> kAllLevels{
    AtomLevel::Down, AtomLevel::Up, AtomLevel::Ryd, AtomLevel::DarkPresent,
    AtomLevel::Absent};

const char* to_string(AtomLevel level);

using Complex = std::complex<double>;
using Vec25 = Eigen::Matrix<Complex, kPairDim, 1>;
using Mat25 = Eigen::Matrix<Complex, kPairDim, kPairDim>;
using Mat5 = Eigen::Matrix<Complex, kLevelCount, kLevelCount>;

/// Flat index of the two-atom product state |a,b>, row-major with atom a
/// as the slow index. Bijective with 0..24.
constexpr int flat_index(AtomLevel a, AtomLevel b) {
  return kLevelCount * static_cast<int>(a) + static_cast<int>(b);
}

struct PairIndex {
  AtomLevel a;
  AtomLevel b;

  constexpr int flat() const { return flat_index(a, b); }
  static PairIndex from_flat(int index);

  friend constexpr bool operator==(PairIndex lhs, PairIndex rhs) {
    return lhs.a == rhs.a && lhs.b == rhs.b;
  }
};

/// Normalized pure state of the atom pair.
class PureState {
 public:
  /// Wraps an amplitude vector that is already normalized; throws
  /// InvariantViolation if the norm deviates from 1 by more than 1e-10.
  explicit PureState(const Vec25& amplitudes);

  /// Rescales an arbitrary nonzero vector to unit norm.
  static PureState normalized(const Vec25& amplitudes);

  const Vec25& amplitudes() const { return amps_; }
  Complex amplitude(PairIndex index) const { return amps_[index.flat()]; }
  double population(PairIndex index) const {
    return std::norm(amps_[index.flat()]);
  }
  double norm() const { return amps_.norm(); }

  Complex inner_product(const PureState& other) const {
    return amps_.dot(other.amps_);
  }

  /// Representative with the first nonzero amplitude real and positive.
  PureState canonical() const;

 private:
  struct unchecked_t {};
  PureState(Vec25 amplitudes, unchecked_t) : amps_(std::move(amplitudes)) {}

  Vec25 amps_;
};

/// Unit vector on |a,b>.
PureState pair_basis_state(AtomLevel a, AtomLevel b);

/// (|a,b> + e^{i phase}|b,a>)/sqrt(2). Requires a != b.
PureState entangled_pair_state(AtomLevel a, AtomLevel b, double phase_rad);

/// Two-atom density operator. Construction validates hermiticity (1e-10),
/// unit trace (1e-9) and positivity of the spectrum (eigenvalues >= -1e-8);
/// every density matrix in the artifact passes through this check.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-9;
  static constexpr double kEigenvalueFloor = -1e-8;

  explicit DensityMatrix(const Mat25& elements);

  const Mat25& matrix() const { return m_; }
  double population(PairIndex index) const {
    return m_(index.flat(), index.flat()).real();
  }
  double trace() const { return m_.trace().real(); }
  double purity() const { return (m_ * m_).trace().real(); }

 private:
  Mat25 m_;
};

/// |psi><psi|.
DensityMatrix outer_product(const PureState& psi);

/// <target|rho|target>. The imaginary part must vanish to 1e-10.
double fidelity(const DensityMatrix& rho, const PureState& target);

/// Conjugation by the atom-swap operator: (a,b) <-> (b,a) on both indices.
Mat25 exchange_atoms(const Mat25& m);
Vec25 exchange_atoms(const Vec25& v);

}  // namespace rydsim
