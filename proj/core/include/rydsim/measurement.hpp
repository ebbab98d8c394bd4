#pragma once

#include <array>
#include <cstdint>

#include "rydsim/qstate.hpp"

namespace rydsim {

/// Push-out readout: an atom reads "present" (logical 1) when it is in a
/// state the recapture fluorescence sees, i.e. Down or DarkPresent. Up is
/// expelled by the push-out laser, Ryd is not recaptured, Absent is gone;
/// all three read "absent" (0) and cannot be told apart.
bool reads_present(AtomLevel level);

/// Joint recapture probabilities. p10 = atom a present, atom b absent.
struct OutcomeProbs {
  double p11 = 0.0;
  double p10 = 0.0;
  double p01 = 0.0;
  double p00 = 0.0;

  double sum() const { return p11 + p10 + p01 + p00; }
  void validate() const;
};

struct OutcomeCounts {
  std::int64_t n11 = 0;
  std::int64_t n10 = 0;
  std::int64_t n01 = 0;
  std::int64_t n00 = 0;
  std::int64_t total = 0;

  OutcomeProbs frequencies() const;
};

/// Sums the diagonal of rho over the present/absent partition of the 25
/// product states. The partition is exhaustive and disjoint, so the result
/// sums to the trace.
OutcomeProbs pushout_probabilities(const DensityMatrix& rho);

/// Same partition applied to a plain population vector (diagonal of a
/// validated density matrix, e.g. an ensemble shot record).
OutcomeProbs pushout_probabilities(const std::array<double, kPairDim>& populations);

/// Multinomial draw of n outcomes, deterministic for a given seed.
OutcomeCounts sample_counts(const OutcomeProbs& probs, std::int64_t n,
                            std::uint64_t seed);

}  // namespace rydsim
