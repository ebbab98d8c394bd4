#include "rydsim/measurement.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "rydsim/errors.hpp"
#include "rydsim/rng.hpp"

namespace rydsim {

bool reads_present(AtomLevel level) {
  return level == AtomLevel::Down || level == AtomLevel::DarkPresent;
}

void OutcomeProbs::validate() const {
  for (double p : {p11, p10, p01, p00}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvariantViolation("OutcomeProbs: probability " +
                               std::to_string(p) + " outside [0,1]");
    }
  }
  if (std::abs(sum() - 1.0) > 1e-9) {
    throw InvariantViolation("OutcomeProbs: sum deviates from 1 by " +
                             std::to_string(std::abs(sum() - 1.0)));
  }
}

OutcomeProbs OutcomeCounts::frequencies() const {
  if (total <= 0) {
    throw std::invalid_argument("OutcomeCounts::frequencies: empty counts");
  }
  const double n = static_cast<double>(total);
  return OutcomeProbs{static_cast<double>(n11) / n,
                      static_cast<double>(n10) / n,
                      static_cast<double>(n01) / n,
                      static_cast<double>(n00) / n};
}

namespace {

OutcomeProbs partition_populations(
    const std::array<double, kPairDim>& populations) {
  OutcomeProbs probs;
  for (int i = 0; i < kPairDim; ++i) {
    const PairIndex pair = PairIndex::from_flat(i);
    // Diagonal entries of a valid density matrix may carry tiny negative
    // noise within the positivity tolerance; clamp it out of the outcome.
    const double p = std::max(0.0, populations[static_cast<std::size_t>(i)]);
    const bool a = reads_present(pair.a);
    const bool b = reads_present(pair.b);
    if (a && b) {
      probs.p11 += p;
    } else if (a) {
      probs.p10 += p;
    } else if (b) {
      probs.p01 += p;
    } else {
      probs.p00 += p;
    }
  }
  probs.validate();
  return probs;
}

}  // namespace

OutcomeProbs pushout_probabilities(const DensityMatrix& rho) {
  std::array<double, kPairDim> populations{};
  for (int i = 0; i < kPairDim; ++i) {
    populations[static_cast<std::size_t>(i)] = rho.matrix()(i, i).real();
  }
  return partition_populations(populations);
}

OutcomeProbs pushout_probabilities(
    const std::array<double, kPairDim>& populations) {
  return partition_populations(populations);
}

OutcomeCounts sample_counts(const OutcomeProbs& probs, std::int64_t n,
                            std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("sample_counts: n must be >= 1");
  }
  probs.validate();
  std::mt19937_64 rng = make_engine(seed);

  // Sequential conditional binomials reproduce a multinomial draw.
  const double p[4] = {probs.p11, probs.p10, probs.p01, probs.p00};
  std::int64_t out[4] = {0, 0, 0, 0};
  std::int64_t remaining = n;
  double mass = 1.0;
  for (int i = 0; i < 3 && remaining > 0; ++i) {
    const double cond = mass > 0.0 ? std::min(1.0, p[i] / mass) : 1.0;
    if (cond >= 1.0) {
      out[i] = remaining;
      remaining = 0;
    } else if (cond > 0.0) {
      std::binomial_distribution<std::int64_t> dist(remaining, cond);
      out[i] = dist(rng);
      remaining -= out[i];
    }
    mass -= p[i];
  }
  out[3] = remaining;
  return OutcomeCounts{out[0], out[1], out[2], out[3], n};
}

}  // namespace rydsim
