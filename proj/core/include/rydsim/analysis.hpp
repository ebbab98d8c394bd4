#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rydsim/measurement.hpp"

namespace rydsim {

/// Result of the damped-Rabi fit
///   P(t) = offset + (contrast/2) [1 - cos(w t) exp(-(sigma w t)^2 / 2)],
/// a Gaussian frequency-jitter envelope over a sinusoid.
struct RabiFit {
  double frequency_rad_per_s = 0.0;
  double contrast = 0.0;
  double decay_sigma = 0.0;  // dimensionless fractional width
  double offset = 0.0;
  double residual_rms = 0.0;
  /// False when the data carries no oscillation (contrast ~ 0) and the
  /// frequency value is a placeholder.
  bool frequency_identified = true;
};

/// Least-squares fit of the damped-Rabi model to (time_s, probability)
/// samples. The frequency is seeded by a periodogram scan and refined by
/// damped Gauss-Newton iterations (at most 200). Requires >= 10 samples
/// covering at least 1.5 oscillation periods; flat data returns contrast 0
/// with frequency_identified = false instead of failing.
RabiFit fit_rabi(const std::vector<std::pair<double, double>>& samples);

/// pair frequency / single-atom frequency.
double frequency_ratio(const RabiFit& pair_fit, const RabiFit& single_fit);

/// Parity-analysis scan: outcome probabilities after a global Raman
/// rotation by theta on both atoms (theta = Omega_raman * t).
struct ParityScan {
  std::vector<std::pair<double, OutcomeProbs>> samples;

  /// >= 8 samples whose theta values span at least 2 pi.
  void validate() const;
};

struct FidelityReport {
  double fidelity = 0.0;           // <Psi+|rho|Psi+>, all events counted
  double pair_survival = 1.0;      // 1 - pair loss probability
  double fidelity_renormalized = 0.0;
  // Fitted P11(theta) = A + B cos(theta) + C2 cos(2 theta).
  double coeff_a = 0.0;
  double coeff_b = 0.0;
  double coeff_c2 = 0.0;
  // Populations entering the estimator.
  double p_dd = 0.0;            // P11(0)
  double p_uu = 0.0;            // P11(pi)
  double single_present = 0.0;  // P01(0) + P10(0)
  double coherence = 0.0;       // Re rho_{du,ud} estimate
};

/// Bell-state fidelity from a parity scan, assuming no double-flip
/// coherence (rho_{dd,uu} = 0, which the entangling sequence never
/// populates coherently). Rotation convention:
///   R(theta)|up>   = cos(theta/2)|up>   - i sin(theta/2)|down>
///   R(theta)|down> = -i sin(theta/2)|up> + cos(theta/2)|down>
/// applied to both atoms. P11(theta) is fitted linearly with
/// {1, cos theta, cos 2theta}; then with s = P01(0) + P10(0),
///   c = [P11(0) + P11(pi) - s - 8 C2] / 2,   F = s/2 + c.
/// When pair_survival is given, the renormalized fidelity F / survival is
/// reported as well. A fitted F outside [-0.05, 1.05] raises
/// NumericalError (model violation).
FidelityReport extract_fidelity(const ParityScan& scan,
                                std::optional<double> pair_survival = {});

/// 2p(1-p) + p^2: probability that at least one atom of the pair is lost,
/// for independent per-atom loss probability p.
double pair_loss_probability(double p);

/// F / (1 - pair_loss): fidelity conditioned on both atoms surviving.
double renormalized_fidelity(double fidelity, double pair_loss);

}  // namespace rydsim
