#include "rydsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rydsim/errors.hpp"

namespace rydsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct RabiModel {
  // Residuals and Jacobian of the damped-Rabi model at parameters
  // (offset, contrast, omega, sigma).
  static double eval(double t, const Eigen::Vector4d& p) {
    const double damp = std::exp(-0.5 * std::pow(p[3] * p[2] * t, 2));
    return p[0] + 0.5 * p[1] * (1.0 - std::cos(p[2] * t) * damp);
  }

  static Eigen::Vector4d gradient(double t, const Eigen::Vector4d& p) {
    const double wt = p[2] * t;
    const double damp = std::exp(-0.5 * std::pow(p[3] * wt, 2));
    const double c = std::cos(wt);
    const double s = std::sin(wt);
    Eigen::Vector4d g;
    g[0] = 1.0;
    g[1] = 0.5 * (1.0 - c * damp);
    g[2] = 0.5 * p[1] * (s * t * damp + c * damp * p[3] * p[3] * p[2] * t * t);
    g[3] = 0.5 * p[1] * c * damp * p[3] * p[2] * p[2] * t * t;
    return g;
  }
};

double cost(const std::vector<std::pair<double, double>>& samples,
            const Eigen::Vector4d& p) {
  double acc = 0.0;
  for (const auto& [t, y] : samples) {
    const double r = RabiModel::eval(t, p) - y;
    acc += r * r;
  }
  return acc;
}

// Linear fit of offset and contrast for fixed omega and sigma; the model is
// linear in those two parameters.
void linear_offset_contrast(const std::vector<std::pair<double, double>>& samples,
                            double omega, double sigma, double* offset,
                            double* contrast) {
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d atb = Eigen::Vector2d::Zero();
  for (const auto& [t, y] : samples) {
    const double damp = std::exp(-0.5 * std::pow(sigma * omega * t, 2));
    const Eigen::Vector2d row{1.0, 0.5 * (1.0 - std::cos(omega * t) * damp)};
    ata += row * row.transpose();
    atb += row * y;
  }
  const Eigen::Vector2d sol = ata.ldlt().solve(atb);
  *offset = sol[0];
  *contrast = sol[1];
}

// Periodogram peak of the mean-subtracted data over a dense frequency grid,
// used to seed the refinement.
double seed_frequency(const std::vector<std::pair<double, double>>& samples,
                      double t_span) {
  double mean = 0.0;
  for (const auto& [t, y] : samples) mean += y;
  mean /= static_cast<double>(samples.size());

  double min_gap = t_span;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    min_gap = std::min(min_gap, samples[i].first - samples[i - 1].first);
  }
  min_gap = std::max(min_gap, t_span * 1e-6);

  const double w_lo = kTwoPi * 0.5 / t_span;
  const double w_hi = std::numbers::pi / min_gap;
  const int n_grid = 4000;
  double best_w = w_lo;
  double best_power = -1.0;
  for (int k = 0; k <= n_grid; ++k) {
    const double w =
        w_lo + (w_hi - w_lo) * static_cast<double>(k) / n_grid;
    std::complex<double> acc{0.0, 0.0};
    for (const auto& [t, y] : samples) {
      acc += (y - mean) * std::polar(1.0, -w * t);
    }
    const double power = std::norm(acc);
    if (power > best_power) {
      best_power = power;
      best_w = w;
    }
  }
  return best_w;
}

}  // namespace

RabiFit fit_rabi(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 10) {
    throw std::invalid_argument("fit_rabi: need at least 10 samples, got " +
                                std::to_string(samples.size()));
  }
  std::vector<std::pair<double, double>> data = samples;
  std::sort(data.begin(), data.end());
  const double t_span = data.back().first - data.front().first;
  if (!(t_span > 0.0)) {
    throw std::invalid_argument("fit_rabi: samples must span a time interval");
  }

  double mean = 0.0;
  double var = 0.0;
  for (const auto& [t, y] : data) mean += y;
  mean /= static_cast<double>(data.size());
  for (const auto& [t, y] : data) var += (y - mean) * (y - mean);
  var /= static_cast<double>(data.size());

  // Flat data: the frequency is unidentifiable; report zero contrast
  // rather than failing.
  if (var < 1e-12) {
    RabiFit flat;
    flat.frequency_rad_per_s = kTwoPi / t_span;
    flat.contrast = 0.0;
    flat.decay_sigma = 0.0;
    flat.offset = mean;
    flat.residual_rms = std::sqrt(var);
    flat.frequency_identified = false;
    return flat;
  }

  Eigen::Vector4d p;
  p[2] = seed_frequency(data, t_span);
  p[3] = 0.01;
  linear_offset_contrast(data, p[2], p[3], &p[0], &p[1]);

  // Damped Gauss-Newton refinement.
  double lambda = 1e-3;
  double current = cost(data, p);
  Eigen::Vector4d best_p = p;
  double best_cost = current;
  bool converged = false;
  const int max_iterations = 200;
  int iteration = 0;
  for (; iteration < max_iterations; ++iteration) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (const auto& [t, y] : data) {
      const Eigen::Vector4d g = RabiModel::gradient(t, p);
      const double r = RabiModel::eval(t, p) - y;
      jtj += g * g.transpose();
      jtr += g * r;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector4d delta = damped.ldlt().solve(-jtr);
      const Eigen::Vector4d trial = p + delta;
      const double trial_cost = cost(data, trial);
      if (std::isfinite(trial_cost) && trial_cost <= current) {
        const double rel_step =
            delta.cwiseQuotient(p.cwiseAbs().cwiseMax(1e-12)).norm();
        const double improvement = current - trial_cost;
        p = trial;
        current = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (current < best_cost) {
          best_cost = current;
          best_p = p;
        }
        if (rel_step < 1e-12 || improvement < 1e-16 * (1.0 + current)) {
          converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped || converged) {
      converged = converged || stepped;
      break;
    }
  }

  RabiFit fit;
  fit.frequency_rad_per_s = std::abs(best_p[2]);
  fit.contrast = best_p[1];
  fit.decay_sigma = std::abs(best_p[3]);
  fit.offset = best_p[0];
  fit.residual_rms =
      std::sqrt(best_cost / static_cast<double>(data.size()));
  fit.frequency_identified = true;

  if (!converged && iteration >= max_iterations) {
    throw NumericalError(
        "fit_rabi: refinement did not converge after 200 iterations; "
        "best frequency " +
        std::to_string(fit.frequency_rad_per_s) + " rad/s, residual rms " +
        std::to_string(fit.residual_rms));
  }
  if (std::abs(fit.contrast) < 0.01) {
    fit.contrast = std::clamp(fit.contrast, 0.0, 1.0);
    fit.frequency_identified = false;
    return fit;
  }
  // Contrast may exceed the physical range by noise; clamp gently.
  fit.contrast = std::clamp(fit.contrast, 0.0, 1.0);

  const double periods = fit.frequency_rad_per_s * t_span / kTwoPi;
  if (periods < 1.5) {
    throw std::invalid_argument(
        "fit_rabi: samples cover only " + std::to_string(periods) +
        " fitted periods, need >= 1.5");
  }
  return fit;
}

double frequency_ratio(const RabiFit& pair_fit, const RabiFit& single_fit) {
  if (!pair_fit.frequency_identified || !single_fit.frequency_identified) {
    throw std::invalid_argument(
        "frequency_ratio: both fits must identify a frequency");
  }
  return pair_fit.frequency_rad_per_s / single_fit.frequency_rad_per_s;
}

void ParityScan::validate() const {
  if (samples.size() < 8) {
    throw std::invalid_argument("ParityScan: need at least 8 samples");
  }
  double lo = samples.front().first;
  double hi = lo;
  for (const auto& [theta, probs] : samples) {
    probs.validate();
    lo = std::min(lo, theta);
    hi = std::max(hi, theta);
  }
  if (hi - lo < kTwoPi * (1.0 - 1e-9)) {
    throw std::invalid_argument(
        "ParityScan: theta must span a full 2 pi, got " +
        std::to_string(hi - lo));
  }
}

namespace {

// Linear interpolation of a scan column at theta; exact sample match wins.
double interpolate_scan(const std::vector<std::pair<double, OutcomeProbs>>& sorted,
                        double theta, double (*column)(const OutcomeProbs&)) {
  for (const auto& [th, probs] : sorted) {
    if (std::abs(th - theta) < 1e-9) return column(probs);
  }
  if (theta < sorted.front().first || theta > sorted.back().first) {
    throw std::invalid_argument(
        "extract_fidelity: theta = " + std::to_string(theta) +
        " not covered by the scan");
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].first >= theta) {
      const double t0 = sorted[i - 1].first;
      const double t1 = sorted[i].first;
      const double w = (theta - t0) / (t1 - t0);
      return (1.0 - w) * column(sorted[i - 1].second) +
             w * column(sorted[i].second);
    }
  }
  return column(sorted.back().second);
}

double col_p11(const OutcomeProbs& p) { return p.p11; }
double col_single(const OutcomeProbs& p) { return p.p01 + p.p10; }

}  // namespace

FidelityReport extract_fidelity(const ParityScan& scan,
                                std::optional<double> pair_survival) {
  scan.validate();
  auto sorted = scan.samples;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Linear LS fit of P11(theta) against {1, cos theta, cos 2theta}.
  const auto n = static_cast<Eigen::Index>(sorted.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = sorted[static_cast<std::size_t>(i)].first;
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(theta);
    design(i, 2) = std::cos(2.0 * theta);
    rhs[i] = sorted[static_cast<std::size_t>(i)].second.p11;
  }
  const Eigen::Vector3d coeffs =
      design.colPivHouseholderQr().solve(rhs);

  FidelityReport report;
  report.coeff_a = coeffs[0];
  report.coeff_b = coeffs[1];
  report.coeff_c2 = coeffs[2];
  report.p_dd = interpolate_scan(sorted, 0.0, col_p11);
  report.p_uu = interpolate_scan(sorted, std::numbers::pi, col_p11);
  report.single_present = interpolate_scan(sorted, 0.0, col_single);
  report.coherence = 0.5 * (report.p_dd + report.p_uu -
                            report.single_present - 8.0 * report.coeff_c2);
  const double f = 0.5 * report.single_present + report.coherence;
  if (f < -0.05 || f > 1.05) {
    throw NumericalError("extract_fidelity: fitted fidelity " +
                         std::to_string(f) +
                         " outside [-0.05, 1.05]; scan violates the "
                         "estimator model");
  }
  report.fidelity = std::clamp(f, 0.0, 1.0);
  report.pair_survival = pair_survival.value_or(1.0);
  if (!(report.pair_survival > 0.0) || report.pair_survival > 1.0) {
    throw std::invalid_argument("extract_fidelity: pair survival must lie in (0,1]");
  }
  report.fidelity_renormalized = report.fidelity / report.pair_survival;
  return report;
}

double pair_loss_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("pair_loss_probability: p must lie in [0,1]");
  }
  return 2.0 * p * (1.0 - p) + p * p;
}

double renormalized_fidelity(double fidelity, double pair_loss) {
  if (!(pair_loss >= 0.0) || pair_loss >= 1.0) {
    throw std::invalid_argument(
        "renormalized_fidelity: pair_loss must lie in [0,1); no surviving "
        "pairs otherwise");
  }
  return fidelity / (1.0 - pair_loss);
}

}  // namespace rydsim
