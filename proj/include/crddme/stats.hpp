#ifndef CRDDME_STATS_HPP
#define CRDDME_STATS_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace crddme {

/// Right-continuous S(t) = 1 - ECDF(t). Infinite samples (never bound within
/// the horizon) keep S above zero.
struct SurvivalCurve {
  /// Distinct finite sample times, ascending.
  std::vector<double> times;
  /// survival[k] = S(times[k]), the value just after the k-th jump.
  std::vector<double> survival;
  std::size_t n = 0;

  double operator()(double t) const;
};

SurvivalCurve ecdf_survival(std::vector<double> samples);

/// sup_t |S(t) - f(t)| for a continuous f, checked on both sides of every jump.
double sup_distance(const SurvivalCurve &s, const std::function<double(double)> &f);

/// Dvoretzky-Kiefer-Wolfowitz half-width sqrt(ln(2/alpha) / (2n)).
double dkw_epsilon(std::size_t n, double alpha);

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
double normal_critical(double level);

struct MeanCI {
  double mean = 0.0;
  double halfwidth = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// mean +/- z * s / sqrt(n), s the sample standard deviation. Requires n >= 2.
MeanCI mean_ci(const std::vector<double> &samples, double level = 0.95);

struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
  double halfwidth = 0.0;
};

/// Per-time binomial proportion with a normal-approximation interval.
/// indicators[r][k] is true when realization r is bound at t_grid[k].
std::vector<CurvePoint> pbound_curve(const std::vector<std::vector<bool>> &indicators,
                                     const std::vector<double> &t_grid, double level = 0.95);

/// Per-time mean of values[r][k] with a normal-approximation interval.
std::vector<CurvePoint> mean_curve(const std::vector<std::vector<double>> &values,
                                   const std::vector<double> &t_grid, double level = 0.95);

/// Two curves agree at grid point k when their intervals overlap.
double overlap_fraction(const std::vector<CurvePoint> &a, const std::vector<CurvePoint> &b);

struct ConvergenceStep {
  /// |s_l - s_{l+1}|
  double difference = 0.0;
  /// Sum of the two confidence half-widths (0 for deterministic input).
  double noise = 0.0;
  bool resolvable = true;
  /// d_l / d_{l+1} and log(d_l/d_{l+1}) / log(h_l/h_{l+1}); set for l <= L-3
  /// when both differences are resolvable and non-zero.
  std::optional<double> ratio;
  std::optional<double> order;
};

struct ConvergenceReport {
  std::vector<ConvergenceStep> steps;
  /// True when the finest ratio could not be formed because a difference
  /// fell below the noise.
  bool noise_limited = false;
  std::string summary() const;
};

/// values[l] and h[l] per refinement level (coarse to fine); halfwidths may be
/// empty for deterministic statistics.
ConvergenceReport convergence_report(const std::vector<double> &values,
                                     const std::vector<double> &h,
                                     const std::vector<double> &halfwidths = {});

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit of observed counts to probabilities. Bins with an
/// expected count below `min_expected` are pooled into one.
ChiSquareResult chi_square_test(const std::vector<double> &observed,
                                const std::vector<double> &probabilities,
                                double min_expected = 5.0);

} // namespace crddme

#endif
