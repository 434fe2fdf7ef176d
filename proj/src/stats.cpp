#include "crddme/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace crddme {

double SurvivalCurve::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin())
    return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

SurvivalCurve ecdf_survival(std::vector<double> samples) {
  if (samples.empty())
    throw std::invalid_argument("survival curve of an empty sample");
  for (double s : samples)
    if (std::isnan(s))
      throw std::invalid_argument("NaN sample");
  std::sort(samples.begin(), samples.end());
  SurvivalCurve c;
  c.n = samples.size();
  const double n = static_cast<double>(c.n);
  std::size_t k = 0;
  while (k < samples.size() && std::isfinite(samples[k])) {
    std::size_t e = k;
    while (e < samples.size() && samples[e] == samples[k])
      ++e;
    c.times.push_back(samples[k]);
    c.survival.push_back(static_cast<double>(samples.size() - e) / n);
    k = e;
  }
  return c;
}

double sup_distance(const SurvivalCurve &s, const std::function<double(double)> &f) {
  double d = 0.0;
  double before = 1.0;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double ft = f(s.times[k]);
    d = std::max({d, std::abs(before - ft), std::abs(s.survival[k] - ft)});
    before = s.survival[k];
  }
  return d;
}

double dkw_epsilon(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("DKW band needs n > 0 and 0 < alpha < 1");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

MeanCI mean_ci(const std::vector<double> &x, double level) {
  if (x.size() < 2)
    throw std::invalid_argument("mean_ci needs at least two samples");
  MeanCI r;
  r.n = x.size();
  const double n = static_cast<double>(r.n);
  // Two-pass for accuracy; sorting makes the sums independent of order.
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  r.mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s)
    ss += (v - r.mean) * (v - r.mean);
  r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  r.halfwidth = normal_critical(level) * r.std_error;
  return r;
}

std::vector<CurvePoint> pbound_curve(const std::vector<std::vector<bool>> &ind,
                                     const std::vector<double> &t_grid, double level) {
  if (t_grid.empty())
    throw std::invalid_argument("P_bound curve needs a time grid");
  if (ind.empty())
    throw std::invalid_argument("P_bound curve needs at least one realization");
  const double z = normal_critical(level);
  const double n = static_cast<double>(ind.size());
  std::vector<CurvePoint> out(t_grid.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    std::size_t bound = 0;
    for (const auto &r : ind) {
      if (r.size() != t_grid.size())
        throw std::invalid_argument("indicator row does not match the time grid");
      bound += r[k] ? 1 : 0;
    }
    const double p = static_cast<double>(bound) / n;
    out[k] = {t_grid[k], p, z * std::sqrt(p * (1.0 - p) / n)};
  }
  return out;
}

std::vector<CurvePoint> mean_curve(const std::vector<std::vector<double>> &values,
                                   const std::vector<double> &t_grid, double level) {
  if (t_grid.empty())
    throw std::invalid_argument("mean curve needs a time grid");
  std::vector<CurvePoint> out(t_grid.size());
  std::vector<double> col(values.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (values[r].size() != t_grid.size())
        throw std::invalid_argument("value row does not match the time grid");
      col[r] = values[r][k];
    }
    const MeanCI ci = mean_ci(col, level);
    out[k] = {t_grid[k], ci.mean, ci.halfwidth};
  }
  return out;
}

double overlap_fraction(const std::vector<CurvePoint> &a, const std::vector<CurvePoint> &b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("curves must share a non-empty grid");
  std::size_t ok = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k].value - b[k].value) <= a[k].halfwidth + b[k].halfwidth)
      ++ok;
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

ConvergenceReport convergence_report(const std::vector<double> &values,
                                     const std::vector<double> &h,
                                     const std::vector<double> &hw) {
  if (values.size() != h.size() || (!hw.empty() && hw.size() != values.size()))
    throw std::invalid_argument("convergence_report: inconsistent level counts");
  ConvergenceReport rep;
  if (values.size() < 2)
    return rep;
  rep.steps.resize(values.size() - 1);
  for (std::size_t l = 0; l + 1 < values.size(); ++l) {
    ConvergenceStep &s = rep.steps[l];
    s.difference = std::abs(values[l] - values[l + 1]);
    s.noise = hw.empty() ? 0.0 : hw[l] + hw[l + 1];
    s.resolvable = s.difference > s.noise;
  }
  for (std::size_t l = 0; l + 1 < rep.steps.size(); ++l) {
    const ConvergenceStep &a = rep.steps[l];
    const ConvergenceStep &b = rep.steps[l + 1];
    if (!a.resolvable || !b.resolvable || a.difference == 0.0 || b.difference == 0.0)
      continue;
    rep.steps[l].ratio = a.difference / b.difference;
    rep.steps[l].order = std::log(a.difference / b.difference) / std::log(h[l] / h[l + 1]);
  }
  if (rep.steps.size() >= 2) {
    const std::size_t last = rep.steps.size() - 2;
    rep.noise_limited = !rep.steps[last].ratio.has_value() &&
                        (!rep.steps[last].resolvable || !rep.steps[last + 1].resolvable);
  }
  return rep;
}

std::string ConvergenceReport::summary() const {
  std::ostringstream os;
  os << std::setprecision(6);
  for (std::size_t l = 0; l < steps.size(); ++l) {
    const ConvergenceStep &s = steps[l];
    os << "step " << l << ": diff " << s.difference << " noise " << s.noise;
    if (s.ratio)
      os << " ratio " << *s.ratio << " order " << *s.order;
    if (!s.resolvable)
      os << " (below noise)";
    os << "\n";
  }
  os << (noise_limited ? "noise-limited" : "resolved") << "\n";
  return os.str();
}

ChiSquareResult chi_square_test(const std::vector<double> &observed,
                                const std::vector<double> &prob, double min_expected) {
  if (observed.size() != prob.size() || observed.empty())
    throw std::invalid_argument("chi-square: observed and expected differ in size");
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double psum = std::accumulate(prob.begin(), prob.end(), 0.0);
  if (!(n > 0.0) || !(psum > 0.0))
    throw std::invalid_argument("chi-square: empty sample or zero probabilities");
  ChiSquareResult r;
  double pooled_o = 0.0, pooled_e = 0.0;
  int bins = 0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * prob[k] / psum;
    if (e < min_expected) {
      pooled_o += observed[k];
      pooled_e += e;
      continue;
    }
    r.statistic += (observed[k] - e) * (observed[k] - e) / e;
    ++bins;
  }
  if (pooled_e > 0.0) {
    r.statistic += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++bins;
  }
  r.dof = bins - 1;
  if (r.dof < 1)
    return r;
  r.p_value = boost::math::cdf(boost::math::complement(
      boost::math::chi_squared(static_cast<double>(r.dof)), r.statistic));
  return r;
}

} // namespace crddme
