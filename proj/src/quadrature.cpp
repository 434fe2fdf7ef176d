#include "crddme/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crddme {

std::vector<LinePoint> gauss_legendre01(int n) {
  if (n < 1)
    throw std::invalid_argument("Gauss-Legendre rule needs at least one point");
  std::vector<LinePoint> rule(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int k = 0; k < half; ++k) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15)
        break;
    }
    double p0 = 1.0, p1 = x;
    for (int m = 2; m <= n; ++m) {
      const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1, 1] -> [0, 1]; weights halve so that they sum to 1.
    rule[static_cast<std::size_t>(k)] = {0.5 * (1.0 - x), 0.5 * w};
    rule[static_cast<std::size_t>(n - 1 - k)] = {0.5 * (1.0 + x), 0.5 * w};
  }
  if (n % 2 == 1)
    rule[static_cast<std::size_t>(n / 2)].s = 0.5;
  return rule;
}

namespace {

void orbit3(std::vector<TrianglePoint> &r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.push_back({a, a, b, w});
  r.push_back({a, b, a, w});
  r.push_back({b, a, a, w});
}

std::vector<TrianglePoint> collapsed_rule(int degree) {
  // (u, v) in [0,1]^2 -> l1 = u, l2 = (1-u) v with Jacobian 2 (1-u) relative
  // to the unit reference triangle of area 1/2.
  const int n = degree / 2 + 1;
  const auto g = gauss_legendre01(n + 1);
  std::vector<TrianglePoint> r;
  for (const LinePoint &pu : g) {
    for (const LinePoint &pv : g) {
      const double l1 = pu.s;
      const double l2 = (1.0 - pu.s) * pv.s;
      r.push_back({1.0 - l1 - l2, l1, l2, 2.0 * (1.0 - pu.s) * pu.w * pv.w});
    }
  }
  return r;
}

} // namespace

std::vector<TrianglePoint> triangle_rule(int degree) {
  std::vector<TrianglePoint> r;
  switch (degree) {
  case 0:
  case 1:
    r.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0});
    return r;
  case 2:
    orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
    return r;
  case 3:
  case 4:
    orbit3(r, 0.445948490915965, 0.223381589678011);
    orbit3(r, 0.091576213509771, 0.109951743655322);
    return r;
  case 5:
    r.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225});
    orbit3(r, 0.470142064105115, 0.132394152788506);
    orbit3(r, 0.101286507323456, 0.125939180544827);
    return r;
  default:
    if (degree < 0)
      throw std::invalid_argument("quadrature degree must be non-negative");
    return collapsed_rule(degree);
  }
}

} // namespace crddme
