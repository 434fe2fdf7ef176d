#ifndef CRDDME_QUADRATURE_HPP
#define CRDDME_QUADRATURE_HPP

#include <array>
#include <vector>

#include "crddme/geometry.hpp"

namespace crddme {

/// Node and weight on [0, 1]; weights sum to 1.
struct LinePoint {
  double s;
  double w;
};

/// Barycentric node (l0, l1, l2) and weight; weights sum to 1.
struct TrianglePoint {
  double l0, l1, l2;
  double w;
};

/// n-point Gauss-Legendre rule mapped to [0, 1]. Exact for degree 2n-1.
std::vector<LinePoint> gauss_legendre01(int n);

/// Symmetric rules for degrees 1, 2, 4 and 5; a collapsed Gauss product rule
/// of sufficient order for any other degree.
std::vector<TrianglePoint> triangle_rule(int degree);

/// Integral of f over triangle (a, b, c) with the given rule.
template <typename F>
double integrate_triangle(Vec2 a, Vec2 b, Vec2 c, F &&f,
                          const std::vector<TrianglePoint> &rule) {
  double s = 0.0;
  for (const TrianglePoint &q : rule)
    s += q.w * f(q.l0 * a + q.l1 * b + q.l2 * c);
  return s * std::abs(signed_area(a, b, c));
}

} // namespace crddme

#endif
