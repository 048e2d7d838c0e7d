#pragma once

#include <functional>
#include <vector>

#include "singreg/map.hpp"

namespace singreg::calculus {

// Adaptive Gauss-Kronrod (7,15) quadrature of f over [a, b].
// Panels split until |K15 - G7| <= tol * max(1, |K15|) locally.
// Deterministic: fixed node order, fixed splitting rule.
double quad(const std::function<double(double)>& f, double a, double b, double tol = 1e-12);

// Solves f(x) = y for monotone continuous f on [lo, hi] by bisection.
// Throws DomainError when y is not bracketed.
double invert_monotone(const std::function<double(double)>& f, double y, double lo, double hi,
                       double tol = 1e-14);

// Deterministic tensor grid over a box. The grid is pulled inward by
// margin * half-width per axis, except that axes flagged as closed at the
// low end (boundary faces) keep their first node exactly on the face.
class GridSampler {
public:
  GridSampler(Box box, int resolution, double margin = 1e-3,
              std::vector<bool> closed_lo = {});

  const Box& box() const { return box_; }
  int resolution() const { return res_; }
  long long count() const;
  VectorXd node(long long idx) const;
  std::vector<VectorXd> nodes() const;

private:
  Box box_;
  int res_;
  double margin_;
  std::vector<bool> closed_lo_;
  double axis_value(int axis, int step) const;
};

// Per-order sup of |d^alpha f_i| over a set of evaluation points.
struct SupNormTable {
  int kmax = 0;
  std::vector<double> per_order;       // index d: max over |alpha| = d
  VectorXd witness;                    // argmax point over all orders
  double max_all() const;
};

SupNormTable sup_norms(const MapBase& f, const std::vector<VectorXd>& points, int kmax);

}  // namespace singreg::calculus
