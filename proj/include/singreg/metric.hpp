#pragma once

#include <vector>

#include "singreg/chart.hpp"
#include "singreg/map.hpp"

namespace singreg::metric {

// Metric in chart coordinates: x -> symmetric positive definite m x m matrix,
// stored as a jet-evaluable map onto the m*m entries in row-major order.
struct MetricField {
  int m = 0;
  calculus::MapPtr entries;

  MatrixXd value(const VectorXd& x) const;
  // partials[k](i,j) = d_k g_ij
  std::vector<MatrixXd> first_partials(const VectorXd& x) const;

  static MetricField euclidean(int m);
  static MetricField constant(const MatrixXd& G);
  // diagonal metric from scalar coefficient expressions, zeros elsewhere
  static MetricField diagonal(std::vector<calculus::ExprPtr> diag);
  static MetricField from_map(calculus::MapPtr entries);
};

// Smallest two-sided bound: A/c <= B <= cA at every sample (quadratic-form
// order), with the sample point attaining it.
struct EquivalenceConstant {
  double c = 1.0;
  VectorXd witness;
};

// Symmetrize and check positive definiteness: min eigenvalue below
// 1e-12 * trace throws SingularMetric tagged with the caller's context.
MatrixXd checked_spd(const MatrixXd& G, const std::string& context);

// Metric seen through the chart: J^T (g o inv) J with J the Jacobian of the
// chart's inverse. The input lives in the coordinates the inverse lands in
// (carrier coordinates or another chart). Entries stay jet-evaluable.
MetricField pushforward_metric(const atlas::Chart& chart, const MetricField& g);

// c = max over samples of max(lambda_max(A^{-1}B), lambda_max(B^{-1}A)),
// from one symmetric-definite pencil solve per point.
EquivalenceConstant equivalence_constant(const MetricField& A, const MetricField& B,
                                         const std::vector<VectorXd>& samples);

// g / rho^2 for a positive scalar field; evaluation throws DomainError where
// rho is not positive.
MetricField conformal_rescale(const MetricField& g, calculus::MapPtr rho);

// Levi-Civita symbols at x: Gamma[k](i,j), symmetric in (i,j).
std::vector<MatrixXd> christoffel(const MetricField& g, const VectorXd& x);

// Pointwise norm of the j-th covariant derivative of a scalar field, j <= 2:
// |u|, sqrt(g^{ik} d_i u d_k u), or the full inverse-metric contraction of
// the Hessian corrected by the symbols. Higher orders are out of scope.
double covariant_norm(calculus::MapPtr u, const MetricField& g, int j, const VectorXd& x);

// Block-diagonal sum on concatenated coordinates: the two factors never mix.
MetricField product_metric(const MetricField& a, const MetricField& b);

}  // namespace singreg::metric
