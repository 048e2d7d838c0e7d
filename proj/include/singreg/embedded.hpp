#pragma once

#include <string>
#include <vector>

#include "singreg/singularity.hpp"

namespace singreg::embedded {

// Induced metric of one parametrization chart: the Gram matrix
// (d i)^T d i of the chart inverse into its ambient space, jet-evaluable.
// Evaluation throws RankDeficient when the Jacobian loses rank (smallest
// singular value below 1e-10 times the largest).
metric::MetricField induced_metric(const atlas::Chart& c, int ambient);

// Certifier for parametrization-regular data over an ambient-Euclidean datum,
// four conditions in report order: the chart family covers and overlaps
// boundedly (smallest covering radius, sampled multiplicity); the weight has
// bounded derivatives and two-sided anchor comparability; the pushforward
// dominates the squared anchor times the flat metric one-sidedly (both
// sandwich constants reported); the parametrization derivatives are bounded
// by the anchor (orders 1..kmax). On PASS the full datum certifier is re-run
// and its verdict folded in: the parametrization conditions are checked to
// imply it.
CertReport certify_pr_datum(const singularity::SingularityDatum& d,
                            const atlas::CertOptions& opt = {});

// Residuals of the transition identity d(fwd_j o inv_i) = L * d i_j with
// L = [Gram_j]^{-1} (d i_j)^T evaluated at the transported point, sampled
// over the overlap, plus the left-inverse defect ||L d i_j - id||.
struct LambdaResidual {
  double transition = 0.0;
  double left_inverse = 0.0;
  int samples = 0;
};
LambdaResidual lambda_identity_residual(const singularity::SingularityDatum& d, int i,
                                        int j, int resolution = 0);

// Per-window sups of |d^alpha Gram^{-1}| * anchor^2 over the window's charts,
// orders 0..kmax; plateaus whenever the parametrization conditions hold.
ConditionResult inverse_gram_bounds(const singularity::SingularityDatum& d,
                                    const atlas::CertOptions& opt = {});

}  // namespace singreg::embedded
