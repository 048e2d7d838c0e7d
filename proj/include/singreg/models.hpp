#pragma once

#include <optional>
#include <string>
#include <vector>

#include "singreg/characteristics.hpp"
#include "singreg/singularity.hpp"

namespace singreg::models {

// Compact manifold presented by graph-style local parametrizations into its
// ambient space: fwd maps ambient points to cube coordinates, inv is the
// jet-evaluable parametrization. Zero-dimensional manifolds are finite point
// sets and carry no metric.
struct EmbeddedManifold {
  int ambient = 0;
  int m = 0;
  atlas::Atlas K;                // empty when m == 0
  std::vector<VectorXd> points;  // populated when m == 0
  bool metric_absent = false;
  std::string desc;

  bool boundaryless() const;
  // unit weight, ambient Euclidean metric, full region
  singularity::SingularityDatum datum() const;
};

// Unit sphere of dimension l-1 in R^l via 2l hemisphere graph charts (the
// positive-axis cap plus boundary-adapted halves when half is set). l = 1
// degenerates to the two-point set {-1, +1}.
EmbeddedManifold sphere(int l, bool half = false);

// Product of d unit circles in R^{2d}; charts are crossed circle graphs.
EmbeddedManifold flat_torus(int d);

// One-point cross-section convention: a single point at the origin of R^0.
EmbeddedManifold one_point();

// Charts crossed pairwise, ambients concatenated. Point factors multiply into
// the other factor's parametrizations.
EmbeddedManifold embedded_product(const EmbeddedManifold& a, const EmbeddedManifold& b);

// Boundary as an embedded manifold in the same ambient space: boundary charts
// drop their face coordinate; a one-dimensional input yields its face points.
EmbeddedManifold boundary_of(const EmbeddedManifold& B);

// Surface swept over a compact base by a radius profile, presented by layer
// charts in gauge coordinates: chart (j, beta, cell) parametrizes
// (t, z) = (tau(s + j), rho(s + j) * Y_beta(cell coords)). Funnel layers
// subdivide the base charts so cell size tracks 1/R; cusp layers keep one
// cell. The region pins the profile's side of t = 1.
struct Pipe {
  characteristics::Characteristic R;
  characteristics::Kind kind = characteristics::Kind::Neither;
  EmbeddedManifold base;
  characteristics::GaugeMap gauge;
  int jmax = 0;
  // stretching diffeomorphism: phi (t, z) = (t, z / R(t)), phi_inv its inverse
  calculus::MapPtr phi;
  calculus::MapPtr phi_inv;
  singularity::SingularityDatum datum;
  std::vector<int> chart_layer;  // per chart: its layer j
};

// Requires R classified Cusp or Funnel (SpecError otherwise) and jmax >= 1.
Pipe pipe(const characteristics::Characteristic& R, const EmbeddedManifold& B, int jmax);

// Closed-form induced metric of one pipe chart:
//   g_ss = tau'^2 + rho'^2 |Y|^2, g_sa = rho rho' (Y | d_a Y),
//   g_ab = rho^2 (d_a Y | d_b Y),
// in that chart's cell coordinates; reference for the jet-computed pushforward.
metric::MetricField pipe_metric_closed_form(const Pipe& P, int chart_index);

// Distance-type scalar on model coordinates with a certified floor.
struct DistanceField {
  calculus::MapPtr field;
  double floor = 0.0;
  std::string desc;
};

// Funnel end over [1, inf) with profile t^alpha, 0 <= alpha <= 1
// (AlphaOutOfRange otherwise); carries the tame-end distance 1 + arclength.
struct FunnelEnd {
  Pipe pipe;
  DistanceField delta_v;
};
FunnelEnd funnel_end(double alpha, const EmbeddedManifold& B, int jmax = 16);

// Cusp end over (0, 1] with profile t^alpha, alpha >= 1 (AlphaOutOfRange
// otherwise); equivalence is the sampled two-sided constant between the
// induced metric and the stretched model dt^2 + t^{2 alpha} g_base.
struct CuspEnd {
  Pipe pipe;
  double equivalence = 1.0;
};
CuspEnd cusp_end(double alpha, const EmbeddedManifold& S, int jmax = 16);

// Declared pipe metric for wedge assembly: the induced Euclidean metric, or
// the power-weighted axial form t^{2(beta-1)} dt^2 + g_base.
struct PipeMetricDecl {
  enum class Kind { Induced, PowerWeighted };
  Kind kind = Kind::Induced;
  double beta = 1.0;
  static PipeMetricDecl induced() { return {}; }
  static PipeMetricDecl power_weighted(double beta) {
    return {Kind::PowerWeighted, beta};
  }
};

// Pipe times a compact boundaryless cross-section. The datum lives on the
// stretched carrier for power-weighted metrics and on the pipe carrier
// otherwise; weight per the admissible-case table.
struct Wedge {
  characteristics::Characteristic R;
  EmbeddedManifold base;
  std::optional<EmbeddedManifold> gamma;  // absent = one-point convention
  std::string case_label;                 // "(i)" or "(ii)"
  singularity::SingularityDatum datum;
};

// Validates the admissible cases: (i) profile classified Cusp (any window) or
// Funnel on [1, inf) with the induced metric; (ii) power profile t^alpha on
// (0, 1] with alpha <= 1, exponent beta != 0, beta <= alpha, and beta > 0
// whenever alpha > 0, with the power-weighted metric. CaseMismatch names the
// violated constraint; the weight is R for case-(i) cusps, t^alpha for
// case (ii) with 0 < alpha <= 1, and unit otherwise.
Wedge wedge(const characteristics::Characteristic& R, const EmbeddedManifold& B,
            const std::optional<EmbeddedManifold>& Gamma, const PipeMetricDecl& h,
            int jmax = 16);

// Case-(ii) convenience: profile t^alpha with the power-weighted metric.
Wedge wedge_power(double alpha, double beta, const EmbeddedManifold& B,
                  const std::optional<EmbeddedManifold>& Gamma, int jmax = 16);

// Anisotropic model metric on (0,1) x sphere [x cross-section]:
//   t^{-2} dt^2 + t^{-2 alpha} (g_sphere + g_gamma)   for 0 < alpha <= 1,
//   t^{-2(alpha+1)} dt^2 + g_sphere + g_gamma         for alpha > 1;
// AlphaOutOfRange for alpha <= 0. The datum carries a gauge-adapted split
// atlas under the unit weight and certifies on cofinal windows.
struct AnisotropicModel {
  double alpha = 1.0;
  metric::MetricField g;  // on carrier coordinates (t, sphere ambient[, gamma])
  singularity::SingularityDatum datum;
};
AnisotropicModel anisotropic_metric(double alpha, int l,
                                    const std::optional<EmbeddedManifold>& Gamma,
                                    int jmax = 16);

// Pipe over a pipe: axial layers of profile R1 crossed with the inner pipe's
// charts; weight is the outer profile weight times the stretched inner weight.
struct IteratedPipe {
  singularity::SingularityDatum datum;
  singularity::SingularityFunction weight;
  // full stretching onto J1 x J x B coordinates
  calculus::MapPtr stretch;
};
IteratedPipe iterate_pipe(const Pipe& inner, const characteristics::Characteristic& R1,
                          int j1max);

// Tubular coordinates around a cross-section, composed with the polar map and
// the profile stretching: fwd (x, gamma) = ((|x|, |x|^{alpha-1} x), gamma).
// Throws DomainError at x = 0. delta is the distance to the cross-section in
// the flat model (exactly |x|, so the comparability constant is 1).
struct TubularEnd {
  calculus::MapPtr fwd;
  calculus::MapPtr inv;
  DistanceField delta;
  double comparability = 1.0;
  std::string desc;
};
TubularEnd tubular_end_map(int l, const EmbeddedManifold& Gamma, double alpha,
                           bool interior);

// Spheroid-minus-equator demo: tubular coordinates (s, theta) near the
// equator approximated by the parameter-normal flat model, with the sampled
// two-sided ratio between s and the ambient distance to the equator. The
// ratio is empirical, not certified.
struct EllipsoidDemo {
  EmbeddedManifold equator;   // unit circle in the z = 0 plane of R^3
  calculus::MapPtr tube;      // (s, theta) -> point on the spheroid
  DistanceField delta;        // ambient distance to the equator
  double ratio_lo = 1.0;
  double ratio_hi = 1.0;
  std::string note;
};
EllipsoidDemo ellipsoid_equator_demo(double polar_semiaxis);

}  // namespace singreg::models
