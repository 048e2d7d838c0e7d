#pragma once

#include <optional>
#include <string>
#include <vector>

#include "singreg/atlas_ops.hpp"
#include "singreg/metric.hpp"
#include "singreg/report.hpp"

namespace singreg::singularity {

struct ProductStructure;

// Positive scalar weight on the carrier. Charts see it through their
// parametrization; the anchor value is the pullback at the chart anchor.
// Products require a declared finite bound.
struct SingularityFunction {
  calculus::MapPtr carrier;
  std::optional<double> bound;
  std::string desc;

  calculus::MapPtr pullback(const atlas::Chart& c) const;
  double anchor_value(const atlas::Chart& c) const;

  static SingularityFunction one(int carrier_dim);
  static SingularityFunction from_map(calculus::MapPtr f, std::optional<double> bound = {},
                                      std::string desc = "");
};

// A weighted geometry: chart family, weight, carrier metric, and the region
// the certificates quantify over. Per-chart metric fields are pushforwards
// of g through the chart parametrizations.
struct SingularityDatum {
  atlas::Atlas K;
  SingularityFunction rho;
  metric::MetricField g;
  atlas::Region S = atlas::Region::all();
  std::string desc;
  // set when the datum factors through a carrier split; the certifier then
  // samples per factor and combines constants by exact product identities
  std::shared_ptr<const ProductStructure> split;
};

SingularityDatum make_datum(atlas::Atlas K, SingularityFunction rho, metric::MetricField g,
                            atlas::Region S = atlas::Region::all(), std::string desc = "");

// Factored presentation of a product geometry. The crossed chart family is
// { a-chart x b-cell : b-cell in the group of that a-chart }, the weight is
// the first factor's weight extended over the split, and the carrier metric
// is blockdiag(g_a, (phi o pi_a) * g_b) on the concatenated coordinates.
// Grids of crossed charts are products of factor grids and split maps carry
// no mixed partials, so every certified constant factors exactly.
struct ProductStructure {
  SingularityDatum a;   // first factor; carries all nonzero cofinal indices
  SingularityDatum b;   // compact second factor with unit weight
  // second-factor refinements, one per distinct cell step; group_of[i] names
  // the refinement used by first-factor chart i
  std::vector<atlas::Atlas> b_cells;
  std::vector<double> cell_step;
  std::vector<int> group_of;
  // scalar coupling on the first-factor carrier; null means identically 1
  calculus::MapPtr phi;
};

// Product datum that keeps its factor structure for certification. Demands a
// boundaryless second factor with exactly unit weight; the second factor is
// refined once per distinct first-factor cell scale (the anchor weight by
// default, or scale_hint when given) and crossed per first-factor chart.
// Certification cost then scales with the factor families, not their product.
SingularityDatum product_datum_factored(
    const SingularityDatum& a, const SingularityDatum& b, int keep_per_axis = 3,
    calculus::MapPtr phi = nullptr,
    const std::function<double(const atlas::Chart&)>& scale_hint = {});

// Conditions, in report order: weight positivity/smoothness, delegation to
// the chart-family certifier, weight derivative bounds against the anchor,
// two-sided weight/anchor comparability, per-chart metric equivalence with
// the squared anchor, and metric derivative bounds against the squared
// anchor. Never throws; defects become failed conditions.
CertReport certify_singularity_datum(const SingularityDatum& d,
                                     const atlas::CertOptions& opt = {});

// Product geometry: per chart pair, each factor chart is refined by a step
// keyed to the other factor's anchor weight (capped by the product shrink
// gap), then crossed. Weight is the product, metric the block sum. Both
// weights need declared bounds and the second factor must be boundaryless.
SingularityDatum product_datum(const SingularityDatum& a, const SingularityDatum& b,
                               int keep_per_axis = 3);

// One patch input: where its bump lives, the region slice it owns, and its
// local weight and chart family.
struct PatchPiece {
  Box cover_box;
  Box region_box;
  SingularityFunction rho;
  atlas::Atlas K;
};

// Declared cross-piece bounds the inputs are checked against on overlaps.
struct PatchBounds {
  double comparability = 8.0;  // two-sided weight ratio between pieces
  double transition = 8.0;     // cross-piece transition sup, orders 1..kmax
  int kmax = 2;
  int resolution = 0;          // 0 = dimension default
};

// Bump fields subordinate to the cover boxes, normalized to sum to 1.
struct PartitionOfUnity {
  std::vector<calculus::MapPtr> phi;
  std::vector<Box> supports;
};

struct PatchResult {
  SingularityDatum datum;
  PartitionOfUnity partition;
};

// Glue piecewise data into one datum: union chart family restricted to the
// region slices, weight blended through the partition. Violated input
// hypotheses (cover, comparability, transition bounds) throw
// HypothesisViolated naming the clause.
PatchResult patch_data(const std::vector<PatchPiece>& pieces, const metric::MetricField& g,
                       const PatchBounds& bounds = {});

// Jet-evaluable diffeomorphism; fwd maps the new carrier into the old one.
struct Diffeo {
  calculus::MapPtr fwd;
  calculus::MapPtr inv;
};

// Transport a datum along a diffeomorphism: charts compose with f, the
// weight and metric pull back, the region transports. Chart-coordinate data
// are unchanged, so certified constants match the source up to grid error.
SingularityDatum pullback_datum(const Diffeo& f, const SingularityDatum& d);

// Restriction to the boundary: every boundary chart drops its first
// coordinate, the weight and metric restrict by evaluation on the face.
// Throws NoBoundary when no chart carries a boundary face. For a
// one-dimensional datum the boundary is a formal zero-dimensional marker.
SingularityDatum boundary_datum(const SingularityDatum& d);

}  // namespace singreg::singularity
