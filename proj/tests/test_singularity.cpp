#include <cmath>

#include "doctest.h"
#include "oracle_values.hpp"
#include "singreg/characteristics.hpp"
#include "singreg/singularity.hpp"

using namespace singreg;
using namespace singreg::singularity;
using namespace singreg::calculus;

namespace {

VectorXd pt1(double t) { return VectorXd::Constant(1, t); }

atlas::Region box_region(Box B) {
  return atlas::Region{[B](const VectorXd& p) { return B.contains(p); }, "box"};
}

MapPtr scalar_expr(ExprPtr e, int dom) {
  return std::make_shared<ExprMap>(std::vector<ExprPtr>{std::move(e)}, dom);
}

// gauge chart family of the linear-profile cusp on the half-open interval,
// with the matching weight rho = t and the flat line metric
SingularityDatum cusp_datum(int jmax) {
  auto R = characteristics::Characteristic::power(1.0, characteristics::JKind::ZeroOne);
  atlas::Atlas K = characteristics::r_atlas(R, jmax);
  auto rho = SingularityFunction::from_map(scalar_expr(evar(0), 1), 1.0, "t");
  return make_datum(std::move(K), rho, metric::MetricField::euclidean(1),
                    atlas::Region::all(), "linear cusp");
}

// unit lattice on the line restricted to a symmetric box
SingularityDatum flat_datum(double halfext) {
  atlas::LatticeDomain D{Box::cube(1, -1e18, 1e18), false};
  Box S = Box::cube(1, -halfext, halfext);
  atlas::Atlas K = atlas::lattice_atlas(1.0, D, S);
  return make_datum(std::move(K), SingularityFunction::one(1),
                    metric::MetricField::euclidean(1), box_region(S), "flat line");
}

}  // namespace

TEST_CASE("certify: cusp gauge family with its own weight passes") {
  SingularityDatum d = cusp_datum(16);
  atlas::CertOptions opt;
  opt.windows = {4, 8, 16};
  CertReport rep = certify_singularity_datum(d, opt);
  CHECK(rep.pass);
  CHECK(rep.subject == "singularity-datum");
  REQUIRE(rep.conditions.size() == 6);
  CHECK(rep.conditions[0].condition == "weight-positive-smooth");
  CHECK(rep.conditions[1].condition == "atlas-uniformly-regular");
  CHECK(rep.conditions[2].condition == "weight-derivative-bounds");
  CHECK(rep.conditions[3].condition == "weight-anchor-comparability");
  CHECK(rep.conditions[4].condition == "metric-anchor-equivalence");
  CHECK(rep.conditions[5].condition == "metric-derivative-bounds");
  CHECK(!rep.truncation_note.empty());

  // idempotent: a rerun serializes identically
  CertReport again = certify_singularity_datum(d, opt);
  CHECK(rep.to_json() == again.to_json());
}

TEST_CASE("cusp charts push the metric onto the squared weight exactly") {
  SingularityDatum d = cusp_datum(6);
  for (const auto& c : d.K.charts) {
    metric::MetricField H = metric::pushforward_metric(c, d.g);
    metric::MetricField scaled = metric::conformal_rescale(H, d.rho.pullback(c));
    auto nodes = atlas::chart_grid(c, 9);
    auto ec = metric::equivalence_constant(scaled, metric::MetricField::euclidean(1), nodes);
    CHECK(ec.c == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("certify: unit lattice with unit weight has unit constants") {
  SingularityDatum d = flat_datum(2.0);
  atlas::CertOptions opt;
  opt.windows = {1, 2, 4};
  CertReport rep = certify_singularity_datum(d, opt);
  CHECK(rep.pass);
  const auto& wd = rep.conditions[2].constants;
  for (const auto& row : wd) {
    CHECK(row.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k < static_cast<int>(row.size()); ++k) CHECK(row.at(k) <= 1e-10);
  }
  for (const auto& row : rep.conditions[3].constants)
    CHECK(row.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& row : rep.conditions[4].constants)
    CHECK(row.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& row : rep.conditions[5].constants) {
    CHECK(row.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k < static_cast<int>(row.size()); ++k) CHECK(row.at(k) <= 1e-10);
  }
  // every certified constant stays at or below 1 up to grid error
  for (int ci : {2, 3, 4, 5})
    for (const auto& row : rep.conditions[ci].constants)
      for (double v : row) CHECK(v <= 1.0 + 1e-9);
}

TEST_CASE("certify: unit weight on shrinking gauge charts fails the metric clause") {
  auto R = characteristics::Characteristic::power(1.0, characteristics::JKind::ZeroOne);
  atlas::Atlas K = characteristics::r_atlas(R, 16);
  SingularityDatum d = make_datum(std::move(K), SingularityFunction::one(1),
                                  metric::MetricField::euclidean(1), atlas::Region::all(),
                                  "flat metric, unit weight, shrinking charts");
  atlas::CertOptions opt;
  opt.windows = {4, 8, 16};
  CertReport rep = certify_singularity_datum(d, opt);
  CHECK_FALSE(rep.pass);
  CHECK(rep.first_failure() == "metric-anchor-equivalence");
  for (int i : {0, 1, 2, 3}) CHECK(rep.conditions[i].pass);
  CHECK(rep.conditions[4].growth_ratio >= 10.0);
  CHECK(!rep.conditions[4].witness.empty());
}

TEST_CASE("product of two flat lines: block constants and anchors") {
  SingularityDatum a = flat_datum(0.5);
  SingularityDatum b = flat_datum(0.5);
  SingularityDatum p = product_datum(a, b, 2);
  CHECK(p.K.m == 2);
  CHECK(p.K.carrier_dim == 2);
  REQUIRE(!p.K.charts.empty());
  CHECK(static_cast<bool>(p.K.cover_hook));
  CHECK(p.rho.bound.has_value());
  CHECK(*p.rho.bound == doctest::Approx(1.0));
  for (const auto& c : p.K.charts)
    CHECK(p.rho.anchor_value(c) == doctest::Approx(1.0).epsilon(1e-12));

  atlas::CertOptions opt;
  opt.windows = {1, 2};
  CertReport rep = certify_singularity_datum(p, opt);
  CHECK(rep.pass);
  for (const auto& row : rep.conditions[4].constants)
    CHECK(row.at(0) == doctest::Approx(oracle::product_unit_v).epsilon(1e-9));
}

TEST_CASE("product rejects weights without a declared or honest bound") {
  SingularityDatum a = flat_datum(0.5);
  SingularityDatum free_w = flat_datum(0.5);
  free_w.rho = SingularityFunction::from_map(scalar_expr(econst(1.0), 1));
  CHECK_THROWS_AS(product_datum(a, free_w), UnboundedWeight);

  SingularityDatum liar = flat_datum(0.5);
  liar.rho = SingularityFunction::from_map(scalar_expr(eexp(evar(0)), 1), 1.0, "e^x");
  CHECK_THROWS_AS(product_datum(a, liar), UnboundedWeight);
}

TEST_CASE("product of a cusp at infinity with a flat line certifies") {
  auto R = characteristics::Characteristic::power(-1.0, characteristics::JKind::OneInf);
  atlas::Atlas K = characteristics::r_atlas(R, 8);
  auto rho = SingularityFunction::from_map(scalar_expr(epow(evar(0), -1.0), 1), 1.0, "1/t");
  SingularityDatum a = make_datum(std::move(K), rho, metric::MetricField::euclidean(1),
                                  atlas::Region::all(), "reciprocal cusp");
  SingularityDatum b = flat_datum(0.5);
  SingularityDatum p = product_datum(a, b, 2);

  // anchor factorization: each product anchor is the weight at a point of a
  // containing source chart, so it stays within one comparability step of
  // that chart's anchor
  for (const auto& c : p.K.charts) {
    VectorXd q = c.inv->value(c.anchor);
    double v = p.rho.carrier->value(q)[0];
    double best = 1e300;
    for (const auto& ka : a.K.charts) {
      // closed boundary faces count as inside
      if (!atlas::chart_contains(ka, q.head(1), 1e-9)) continue;
      double anch = a.rho.anchor_value(ka);
      best = std::min(best, std::max(v / anch, anch / v));
    }
    CHECK(best <= oracle::harnack_e * 1.001);
  }

  // the flat-side refinement step tracks the decaying anchor only from the
  // fourth layer on, so the plateau starts there
  atlas::CertOptions opt;
  opt.windows = {4, 6, 8};
  opt.resolution = 7;
  CertReport rep = certify_singularity_datum(p, opt);
  CHECK(rep.pass);
}

TEST_CASE("patching a flat half with a reciprocal tail") {
  PatchPiece p1;
  p1.cover_box = Box(VectorXd::Constant(1, -1e18), VectorXd::Constant(1, 2.0));
  p1.region_box = Box(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 1.5));
  p1.rho = SingularityFunction::one(1);
  p1.K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{Box::cube(1, -1e18, 1e18), false},
                              p1.region_box);

  PatchPiece p2;
  p2.cover_box = Box(VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 1e18));
  p2.region_box = Box(VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 2.2));
  p2.rho = SingularityFunction::from_map(scalar_expr(epow(evar(0), -1.0), 1), 1.0, "1/t");
  auto R = characteristics::Characteristic::power(-1.0, characteristics::JKind::OneInf);
  p2.K = characteristics::r_atlas(R, 6);

  PatchResult res = patch_data({p1, p2}, metric::MetricField::euclidean(1));
  REQUIRE(res.partition.phi.size() == 2);

  // partition sums to one and the blend stays within the declared factor of
  // each local weight on its own slice
  for (double t = -2.0; t <= 3.0; t += 0.25) {
    double s = res.partition.phi[0]->value(pt1(t))[0] + res.partition.phi[1]->value(pt1(t))[0];
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  for (double t = -2.0; t <= 1.5; t += 0.25) {
    double ratio = res.datum.rho.carrier->value(pt1(t))[0] / 1.0;
    CHECK(ratio <= oracle::patch_ratio_bound * (1 + 1e-9));
    CHECK(ratio >= 1.0 / oracle::patch_ratio_bound * (1 - 1e-9));
  }
  for (double t = 1.5; t <= 2.2; t += 0.25) {
    double ratio = res.datum.rho.carrier->value(pt1(t))[0] * t;
    CHECK(ratio <= oracle::patch_ratio_bound * (1 + 1e-9));
    CHECK(ratio >= 1.0 / oracle::patch_ratio_bound * (1 - 1e-9));
  }

  // seam smoothness: the blended weight expands like the partition sum
  VectorXd seam = pt1(1.5);
  Jet rj = res.datum.rho.carrier->jets(seam, 3)[0];
  Jet manual =
      res.partition.phi[0]->jets(seam, 3)[0] * p1.rho.carrier->jets(seam, 3)[0] +
      res.partition.phi[1]->jets(seam, 3)[0] * p2.rho.carrier->jets(seam, 3)[0];
  for (int e = 0; e < 4; ++e) CHECK(std::abs(rj.coeff(e) - manual.coeff(e)) <= 1e-8);

  atlas::CertOptions opt;
  opt.windows = {2, 4, 6};
  CertReport rep = certify_singularity_datum(res.datum, opt);
  CHECK(rep.pass);
}

TEST_CASE("patching a single piece returns its weight unchanged") {
  PatchPiece p1;
  p1.cover_box = Box(VectorXd::Constant(1, -4.0), VectorXd::Constant(1, 4.0));
  p1.region_box = Box(VectorXd::Constant(1, -1.5), VectorXd::Constant(1, 1.5));
  p1.rho = SingularityFunction::one(1);
  p1.K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{Box::cube(1, -1e18, 1e18), false},
                              p1.region_box);
  PatchResult res = patch_data({p1}, metric::MetricField::euclidean(1));
  for (double t : {-1.0, 0.0, 0.7})
    CHECK(res.datum.rho.carrier->value(pt1(t))[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("patching rejects incomparable overlap weights") {
  PatchPiece p1;
  p1.cover_box = Box(VectorXd::Constant(1, -4.0), VectorXd::Constant(1, 2.0));
  p1.region_box = Box(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 1.5));
  p1.rho = SingularityFunction::one(1);
  p1.K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{Box::cube(1, -1e18, 1e18), false},
                              p1.region_box);
  PatchPiece p2 = p1;
  p2.cover_box = Box(VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 6.0));
  p2.region_box = Box(VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 3.0));
  p2.rho = SingularityFunction::from_map(
      scalar_expr(epow(esub(evar(0), econst(1.0)), -1.0), 1), {}, "1/(t-1)");
  p2.K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{Box::cube(1, -1e18, 1e18), false},
                              p2.region_box);
  try {
    patch_data({p1, p2}, metric::MetricField::euclidean(1));
    CHECK(false);
  } catch (const HypothesisViolated& e) {
    CHECK(std::string(e.what()).find("comparability") != std::string::npos);
  }
}

TEST_CASE("pullback transports values by the chain rule") {
  SingularityDatum d = cusp_datum(8);
  Diffeo f;
  f.fwd = std::make_shared<AffineMap>(Eigen::MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1));
  f.inv = std::make_shared<AffineMap>(Eigen::MatrixXd::Constant(1, 1, 0.5), VectorXd::Zero(1));
  SingularityDatum pd = pullback_datum(f, d);
  CHECK(pd.rho.carrier->value(pt1(0.25))[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pd.g.value(pt1(0.25))(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(pd.K.charts.size() == d.K.charts.size());

  Diffeo id;
  id.fwd = AffineMap::identity(1);
  id.inv = AffineMap::identity(1);
  SingularityDatum same = pullback_datum(id, d);
  CHECK(same.rho.carrier->value(pt1(0.5))[0] == d.rho.carrier->value(pt1(0.5))[0]);
  CHECK(same.g.value(pt1(0.5))(0, 0) == d.g.value(pt1(0.5))(0, 0));
}

TEST_CASE("pullback reproduces the source certificate constants") {
  SingularityDatum d = cusp_datum(8);
  Diffeo f;
  f.fwd = std::make_shared<AffineMap>(Eigen::MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1));
  f.inv = std::make_shared<AffineMap>(Eigen::MatrixXd::Constant(1, 1, 0.5), VectorXd::Zero(1));
  SingularityDatum pd = pullback_datum(f, d);
  atlas::CertOptions opt;
  opt.windows = {2, 4, 8};
  CertReport src = certify_singularity_datum(d, opt);
  CertReport pull = certify_singularity_datum(pd, opt);
  CHECK(src.pass == pull.pass);
  REQUIRE(src.conditions.size() == pull.conditions.size());
  for (size_t i = 0; i < src.conditions.size(); ++i) {
    const auto& A = src.conditions[i].constants;
    const auto& B = pull.conditions[i].constants;
    REQUIRE(A.size() == B.size());
    for (size_t w = 0; w < A.size(); ++w) {
      REQUIRE(A[w].size() == B[w].size());
      for (size_t k = 0; k < A[w].size(); ++k)
        CHECK(std::abs(A[w][k] - B[w][k]) <=
              1e-9 * std::max({1.0, std::abs(A[w][k]), std::abs(B[w][k])}));
    }
  }
}

TEST_CASE("boundary of a half-plane lattice is a line lattice") {
  Box X = Box::cube(2, -1e18, 1e18);
  X.lo[0] = 0.0;
  Box S(VectorXd::Zero(2), VectorXd::Constant(2, 1.5));
  S.lo[1] = -1.5;
  atlas::Atlas K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{X, true}, S);
  int parent_boundary = 0;
  for (const auto& c : K.charts)
    if (c.kind == atlas::ChartKind::Boundary) ++parent_boundary;
  REQUIRE(parent_boundary > 0);

  SingularityDatum d = make_datum(std::move(K), SingularityFunction::one(2),
                                  metric::MetricField::euclidean(2), atlas::Region::all(),
                                  "half plane");
  SingularityDatum bd = boundary_datum(d);
  CHECK(bd.K.m == 1);
  CHECK(bd.K.carrier_dim == 2);
  CHECK(static_cast<int>(bd.K.charts.size()) == parent_boundary);
  for (const auto& c : bd.K.charts) {
    CHECK(c.kind == atlas::ChartKind::Interior);
    CHECK(c.codomain.lo[0] == doctest::Approx(-1.0));
    CHECK(c.codomain.hi[0] == doctest::Approx(1.0));
    VectorXd p = c.inv->value(VectorXd::Zero(1));
    CHECK(std::abs(p[0]) <= 1e-12);
  }
  atlas::CertOptions opt;
  opt.windows = {1, 2};
  CertReport rep = certify_singularity_datum(bd, opt);
  CHECK(rep.pass);
}

TEST_CASE("boundary restriction refuses a boundaryless family") {
  SingularityDatum d = flat_datum(1.0);
  CHECK_THROWS_AS(boundary_datum(d), NoBoundary);
}

TEST_CASE("boundary of a half-line lattice is the formal point datum") {
  Box X = Box::cube(1, -1e18, 1e18);
  X.lo[0] = 0.0;
  Box S(VectorXd::Zero(1), VectorXd::Constant(1, 1.5));
  atlas::Atlas K = atlas::lattice_atlas(1.0, atlas::LatticeDomain{X, true}, S);
  SingularityDatum d = make_datum(std::move(K), SingularityFunction::one(1),
                                  metric::MetricField::euclidean(1), atlas::Region::all(),
                                  "half line");
  SingularityDatum bd = boundary_datum(d);
  CHECK(bd.K.charts.empty());
  CHECK(bd.desc.find("zero-dimensional") != std::string::npos);
}
