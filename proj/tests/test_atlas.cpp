#include <cmath>
#include <string>

#include "doctest.h"
#include "oracle_values.hpp"
#include "singreg/atlas_ops.hpp"
#include "singreg/characteristics.hpp"
#include "singreg/expr.hpp"

using namespace singreg;
using namespace singreg::atlas;
using namespace singreg::calculus;

namespace {

LatticeDomain whole_space(int m) {
  return LatticeDomain{Box::cube(m, -1e18, 1e18), false};
}

LatticeDomain half_space(int m) {
  Box X = Box::cube(m, -1e18, 1e18);
  X.lo[0] = 0.0;
  return LatticeDomain{X, true};
}

double parse_witness_p(const std::string& w) {
  auto pos = w.rfind("p=(");
  REQUIRE(pos != std::string::npos);
  return std::stod(w.substr(pos + 3));
}

Chart affine_chart(const std::string& id, double center, double halfwidth, int cofinal) {
  Chart c;
  c.id = id;
  c.m = 1;
  c.fwd = AffineMap::scale_shift(VectorXd::Constant(1, center), 1.0 / halfwidth);
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, halfwidth);
  c.inv = std::make_shared<AffineMap>(A, VectorXd::Constant(1, center));
  c.codomain = Box::cube(1, -1.0, 1.0);
  c.carrier_box = Box(VectorXd::Constant(1, center - halfwidth),
                      VectorXd::Constant(1, center + halfwidth));
  c.anchor = VectorXd::Zero(1);
  c.cofinal_index = cofinal;
  return c;
}

// unit charts at every integer center (a window of them materialized) plus
// tiny "magnifier" charts straddling each seam; magnification 4^j makes the
// transition derivative grow with the window while coverage stays fine
Atlas magnifier_atlas(int n) {
  Atlas A;
  A.m = 1;
  A.carrier_dim = 1;
  A.shrink_radius = 0.5;
  for (int j = 0; j <= n; ++j)
    A.charts.push_back(affine_chart("base" + std::to_string(j), j + 1.0, 1.0, j));
  for (int j = 1; j <= n; ++j)
    A.charts.push_back(
        affine_chart("seam" + std::to_string(j), j + 1.0, std::pow(4.0, -j), j));
  // the unit charts continue to the left of the materialized window
  A.cover_hook = [](const VectorXd& p, double r, int) {
    double f = p[0] - std::floor(p[0]);
    return std::min(f, 1.0 - f) < r;
  };
  return A;
}

// charts shrinking like e^{-j} toward +infinity; transitions to a unit lattice
// have derivative e^{j}
Atlas shrinking_atlas(int n) {
  Atlas A;
  A.m = 1;
  A.carrier_dim = 1;
  A.shrink_radius = 0.5;
  for (int j = 1; j <= n; ++j)
    A.charts.push_back(affine_chart("s" + std::to_string(j), static_cast<double>(j),
                                    std::exp(-static_cast<double>(j)), j));
  return A;
}

// two overlapping charts on the line, one of them logarithmically curved
Atlas curved_atlas() {
  Atlas A;
  A.m = 1;
  A.carrier_dim = 1;
  A.shrink_radius = 0.5;
  A.charts.push_back(affine_chart("flat", 0.0, 1.0, 0));

  Chart b;
  b.id = "curved";
  b.m = 1;
  b.fwd = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{esub(elog(eadd(evar(0), econst(2.0))), econst(std::log(2.0)))}, 1);
  b.inv = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{esub(emul(econst(2.0), eexp(evar(0))), econst(2.0))}, 1);
  b.codomain = Box(VectorXd::Constant(1, std::log(0.75)), VectorXd::Constant(1, std::log(1.75)));
  b.carrier_box = Box(VectorXd::Constant(1, -0.5), VectorXd::Constant(1, 1.5));
  b.anchor = VectorXd::Zero(1);
  A.charts.push_back(std::move(b));

  A.charts[0].neighbors = {1};
  A.charts[1].neighbors = {0};
  return A;
}

}  // namespace

TEST_CASE("unit lattice on R: overlap count at 0.5 and annotations") {
  Atlas A = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 2.0));
  REQUIRE(A.exact_multiplicity.has_value());
  CHECK(*A.exact_multiplicity == 2);
  CHECK(A.shrink_radius == 0.5);

  VectorXd p = VectorXd::Constant(1, 0.5);
  int count = 0;
  for (const Chart& c : A.charts)
    if (chart_contains(c, p)) ++count;
  CHECK(count == oracle::lattice_half_cover);

  for (const Chart& c : A.charts) {
    CHECK(c.carrier_box.has_value());
    CHECK(c.codomain.contains(c.anchor, 1e-12));
  }
}

TEST_CASE("lattice step bound and input validation") {
  Box S = Box::cube(1, -2.0, 2.0);
  CHECK_NOTHROW(lattice_atlas(2.0, LatticeDomain{Box::cube(1, -4.0, 4.0), false}, S));
  CHECK_THROWS_AS(lattice_atlas(2.1, LatticeDomain{Box::cube(1, -4.0, 4.0), false}, S),
                  DeltaTooLarge);
  // m = 2: dist(S, edge) = 2, bound 2/sqrt(2)
  CHECK_THROWS_AS(lattice_atlas(1.5, LatticeDomain{Box::cube(2, -4.0, 4.0), false},
                                Box::cube(2, -2.0, 2.0)),
                  DeltaTooLarge);
  CHECK_NOTHROW(lattice_atlas(1.4, LatticeDomain{Box::cube(2, -4.0, 4.0), false},
                              Box::cube(2, -2.0, 2.0)));
  // halfspace domains must start at x1 = 0
  Box bad = Box::cube(1, -1.0, 8.0);
  CHECK_THROWS_AS(lattice_atlas(1.0, LatticeDomain{bad, true}, Box::cube(1, 0.0, 2.0)),
                  SpecError);
  // core region outside the domain
  CHECK_THROWS_AS(lattice_atlas(0.5, LatticeDomain{Box::cube(1, -4.0, 4.0), false},
                                Box::cube(1, -5.0, 2.0)),
                  SpecError);
}

TEST_CASE("lattice multiplicity is exactly 2^m for m = 1, 2, 3") {
  for (int m = 1; m <= 3; ++m) {
    Atlas A = lattice_atlas(1.0, whole_space(m), Box::cube(m, -1.5, 1.5));
    MultiplicityResult mr = multiplicity(A, Region::all());
    CHECK(mr.exact);
    CHECK(mr.value == (1 << m));
    CHECK(mr.witness.find("cell center") != std::string::npos);
  }
}

TEST_CASE("single-chart atlas has multiplicity 1") {
  Atlas A;
  A.m = 1;
  A.carrier_dim = 1;
  A.shrink_radius = 0.9;
  A.charts.push_back(affine_chart("only", 0.0, 1.0, 0));
  MultiplicityResult mr = multiplicity(A, Region::all());
  CHECK(mr.exact);
  CHECK(mr.value == 1);
}

TEST_CASE("gauge chart family has multiplicity 2") {
  auto R = characteristics::Characteristic::power(2.0, characteristics::JKind::ZeroOne);
  Atlas A = characteristics::r_atlas(R, 9);
  MultiplicityResult mr = multiplicity(A, Region::all());
  CHECK(mr.exact);
  CHECK(mr.value == 2);
}

TEST_CASE("shrink check on the unit lattice") {
  Atlas A = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 2.0));
  Region everything = Region::all();

  ShrinkResult ok = shrink_check(A, everything, 0.6);
  CHECK(ok.covered);
  CHECK(ok.witnesses.empty());

  ShrinkResult bad = shrink_check(A, everything, 0.4);
  CHECK_FALSE(bad.covered);
  REQUIRE(!bad.witnesses.empty());
  double p = parse_witness_p(bad.witnesses.front());
  double frac = std::abs(p - std::round(p));
  CHECK(frac > 0.35);
  CHECK(frac < 0.65);

  CHECK(shrink_check(A, everything, 0.95).covered);
}

TEST_CASE("lattice transitions are exact unit translations") {
  Atlas A = lattice_atlas(1.0, whole_space(2), Box::cube(2, -1.5, 1.5));
  std::vector<int> ids(A.charts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  TransitionTable t = transition_norms(A, ids, Region::all(), 4);
  REQUIRE(t.c.size() == 5);
  CHECK(t.c[0] <= 2.0);
  CHECK(t.c[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.c[2] <= 1e-10);
  CHECK(t.c[3] <= 1e-10);
  CHECK(t.c[4] <= 1e-10);
  CHECK(!t.witness.empty());
}

TEST_CASE("halfspace lattice: boundary charts on the face, multiplicity 4") {
  Atlas A = lattice_atlas(1.0, half_space(2), Box(VectorXd::Zero(2), VectorXd::Constant(2, 2.0)));
  bool saw_boundary = false;
  for (const Chart& c : A.charts) {
    if (c.kind == ChartKind::Boundary) {
      saw_boundary = true;
      CHECK(c.codomain.lo[0] == 0.0);
    }
  }
  CHECK(saw_boundary);
  MultiplicityResult mr = multiplicity(A, Region::all());
  CHECK(mr.exact);
  CHECK(mr.value == 4);

  CertOptions opt;
  opt.windows = {1, 2, 4};
  CertReport rep = certify_uniformly_regular(A, Region::all(), opt);
  CHECK(rep.pass);
}

TEST_CASE("refinement of the unit lattice: inclusion, diameter, multiplicity") {
  Atlas K = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 2.0));
  Atlas M = refine_atlas(0.25, K, Region::all());
  CHECK(M.charts.size() > K.charts.size());

  for (const Chart& c : M.charts) {
    REQUIRE(c.carrier_box.has_value());
    double diam = c.carrier_box->hi[0] - c.carrier_box->lo[0];
    CHECK(diam <= oracle::refined_diameter + 1e-12);
    bool inside_some_parent = false;
    for (const Chart& pc : K.charts)
      if (pc.carrier_box->lo[0] <= c.carrier_box->lo[0] + 1e-12 &&
          c.carrier_box->hi[0] <= pc.carrier_box->hi[0] + 1e-12)
        inside_some_parent = true;
    CHECK(inside_some_parent);
  }

  MultiplicityResult mr = multiplicity(M, Region::all());
  CHECK(mr.exact);
  CHECK(mr.value == oracle::refined_mult_m1);

  // step bound: delta must stay below (1-r)/sqrt(m) = 0.5
  CHECK_THROWS_AS(refine_atlas(0.5, K, Region::all()), DeltaTooLarge);
  CHECK_THROWS_AS(refine_atlas(0.6, K, Region::all()), DeltaTooLarge);
}

TEST_CASE("refined transition norms scale like delta^{k-1}") {
  Atlas K = curved_atlas();
  std::vector<int> pids = {0, 1};
  TransitionTable base = transition_norms(K, pids, Region::all(), 4);
  CHECK(base.c[1] > 0.1);

  double delta = 0.2;
  Atlas M = refine_atlas(delta, K, Region::all());
  std::vector<int> ids(M.charts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  TransitionTable fine = transition_norms(M, ids, Region::all(), 4);
  for (int k = 1; k <= 4; ++k) {
    double bound = std::pow(delta, k - 1) * base.c[k] * 1.01 + 1e-9;
    CHECK(fine.c[k] <= bound);
  }
}

TEST_CASE("subsampled refinement keeps the true population and still certifies") {
  Atlas K = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 2.0));
  Atlas M = refine_atlas(0.1, K, Region::all(), 3);
  REQUIRE(M.population.has_value());
  CHECK(*M.population > static_cast<long long>(M.charts.size()));
  CHECK(static_cast<bool>(M.cover_hook));

  CertOptions opt;
  opt.windows = {1, 2, 4};
  CertReport rep = certify_uniformly_regular(M, Region::all(), opt);
  CHECK(rep.pass);
  CHECK(rep.sampling_note.find("charts sampled") != std::string::npos);
}

TEST_CASE("certify: planar lattice passes with the expected constants") {
  Atlas A = lattice_atlas(1.0, whole_space(2), Box::cube(2, -1.5, 1.5));
  CertOptions opt;
  opt.windows = {16, 32, 64};
  CertReport rep = certify_uniformly_regular(A, Region::all(), opt);
  CHECK(rep.pass);
  REQUIRE(rep.conditions.size() == 4);
  CHECK(rep.conditions[0].condition == "chart-normalization");
  CHECK(rep.conditions[1].condition == "finite-multiplicity");
  CHECK(rep.conditions[2].condition == "shrinkability");
  CHECK(rep.conditions[3].condition == "transition-bounds");
  CHECK(rep.conditions[1].constants.front().at(0) == 4.0);
  CHECK(rep.conditions[2].constants.front().at(0) == 0.5);
  CHECK(rep.conditions[3].constants.front().at(1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.truncation_note.find("derivative order 4") != std::string::npos);

  CertReport again = certify_uniformly_regular(A, Region::all(), opt);
  CHECK(rep.to_json() == again.to_json());
}

TEST_CASE("certify: gauge chart family of a cusp passes on nested windows") {
  auto R = characteristics::Characteristic::power(2.0, characteristics::JKind::ZeroOne);
  Atlas A = characteristics::r_atlas(R, 17);
  CertOptions opt;
  opt.windows = {4, 8, 16};
  CertReport rep = certify_uniformly_regular(A, Region::all(), opt);
  CHECK(rep.pass);
  CHECK(rep.conditions[1].constants.front().at(0) == 2.0);
  CHECK(rep.conditions[3].constants.back().at(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("certify: growing seam magnification fails the transition clause") {
  Atlas A = magnifier_atlas(33);
  CertOptions opt;
  opt.windows = {8, 16, 32};
  CertReport rep = certify_uniformly_regular(A, Region::all(), opt);
  CHECK_FALSE(rep.pass);
  CHECK(rep.first_failure() == "transition-bounds");
  CHECK(rep.conditions[0].pass);
  CHECK(rep.conditions[1].pass);
  CHECK(rep.conditions[2].pass);
  CHECK(rep.conditions[3].growth_ratio >= 10.0);
  CHECK(!rep.conditions[3].witness.empty());
}

TEST_CASE("equivalence: unit lattice vs half-step lattice") {
  Box S = Box::cube(1, -2.0, 2.0);
  Atlas K = lattice_atlas(1.0, whole_space(1), S);
  Atlas Kt = lattice_atlas(0.5, whole_space(1), S);
  CertOptions opt;
  opt.windows = {1, 2, 4};
  CertReport rep = atlases_equivalent(K, Kt, Region::all(), opt);
  CHECK(rep.pass);
  REQUIRE(rep.conditions.size() == 2);
  CHECK(rep.conditions[0].condition == "overlap-cardinality");
  CHECK(rep.conditions[1].condition == "cross-transition-bounds");
  CHECK(rep.conditions[1].constants.front().at(1) ==
        doctest::Approx(oracle::lattice_equiv_c1).epsilon(1e-9));

  // symmetric: swapping the families gives the same constants
  CertReport swapped = atlases_equivalent(Kt, K, Region::all(), opt);
  CHECK(swapped.pass);
  CHECK(swapped.conditions[1].constants == rep.conditions[1].constants);
  CHECK(swapped.conditions[0].constants == rep.conditions[0].constants);
}

TEST_CASE("equivalence: a family vs itself reproduces its own constants") {
  Atlas K = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 2.0));
  CertOptions opt;
  opt.windows = {1, 2};
  CertReport self = atlases_equivalent(K, K, Region::all(), opt);
  CHECK(self.pass);
  CertReport cert = certify_uniformly_regular(K, Region::all(), opt);
  for (int k = 1; k <= 4; ++k)
    CHECK(self.conditions[1].constants.front().at(k) ==
          doctest::Approx(cert.conditions[3].constants.front().at(k)).epsilon(1e-12));
}

TEST_CASE("equivalence fails against exponentially shrinking charts") {
  Atlas K = lattice_atlas(1.0, whole_space(1), Box::cube(1, -2.0, 40.0));
  Atlas Kt = shrinking_atlas(36);
  CertOptions opt;
  opt.windows = {8, 16, 32};
  CertReport rep = atlases_equivalent(K, Kt, Region::all(), opt);
  CHECK_FALSE(rep.pass);
  CHECK(rep.first_failure() == "cross-transition-bounds");
  CHECK(rep.conditions[1].growth_ratio >= 10.0);

  CertReport again = atlases_equivalent(K, Kt, Region::all(), opt);
  CHECK(rep.to_json() == again.to_json());
}
