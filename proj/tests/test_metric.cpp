#include <cmath>
#include <random>

#include "doctest.h"
#include "oracle_values.hpp"
#include "singreg/atlas_ops.hpp"
#include "singreg/characteristics.hpp"
#include "singreg/metric.hpp"

using namespace singreg;
using namespace singreg::metric;
using namespace singreg::calculus;
using atlas::Chart;

namespace {

VectorXd pt1(double t) { return VectorXd::Constant(1, t); }

VectorXd pt2(double a, double b) {
  VectorXd p(2);
  p << a, b;
  return p;
}

// polar-plane metric diag(1, r^2) in coordinates (r, theta)
MetricField polar_metric() {
  return MetricField::diagonal({econst(1.0), emul(evar(0), evar(0))});
}

// line metric dt^2 / t^2
MetricField hyper_metric() { return MetricField::diagonal({epow(evar(0), -2.0)}); }

// smooth non-constant SPD field on the plane, diag(1 + sin^2 x, 2 + cos y)
MetricField wavy_metric() {
  return MetricField::diagonal(
      {eadd(econst(1.0), emul(esin(evar(0)), esin(evar(0)))),
       eadd(econst(2.0), ecos(evar(1)))});
}

Chart identity_chart(int m) {
  Chart c;
  c.id = "id";
  c.m = m;
  c.fwd = AffineMap::identity(m);
  c.inv = AffineMap::identity(m);
  c.codomain = Box::cube(m, -1.0, 1.0);
  c.anchor = VectorXd::Zero(m);
  return c;
}

// affine chart centered at `center` with the given halfwidth
Chart window_chart(double center, double halfwidth) {
  Chart c;
  c.id = "w";
  c.m = 1;
  c.fwd = AffineMap::scale_shift(VectorXd::Constant(1, center), 1.0 / halfwidth);
  c.inv = std::make_shared<AffineMap>(Eigen::MatrixXd::Constant(1, 1, halfwidth),
                                      VectorXd::Constant(1, center));
  c.codomain = Box::cube(1, -1.0, 1.0);
  c.anchor = VectorXd::Zero(1);
  return c;
}

// curved chart x -> log((x+2)/2) - log 2 on (-0.5, 1.5), as in the atlas suite
Chart curved_chart() {
  Chart c;
  c.id = "curved";
  c.m = 1;
  c.fwd = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{esub(elog(eadd(evar(0), econst(2.0))), econst(std::log(2.0)))}, 1);
  c.inv = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{esub(emul(econst(2.0), eexp(evar(0))), econst(2.0))}, 1);
  c.codomain = Box(VectorXd::Constant(1, std::log(0.75)), VectorXd::Constant(1, std::log(1.75)));
  c.anchor = VectorXd::Zero(1);
  return c;
}

}  // namespace

TEST_CASE("pushforward through the identity chart is the identity") {
  MetricField g = wavy_metric();
  MetricField h = pushforward_metric(identity_chart(2), g);
  for (double a : {-0.7, 0.0, 0.4}) {
    VectorXd x = pt2(a, 0.3 - a);
    CHECK((h.value(x) - g.value(x)).norm() <= 1e-12);
    auto dg = g.first_partials(x);
    auto dh = h.first_partials(x);
    for (int k = 0; k < 2; ++k) CHECK((dh[k] - dg[k]).norm() <= 1e-10);
  }
}

TEST_CASE("pushforward of the flat metric through a lattice chart is delta^2 g_m") {
  double delta = 0.5;
  atlas::LatticeDomain D{Box::cube(2, -1e18, 1e18), false};
  atlas::Atlas A = atlas::lattice_atlas(delta, D, Box::cube(2, -1.0, 1.0));
  MetricField h = pushforward_metric(A.charts.front(), MetricField::euclidean(2));
  for (double a : {-0.5, 0.0, 0.8}) {
    MatrixXd H = h.value(pt2(a, -a / 2));
    CHECK((H - delta * delta * MatrixXd::Identity(2, 2)).norm() <= 1e-12);
    auto dH = h.first_partials(pt2(a, -a / 2));
    CHECK(dH[0].norm() <= 1e-12);
    CHECK(dH[1].norm() <= 1e-12);
  }
}

TEST_CASE("pushforward of dt^2 through a gauge chart is the squared weight") {
  auto R = characteristics::Characteristic::power(2.0, characteristics::JKind::ZeroOne);
  atlas::Atlas A = characteristics::r_atlas(R, 5);
  characteristics::GaugeMap G = characteristics::gauge(R);
  for (const Chart& c : A.charts) {
    if (c.cofinal_index < 1) continue;
    MetricField h = pushforward_metric(c, MetricField::euclidean(1));
    int j = c.cofinal_index;
    for (double s : {-0.4, 0.0, 0.6}) {
      double rho = G.rho_jets(s + j, 0).value();
      CHECK(h.value(pt1(s))(0, 0) == doctest::Approx(rho * rho).epsilon(1e-9));
    }
  }
}

TEST_CASE("pushforward is functorial across a chart change") {
  // push an ambient field into the flat chart, then across the transition,
  // and compare with pushing directly into the curved chart
  MetricField G = MetricField::diagonal({eadd(econst(1.0), emul(evar(0), evar(0)))});
  Chart flat = window_chart(0.0, 1.0);
  Chart curved = curved_chart();

  MetricField in_flat = pushforward_metric(flat, G);
  Chart trans;
  trans.id = "transition";
  trans.m = 1;
  trans.fwd = compose(curved.fwd, flat.inv);
  trans.inv = compose(flat.fwd, curved.inv);
  trans.codomain = curved.codomain;
  trans.anchor = VectorXd::Zero(1);
  MetricField via = pushforward_metric(trans, in_flat);
  MetricField direct = pushforward_metric(curved, G);

  for (double y : {-0.2, 0.0, 0.3}) {
    VectorXd x = pt1(y);
    CHECK(std::abs(via.value(x)(0, 0) - direct.value(x)(0, 0)) <= 1e-8);
    CHECK(std::abs(via.first_partials(x)[0](0, 0) - direct.first_partials(x)[0](0, 0)) <=
          1e-8);
  }
}

TEST_CASE("equivalence constant of the crossed diagonal pencil") {
  MetricField A = MetricField::constant((MatrixXd(2, 2) << 1, 0, 0, 2).finished());
  MetricField B = MetricField::constant((MatrixXd(2, 2) << 2, 0, 0, 1).finished());
  auto ec = equivalence_constant(A, B, {pt2(0.0, 0.0)});
  CHECK(ec.c == doctest::Approx(oracle::pencil_equiv).epsilon(1e-12));

  auto self = equivalence_constant(A, A, {pt2(0.0, 0.0)});
  CHECK(self.c == doctest::Approx(1.0).epsilon(1e-12));

  MetricField A4 = MetricField::constant(4.0 * (MatrixXd(2, 2) << 1, 0, 0, 2).finished());
  auto sc = equivalence_constant(A, A4, {pt2(0.0, 0.0)});
  CHECK(sc.c == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("equivalence constant reports the attaining sample") {
  // fields agree at x=0 and drift apart along the axis; the witness must be
  // the sample of largest drift
  MetricField A = MetricField::euclidean(1);
  MetricField B = MetricField::diagonal({eexp(evar(0))});
  std::vector<VectorXd> samples{pt1(0.0), pt1(0.5), pt1(1.0), pt1(-0.25)};
  auto ec = equivalence_constant(A, B, samples);
  CHECK(ec.c == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(ec.witness(0) == doctest::Approx(1.0));
}

TEST_CASE("equivalence constant rejects a degenerate sample") {
  MetricField A = MetricField::euclidean(1);
  MetricField B = MetricField::diagonal({emul(evar(0), evar(0))});
  CHECK_THROWS_AS(equivalence_constant(A, B, {pt1(0.0)}), SingularMetric);
}

TEST_CASE("equivalence constants are submultiplicative on random SPD triples") {
  std::mt19937 rng(20260816u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_spd = [&]() {
    MatrixXd M(3, 3);
    for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = u(rng);
    MatrixXd S = M * M.transpose() + 0.3 * MatrixXd::Identity(3, 3);
    return MetricField::constant(S);
  };
  std::vector<VectorXd> at{VectorXd::Zero(3)};
  for (int trial = 0; trial < 20; ++trial) {
    MetricField A = random_spd(), B = random_spd(), C = random_spd();
    double ab = equivalence_constant(A, B, at).c;
    double bc = equivalence_constant(B, C, at).c;
    double ac = equivalence_constant(A, C, at).c;
    CHECK(ab * bc >= ac * (1.0 - 1e-10));
  }
}

TEST_CASE("conformal rescale divides by the squared factor") {
  MetricField g = MetricField::euclidean(1);
  MetricField resc = conformal_rescale(g, std::make_shared<ExprMap>(
                                              std::vector<ExprPtr>{evar(0)}, 1));
  // dt^2 / t^2 at t = 1/2
  CHECK(resc.value(pt1(0.5))(0, 0) == doctest::Approx(4.0).epsilon(1e-12));

  // unit factor leaves the field unchanged
  MetricField same = conformal_rescale(wavy_metric(), std::make_shared<ExprMap>(
                                                          std::vector<ExprPtr>{econst(1.0)}, 2));
  VectorXd x = pt2(0.3, -0.2);
  CHECK((same.value(x) - wavy_metric().value(x)).norm() <= 1e-12);

  // nonpositive factor is a domain violation at evaluation
  CHECK_THROWS_AS(resc.value(pt1(0.0)), DomainError);
  CHECK_THROWS_AS(resc.value(pt1(-1.0)), DomainError);
}

TEST_CASE("conformal rescale stays metrically bounded by the factor range") {
  MetricField g = wavy_metric();
  MetricField resc = conformal_rescale(
      g, std::make_shared<ExprMap>(std::vector<ExprPtr>{evar(0)}, 2));
  // factor in [1/2, 1]: two-sided constant is 1/rho^2 at the left endpoint
  std::vector<VectorXd> samples;
  for (int i = 0; i <= 8; ++i) samples.push_back(pt2(0.5 + 0.0625 * i, 0.1));
  auto ec = equivalence_constant(resc, g, samples);
  CHECK(ec.c <= oracle::rescale_bound + 1e-12);
  CHECK(ec.c == doctest::Approx(oracle::rescale_bound).epsilon(1e-12));
  CHECK(ec.witness(0) == doctest::Approx(0.5));
}

TEST_CASE("christoffel symbols vanish for the flat metric") {
  auto Gamma = christoffel(MetricField::euclidean(3), VectorXd::Zero(3));
  for (const auto& Gk : Gamma) CHECK(Gk.norm() == 0.0);
}

TEST_CASE("christoffel symbols of the polar-plane metric") {
  auto Gamma = christoffel(polar_metric(), pt2(2.0, 0.7));
  CHECK(Gamma[0](1, 1) == doctest::Approx(oracle::polar_gamma_r_tt).epsilon(1e-12));
  CHECK(Gamma[1](0, 1) == doctest::Approx(oracle::polar_gamma_t_rt).epsilon(1e-12));
  CHECK(Gamma[1](1, 0) == doctest::Approx(oracle::polar_gamma_t_rt).epsilon(1e-12));
  CHECK(Gamma[0](0, 0) == doctest::Approx(0.0));
  CHECK(Gamma[0](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("christoffel symbol of the rescaled line metric") {
  auto Gamma = christoffel(hyper_metric(), pt1(0.5));
  CHECK(Gamma[0](0, 0) == doctest::Approx(oracle::hyper_gamma).epsilon(1e-12));
}

TEST_CASE("christoffel output is metric compatible") {
  // d_k g_ij = Gamma^l_{ki} g_lj + Gamma^l_{kj} g_il pointwise
  MetricField g = wavy_metric();
  for (double a : {0.2, -0.6, 1.1}) {
    VectorXd x = pt2(a, 0.4 * a);
    auto Gamma = christoffel(g, x);
    MatrixXd G = g.value(x);
    auto dG = g.first_partials(x);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double lhs = dG[k](i, j);
          double rhs = 0.0;
          for (int l = 0; l < 2; ++l)
            rhs += Gamma[l](k, i) * G(l, j) + Gamma[l](k, j) * G(i, l);
          CHECK(std::abs(lhs - rhs) <= 1e-8);
        }
  }
}

TEST_CASE("christoffel rejects a singular sample") {
  MetricField bad = MetricField::diagonal({econst(1.0), emul(evar(0), evar(0))});
  CHECK_THROWS_AS(christoffel(bad, pt2(0.0, 0.0)), SingularMetric);
}

TEST_CASE("covariant norms of scalar fields") {
  auto u_const = std::make_shared<ExprMap>(std::vector<ExprPtr>{econst(3.0)}, 1);
  CHECK(covariant_norm(u_const, MetricField::euclidean(1), 0, pt1(0.2)) == 3.0);
  CHECK(covariant_norm(u_const, MetricField::euclidean(1), 1, pt1(0.2)) == 0.0);

  // u = t against dt^2/t^2: gradient norm is t itself
  auto u_t = std::make_shared<ExprMap>(std::vector<ExprPtr>{evar(0)}, 1);
  CHECK(covariant_norm(u_t, hyper_metric(), 1, pt1(0.5)) ==
        doctest::Approx(oracle::hyper_grad_norm).epsilon(1e-12));

  // u = x^2/2 flat: unit Hessian everywhere
  auto u_sq = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{emul(econst(0.5), emul(evar(0), evar(0)))}, 1);
  for (double t : {-1.0, 0.0, 2.5})
    CHECK(covariant_norm(u_sq, MetricField::euclidean(1), 2, pt1(t)) ==
          doctest::Approx(1.0).epsilon(1e-12));

  // u = (x^2+y^2)/2 flat: Hessian identity, Frobenius norm sqrt(2)
  auto u_rad = std::make_shared<ExprMap>(
      std::vector<ExprPtr>{emul(econst(0.5), eadd(emul(evar(0), evar(0)),
                                                  emul(evar(1), evar(1))))},
      2);
  CHECK(covariant_norm(u_rad, MetricField::euclidean(2), 2, pt2(0.3, -0.8)) ==
        doctest::Approx(oracle::flat_hess_norm).epsilon(1e-12));

  CHECK_THROWS_AS(covariant_norm(u_t, MetricField::euclidean(1), 3, pt1(0.0)), SpecError);
}

TEST_CASE("gradient norm is invariant under chart change") {
  // carrier field u(p) = sin p with carrier metric (1 + p^2) dp^2, seen
  // through two overlapping charts
  MetricField G = MetricField::diagonal({eadd(econst(1.0), emul(evar(0), evar(0)))});
  ExprPtr u_carrier = esin(evar(0));
  Chart flat = window_chart(0.0, 1.0);
  Chart curved = curved_chart();

  for (double p : {-0.3, 0.1, 0.45}) {
    double vals[2];
    int slot = 0;
    for (const Chart* c : {&flat, &curved}) {
      MetricField h = pushforward_metric(*c, G);
      auto u_chart = compose(std::make_shared<ExprMap>(std::vector<ExprPtr>{u_carrier}, 1),
                             c->inv);
      VectorXd x = c->fwd->value(pt1(p));
      vals[slot++] = covariant_norm(u_chart, h, 1, x);
    }
    CHECK(std::abs(vals[0] - vals[1]) <= 1e-6);
  }
}
