#include "singreg/metric.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace singreg::metric {

using calculus::Jet;
using calculus::MapPtr;

namespace {

std::string fmt_point(const VectorXd& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

MatrixXd MetricField::value(const VectorXd& x) const {
  VectorXd v = entries->value(x);
  MatrixXd G(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G(i, j) = v[i * m + j];
  return G;
}

std::vector<MatrixXd> MetricField::first_partials(const VectorXd& x) const {
  auto js = entries->jets(x, 1);
  std::vector<MatrixXd> d(m, MatrixXd(m, m));
  std::vector<int> alpha(m, 0);
  for (int k = 0; k < m; ++k) {
    alpha[k] = 1;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) d[k](i, j) = js[i * m + j].deriv(alpha);
    alpha[k] = 0;
  }
  return d;
}

MetricField MetricField::euclidean(int m) { return constant(MatrixXd::Identity(m, m)); }

MetricField MetricField::constant(const MatrixXd& G) {
  if (G.rows() != G.cols()) throw SpecError("constant metric must be square");
  int m = static_cast<int>(G.rows());
  VectorXd v(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) v[i * m + j] = G(i, j);
  MetricField g;
  g.m = m;
  g.entries = std::make_shared<calculus::ConstMap>(std::move(v), m);
  return g;
}

MetricField MetricField::diagonal(std::vector<calculus::ExprPtr> diag) {
  int m = static_cast<int>(diag.size());
  std::vector<calculus::ExprPtr> comps(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      comps[i * m + j] = (i == j) ? diag[i] : calculus::econst(0.0);
  MetricField g;
  g.m = m;
  g.entries = std::make_shared<calculus::ExprMap>(std::move(comps), m);
  return g;
}

MetricField MetricField::from_map(calculus::MapPtr entries) {
  if (!entries) throw SpecError("metric field needs an entry map");
  int m = entries->dom();
  if (entries->ran() != m * m)
    throw SpecError("metric entry map must produce m*m components");
  MetricField g;
  g.m = m;
  g.entries = std::move(entries);
  return g;
}

MatrixXd checked_spd(const MatrixXd& G, const std::string& context) {
  MatrixXd S = 0.5 * (G + G.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  double mineig = es.eigenvalues().minCoeff();
  if (!(mineig > 0.0) || mineig < 1e-12 * S.trace())
    throw SingularMetric("matrix is not positive definite: " + context);
  return S;
}

MetricField pushforward_metric(const atlas::Chart& chart, const MetricField& g) {
  if (!chart.inv) throw SpecError("pushforward needs the chart parametrization");
  const int m = chart.m;
  const int n = g.m;
  if (chart.inv->dom() != m || chart.inv->ran() != n)
    throw SpecError("pushforward: chart and field dimensions disagree");
  MapPtr phi = chart.inv;
  MapPtr gent = g.entries;

  // entries of J^T (g o phi) J as jets; J needs phi one order deeper
  auto fn = [m, n, phi, gent](const VectorXd& x, int k) {
    auto pj = phi->jets(x, k + 1);
    VectorXd px(n);
    for (int i = 0; i < n; ++i) px[i] = pj[i].value();
    std::vector<Jet> inner;
    inner.reserve(n);
    for (int i = 0; i < n; ++i) inner.push_back(pj[i].truncated(k));
    auto gy = gent->jets(px, k);
    std::vector<Jet> gc;
    gc.reserve(n * n);
    for (const auto& e : gy) gc.push_back(calculus::substitute(e, inner));
    std::vector<std::vector<Jet>> dphi(n);
    for (int i = 0; i < n; ++i) {
      dphi[i].reserve(m);
      for (int a = 0; a < m; ++a) dphi[i].push_back(pj[i].derivative(a));
    }
    std::vector<Jet> out(m * m, Jet(m, k));
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        Jet s(m, k);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) s = s + dphi[i][a] * dphi[j][b] * gc[i * n + j];
        out[a * m + b] = s;
        out[b * m + a] = s;
      }
    return out;
  };

  MetricField r;
  r.m = m;
  r.entries = std::make_shared<calculus::JetFunctionMap>(m, m * m, fn);
  return r;
}

EquivalenceConstant equivalence_constant(const MetricField& A, const MetricField& B,
                                         const std::vector<VectorXd>& samples) {
  if (A.m != B.m) throw SpecError("equivalence constant: field dimensions disagree");
  if (samples.empty()) throw SpecError("equivalence constant needs at least one sample");
  EquivalenceConstant out;
  out.c = 0.0;
  for (const VectorXd& x : samples) {
    MatrixXd GA = checked_spd(A.value(x), "left field at " + fmt_point(x));
    MatrixXd GB = checked_spd(B.value(x), "right field at " + fmt_point(x));
    // pencil GB v = lambda GA v: spectrum of GA^{-1} GB; the reverse spectrum
    // is its reciprocal
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(GB, GA);
    double lmax = es.eigenvalues().maxCoeff();
    double lmin = es.eigenvalues().minCoeff();
    double cx = std::max(lmax, 1.0 / lmin);
    if (cx > out.c) {
      out.c = cx;
      out.witness = x;
    }
  }
  out.c = std::max(out.c, 1.0);
  return out;
}

MetricField conformal_rescale(const MetricField& g, calculus::MapPtr rho) {
  if (!rho || rho->dom() != g.m || rho->ran() != 1)
    throw SpecError("conformal factor must be a scalar field on the chart");
  const int m = g.m;
  MapPtr gent = g.entries;
  auto fn = [m, gent, rho](const VectorXd& x, int k) {
    Jet r = rho->jets(x, k)[0];
    if (!(r.value() > 0.0))
      throw DomainError("conformal factor is not positive at " + fmt_point(x));
    Jet w = r * r;
    auto ge = gent->jets(x, k);
    std::vector<Jet> out;
    out.reserve(m * m);
    for (const auto& e : ge) out.push_back(e / w);
    return out;
  };
  MetricField r;
  r.m = m;
  r.entries = std::make_shared<calculus::JetFunctionMap>(m, m * m, fn);
  return r;
}

std::vector<MatrixXd> christoffel(const MetricField& g, const VectorXd& x) {
  const int m = g.m;
  MatrixXd G = checked_spd(g.value(x), "metric at " + fmt_point(x));
  auto dG = g.first_partials(x);
  MatrixXd Ginv = Eigen::LLT<MatrixXd>(G).solve(MatrixXd::Identity(m, m));
  std::vector<MatrixXd> Gamma(m, MatrixXd::Zero(m, m));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int l = 0; l < m; ++l)
          s += Ginv(k, l) * (dG[i](j, l) + dG[j](i, l) - dG[l](i, j));
        Gamma[k](i, j) = 0.5 * s;
      }
  return Gamma;
}

MetricField product_metric(const MetricField& a, const MetricField& b) {
  const int ma = a.m, mb = b.m, m = ma + mb;
  // joint map emits both entry blocks with jets already in the joint variables
  MapPtr joint = calculus::product({a.entries, b.entries});
  auto fn = [ma, mb, m, joint](const VectorXd& x, int k) {
    auto je = joint->jets(x, k);
    std::vector<Jet> out(m * m, Jet::constant(0.0, m, k));
    for (int i = 0; i < ma; ++i)
      for (int j2 = 0; j2 < ma; ++j2) out[i * m + j2] = je[i * ma + j2];
    for (int i = 0; i < mb; ++i)
      for (int j2 = 0; j2 < mb; ++j2)
        out[(ma + i) * m + (ma + j2)] = je[ma * ma + i * mb + j2];
    return out;
  };
  MetricField r;
  r.m = m;
  r.entries = std::make_shared<calculus::JetFunctionMap>(m, m * m, fn);
  return r;
}

double covariant_norm(calculus::MapPtr u, const MetricField& g, int j, const VectorXd& x) {
  if (!u || u->dom() != g.m || u->ran() != 1)
    throw SpecError("covariant norm expects a scalar field on the chart");
  if (j < 0 || j > 2)
    throw SpecError("covariant derivative order must be 0, 1, or 2");
  if (j == 0) return std::abs(u->value(x)[0]);

  const int m = g.m;
  Jet uj = u->jets(x, j)[0];
  VectorXd du(m);
  std::vector<int> alpha(m, 0);
  for (int i = 0; i < m; ++i) {
    alpha[i] = 1;
    du[i] = uj.deriv(alpha);
    alpha[i] = 0;
  }
  MatrixXd G = checked_spd(g.value(x), "metric at " + fmt_point(x));
  Eigen::LLT<MatrixXd> llt(G);
  if (j == 1) return std::sqrt(std::max(0.0, du.dot(llt.solve(du))));

  auto Gamma = christoffel(g, x);
  MatrixXd H(m, m);
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < m; ++l) {
      alpha[i] += 1;
      alpha[l] += 1;
      double h = uj.deriv(alpha);
      alpha[i] -= 1;
      alpha[l] -= 1;
      for (int k = 0; k < m; ++k) h -= Gamma[k](i, l) * du[k];
      H(i, l) = h;
    }
  MatrixXd Ginv = llt.solve(MatrixXd::Identity(m, m));
  double n2 = (Ginv * H * Ginv * H).trace();
  return std::sqrt(std::max(0.0, n2));
}

}  // namespace singreg::metric
