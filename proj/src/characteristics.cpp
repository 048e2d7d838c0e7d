#include "singreg/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "singreg/report.hpp"

namespace singreg::characteristics {

using calculus::ExprPtr;
using calculus::Jet;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void Characteristic::normalize_check() const {
  double r1 = value(1.0);
  if (std::abs(r1 - 1.0) > 1e-12)
    throw SpecError("characteristic must satisfy R(1) = 1, got R(1) = " + fmt(r1) +
                    " for " + desc_ + "; rescale the profile");
}

Characteristic Characteristic::power(double alpha, JKind j) {
  Characteristic c;
  c.family_ = Family::Power;
  c.jkind_ = j;
  c.alpha_ = alpha;
  c.expr_ = calculus::epow(calculus::evar(0), alpha);
  // int dt / t^alpha: on (0,1] infinite iff alpha >= 1; on [1,inf) iff alpha <= 1
  c.divergence_ = (j == JKind::ZeroOne) ? (alpha >= 1.0) : (alpha <= 1.0);
  c.desc_ = "power(alpha=" + fmt(alpha) + ")";
  c.normalize_check();
  return c;
}

Characteristic Characteristic::exponential(double beta, double gamma, JKind j) {
  Characteristic c;
  c.family_ = Family::Exponential;
  c.jkind_ = j;
  c.beta_ = beta;
  c.gamma_ = gamma;
  using namespace calculus;
  c.expr_ = eexp(emul(econst(beta), esub(econst(1.0), epow(evar(0), gamma))));
  // 1/R = exp(beta (t^gamma - 1)): super-polynomial blowup at the endpoint
  // decides divergence
  if (j == JKind::ZeroOne)
    c.divergence_ = (gamma < 0.0 && beta > 0.0);
  else
    c.divergence_ = (gamma <= 0.0) || (beta >= 0.0);
  c.desc_ = "exp(beta=" + fmt(beta) + ",gamma=" + fmt(gamma) + ")";
  c.normalize_check();
  return c;
}

Characteristic Characteristic::arctan_profile(double alpha, double beta, JKind j) {
  Characteristic c;
  c.family_ = Family::Arctan;
  c.jkind_ = j;
  c.alpha_ = alpha;
  c.beta_ = beta;
  using namespace calculus;
  c.expr_ = eadd(econst(1.0),
                 emul(econst(alpha), eatan(emul(econst(beta), esub(evar(0), econst(1.0))))));
  // on [1,inf): R decays at worst like 1/t (limit zero case) or tends to a
  // positive constant; either way int dt/R is infinite. on (0,1] the interval
  // is finite and 1/R stays bounded.
  c.divergence_ = (j == JKind::OneInf);
  c.desc_ = "arctan(alpha=" + fmt(alpha) + ",beta=" + fmt(beta) + ")";
  c.normalize_check();
  return c;
}

Characteristic Characteristic::expression(const std::string& body, JKind j,
                                          std::optional<bool> divergence) {
  Characteristic c;
  c.family_ = Family::Expression;
  c.jkind_ = j;
  c.expr_ = calculus::parse_expr(body, {"t"});
  c.divergence_ = divergence;
  c.desc_ = "expr(" + body + ")";
  c.normalize_check();
  return c;
}

double Characteristic::param(const std::string& name) const {
  if (name == "alpha") return alpha_;
  if (name == "beta") return beta_;
  if (name == "gamma") return gamma_;
  throw SpecError("unknown characteristic parameter '" + name + "'");
}

double Characteristic::value(double t) const {
  VectorXd x(1);
  x << t;
  return expr_->value(x);
}

Jet Characteristic::jets(double t, int k) const {
  VectorXd x(1);
  x << t;
  return expr_->jets(calculus::seed_jets(x, k));
}

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Cusp: return "cusp";
    case Kind::Funnel: return "funnel";
    default: return "neither";
  }
}

namespace {

// log-spaced t grid over [a, b]
std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> g(n);
  double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) g[i] = std::exp(la + (lb - la) * i / (n - 1));
  return g;
}

}  // namespace

ClassifyReport classify(const Characteristic& R, int kmax, double tol) {
  ClassifyReport rep;
  rep.kmax = kmax;
  rep.note = "derivative bounds certified up to order kmax=" + std::to_string(kmax) +
             " only; higher orders unchecked";
  bool zero_one = R.window() == JKind::ZeroOne;
  rep.windows = {16, 32, 64};

  // endpoint limit along a geometric approach; underflow to 0 here is a
  // legitimate limit signal, positivity is checked on the window grids
  double limit = 0.0;
  bool positive_on_grid = true;
  for (int i = 1; i <= 40; ++i) {
    double t = zero_one ? std::ldexp(1.0, -i) : std::ldexp(1.0, i);
    limit = R.value(t);
    if (limit < 0.0) positive_on_grid = false;
  }
  rep.endpoint_limit = limit;

  // derivative sups over nested cofinal windows
  for (int w : rep.windows) {
    double a = zero_one ? 1.0 / w : 1.0;
    double b = zero_one ? 1.0 : static_cast<double>(w);
    std::vector<double> sup(kmax + 1, 0.0);
    for (double t : log_grid(a, b, 257)) {
      Jet j = R.jets(t, kmax);
      if (j.value() <= 0.0) positive_on_grid = false;
      for (int d = 0; d <= kmax; ++d)
        sup[d] = std::max(sup[d], std::abs(j.max_abs_deriv(d)));
    }
    rep.deriv_sup.push_back(sup);
  }

  // divergence of int dt/R: symbolic per family, heuristic for raw expressions
  if (R.declared_divergence().has_value()) {
    rep.divergent = *R.declared_divergence();
  } else {
    rep.divergence_heuristic = true;
    double total = 0.0;
    bool decided_convergent = false;
    for (int i = 0; i < 48 && total <= 1e4; ++i) {
      double lo = zero_one ? std::ldexp(1.0, -i - 1) : std::ldexp(1.0, i);
      double hi = zero_one ? std::ldexp(1.0, -i) : std::ldexp(1.0, i + 1);
      double inc = calculus::quad([&](double t) { return 1.0 / R.value(t); }, lo, hi, 1e-9);
      total += inc;
      if (i > 4 && inc < 1e-12 * std::max(total, 1.0)) {
        decided_convergent = true;
        break;
      }
    }
    rep.divergent = !decided_convergent && total > 1e4;
    rep.note += "; divergence decided heuristically (threshold 1e4), flag is advisory";
  }

  // clause checks in spec order
  auto deriv_clause = [&]() -> int {
    // first violated derivative order in 1..kmax, else 0
    for (int d = 1; d <= kmax; ++d) {
      std::vector<std::vector<double>> col;
      for (const auto& row : rep.deriv_sup) col.push_back({row[d]});
      if (!plateau_ok(col, tol)) return d;
    }
    return 0;
  };

  if (!positive_on_grid) {
    rep.kind = Kind::Neither;
    rep.violated = "positivity";
    return rep;
  }

  bool limit_zero = std::abs(limit) <= 1e-6;
  if (limit_zero) {
    // cusp candidate (either window kind)
    if (!rep.divergent) {
      rep.kind = Kind::Neither;
      rep.violated = "integral-divergence";
      return rep;
    }
    int bad = deriv_clause();
    if (bad != 0) {
      rep.kind = Kind::Neither;
      rep.violated = "derivative-bound k=" + std::to_string(bad);
      return rep;
    }
    rep.kind = Kind::Cusp;
    return rep;
  }

  if (!zero_one) {
    // funnel candidate: positive (possibly infinite) limit
    int bad = deriv_clause();
    if (bad != 0) {
      rep.kind = Kind::Neither;
      rep.violated = "derivative-bound k=" + std::to_string(bad);
      return rep;
    }
    rep.kind = Kind::Funnel;
    return rep;
  }

  rep.kind = Kind::Neither;
  rep.violated = "endpoint-limit";
  return rep;
}

struct GaugeMap::Cache {
  std::mutex mu;
  std::vector<double> tj;  // tj[j] = t_j, tj[0] = 1
};

GaugeMap::GaugeMap(Characteristic R, Kind kind, double tol)
    : R_(std::move(R)), kind_(kind), tol_(tol), cache_(std::make_shared<Cache>()) {
  if (kind_ == Kind::Neither)
    throw SpecError("gauge requires a cusp or funnel characteristic, got neither");
  sign_ = (kind_ == Kind::Cusp && R_.window() == JKind::ZeroOne) ? -1.0 : 1.0;
  cache_->tj.push_back(1.0);
}

GaugeMap gauge(const Characteristic& R, double tol) {
  ClassifyReport rep = classify(R);
  if (rep.kind == Kind::Neither)
    throw SpecError("gauge requires a cusp or funnel characteristic; classification says "
                    "neither (violated: " + rep.violated + ")");
  return GaugeMap(R, rep.kind, tol);
}

double GaugeMap::integrand(double t) const {
  if (kind_ == Kind::Cusp) {
    double r = R_.value(t);
    if (r <= 0.0) throw DomainError("characteristic must stay positive");
    return 1.0 / r;
  }
  double rdot = R_.jets(t, 1).deriv({1});
  return std::sqrt(1.0 + rdot * rdot);
}

double GaugeMap::smax() const { return 1e9; }

double GaugeMap::t_of(int j) const {
  if (j < 0) throw IndexError("t_j index must be >= 0");
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto& tj = cache_->tj;
  bool shrinking = (R_.window() == JKind::ZeroOne);
  while (static_cast<int>(tj.size()) <= j) {
    double prev = tj.back();
    auto seg = [&](double x) {
      // gauge length between x and prev, positive in the direction of growth
      return shrinking ? calculus::quad([&](double t) { return integrand(t); }, x, prev, tol_)
                       : calculus::quad([&](double t) { return integrand(t); }, prev, x, tol_);
    };
    double bracket = prev;
    for (int it = 0; it < 4096; ++it) {
      bracket = shrinking ? bracket * 0.5 : bracket + std::max(1.0, std::abs(bracket));
      if (seg(bracket) >= 1.0) break;
    }
    double lo = shrinking ? bracket : prev;
    double hi = shrinking ? prev : bracket;
    double next = calculus::invert_monotone(seg, 1.0, lo, hi, 1e-15);
    tj.push_back(next);
  }
  return tj[j];
}

double GaugeMap::sigma(double t) const {
  if (t <= 0.0) throw DomainError("gauge coordinate requires t > 0");
  bool shrinking = (R_.window() == JKind::ZeroOne);
  if (shrinking && t > 1.0 + 1e-12) throw DomainError("t outside (0,1]");
  if (!shrinking && t < 1.0 - 1e-12) throw DomainError("t outside [1,inf)");
  // nearest memoized anchor at or before t in gauge order
  int j = 0;
  while (true) {
    double tj = t_of(j);
    double tnext = t_of(j + 1);
    bool within = shrinking ? (t >= tnext) : (t <= tnext);
    if (within) {
      double inc = shrinking
                       ? calculus::quad([&](double q) { return integrand(q); }, t, tj, tol_)
                       : calculus::quad([&](double q) { return integrand(q); }, tj, t, tol_);
      return j + inc;
    }
    ++j;
    if (j > 100000) throw NoConvergence("sigma: anchor search exhausted");
  }
}

double GaugeMap::tau(double s) const {
  if (s < -1e-12) throw DomainError("gauge parameter must be >= 0");
  s = std::max(s, 0.0);
  int j = static_cast<int>(std::floor(s));
  double lo_t = t_of(j + 1), hi_t = t_of(j);
  bool shrinking = (R_.window() == JKind::ZeroOne);
  if (!shrinking) std::swap(lo_t, hi_t);
  double frac = s - j;
  if (frac <= 0.0) return t_of(j);
  auto seg = [&](double x) {
    return shrinking
               ? calculus::quad([&](double q) { return integrand(q); }, x, t_of(j), tol_)
               : calculus::quad([&](double q) { return integrand(q); }, t_of(j), x, tol_);
  };
  return calculus::invert_monotone(seg, frac, lo_t, hi_t, 1e-15);
}

Jet GaugeMap::speed_jets(const Jet& tau_jet) const {
  int k = tau_jet.order();
  if (kind_ == Kind::Cusp) {
    Jet r = calculus::substitute(R_.jets(tau_jet.value(), k), {tau_jet});
    return sign_ * r;
  }
  // funnel: dtau/ds = (1 + Rdot(tau)^2)^{-1/2}
  Jet rfull = R_.jets(tau_jet.value(), k + 1);
  Jet rdot = rfull.derivative(0);
  Jet rd = calculus::substitute(rdot, {tau_jet});
  return calculus::jrecip(calculus::jsqrt(1.0 + rd * rd));
}

Jet GaugeMap::tau_jets(double s, int k) const {
  // Taylor coefficients of tau at s from the autonomous recurrence
  // c_{i+1} = [speed(tau)]_i / (i+1)
  std::vector<double> c(k + 1, 0.0);
  c[0] = tau(s);
  for (int i = 0; i < k; ++i) {
    Jet partial(1, i);
    for (int e = 0; e <= i; ++e) partial.coeff(e) = c[e];
    Jet g = speed_jets(partial);
    c[i + 1] = g.coeff(i) / (i + 1);
  }
  Jet out(1, k);
  for (int e = 0; e <= k; ++e) out.coeff(e) = c[e];
  return out;
}

Jet GaugeMap::rho_jets(double s, int k) const {
  Jet t = tau_jets(s, k);
  return calculus::substitute(R_.jets(t.value(), k), {t});
}

Jet GaugeMap::sigma_jets(double t, int k) const {
  Jet out(1, k);
  out.coeff(0) = sigma(t);
  if (k == 0) return out;
  Jet integrand_jet = [&] {
    if (kind_ == Kind::Cusp) return sign_ * calculus::jrecip(R_.jets(t, k - 1));
    Jet rfull = R_.jets(t, k);
    Jet rdot = rfull.derivative(0);
    return calculus::jsqrt(1.0 + rdot * rdot);
  }();
  for (int i = 0; i < k; ++i) out.coeff(i + 1) = integrand_jet.coeff(i) / (i + 1);
  return out;
}

atlas::Atlas r_atlas(const Characteristic& R, int j_max, double tol) {
  if (j_max < 1) throw IndexError("r_atlas needs j_max >= 1");
  GaugeMap g = gauge(R, tol);
  bool shrinking = (R.window() == JKind::ZeroOne);

  atlas::Atlas A;
  A.m = 1;
  A.carrier_dim = 1;
  A.shrink_radius = 0.5;
  A.exact_multiplicity = 2;

  for (int j = 0; j <= j_max; ++j) {
    atlas::Chart c;
    c.id = "r[j=" + std::to_string(j) + "]";
    c.m = 1;
    c.kind = (j == 0) ? atlas::ChartKind::Boundary : atlas::ChartKind::Interior;
    double off = j;
    c.fwd = std::make_shared<calculus::JetFunctionMap>(
        1, 1, [g, off](const VectorXd& x, int k) {
          std::vector<Jet> out{g.sigma_jets(x[0], k) - off};
          return out;
        });
    c.inv = std::make_shared<calculus::JetFunctionMap>(
        1, 1, [g, off](const VectorXd& x, int k) {
          std::vector<Jet> out{g.tau_jets(x[0] + off, k)};
          return out;
        });
    if (j == 0) {
      c.codomain = Box(VectorXd::Zero(1), VectorXd::Ones(1));
    } else {
      c.codomain = Box::cube(1, -1.0, 1.0);
    }
    double inner = g.t_of(j + 1), outer = (j == 0) ? 1.0 : g.t_of(j - 1);
    c.carrier_box = shrinking ? Box(VectorXd::Constant(1, inner), VectorXd::Constant(1, outer))
                              : Box(VectorXd::Constant(1, outer), VectorXd::Constant(1, inner));
    c.cofinal_index = j;
    c.anchor = VectorXd::Zero(1);
    if (j > 0) c.neighbors.push_back(j - 1);
    if (j < j_max) c.neighbors.push_back(j + 1);
    A.charts.push_back(std::move(c));
  }
  return A;
}

LogDerivativeReport log_derivative_bounds(const GaugeMap& g, int kmax, int window_j) {
  if (g.kind() != Kind::Cusp)
    throw SpecError("log-derivative bounds apply to cusp characteristics");
  LogDerivativeReport rep;
  rep.kmax = kmax;
  rep.note = "ratios certified up to order kmax=" + std::to_string(kmax) + " on [0," +
             std::to_string(window_j) + "]";
  rep.ratios.assign(kmax, 0.0);
  int per_unit = 16;
  int n = window_j * per_unit + 1;
  double log_slope = 0.0;
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) {
    double s = static_cast<double>(i) / per_unit;
    Jet r = g.rho_jets(s, kmax);
    vals[i] = r.value();
    for (int d = 1; d <= kmax; ++d)
      rep.ratios[d - 1] = std::max(rep.ratios[d - 1], std::abs(r.max_abs_deriv(d)) / r.value());
    log_slope = std::max(log_slope, std::abs(r.max_abs_deriv(1)) / r.value());
  }
  rep.harnack_bound = std::exp(log_slope);
  for (int i = 0; i + per_unit < n; i += per_unit) {
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= per_unit; ++q) {
      mx = std::max(mx, vals[i + q]);
      mn = std::min(mn, vals[i + q]);
    }
    rep.harnack_ratio = std::max(rep.harnack_ratio, mx / mn);
  }
  return rep;
}

}  // namespace singreg::characteristics
