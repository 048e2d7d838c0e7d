#pragma once

#include <memory>
#include <optional>
#include <string>

#include "singreg/chart.hpp"
#include "singreg/expr.hpp"

namespace singreg::characteristics {

// half-line pieces carrying the singular end: (0,1] or [1,inf)
enum class JKind { ZeroOne, OneInf };

// cofinal window: (0, t_k] on (0,1], [t_k, inf) on [1,inf)
struct JWindow {
  JKind kind = JKind::ZeroOne;
  int cutoff = 1;
};

enum class Family { Power, Exponential, Arctan, Expression };

// Radius profile R over J, normalized to R(1) = 1. Carries a symbolic
// divergence flag for int_J dt/R when the family admits one.
class Characteristic {
public:
  static Characteristic power(double alpha, JKind j);
  static Characteristic exponential(double beta, double gamma, JKind j);
  static Characteristic arctan_profile(double alpha, double beta, JKind j);
  static Characteristic expression(const std::string& body, JKind j,
                                   std::optional<bool> divergence = std::nullopt);

  JKind window() const { return jkind_; }
  Family family() const { return family_; }
  double param(const std::string& name) const;
  std::optional<bool> declared_divergence() const { return divergence_; }
  std::string describe() const { return desc_; }

  double value(double t) const;
  // univariate jet of R at t
  calculus::Jet jets(double t, int k) const;
  const calculus::ExprPtr& expr() const { return expr_; }

private:
  Characteristic() = default;
  void normalize_check() const;

  Family family_ = Family::Expression;
  JKind jkind_ = JKind::ZeroOne;
  double alpha_ = 0.0, beta_ = 0.0, gamma_ = 0.0;
  calculus::ExprPtr expr_;
  std::optional<bool> divergence_;
  std::string desc_;
};

enum class Kind { Cusp, Funnel, Neither };

std::string kind_name(Kind k);

struct ClassifyReport {
  Kind kind = Kind::Neither;
  std::string violated;                 // first violated clause when Neither
  double endpoint_limit = 0.0;
  bool divergent = false;
  bool divergence_heuristic = false;    // decided numerically, not symbolically
  std::vector<std::vector<double>> deriv_sup;  // [window][order 0..kmax]
  std::vector<int> windows;
  int kmax = 4;
  std::string note;
};

// Cusp iff endpoint limit 0, divergent integral of 1/R, and derivative sups
// up to kmax plateau over nested cofinal windows. Funnel iff positive limit
// at infinity with the same derivative plateau. Every report notes the kmax
// truncation.
ClassifyReport classify(const Characteristic& R, int kmax = 4, double tol = 0.05);

// Gauge reparametrization of J by the profile: sigma measures either the
// integral of 1/R (cusp) or arclength of the graph (funnel), anchored at
// sigma(1) = 0; tau is its inverse; t_j = tau(j).
class GaugeMap {
public:
  GaugeMap(Characteristic R, Kind kind, double tol);

  Kind kind() const { return kind_; }
  double tol() const { return tol_; }
  const Characteristic& profile() const { return R_; }

  double sigma(double t) const;
  double tau(double s) const;
  double t_of(int j) const;  // memoized t_j

  // jets in the gauge coordinate s via the first-order recurrence for tau
  calculus::Jet tau_jets(double s, int k) const;
  calculus::Jet rho_jets(double s, int k) const;  // rho = R o tau
  // jet of sigma in t
  calculus::Jet sigma_jets(double t, int k) const;

  // largest j with t_j computable before the profile's end (always huge here;
  // provided for window clamping)
  double smax() const;

private:
  Characteristic R_;
  Kind kind_ = Kind::Cusp;
  double tol_ = 1e-11;
  double sign_ = 1.0;  // sign of dsigma/dt

  struct Cache;
  std::shared_ptr<Cache> cache_;

  double integrand(double t) const;
  calculus::Jet speed_jets(const calculus::Jet& tau) const;  // dtau/ds as function of tau
};

GaugeMap gauge(const Characteristic& R, double tol = 1e-11);

// Charts sigma_j = sigma|J_j - j, J_j the gauge-unit neighborhoods of t_j,
// for 1 <= j <= j_max, plus the boundary chart at the anchor t = 1.
// Multiplicity 2; transitions are exact unit translations.
atlas::Atlas r_atlas(const Characteristic& R, int j_max, double tol = 1e-11);

// evidence for |d^k rho| <= c(k) rho along the gauge coordinate
struct LogDerivativeReport {
  std::vector<double> ratios;   // order 1..kmax: sup |d^k rho|/rho over the window
  double harnack_ratio = 1.0;   // max over sampled unit intervals of max rho / min rho
  double harnack_bound = 1.0;   // exp(sup |d log rho|)
  int kmax = 4;
  std::string note;
};

LogDerivativeReport log_derivative_bounds(const GaugeMap& g, int kmax, int window_j);

}  // namespace singreg::characteristics
