#include "singreg/calculus.hpp"

#include <cmath>

namespace singreg::calculus {

namespace {

// Kronrod-15 abscissae (positive half) and weights; Gauss-7 weights embedded
// at the odd Kronrod nodes.
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct PanelResult {
  double kronrod;
  double err;
};

PanelResult panel(const std::function<double(double)>& f, double a, double b) {
  double c = 0.5 * (a + b);
  double h = 0.5 * (b - a);
  double fc = f(c);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    double x = h * kXgk[i];
    double fsum = f(c - x) + f(c + x);
    resk += kWgk[i] * fsum;
    if (i % 2 == 1) resg += kWg[i / 2] * fsum;
  }
  return {resk * h, std::abs((resk - resg) * h)};
}

double quad_rec(const std::function<double(double)>& f, double a, double b, double tol,
                int depth) {
  PanelResult r = panel(f, a, b);
  if (r.err <= tol * std::max(1.0, std::abs(r.kronrod)) || depth >= 52) return r.kronrod;
  double c = 0.5 * (a + b);
  return quad_rec(f, a, c, tol / 2, depth + 1) + quad_rec(f, c, b, tol / 2, depth + 1);
}

}  // namespace

double quad(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  return quad_rec(f, a, b, tol, 0);
}

double invert_monotone(const std::function<double(double)>& f, double y, double lo, double hi,
                       double tol) {
  double flo = f(lo), fhi = f(hi);
  bool inc = fhi >= flo;
  double ylo = inc ? flo : fhi;
  double yhi = inc ? fhi : flo;
  double slack = 1e-9 * (std::abs(ylo) + std::abs(yhi) + 1.0);
  if (y < ylo - slack || y > yhi + slack)
    throw DomainError("invert_monotone: target value not bracketed");
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    // tolerance relative to the magnitude of x itself, so roots near zero
    // (deep cusp chart centers) keep full relative precision
    double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    if (hi - lo <= tol * scale) return mid;
    double fm = f(mid);
    bool left = inc ? (y < fm) : (y > fm);
    if (left) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

GridSampler::GridSampler(Box box, int resolution, double margin, std::vector<bool> closed_lo)
    : box_(std::move(box)), res_(resolution), margin_(margin), closed_lo_(std::move(closed_lo)) {
  if (res_ < 2) throw SingregError("GridSampler: resolution must be >= 2");
  if (closed_lo_.empty()) closed_lo_.assign(box_.dim(), false);
}

long long GridSampler::count() const {
  long long n = 1;
  for (int i = 0; i < box_.dim(); ++i) n *= res_;
  return n;
}

double GridSampler::axis_value(int axis, int step) const {
  double lo = box_.lo[axis], hi = box_.hi[axis];
  double half = 0.5 * (hi - lo);
  double a = lo + margin_ * half;
  double b = hi - margin_ * half;
  if (closed_lo_[axis]) a = lo;
  return a + (b - a) * step / (res_ - 1);
}

VectorXd GridSampler::node(long long idx) const {
  VectorXd x(box_.dim());
  for (int i = 0; i < box_.dim(); ++i) {
    x[i] = axis_value(i, static_cast<int>(idx % res_));
    idx /= res_;
  }
  return x;
}

std::vector<VectorXd> GridSampler::nodes() const {
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count()));
  for (long long i = 0; i < count(); ++i) out.push_back(node(i));
  return out;
}

double SupNormTable::max_all() const {
  double b = 0.0;
  for (double v : per_order) b = std::max(b, v);
  return b;
}

SupNormTable sup_norms(const MapBase& f, const std::vector<VectorXd>& points, int kmax) {
  SupNormTable t;
  t.kmax = kmax;
  t.per_order.assign(kmax + 1, 0.0);
  int n = static_cast<int>(points.size());
  std::vector<std::vector<double>> per_point(n);
  parallel_for(n, [&](int i) {
    auto js = f.jets(points[i], kmax);
    std::vector<double> local(kmax + 1, 0.0);
    for (const auto& j : js)
      for (int d = 0; d <= kmax; ++d) local[d] = std::max(local[d], j.max_abs_deriv(d));
    per_point[i] = std::move(local);
  });
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double m = 0.0;
    for (int d = 0; d <= kmax; ++d) {
      t.per_order[d] = std::max(t.per_order[d], per_point[i][d]);
      m = std::max(m, per_point[i][d]);
    }
    if (m > best) {
      best = m;
      t.witness = points[i];
    }
  }
  return t;
}

}  // namespace singreg::calculus
