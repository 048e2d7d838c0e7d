#include "singreg/jet.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace singreg::calculus {

namespace {

std::uint64_t pack(const std::vector<int>& alpha) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    key |= static_cast<std::uint64_t>(alpha[i] & 0xF) << (4 * i);
  return key;
}

void enumerate(int m, int d, int pos, std::vector<int>& cur,
               std::vector<std::vector<int>>& out) {
  if (pos == m - 1) {
    cur[pos] = d;
    out.push_back(cur);
    return;
  }
  // descending first component so that |alpha| = 1 entries appear as
  // e_0, e_1, ... in axis order (variable seeding relies on this)
  for (int v = d; v >= 0; --v) {
    cur[pos] = v;
    enumerate(m, d - v, pos + 1, cur, out);
  }
}

}  // namespace

JetTable build_table(int m, int k) {
  if (m < 1 || m > 15 || k < 0 || k > 15)
    throw SingregError("jet table bounds: need 1<=m<=15, 0<=k<=15");
  JetTable t;
  t.m = m;
  t.k = k;
  t.order_begin.assign(k + 2, 0);
  std::vector<int> cur(m, 0);
  for (int d = 0; d <= k; ++d) {
    t.order_begin[d] = static_cast<int>(t.midx.size());
    enumerate(m, d, 0, cur, t.midx);
  }
  t.order_begin[k + 1] = static_cast<int>(t.midx.size());
  t.size = static_cast<int>(t.midx.size());

  t.factorial.resize(t.size);
  for (int e = 0; e < t.size; ++e) {
    double f = 1.0;
    for (int i = 0; i < m; ++i)
      for (int v = 2; v <= t.midx[e][i]; ++v) f *= v;
    t.factorial[e] = f;
    t.lookup_.emplace(pack(t.midx[e]), e);
  }

  std::vector<int> sum(m);
  for (int ia = 0; ia < t.size; ++ia) {
    int da = 0;
    for (int v : t.midx[ia]) da += v;
    for (int ib = 0; ib < t.size; ++ib) {
      int db = 0;
      for (int v : t.midx[ib]) db += v;
      if (da + db > k) continue;
      for (int i = 0; i < m; ++i) sum[i] = t.midx[ia][i] + t.midx[ib][i];
      t.triples.push_back({ia, ib, t.lookup_.at(pack(sum))});
    }
  }

  t.shift.assign(m, std::vector<int>(t.size, -1));
  for (int a = 0; a < m; ++a) {
    for (int e = 0; e < t.size; ++e) {
      sum = t.midx[e];
      sum[a] += 1;
      auto it = t.lookup_.find(pack(sum));
      if (it != t.lookup_.end()) t.shift[a][e] = it->second;
    }
  }
  return t;
}

int JetTable::index_of(const std::vector<int>& alpha) const {
  auto it = lookup_.find(pack(alpha));
  if (it == lookup_.end()) throw SingregError("multi-index outside jet table");
  return it->second;
}

const JetTable& JetTable::get(int m, int k) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<JetTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(m, k);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto t = std::make_unique<JetTable>(build_table(m, k));
    it = cache.emplace(key, std::move(t)).first;
  }
  return *it->second;
}

void Jet::check_same(const Jet& o) const {
  if (tab_ != o.tab_)
    throw SingregError("jet arithmetic across different (dim, order) tables");
}

Jet Jet::operator-() const {
  Jet r = *this;
  r.c_ = -r.c_;
  return r;
}

Jet Jet::operator+(const Jet& o) const {
  check_same(o);
  Jet r = *this;
  r.c_ += o.c_;
  return r;
}

Jet Jet::operator-(const Jet& o) const {
  check_same(o);
  Jet r = *this;
  r.c_ -= o.c_;
  return r;
}

Jet Jet::operator*(const Jet& o) const {
  check_same(o);
  Jet r(tab_->m, tab_->k);
  for (const auto& [ia, ib, ic] : tab_->triples) r.c_[ic] += c_[ia] * o.c_[ib];
  return r;
}

Jet Jet::operator/(const Jet& o) const { return *this * jrecip(o); }

Jet Jet::operator+(double s) const {
  Jet r = *this;
  r.c_[0] += s;
  return r;
}
Jet Jet::operator-(double s) const { return *this + (-s); }
Jet Jet::operator*(double s) const {
  Jet r = *this;
  r.c_ *= s;
  return r;
}
Jet Jet::operator/(double s) const {
  if (s == 0.0) throw DomainError("division by zero");
  return *this * (1.0 / s);
}
Jet operator/(double s, const Jet& j) { return jrecip(j) * s; }

Jet Jet::apply_univariate(const std::vector<double>& derivs) const {
  int k = tab_->k;
  if (static_cast<int>(derivs.size()) < k + 1)
    throw SingregError("apply_univariate: need order+1 derivative values");
  Jet h = *this;
  h.c_[0] = 0.0;
  double fact = 1.0;
  std::vector<double> a(k + 1);
  for (int i = 0; i <= k; ++i) {
    if (i > 1) fact *= i;
    a[i] = derivs[i] / fact;
  }
  Jet r = Jet::constant(a[k], tab_->m, k);
  for (int i = k - 1; i >= 0; --i) r = r * h + a[i];
  return r;
}

Jet Jet::derivative(int axis) const {
  if (tab_->k < 1) throw SingregError("derivative of order-0 jet");
  Jet r(tab_->m, tab_->k - 1);
  const auto& lower = r.table();
  for (int e = 0; e < lower.size; ++e) {
    int src = tab_->shift[axis][e];
    r.c_[e] = c_[src] * (tab_->midx[e][axis] + 1);
  }
  return r;
}

Jet Jet::truncated(int k2) const {
  if (k2 > tab_->k) throw SingregError("truncated: target order exceeds jet order");
  Jet r(tab_->m, k2);
  for (int e = 0; e < r.table().size; ++e) r.c_[e] = c_[e];
  return r;
}

double Jet::max_abs_deriv(int d) const {
  if (d > tab_->k) throw SingregError("max_abs_deriv: order exceeds jet order");
  double best = 0.0;
  for (int e = tab_->order_begin[d]; e < tab_->order_begin[d + 1]; ++e)
    best = std::max(best, std::abs(c_[e] * tab_->factorial[e]));
  return best;
}

namespace {

Jet apply(const Jet& u, const std::function<double(int, double)>& dphi) {
  std::vector<double> d(u.order() + 1);
  for (int i = 0; i <= u.order(); ++i) d[i] = dphi(i, u.value());
  return u.apply_univariate(d);
}

}  // namespace

Jet jexp(const Jet& u) {
  double e = std::exp(u.value());
  return apply(u, [e](int, double) { return e; });
}

Jet jlog(const Jet& u) {
  if (u.value() <= 0.0) throw DomainError("log of nonpositive value");
  return apply(u, [](int i, double v) {
    if (i == 0) return std::log(v);
    double f = 1.0;
    for (int j = 1; j < i; ++j) f *= j;
    return ((i % 2 == 1) ? f : -f) * std::pow(v, -i);
  });
}

Jet jsqrt(const Jet& u) {
  if (u.value() <= 0.0) throw DomainError("sqrt of nonpositive value");
  return jpow(u, 0.5);
}

Jet jsin(const Jet& u) {
  return apply(u, [](int i, double v) {
    switch (i % 4) {
      case 0: return std::sin(v);
      case 1: return std::cos(v);
      case 2: return -std::sin(v);
      default: return -std::cos(v);
    }
  });
}

Jet jcos(const Jet& u) {
  return apply(u, [](int i, double v) {
    switch (i % 4) {
      case 0: return std::cos(v);
      case 1: return -std::sin(v);
      case 2: return -std::cos(v);
      default: return std::sin(v);
    }
  });
}

Jet jatan(const Jet& u) {
  // phi^(n)(v) = (n-1)! cos^n(t) sin(n(t + pi/2)), t = atan(v)
  double t = std::atan(u.value());
  double c = std::cos(t);
  return apply(u, [t, c](int i, double v) {
    if (i == 0) return std::atan(v);
    double f = 1.0;
    for (int j = 1; j < i; ++j) f *= j;
    return f * std::pow(c, i) * std::sin(i * (t + kPi / 2));
  });
}

Jet jrecip(const Jet& u) {
  if (u.value() == 0.0) throw DomainError("reciprocal of zero");
  return apply(u, [](int i, double v) {
    double f = 1.0;
    for (int j = 1; j <= i; ++j) f *= j;
    return ((i % 2 == 0) ? f : -f) * std::pow(v, -i - 1);
  });
}

Jet jpow(const Jet& u, double p) {
  double r = std::round(p);
  if (r == p && std::abs(r) <= 64.0) {
    int n = static_cast<int>(r);
    if (n == 0) return Jet::constant(1.0, u.dim(), u.order());
    bool neg = n < 0;
    n = std::abs(n);
    Jet acc = u;
    for (int i = 1; i < n; ++i) acc = acc * u;
    return neg ? jrecip(acc) : acc;
  }
  if (u.value() <= 0.0) throw DomainError("pow with non-integer exponent needs a positive base");
  return apply(u, [p](int i, double v) {
    double f = 1.0;
    for (int j = 0; j < i; ++j) f *= (p - j);
    return f * std::pow(v, p - i);
  });
}

}  // namespace singreg::calculus
