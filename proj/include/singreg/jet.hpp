#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "singreg/common.hpp"

namespace singreg::calculus {

// Shared coefficient layout for truncated Taylor expansions in m variables up
// to total order k. Entries are graded (all |alpha|=d blocks consecutive), so
// the prefix of length order_begin[d+1] is exactly the order-d table.
class JetTable {
public:
  int m = 0;
  int k = 0;
  int size = 0;
  std::vector<std::vector<int>> midx;           // multi-indices, graded-lex
  std::vector<double> factorial;                // alpha! per entry
  std::vector<int> order_begin;                 // length k+2
  std::vector<std::array<int, 3>> triples;      // (ia, ib, ic): midx[ia]+midx[ib]=midx[ic]
  std::vector<std::vector<int>> shift;          // shift[axis][i] = entry of midx[i]+e_axis, -1 past order k

  int index_of(const std::vector<int>& alpha) const;
  static const JetTable& get(int m, int k);

private:
  std::unordered_map<std::uint64_t, int> lookup_;
  friend JetTable build_table(int, int);
};

// Truncated Taylor expansion of a scalar function at a point. Stores Taylor
// COEFFICIENTS c_alpha = d^alpha f / alpha!; deriv() rescales on access.
class Jet {
public:
  Jet() = default;
  Jet(int m, int k) : tab_(&JetTable::get(m, k)), c_(VectorXd::Zero(tab_->size)) {}

  static Jet constant(double v, int m, int k) {
    Jet j(m, k);
    j.c_[0] = v;
    return j;
  }
  // coordinate function x_i seeded at base value x0
  static Jet variable(double x0, int i, int m, int k) {
    Jet j(m, k);
    j.c_[0] = x0;
    if (k >= 1) j.c_[1 + i] = 1.0;
    return j;
  }

  int dim() const { return tab_->m; }
  int order() const { return tab_->k; }
  const JetTable& table() const { return *tab_; }

  double value() const { return c_[0]; }
  double coeff(int entry) const { return c_[entry]; }
  double& coeff(int entry) { return c_[entry]; }
  double deriv(const std::vector<int>& alpha) const {
    int e = tab_->index_of(alpha);
    return c_[e] * tab_->factorial[e];
  }

  Jet operator-() const;
  Jet operator+(const Jet& o) const;
  Jet operator-(const Jet& o) const;
  Jet operator*(const Jet& o) const;
  Jet operator/(const Jet& o) const;
  Jet operator+(double s) const;
  Jet operator-(double s) const;
  Jet operator*(double s) const;
  Jet operator/(double s) const;
  friend Jet operator+(double s, const Jet& j) { return j + s; }
  friend Jet operator-(double s, const Jet& j) { return (-j) + s; }
  friend Jet operator*(double s, const Jet& j) { return j * s; }
  friend Jet operator/(double s, const Jet& j);

  // Taylor expansion of phi(f) from phi's derivatives at f's value;
  // derivs[i] = phi^(i)(value()), i = 0..order().
  Jet apply_univariate(const std::vector<double>& derivs) const;

  // coefficient table of d_axis f, one order lower
  Jet derivative(int axis) const;

  // prefix restriction to lower order
  Jet truncated(int k2) const;

  // max |d^alpha f| over |alpha| = d
  double max_abs_deriv(int d) const;

private:
  const JetTable* tab_ = nullptr;
  VectorXd c_;

  void check_same(const Jet& o) const;
};

Jet jexp(const Jet& u);
Jet jlog(const Jet& u);
Jet jsqrt(const Jet& u);
Jet jsin(const Jet& u);
Jet jcos(const Jet& u);
Jet jatan(const Jet& u);
Jet jrecip(const Jet& u);
Jet jpow(const Jet& u, double p);

}  // namespace singreg::calculus
