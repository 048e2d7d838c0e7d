#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "singreg/expr.hpp"

namespace singreg::calculus {

// Smooth map R^dom -> R^ran evaluated through jets. Components of jets(x,k)
// share the same (dom, k) table.
class MapBase {
public:
  MapBase(int dom, int ran) : dom_(dom), ran_(ran) {}
  virtual ~MapBase() = default;

  int dom() const { return dom_; }
  int ran() const { return ran_; }

  virtual std::vector<Jet> jets(const VectorXd& x, int k) const = 0;

  virtual VectorXd value(const VectorXd& x) const {
    auto js = jets(x, 0);
    VectorXd v(ran_);
    for (int i = 0; i < ran_; ++i) v[i] = js[i].value();
    return v;
  }

  // Jacobian rows d f_i / d x_j
  MatrixXd jacobian(const VectorXd& x) const;

private:
  int dom_;
  int ran_;
};

using MapPtr = std::shared_ptr<const MapBase>;

std::vector<Jet> seed_jets(const VectorXd& x, int k);

class ExprMap final : public MapBase {
public:
  ExprMap(std::vector<ExprPtr> comps, int dom);
  std::vector<Jet> jets(const VectorXd& x, int k) const override;
  VectorXd value(const VectorXd& x) const override;

private:
  std::vector<ExprPtr> comps_;
};

// x -> A x + b with exact jets
class AffineMap final : public MapBase {
public:
  AffineMap(MatrixXd A, VectorXd b);
  static MapPtr identity(int m);
  static MapPtr translation(const VectorXd& b);
  // x -> (x - shift) * scale, componentwise
  static MapPtr scale_shift(const VectorXd& shift, double scale);
  std::vector<Jet> jets(const VectorXd& x, int k) const override;
  VectorXd value(const VectorXd& x) const override;
  const MatrixXd& A() const { return A_; }
  const VectorXd& b() const { return b_; }

private:
  MatrixXd A_;
  VectorXd b_;
};

class ConstMap final : public MapBase {
public:
  ConstMap(VectorXd v, int dom);
  std::vector<Jet> jets(const VectorXd& x, int k) const override;
  VectorXd value(const VectorXd&) const override { return v_; }

private:
  VectorXd v_;
};

// outer(inner(x)); jets by truncated Taylor substitution
class ComposeMap final : public MapBase {
public:
  ComposeMap(MapPtr outer, MapPtr inner);
  std::vector<Jet> jets(const VectorXd& x, int k) const override;
  VectorXd value(const VectorXd& x) const override;

private:
  MapPtr outer_;
  MapPtr inner_;
};

// (x, y) -> (f(x), g(y)) on concatenated coordinates
class ProductMap final : public MapBase {
public:
  explicit ProductMap(std::vector<MapPtr> factors);
  std::vector<Jet> jets(const VectorXd& x, int k) const override;
  VectorXd value(const VectorXd& x) const override;

private:
  std::vector<MapPtr> factors_;
  static int sum_dom(const std::vector<MapPtr>& f);
  static int sum_ran(const std::vector<MapPtr>& f);
};

// escape hatch for maps whose jets come from bespoke recurrences
class JetFunctionMap final : public MapBase {
public:
  using Fn = std::function<std::vector<Jet>(const VectorXd&, int)>;
  JetFunctionMap(int dom, int ran, Fn fn) : MapBase(dom, ran), fn_(std::move(fn)) {}
  std::vector<Jet> jets(const VectorXd& x, int k) const override { return fn_(x, k); }

private:
  Fn fn_;
};

// substitute inner component jets into an outer coefficient table
Jet substitute(const Jet& outer, const std::vector<Jet>& inner);

MapPtr compose(MapPtr outer, MapPtr inner);
MapPtr product(std::vector<MapPtr> factors);

}  // namespace singreg::calculus
