#include "singreg/map.hpp"

namespace singreg::calculus {

std::vector<Jet> seed_jets(const VectorXd& x, int k) {
  int m = static_cast<int>(x.size());
  std::vector<Jet> vars;
  vars.reserve(m);
  for (int i = 0; i < m; ++i) vars.push_back(Jet::variable(x[i], i, m, k));
  return vars;
}

MatrixXd MapBase::jacobian(const VectorXd& x) const {
  auto js = jets(x, 1);
  MatrixXd J(ran(), dom());
  for (int i = 0; i < ran(); ++i)
    for (int j = 0; j < dom(); ++j) J(i, j) = js[i].coeff(1 + j);
  return J;
}

ExprMap::ExprMap(std::vector<ExprPtr> comps, int dom)
    : MapBase(dom, static_cast<int>(comps.size())), comps_(std::move(comps)) {}

std::vector<Jet> ExprMap::jets(const VectorXd& x, int k) const {
  auto vars = seed_jets(x, k);
  std::vector<Jet> out;
  out.reserve(comps_.size());
  for (const auto& c : comps_) out.push_back(c->jets(vars));
  return out;
}

VectorXd ExprMap::value(const VectorXd& x) const {
  VectorXd v(ran());
  for (int i = 0; i < ran(); ++i) v[i] = comps_[i]->value(x);
  return v;
}

AffineMap::AffineMap(MatrixXd A, VectorXd b)
    : MapBase(static_cast<int>(A.cols()), static_cast<int>(A.rows())),
      A_(std::move(A)),
      b_(std::move(b)) {}

MapPtr AffineMap::identity(int m) {
  return std::make_shared<AffineMap>(MatrixXd::Identity(m, m), VectorXd::Zero(m));
}

MapPtr AffineMap::translation(const VectorXd& b) {
  int m = static_cast<int>(b.size());
  return std::make_shared<AffineMap>(MatrixXd::Identity(m, m), b);
}

MapPtr AffineMap::scale_shift(const VectorXd& shift, double scale) {
  int m = static_cast<int>(shift.size());
  return std::make_shared<AffineMap>(scale * MatrixXd::Identity(m, m), -scale * shift);
}

std::vector<Jet> AffineMap::jets(const VectorXd& x, int k) const {
  std::vector<Jet> out;
  out.reserve(ran());
  for (int i = 0; i < ran(); ++i) {
    Jet j = Jet::constant(b_[i], dom(), k);
    if (k >= 1) {
      j.coeff(0) += A_.row(i).dot(x);
      for (int c = 0; c < dom(); ++c) j.coeff(1 + c) = A_(i, c);
    } else {
      j.coeff(0) += A_.row(i).dot(x);
    }
    out.push_back(std::move(j));
  }
  return out;
}

VectorXd AffineMap::value(const VectorXd& x) const { return A_ * x + b_; }

ConstMap::ConstMap(VectorXd v, int dom)
    : MapBase(dom, static_cast<int>(v.size())), v_(std::move(v)) {}

std::vector<Jet> ConstMap::jets(const VectorXd&, int k) const {
  std::vector<Jet> out;
  out.reserve(ran());
  for (int i = 0; i < ran(); ++i) out.push_back(Jet::constant(v_[i], dom(), k));
  return out;
}

Jet substitute(const Jet& outer, const std::vector<Jet>& inner) {
  const JetTable& ot = outer.table();
  if (static_cast<int>(inner.size()) != ot.m)
    throw SingregError("substitute: inner arity mismatch");
  int k = inner.empty() ? 0 : inner[0].order();
  int m = inner.empty() ? 1 : inner[0].dim();
  if (ot.k != k) throw SingregError("substitute: order mismatch");

  // powers of the centered inner components
  std::vector<std::vector<Jet>> pw(ot.m);
  for (int j = 0; j < ot.m; ++j) {
    Jet h = inner[j];
    h.coeff(0) = 0.0;
    pw[j].reserve(k + 1);
    pw[j].push_back(Jet::constant(1.0, m, k));
    for (int p = 1; p <= k; ++p) pw[j].push_back(pw[j][p - 1] * h);
  }

  Jet out(m, k);
  for (int e = 0; e < ot.size; ++e) {
    double c = outer.coeff(e);
    if (c == 0.0) continue;
    Jet term = Jet::constant(c, m, k);
    for (int j = 0; j < ot.m; ++j) {
      int p = ot.midx[e][j];
      if (p > 0) term = term * pw[j][p];
    }
    out = out + term;
  }
  return out;
}

ComposeMap::ComposeMap(MapPtr outer, MapPtr inner)
    : MapBase(inner->dom(), outer->ran()), outer_(std::move(outer)), inner_(std::move(inner)) {
  if (outer_->dom() != inner_->ran())
    throw SingregError("compose: outer domain does not match inner range");
}

std::vector<Jet> ComposeMap::jets(const VectorXd& x, int k) const {
  auto in = inner_->jets(x, k);
  VectorXd mid(inner_->ran());
  for (int i = 0; i < inner_->ran(); ++i) mid[i] = in[i].value();
  auto out = outer_->jets(mid, k);
  std::vector<Jet> res;
  res.reserve(out.size());
  for (const auto& oj : out) res.push_back(substitute(oj, in));
  return res;
}

VectorXd ComposeMap::value(const VectorXd& x) const {
  return outer_->value(inner_->value(x));
}

int ProductMap::sum_dom(const std::vector<MapPtr>& f) {
  int s = 0;
  for (const auto& m : f) s += m->dom();
  return s;
}
int ProductMap::sum_ran(const std::vector<MapPtr>& f) {
  int s = 0;
  for (const auto& m : f) s += m->ran();
  return s;
}

ProductMap::ProductMap(std::vector<MapPtr> factors)
    : MapBase(sum_dom(factors), sum_ran(factors)), factors_(std::move(factors)) {}

std::vector<Jet> ProductMap::jets(const VectorXd& x, int k) const {
  // evaluate each factor in its own coordinates, then re-embed the factor
  // jets into the full coordinate table via substitution by slot variables
  std::vector<Jet> out;
  out.reserve(ran());
  auto full_vars = seed_jets(x, k);
  int off = 0;
  for (const auto& f : factors_) {
    VectorXd xf = x.segment(off, f->dom());
    auto js = f->jets(xf, k);
    std::vector<Jet> slots;
    slots.reserve(f->dom());
    for (int i = 0; i < f->dom(); ++i) slots.push_back(full_vars[off + i]);
    for (const auto& j : js) out.push_back(substitute(j, slots));
    off += f->dom();
  }
  return out;
}

VectorXd ProductMap::value(const VectorXd& x) const {
  VectorXd out(ran());
  int doff = 0, roff = 0;
  for (const auto& f : factors_) {
    out.segment(roff, f->ran()) = f->value(x.segment(doff, f->dom()));
    doff += f->dom();
    roff += f->ran();
  }
  return out;
}

MapPtr compose(MapPtr outer, MapPtr inner) {
  return std::make_shared<ComposeMap>(std::move(outer), std::move(inner));
}

MapPtr product(std::vector<MapPtr> factors) {
  if (factors.size() == 1) return factors[0];
  return std::make_shared<ProductMap>(std::move(factors));
}

}  // namespace singreg::calculus
