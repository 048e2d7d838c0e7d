#pragma once

#include <memory>
#include <string>
#include <vector>

#include "singreg/jet.hpp"

namespace singreg::calculus {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Closed-form scalar expression over named coordinates. Evaluation produces
// jets, so every expression carries all its derivatives up to the requested
// order. Bump is compactly supported with exact zero jets outside (-1,1).
struct Expr {
  enum class Op {
    Const, Var,
    Add, Sub, Mul, Div, Neg,
    Pow,           // real exponent in expo
    Exp, Log, Sqrt, Sin, Cos, Atan,
    Bump,
  };

  Op op = Op::Const;
  double cval = 0.0;
  int var = 0;
  double expo = 1.0;
  ExprPtr a;
  ExprPtr b;

  // vars[i] is the jet of coordinate i at the evaluation point
  Jet jets(const std::vector<Jet>& vars) const;
  double value(const VectorXd& x) const;
};

ExprPtr econst(double v);
ExprPtr evar(int i);
ExprPtr eadd(ExprPtr a, ExprPtr b);
ExprPtr esub(ExprPtr a, ExprPtr b);
ExprPtr emul(ExprPtr a, ExprPtr b);
ExprPtr ediv(ExprPtr a, ExprPtr b);
ExprPtr eneg(ExprPtr a);
ExprPtr epow(ExprPtr a, double p);
ExprPtr eexp(ExprPtr a);
ExprPtr elog(ExprPtr a);
ExprPtr esqrt(ExprPtr a);
ExprPtr esin(ExprPtr a);
ExprPtr ecos(ExprPtr a);
ExprPtr eatan(ExprPtr a);
ExprPtr ebump(ExprPtr a);

// Parses an arithmetic expression over the given variable names.
// Grammar: + - * / ^ (right assoc), unary minus, parentheses, numeric
// literals, and the functions exp log sqrt sin cos atan bump.
// Throws SpecError with a position diagnostic on malformed input.
ExprPtr parse_expr(const std::string& text, const std::vector<std::string>& var_names);

}  // namespace singreg::calculus
