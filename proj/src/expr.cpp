#include "singreg/expr.hpp"

#include <cctype>
#include <cmath>

namespace singreg::calculus {

namespace {

ExprPtr mk(Expr::Op op, ExprPtr a = nullptr, ExprPtr b = nullptr) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

}  // namespace

ExprPtr econst(double v) {
  auto e = std::make_shared<Expr>();
  e->op = Expr::Op::Const;
  e->cval = v;
  return e;
}

ExprPtr evar(int i) {
  auto e = std::make_shared<Expr>();
  e->op = Expr::Op::Var;
  e->var = i;
  return e;
}

ExprPtr eadd(ExprPtr a, ExprPtr b) { return mk(Expr::Op::Add, std::move(a), std::move(b)); }
ExprPtr esub(ExprPtr a, ExprPtr b) { return mk(Expr::Op::Sub, std::move(a), std::move(b)); }
ExprPtr emul(ExprPtr a, ExprPtr b) { return mk(Expr::Op::Mul, std::move(a), std::move(b)); }
ExprPtr ediv(ExprPtr a, ExprPtr b) { return mk(Expr::Op::Div, std::move(a), std::move(b)); }
ExprPtr eneg(ExprPtr a) { return mk(Expr::Op::Neg, std::move(a)); }

ExprPtr epow(ExprPtr a, double p) {
  auto e = std::make_shared<Expr>();
  e->op = Expr::Op::Pow;
  e->a = std::move(a);
  e->expo = p;
  return e;
}

ExprPtr eexp(ExprPtr a) { return mk(Expr::Op::Exp, std::move(a)); }
ExprPtr elog(ExprPtr a) { return mk(Expr::Op::Log, std::move(a)); }
ExprPtr esqrt(ExprPtr a) { return mk(Expr::Op::Sqrt, std::move(a)); }
ExprPtr esin(ExprPtr a) { return mk(Expr::Op::Sin, std::move(a)); }
ExprPtr ecos(ExprPtr a) { return mk(Expr::Op::Cos, std::move(a)); }
ExprPtr eatan(ExprPtr a) { return mk(Expr::Op::Atan, std::move(a)); }
ExprPtr ebump(ExprPtr a) { return mk(Expr::Op::Bump, std::move(a)); }

Jet Expr::jets(const std::vector<Jet>& vars) const {
  switch (op) {
    case Op::Const:
      return Jet::constant(cval, vars[0].dim(), vars[0].order());
    case Op::Var:
      return vars.at(var);
    case Op::Add:
      return a->jets(vars) + b->jets(vars);
    case Op::Sub:
      return a->jets(vars) - b->jets(vars);
    case Op::Mul:
      return a->jets(vars) * b->jets(vars);
    case Op::Div:
      return a->jets(vars) / b->jets(vars);
    case Op::Neg:
      return -a->jets(vars);
    case Op::Pow:
      return jpow(a->jets(vars), expo);
    case Op::Exp:
      return jexp(a->jets(vars));
    case Op::Log:
      return jlog(a->jets(vars));
    case Op::Sqrt:
      return jsqrt(a->jets(vars));
    case Op::Sin:
      return jsin(a->jets(vars));
    case Op::Cos:
      return jcos(a->jets(vars));
    case Op::Atan:
      return jatan(a->jets(vars));
    case Op::Bump: {
      Jet u = a->jets(vars);
      // exp(-1/(1-u^2)) inside |u|<1, identically 0 outside; the flat joint
      // at |u|=1 gives exact zero jets there
      if (std::abs(u.value()) >= 1.0) return Jet(u.dim(), u.order());
      return jexp(-jrecip(1.0 - u * u));
    }
  }
  throw SingregError("unreachable expression op");
}

double Expr::value(const VectorXd& x) const {
  switch (op) {
    case Op::Const: return cval;
    case Op::Var: return x[var];
    case Op::Add: return a->value(x) + b->value(x);
    case Op::Sub: return a->value(x) - b->value(x);
    case Op::Mul: return a->value(x) * b->value(x);
    case Op::Div: {
      double d = b->value(x);
      if (d == 0.0) throw DomainError("division by zero");
      return a->value(x) / d;
    }
    case Op::Neg: return -a->value(x);
    case Op::Pow: {
      double u = a->value(x);
      double r = std::round(expo);
      if (r == expo) return std::pow(u, expo);
      if (u <= 0.0) throw DomainError("pow with non-integer exponent needs a positive base");
      return std::pow(u, expo);
    }
    case Op::Exp: return std::exp(a->value(x));
    case Op::Log: {
      double u = a->value(x);
      if (u <= 0.0) throw DomainError("log of nonpositive value");
      return std::log(u);
    }
    case Op::Sqrt: {
      double u = a->value(x);
      if (u < 0.0) throw DomainError("sqrt of negative value");
      return std::sqrt(u);
    }
    case Op::Sin: return std::sin(a->value(x));
    case Op::Cos: return std::cos(a->value(x));
    case Op::Atan: return std::atan(a->value(x));
    case Op::Bump: {
      double u = a->value(x);
      if (std::abs(u) >= 1.0) return 0.0;
      return std::exp(-1.0 / (1.0 - u * u));
    }
  }
  throw SingregError("unreachable expression op");
}

namespace {

struct Parser {
  const std::string& s;
  const std::vector<std::string>& names;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SpecError("expression parse error at position " + std::to_string(pos) + ": " + msg +
                    " in \"" + s + "\"");
  }

  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  ExprPtr parse() {
    ExprPtr e = sum();
    skip();
    if (pos != s.size()) fail("trailing input");
    return e;
  }

  ExprPtr sum() {
    ExprPtr e = term();
    for (;;) {
      if (eat('+')) e = eadd(e, term());
      else if (eat('-')) e = esub(e, term());
      else return e;
    }
  }

  ExprPtr term() {
    ExprPtr e = unary();
    for (;;) {
      if (eat('*')) e = emul(e, unary());
      else if (eat('/')) e = ediv(e, unary());
      else return e;
    }
  }

  ExprPtr unary() {
    if (eat('-')) return eneg(unary());
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    skip();
    if (eat('^')) {
      // exponents are numeric literals (possibly negated)
      skip();
      bool neg = eat('-');
      skip();
      double p = number();
      return epow(base, neg ? -p : p);
    }
    return base;
  }

  double number() {
    skip();
    std::size_t start = pos;
    while (pos < s.size() &&
           (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' || s[pos] == 'e' ||
            s[pos] == 'E' || ((s[pos] == '+' || s[pos] == '-') && pos > start &&
                              (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
      ++pos;
    if (start == pos) fail("expected a number");
    try {
      return std::stod(s.substr(start, pos - start));
    } catch (const std::exception&) {
      fail("bad numeric literal");
    }
  }

  ExprPtr atom() {
    skip();
    if (pos >= s.size()) fail("unexpected end of input");
    char c = s[pos];
    if (c == '(') {
      ++pos;
      ExprPtr e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return econst(number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string word = s.substr(start, pos - start);
      if (eat('(')) {
        ExprPtr arg = sum();
        if (!eat(')')) fail("expected ')' after function argument");
        if (word == "exp") return eexp(arg);
        if (word == "log") return elog(arg);
        if (word == "sqrt") return esqrt(arg);
        if (word == "sin") return esin(arg);
        if (word == "cos") return ecos(arg);
        if (word == "atan") return eatan(arg);
        if (word == "bump") return ebump(arg);
        fail("unknown function '" + word + "'");
      }
      for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == word) return evar(static_cast<int>(i));
      fail("unknown variable '" + word + "'");
    }
    fail("unexpected character");
  }
};

}  // namespace

ExprPtr parse_expr(const std::string& text, const std::vector<std::string>& var_names) {
  Parser p{text, var_names};
  return p.parse();
}

}  // namespace singreg::calculus
