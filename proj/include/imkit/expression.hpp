#pragma once

// Small arithmetic grammar for user-defined models:
//   expr  := term (('+' | '-') term)*
//   term  := unary (('*' | '/') unary)*
//   unary := '-' unary | power
//   power := atom ('^' unary)?
//   atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
// Functions: exp(a), log(a), pow(a, b).

#include "imkit/association.hpp"
#include "imkit/characteristics.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace imkit {

/// Malformed expression text or an unknown symbol.
class ParseError : public DomainError {
 public:
  using DomainError::DomainError;
};

class Expression {
 public:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Log };

  Expression() : node_(constant_node(0.0)) {}

  /// `symbols` maps each admissible name to a slot in the evaluation vector.
  static Expression parse(const std::string& text, const std::map<std::string, std::size_t>& symbols) {
    Parser p{text, symbols, 0};
    Expression e(p.expr());
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
    return e;
  }

  static Expression constant(double v) { return Expression(constant_node(v)); }
  static Expression variable(std::size_t slot) { return Expression(var_node(slot)); }

  double operator()(const Vec& values) const { return eval(*node_, values); }

  /// Symbolic partial derivative with respect to slot `slot`.
  Expression derivative(std::size_t slot) const { return Expression(diff(node_, slot)); }

  std::set<std::size_t> slots() const {
    std::set<std::size_t> out;
    collect(*node_, out);
    return out;
  }

  bool is_constant() const { return node_->op == Op::Const; }
  double constant_value() const { return node_->value; }

  std::string str(const std::vector<std::string>& names = {}) const { return print(*node_, names); }

 private:
  struct Node {
    Op op = Op::Const;
    double value = 0;
    std::size_t slot = 0;
    std::shared_ptr<const Node> a, b;
  };
  using P = std::shared_ptr<const Node>;

  explicit Expression(P node) : node_(std::move(node)) {}

  static P constant_node(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
  }
  static P var_node(std::size_t slot) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->slot = slot;
    return n;
  }
  static bool is_const(const P& n, double v) { return n->op == Op::Const && n->value == v; }

  static P make(Op op, P a, P b = nullptr) {
    const bool ca = a->op == Op::Const, cb = b && b->op == Op::Const;
    switch (op) {
      case Op::Add:
        if (is_const(a, 0)) return b;
        if (is_const(b, 0)) return a;
        break;
      case Op::Sub:
        if (is_const(b, 0)) return a;
        if (is_const(a, 0)) return make(Op::Neg, b);
        break;
      case Op::Mul:
        if (is_const(a, 0) || is_const(b, 0)) return constant_node(0.0);
        if (is_const(a, 1)) return b;
        if (is_const(b, 1)) return a;
        break;
      case Op::Div:
        if (is_const(a, 0)) return constant_node(0.0);
        if (is_const(b, 1)) return a;
        break;
      case Op::Neg:
        if (a->op == Op::Neg) return a->a;
        break;
      case Op::Pow:
        if (is_const(b, 0)) return constant_node(1.0);
        if (is_const(b, 1)) return a;
        break;
      default:
        break;
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    if (ca && (cb || !n->b)) return constant_node(eval(*n, Vec()));
    return n;
  }

  static double eval(const Node& n, const Vec& v) {
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return v[static_cast<Eigen::Index>(n.slot)];
      case Op::Add: return eval(*n.a, v) + eval(*n.b, v);
      case Op::Sub: return eval(*n.a, v) - eval(*n.b, v);
      case Op::Mul: return eval(*n.a, v) * eval(*n.b, v);
      case Op::Div: return eval(*n.a, v) / eval(*n.b, v);
      case Op::Neg: return -eval(*n.a, v);
      case Op::Pow: return std::pow(eval(*n.a, v), eval(*n.b, v));
      case Op::Exp: return std::exp(eval(*n.a, v));
      case Op::Log: return std::log(eval(*n.a, v));
    }
    return 0;
  }

  static P diff(const P& n, std::size_t s) {
    switch (n->op) {
      case Op::Const: return constant_node(0.0);
      case Op::Var: return constant_node(n->slot == s ? 1.0 : 0.0);
      case Op::Add: return make(Op::Add, diff(n->a, s), diff(n->b, s));
      case Op::Sub: return make(Op::Sub, diff(n->a, s), diff(n->b, s));
      case Op::Neg: return make(Op::Neg, diff(n->a, s));
      case Op::Mul:
        return make(Op::Add, make(Op::Mul, diff(n->a, s), n->b), make(Op::Mul, n->a, diff(n->b, s)));
      case Op::Div:
        return make(Op::Div, make(Op::Sub, make(Op::Mul, diff(n->a, s), n->b), make(Op::Mul, n->a, diff(n->b, s))),
                    make(Op::Mul, n->b, n->b));
      case Op::Exp: return make(Op::Mul, n, diff(n->a, s));
      case Op::Log: return make(Op::Div, diff(n->a, s), n->a);
      case Op::Pow: {
        const P da = diff(n->a, s), db = diff(n->b, s);
        // d(a^b) = b a^(b-1) da + a^b log(a) db
        P left = make(Op::Mul, make(Op::Mul, n->b, make(Op::Pow, n->a, make(Op::Sub, n->b, constant_node(1.0)))), da);
        if (is_const(db, 0)) return left;
        return make(Op::Add, left, make(Op::Mul, make(Op::Mul, n, make(Op::Log, n->a)), db));
      }
    }
    return constant_node(0.0);
  }

  static void collect(const Node& n, std::set<std::size_t>& out) {
    if (n.op == Op::Var) out.insert(n.slot);
    if (n.a) collect(*n.a, out);
    if (n.b) collect(*n.b, out);
  }

  static std::string print(const Node& n, const std::vector<std::string>& names) {
    auto bin = [&](const char* op) { return "(" + print(*n.a, names) + " " + op + " " + print(*n.b, names) + ")"; };
    switch (n.op) {
      case Op::Const: {
        std::ostringstream s;
        s.precision(17);
        s << n.value;
        return s.str();
      }
      case Op::Var: return n.slot < names.size() ? names[n.slot] : "$" + std::to_string(n.slot);
      case Op::Add: return bin("+");
      case Op::Sub: return bin("-");
      case Op::Mul: return bin("*");
      case Op::Div: return bin("/");
      case Op::Neg: return "(-" + print(*n.a, names) + ")";
      case Op::Pow: return "pow(" + print(*n.a, names) + ", " + print(*n.b, names) + ")";
      case Op::Exp: return "exp(" + print(*n.a, names) + ")";
      case Op::Log: return "log(" + print(*n.a, names) + ")";
    }
    return "";
  }

  struct Parser {
    const std::string& text;
    const std::map<std::string, std::size_t>& symbols;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw ParseError("expression '" + text + "' at column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    P expr() {
      P left = term();
      for (;;) {
        if (accept('+')) left = make(Op::Add, left, term());
        else if (accept('-')) left = make(Op::Sub, left, term());
        else return left;
      }
    }
    P term() {
      P left = unary();
      for (;;) {
        if (accept('*')) left = make(Op::Mul, left, unary());
        else if (accept('/')) left = make(Op::Div, left, unary());
        else return left;
      }
    }
    P unary() {
      if (accept('-')) return make(Op::Neg, unary());
      if (accept('+')) return unary();
      return power();
    }
    P power() {
      P base = atom();
      if (accept('^')) return make(Op::Pow, base, unary());
      return base;
    }
    P atom() {
      skip();
      if (pos >= text.size()) fail("unexpected end of expression");
      const char c = text[pos];
      if (c == '(') {
        ++pos;
        P e = expr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = text.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos += static_cast<std::size_t>(end - begin);
        return constant_node(v);
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) ++pos;
        const std::string name = text.substr(start, pos - start);
        if (accept('(')) {
          std::vector<P> args{expr()};
          while (accept(',')) args.push_back(expr());
          expect(')');
          auto arity = [&](std::size_t k) {
            if (args.size() != k) fail(name + " takes " + std::to_string(k) + " argument(s)");
          };
          if (name == "exp") return arity(1), make(Op::Exp, args[0]);
          if (name == "log") return arity(1), make(Op::Log, args[0]);
          if (name == "pow") return arity(2), make(Op::Pow, args[0], args[1]);
          fail("unknown function '" + name + "'");
        }
        const auto it = symbols.find(name);
        if (it == symbols.end()) fail("unknown symbol '" + name + "'");
        return var_node(it->second);
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  P node_;
};

/// Symbol table with slots [u_1..u_n, theta_1..theta_p]. Accepts u1 / u_1, theta1 / theta_1
/// and the parameter names; `common_u` additionally binds the bare name u to slot `common_slot`.
inline std::map<std::string, std::size_t> association_symbols(std::size_t n, const ParameterSpace& params,
                                                              std::optional<std::size_t> common_slot = std::nullopt) {
  std::map<std::string, std::size_t> sym;
  for (std::size_t i = 0; i < n; ++i) {
    sym["u" + std::to_string(i + 1)] = i;
    sym["u_" + std::to_string(i + 1)] = i;
  }
  if (common_slot) sym["u"] = *common_slot;
  for (std::size_t k = 0; k < params.dim(); ++k) {
    sym["theta" + std::to_string(k + 1)] = n + k;
    sym["theta_" + std::to_string(k + 1)] = n + k;
    if (!params.name(k).empty()) sym[params.name(k)] = n + k;
  }
  return sym;
}

/// Coordinate-wise association x_i = e_i(u_i, theta) from expression text. Each component
/// may reference its own auxiliary only; with a single component the bare name u is allowed
/// and the form is shared by all n coordinates. Partials are symbolic.
inline Association make_expression_association(std::string name, std::size_t n, ParameterSpace params,
                                               AuxiliaryDistribution aux, const std::vector<std::string>& components) {
  if (aux.dim != n) throw DomainError("auxiliary dimension must equal n");
  const bool common = components.size() == 1 && n > 1;
  if (!common && components.size() != n) {
    throw DomainError("expected 1 shared component or " + std::to_string(n) + " components, got " +
                      std::to_string(components.size()));
  }
  const std::size_t p = params.dim();
  std::vector<Expression> e, e_u;
  std::vector<std::vector<Expression>> e_th;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto sym = association_symbols(common ? 1 : n, params, common ? std::optional<std::size_t>(0) : std::nullopt);
    // With a shared form, slot 0 is "the" auxiliary and theta slots start at 1.
    const std::size_t u_slot = common ? 0 : i;
    const std::size_t theta0 = common ? 1 : n;
    Expression ex = Expression::parse(components[i], sym);
    for (std::size_t s : ex.slots()) {
      if (s < theta0 && s != u_slot) {
        throw ParseError("component " + std::to_string(i + 1) + " references an auxiliary other than u_" +
                         std::to_string(i + 1));
      }
    }
    e_u.push_back(ex.derivative(u_slot));
    std::vector<Expression> row;
    for (std::size_t k = 0; k < p; ++k) row.push_back(ex.derivative(theta0 + k));
    e_th.push_back(std::move(row));
    e.push_back(std::move(ex));
  }
  // Local evaluation layout: [u, theta_1..theta_p] for a shared form, else [u_1..u_n, theta].
  const std::size_t width = common ? 1 + p : n + p;
  auto pack = [common, p, width](std::size_t i, double u, const Vec& th) {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(width));
    v[static_cast<Eigen::Index>(common ? 0 : i)] = u;
    v.tail(static_cast<Eigen::Index>(p)) = th;
    return v;
  };
  auto pick = [common](std::size_t i) { return common ? std::size_t{0} : i; };
  auto assoc = make_coordinatewise_association(
      std::move(name), std::move(params), std::move(aux),
      [e, pack, pick](std::size_t i, double u, const Vec& th) { return e[pick(i)](pack(i, u, th)); });
  const auto inverse = assoc.inverse_map;
  assoc.du_dtheta_map = [inverse, e_u, e_th, pack, pick, p](const Vec& x, const Vec& th) {
    const Vec u = inverse(x, th);
    Mat d(u.size(), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const Vec v = pack(ii, u[i], th);
      const double au = e_u[pick(ii)](v);
      for (std::size_t k = 0; k < p; ++k) d(i, static_cast<Eigen::Index>(k)) = -e_th[pick(ii)][k](v) / au;
    }
    return d;
  };
  return assoc;
}

/// Characteristic field du_i/dtau_k = g_{ik}(tau, u) from an n x p table of expressions
/// over u_1..u_n and tau_1..tau_p (tau alone when p = 1).
inline CharacteristicField make_expression_field(std::string name, std::size_t n, std::size_t p,
                                                 const std::vector<std::vector<std::string>>& entries, Vec anchor) {
  if (entries.size() != n) throw DomainError("field needs one row per auxiliary coordinate");
  std::map<std::string, std::size_t> sym;
  for (std::size_t i = 0; i < n; ++i) {
    sym["u" + std::to_string(i + 1)] = i;
    sym["u_" + std::to_string(i + 1)] = i;
  }
  for (std::size_t k = 0; k < p; ++k) {
    sym["tau" + std::to_string(k + 1)] = n + k;
    sym["tau_" + std::to_string(k + 1)] = n + k;
  }
  if (p == 1) sym["tau"] = n;
  std::vector<std::vector<Expression>> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (entries[i].size() != p) throw DomainError("field row " + std::to_string(i + 1) + " needs p entries");
    for (const auto& text : entries[i]) g[i].push_back(Expression::parse(text, sym));
  }
  CharacteristicField f;
  f.name = std::move(name);
  f.n = n;
  f.p = p;
  f.anchor = std::move(anchor);
  f.eval = [g, n, p](const Vec& tau, const Vec& u) {
    Vec v(static_cast<Eigen::Index>(n + p));
    v.head(static_cast<Eigen::Index>(n)) = u;
    v.tail(static_cast<Eigen::Index>(p)) = tau;
    Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < p; ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g[i][k](v);
    }
    return out;
  };
  return f;
}

}  // namespace imkit
