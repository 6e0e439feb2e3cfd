#include "jetcalc/context.hpp"

#include <algorithm>

namespace jetcalc {

namespace {
template <typename Range, typename Key>
std::optional<int> index_of(const Range& r, Key key) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (key(r[i])) return static_cast<int>(i);
  }
  return std::nullopt;
}
}  // namespace

std::optional<int> Context::find_independent(const std::string& name) const {
  return index_of(independents, [&](const std::string& s) { return s == name; });
}

std::optional<int> Context::find_dependent(const std::string& name) const {
  return index_of(dependents, [&](const std::string& s) { return s == name; });
}

std::optional<int> Context::find_constant(const std::string& name) const {
  return index_of(constants, [&](const ConstantDecl& c) { return c.name == name; });
}

std::optional<int> Context::find_function(const std::string& name) const {
  return index_of(functions, [&](const FunctionDecl& f) { return f.name == name; });
}

bool Context::is_declared(const std::string& name) const {
  return find_independent(name) || find_dependent(name) || find_constant(name) || find_function(name);
}

Gen Context::independent(const std::string& name) const {
  auto i = find_independent(name);
  if (!i) throw ExprError("undeclared variable '" + name + "'");
  return Gen::independent(*i);
}

Gen Context::dependent(const std::string& name) const {
  auto j = find_dependent(name);
  if (!j) throw ExprError("undeclared variable '" + name + "'");
  return Gen::jet(*j, MultiIndex(dim()));
}

Gen Context::constant(const std::string& name) const {
  auto k = find_constant(name);
  if (!k) throw ExprError("undeclared variable '" + name + "'");
  return Gen::constant(*k);
}

Gen Context::jet(const std::string& dependent, const std::string& suffix) const {
  auto j = find_dependent(dependent);
  auto alpha = parse_suffix(suffix);
  if (!j || !alpha) throw ExprError("undeclared variable '" + dependent + "_" + suffix + "'");
  return Gen::jet(*j, *alpha);
}

std::optional<MultiIndex> Context::parse_suffix(const std::string& suffix) const {
  MultiIndex alpha(dim());
  std::size_t pos = 0;
  while (pos < suffix.size()) {
    int best = -1;
    std::size_t best_len = 0;
    for (int i = 0; i < dim(); ++i) {
      const auto& n = independents[static_cast<std::size_t>(i)];
      if (n.size() > best_len && suffix.compare(pos, n.size(), n) == 0) {
        best = i;
        best_len = n.size();
      }
    }
    if (best < 0) return std::nullopt;
    alpha = alpha.plus_unit(best);
    pos += best_len;
  }
  return alpha;
}

std::optional<Gen> Context::resolve(const std::string& identifier) const {
  if (auto k = find_constant(identifier)) return Gen::constant(*k);
  if (auto i = find_independent(identifier)) return Gen::independent(*i);
  if (auto j = find_dependent(identifier)) return Gen::jet(*j, MultiIndex(dim()));
  auto us = identifier.find('_');
  if (us == std::string::npos || us == 0 || us + 1 >= identifier.size()) return std::nullopt;
  auto j = find_dependent(identifier.substr(0, us));
  if (!j) return std::nullopt;
  auto alpha = parse_suffix(identifier.substr(us + 1));
  if (!alpha) return std::nullopt;
  return Gen::jet(*j, *alpha);
}

std::string Context::derivative_suffix(const MultiIndex& alpha) const {
  std::string s;
  for (int i = 0; i < alpha.dim() && i < dim(); ++i) {
    for (int k = 0; k < alpha[i]; ++k) s += independents[static_cast<std::size_t>(i)];
  }
  return s;
}

std::string Context::jet_name(int dependent, const MultiIndex& alpha) const {
  std::string base = dependent >= 0 && dependent < num_dependents() ? dependents[static_cast<std::size_t>(dependent)]
                                                                    : "u" + std::to_string(dependent);
  if (alpha.is_zero()) return base;
  return base + "_" + derivative_suffix(alpha);
}

std::string Context::function_name(int function, const std::vector<int>& orders) const {
  std::string name = function >= 0 && function < static_cast<int>(functions.size())
                         ? functions[static_cast<std::size_t>(function)].name
                         : "f" + std::to_string(function);
  if (orders.size() == 1) return name + std::string(static_cast<std::size_t>(orders[0]), '\'');
  if (std::all_of(orders.begin(), orders.end(), [](int k) { return k == 0; })) return name;
  name += "{";
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (i) name += ",";
    name += std::to_string(orders[i]);
  }
  return name + "}";
}

std::string Context::gen_name(const Gen& g) const {
  switch (g.kind()) {
    case GenKind::Independent:
      return g.index() < dim() ? independents[static_cast<std::size_t>(g.index())] : "x" + std::to_string(g.index());
    case GenKind::Constant:
      return g.index() < static_cast<int>(constants.size()) ? constants[static_cast<std::size_t>(g.index())].name
                                                            : "c" + std::to_string(g.index());
    case GenKind::Jet:
      return jet_name(g.index(), g.alpha());
    case GenKind::Param: {
      auto it = param_names.find(g.index());
      return it != param_names.end() ? it->second : "_p" + std::to_string(g.index());
    }
    case GenKind::Atom:
      return format_gen(g, *this);
  }
  return "?";
}

bool Context::is_positive(const Gen& g) const { return positive.count(g) > 0; }

void Context::check_declared(const Gen& g) const {
  bool ok = false;
  switch (g.kind()) {
    case GenKind::Independent: ok = g.index() >= 0 && g.index() < dim(); break;
    case GenKind::Constant: ok = g.index() >= 0 && g.index() < static_cast<int>(constants.size()); break;
    case GenKind::Jet: ok = g.index() >= 0 && g.index() < num_dependents() && g.alpha().dim() == dim(); break;
    case GenKind::Param: ok = true; break;
    case GenKind::Atom: ok = false; break;
  }
  if (!ok) throw ExprError("undeclared variable '" + gen_name(g) + "'");
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

bool is_simple_token(const std::string& s) {
  // identifiers, primes and a trailing balanced argument list
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && (c == '+' || c == '-' || c == '*' || c == '/' || c == '^' || c == ' ')) return false;
  }
  return true;
}

std::string format_poly(const Poly& p, const Context& ctx, bool& single_term);

std::string format_exponent(const Expr& e, const Context& ctx) {
  if (auto r = e.as_rational()) {
    if (is_integer(*r) && *r >= 0) return r->get_str();
    return "(" + r->get_str() + ")";
  }
  std::string s = format(e, ctx);
  return is_simple_token(s) ? s : "(" + s + ")";
}

std::string factor_string(const Gen& g, int e, const Context& ctx) {
  std::string s = format_gen(g, ctx);
  if (e == 1) return s;
  if (!is_simple_token(s)) s = "(" + s + ")";
  return s + "^" + std::to_string(e);
}

std::string term_body(const Monomial& m, const Rational& abs_c, const Context& ctx) {
  std::vector<std::string> pos;
  std::vector<std::string> neg;
  // constants and parameters lead, as in C*gamma*x_mm
  auto rank = [](const Gen& g) {
    switch (g.kind()) {
      case GenKind::Constant: return 0;
      case GenKind::Param: return 1;
      case GenKind::Independent: return 2;
      case GenKind::Jet: return 3;
      default: return 4;
    }
  };
  auto fs = m.factors();
  std::stable_sort(fs.begin(), fs.end(), [&](const auto& a, const auto& b) { return rank(a.first) < rank(b.first); });
  for (const auto& [g, e] : fs) {
    if (e > 0) {
      pos.push_back(factor_string(g, e, ctx));
    } else {
      neg.push_back(factor_string(g, -e, ctx));
    }
  }
  std::string body;
  if (abs_c != 1 || pos.empty()) body = abs_c.get_str();
  for (const auto& s : pos) {
    if (!body.empty()) body += "*";
    body += s;
  }
  if (!neg.empty()) {
    body += "/";
    if (neg.size() == 1) {
      body += neg[0];
    } else {
      body += "(";
      for (std::size_t i = 0; i < neg.size(); ++i) {
        if (i) body += "*";
        body += neg[i];
      }
      body += ")";
    }
  }
  return body;
}

std::string format_poly(const Poly& p, const Context& ctx, bool& single_term) {
  single_term = p.size() <= 1;
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [m, c] = *it;
    bool negative = c < 0;
    Rational abs_c = negative ? Rational(-c) : c;
    std::string body = term_body(m, abs_c, ctx);
    if (first) {
      out += negative ? "-" + body : body;
    } else {
      out += negative ? " - " : " + ";
      out += body;
    }
    first = false;
  }
  return out;
}

}  // namespace

std::string format_gen(const Gen& g, const Context& ctx) {
  if (!g.is_atom()) return ctx.gen_name(g);
  const auto& a = g.atom();
  if (a.kind == AtomData::Kind::Power) {
    std::string base;
    if (auto bg = a.base.as_gen(); bg && !bg->is_atom()) {
      base = ctx.gen_name(*bg);
    } else if (auto br = a.base.as_rational(); br && is_integer(*br) && *br > 0) {
      base = br->get_str();
    } else {
      base = "(" + format(a.base, ctx) + ")";
    }
    return base + "^" + format_exponent(a.exponent, ctx);
  }
  std::string s = ctx.function_name(a.function, a.orders) + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) s += ", ";
    s += format(a.args[i], ctx);
  }
  return s + ")";
}

std::string format(const Expr& e, const Context& ctx) {
  const auto& d = e.data();
  bool single = true;
  std::string num = format_poly(d.num, ctx, single);
  if (d.den.empty()) return num;
  if (!single) num = "(" + num + ")";
  std::vector<std::string> parts;
  for (const auto& [f, k] : d.den) {
    bool fs = true;
    std::string s = format_poly(f, ctx, fs);
    if (!fs || !is_simple_token(s)) s = "(" + s + ")";
    if (k != 1) s += "^" + std::to_string(k);
    parts.push_back(s);
  }
  std::string den;
  if (parts.size() == 1) {
    den = parts[0];
  } else {
    den = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) den += "*";
      den += parts[i];
    }
    den += ")";
  }
  return num + "/" + den;
}

}  // namespace jetcalc
