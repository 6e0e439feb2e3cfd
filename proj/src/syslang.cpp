#include "jetcalc/syslang.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>

namespace jetcalc {

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

namespace {

constexpr int kOperatorParamBase = 1000;
constexpr int kMaxDepth = 200;
constexpr long kMaxExponent = 256;

struct Pos {
  int line = 1;
  int col = 1;
};

[[noreturn]] void fail(Pos p, const std::string& msg) { throw ParseError(p.line, p.col, msg); }

// One logical item of a section body, possibly joined from several lines.
struct Item {
  std::string text;
  std::vector<Pos> pos;
  Pos end;

  Pos at(std::size_t i) const { return i < pos.size() ? pos[i] : end; }
  void append(std::string_view s, Pos start) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      text.push_back(s[i]);
      pos.push_back(Pos{start.line, start.col + static_cast<int>(i)});
    }
    end = Pos{start.line, start.col + static_cast<int>(s.size())};
  }
};

enum class Tok { Ident, Number, Op, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Pos pos;

  bool is(const char* op) const { return kind == Tok::Op && text == op; }
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::vector<Token> tokenize(const Item& item) {
  std::vector<Token> out;
  const std::string& s = item.text;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    Token t;
    t.pos = item.at(i);
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      while (j < s.size() && s[j] == '\'') ++j;
      if (j < s.size() && s[j] == '{') {
        std::size_t k = j + 1;
        while (k < s.size() && (std::isdigit(static_cast<unsigned char>(s[k])) || s[k] == ',' || s[k] == ' ')) ++k;
        if (k >= s.size() || s[k] != '}') fail(item.at(k), "unterminated derivative order list");
        j = k + 1;
      }
      t.kind = Tok::Ident;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && s[j] == '.') {
        ++j;
        if (j >= s.size() || !std::isdigit(static_cast<unsigned char>(s[j]))) fail(item.at(j), "malformed number");
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      }
      t.kind = Tok::Number;
      t.text = s.substr(i, j - i);
      i = j;
    } else if (std::string_view("+-*/^()[],=:").find(c) != std::string_view::npos) {
      t.kind = Tok::Op;
      t.text = std::string(1, c);
      ++i;
    } else if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f) {
      std::ostringstream os;
      os << "unexpected byte 0x" << std::hex << static_cast<int>(static_cast<unsigned char>(c));
      fail(t.pos, os.str());
    } else {
      fail(t.pos, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.pos = item.end;
  out.push_back(end);
  return out;
}

Rational parse_number(const std::string& text) {
  auto dot = text.find('.');
  if (dot == std::string::npos) return Rational(Integer(text));
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  Integer num(digits);
  Integer den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, text.size() - dot - 1);
  Rational r(num, den);
  r.canonicalize();
  return r;
}

struct ExprEnv {
  const Context* ctx = nullptr;
  bool operator_symbols = false;
  const std::map<std::string, int>* params = nullptr;
};

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& tokens, ExprEnv env) : toks_(tokens), env_(env) {}

  const Token& peek() const { return toks_[i_]; }
  const Token& next() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }
  bool accept(const char* op) {
    if (peek().is(op)) {
      next();
      return true;
    }
    return false;
  }
  void expect(const char* op) {
    if (!accept(op)) fail(peek().pos, std::string("expected '") + op + "'" + found());
  }
  void expect_end() {
    if (peek().kind != Tok::End) fail(peek().pos, "unexpected " + describe(peek()));
  }
  std::string found() const { return ", found " + describe(peek()); }
  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of line";
    return "'" + t.text + "'";
  }

  Expr expr() {
    Depth guard(this, peek().pos);
    Expr acc = term();
    while (peek().is("+") || peek().is("-")) {
      Token op = next();
      Expr rhs = term();
      acc = guarded(op.pos, [&] { return op.text == "+" ? acc + rhs : acc - rhs; });
    }
    return acc;
  }

  std::string identifier(const char* what) {
    if (peek().kind != Tok::Ident) fail(peek().pos, std::string("expected ") + what + found());
    return next().text;
  }

 private:
  struct Depth {
    Depth(ExprParser* p, Pos pos) : p_(p) {
      if (++p_->depth_ > kMaxDepth) fail(pos, "expression nested too deeply");
    }
    ~Depth() { --p_->depth_; }
    ExprParser* p_;
  };

  template <typename F>
  Expr guarded(Pos pos, F&& f) {
    try {
      return f();
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      fail(pos, e.what());
    }
  }

  Expr term() {
    Expr acc = unary();
    while (peek().is("*") || peek().is("/")) {
      Token op = next();
      Expr rhs = unary();
      acc = guarded(op.pos, [&] { return op.text == "*" ? acc * rhs : acc / rhs; });
    }
    return acc;
  }

  Expr unary() {
    Depth guard(this, peek().pos);
    if (accept("-")) return -unary();
    if (accept("+")) return unary();
    return power();
  }

  Expr exponent() {
    Depth guard(this, peek().pos);
    if (accept("-")) return -exponent();
    if (accept("+")) return exponent();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!peek().is("^")) return base;
    Token op = next();
    Expr e = exponent();
    return guarded(op.pos, [&] {
      if (auto r = e.as_rational()) {
        if (abs(r->get_num()) > kMaxExponent || r->get_den() > kMaxExponent) {
          throw ExprError("exponent too large");
        }
        if (is_integer(*r)) return pow(base, r->get_num().get_si());
      }
      return pow(base, e);
    });
  }

  Expr primary() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      next();
      return Expr(parse_number(t.text));
    }
    if (t.is("(")) {
      next();
      Expr e = expr();
      expect(")");
      return e;
    }
    if (t.kind == Tok::Ident) {
      Token id = next();
      if (peek().is("(")) return call(id);
      return leaf(id);
    }
    fail(t.pos, "expected an expression" + found());
  }

  Expr call(const Token& id) {
    std::string name = id.text;
    std::vector<int> orders;
    bool primes = false;
    bool braces = false;
    auto q = name.find_first_of("'{");
    std::string base = name.substr(0, q);
    if (q != std::string::npos) {
      if (name[q] == '\'') {
        primes = true;
        auto b = name.find('{');
        if (b != std::string::npos) fail(id.pos, "derivative primes and order lists cannot be combined");
        orders.push_back(static_cast<int>(name.size() - q));
      } else {
        braces = true;
        std::string inner = name.substr(q + 1, name.size() - q - 2);
        std::stringstream ss(inner);
        std::string part;
        while (std::getline(ss, part, ',')) {
          part.erase(std::remove(part.begin(), part.end(), ' '), part.end());
          if (part.empty() || part.size() > 3) fail(id.pos, "malformed derivative order list");
          orders.push_back(std::stoi(part));
        }
      }
    }
    next();  // '('
    std::vector<Expr> args;
    if (!peek().is(")")) {
      args.push_back(expr());
      while (accept(",")) args.push_back(expr());
    }
    expect(")");
    if (base == "sqrt" && !primes && !braces && !env_.ctx->find_function("sqrt")) {
      if (args.size() != 1) fail(id.pos, "sqrt expects 1 argument, got " + std::to_string(args.size()));
      return guarded(id.pos, [&] { return pow(args[0], Expr(make_rational(1, 2))); });
    }
    auto f = env_.ctx->find_function(base);
    if (!f) fail(id.pos, "undeclared function '" + base + "'");
    const auto& decl = env_.ctx->functions[static_cast<std::size_t>(*f)];
    if (static_cast<int>(args.size()) != decl.arity) {
      fail(id.pos, "arity mismatch: function '" + base + "' expects " + std::to_string(decl.arity) +
                       " argument(s), got " + std::to_string(args.size()));
    }
    if (primes && decl.arity != 1) fail(id.pos, "use F{...} orders for derivatives of '" + base + "'");
    if (braces && static_cast<int>(orders.size()) != decl.arity) {
      fail(id.pos, "derivative order list of '" + base + "' must have " + std::to_string(decl.arity) + " entries");
    }
    if (orders.empty()) orders.assign(static_cast<std::size_t>(decl.arity), 0);
    return guarded(id.pos, [&] { return function_application(*f, orders, args); });
  }

  Expr leaf(const Token& id) {
    const std::string& name = id.text;
    const Context& ctx = *env_.ctx;
    if (name.find_first_of("'{") != std::string::npos) fail(id.pos, "expected '(' after function '" + name + "'");
    if (env_.params) {
      auto it = env_.params->find(name);
      if (it != env_.params->end()) return Expr(Gen::param(it->second));
    }
    if (env_.operator_symbols && name.size() > 2 && name.compare(0, 2, "D_") == 0) {
      auto alpha = ctx.parse_suffix(name.substr(2));
      if (!alpha) fail(id.pos, "derivative symbol '" + name + "' references an undeclared independent variable");
      Expr out(1);
      for (int i = 0; i < alpha->dim(); ++i) {
        for (int k = 0; k < (*alpha)[i]; ++k) out = out * Expr(Gen::param(kOperatorParamBase + i));
      }
      return out;
    }
    if (auto g = ctx.resolve(name)) return Expr(*g);
    if (ctx.find_function(name)) fail(id.pos, "function '" + name + "' used without arguments");
    auto us = name.find('_');
    if (us != std::string::npos && us > 0 && ctx.find_dependent(name.substr(0, us))) {
      fail(id.pos, "jet suffix '" + name.substr(us + 1) + "' of '" + name +
                       "' references an undeclared independent variable");
    }
    fail(id.pos, "undeclared identifier '" + name + "'");
  }

  const std::vector<Token>& toks_;
  ExprEnv env_;
  std::size_t i_ = 0;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------

struct Section {
  std::string keyword;
  std::vector<std::string> args;
  Pos pos;
  std::vector<Item> items;
};

bool continues(const std::string& text) {
  int depth = 0;
  for (char c : text) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
  }
  if (depth > 0) return true;
  auto last = text.find_last_not_of(" \t");
  return last != std::string::npos && std::string_view("+-*/^=,([").find(text[last]) != std::string_view::npos;
}

std::vector<Section> split_sections(std::string_view text) {
  std::vector<Section> out;
  int line_no = 0;
  std::size_t start = 0;
  bool join_all = false;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t");

    std::string body;
    Pos body_pos;
    if (first == 0) {
      auto colon = line.find(':');
      if (colon == std::string::npos) fail(Pos{line_no, 1}, "expected a section header ending in ':'");
      Section s;
      s.pos = Pos{line_no, 1};
      std::stringstream words(line.substr(0, colon));
      std::string w;
      words >> s.keyword;
      while (words >> w) s.args.push_back(w);
      for (char c : s.keyword) {
        if (!ident_char(c)) fail(s.pos, "malformed section header '" + s.keyword + "'");
      }
      join_all = s.keyword == "lagrangian";
      out.push_back(std::move(s));
      auto b = line.find_first_not_of(" \t", colon + 1);
      if (b == std::string::npos) continue;
      body = line.substr(b, last + 1 - b);
      body_pos = Pos{line_no, static_cast<int>(b) + 1};
    } else {
      if (out.empty()) fail(Pos{line_no, static_cast<int>(first) + 1}, "indented line outside of any section");
      body = line.substr(first, last + 1 - first);
      body_pos = Pos{line_no, static_cast<int>(first) + 1};
    }
    auto& items = out.back().items;
    if (!items.empty() && (join_all || continues(items.back().text))) {
      Pos sep = items.back().end;
      items.back().append(" ", sep);
      items.back().append(body, body_pos);
    } else {
      Item it;
      it.append(body, body_pos);
      items.push_back(std::move(it));
    }
  }
  return out;
}

std::vector<std::pair<std::string, Pos>> comma_list(const Item& item) {
  std::vector<std::pair<std::string, Pos>> out;
  std::string cur;
  Pos cur_pos = item.at(0);
  bool started = false;
  for (std::size_t i = 0; i <= item.text.size(); ++i) {
    if (i == item.text.size() || item.text[i] == ',') {
      auto a = cur.find_first_not_of(" \t");
      if (a == std::string::npos) fail(i == item.text.size() ? item.end : item.at(i), "empty name in list");
      auto b = cur.find_last_not_of(" \t");
      out.emplace_back(cur.substr(a, b + 1 - a), cur_pos);
      cur.clear();
      started = false;
    } else {
      if (!started && item.text[i] != ' ' && item.text[i] != '\t') {
        cur_pos = item.at(i);
        started = true;
      }
      cur.push_back(item.text[i]);
    }
  }
  return out;
}

bool valid_name(const std::string& s, bool allow_underscore) {
  if (s.empty() || !ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || (allow_underscore && c == '_');
  });
}

const std::set<std::string> kReserved = {"sqrt", "identity", "D"};

class FileParser {
 public:
  explicit FileParser(std::string_view text) : sections_(split_sections(text)) {}

  SystemFile run() {
    static const std::set<std::string> known = {
        "independent", "dependent", "nonlocal",  "constants",        "functions", "positive",
        "equations",   "constraints", "lagrangian", "operator",     "conservation_law", "symmetry",
        "kovalevskaya", "oracle",   "covering"};
    for (const auto& s : sections_) {
      if (!known.count(s.keyword)) fail(s.pos, "unknown section '" + s.keyword + "'");
    }
    for (const char* kw : {"independent", "dependent", "nonlocal", "constants", "functions"}) {
      for (const auto& s : sections_) {
        if (s.keyword == kw) declare(s);
      }
    }
    for (const auto& s : sections_) {
      if (s.keyword == "oracle") oracle(s);
      if (s.keyword == "positive") positive(s);
    }
    for (const auto& s : sections_) content(s);
    for (const auto& s : sections_) {
      if (s.keyword == "covering") covering(s);
    }
    return std::move(file_);
  }

 private:
  Context& ctx() { return *file_.ctx; }

  void no_args(const Section& s) {
    if (!s.args.empty()) fail(s.pos, "section '" + s.keyword + "' takes no arguments");
  }

  void check_fresh(const std::string& name, Pos p) {
    if (ctx().is_declared(name)) fail(p, "duplicate declaration '" + name + "'");
    if (kReserved.count(name)) fail(p, "'" + name + "' is a reserved name");
  }

  void declare(const Section& s) {
    no_args(s);
    for (const auto& item : s.items) {
      for (const auto& [entry, p] : comma_list(item)) {
        if (s.keyword == "independent") {
          if (!valid_name(entry, false)) fail(p, "invalid independent variable name '" + entry + "'");
          check_fresh(entry, p);
          if (ctx().dim() >= kMaxIndependent) {
            fail(p, "at most " + std::to_string(kMaxIndependent) + " independent variables are supported");
          }
          ctx().independents.push_back(entry);
        } else if (s.keyword == "dependent" || s.keyword == "nonlocal") {
          if (!valid_name(entry, false)) {
            fail(p, "invalid dependent variable name '" + entry + "' (names may not contain '_')");
          }
          check_fresh(entry, p);
          if (s.keyword == "nonlocal") file_.nonlocal.push_back(ctx().num_dependents());
          ctx().dependents.push_back(entry);
        } else if (s.keyword == "constants") {
          std::stringstream ws(entry);
          std::string name, flag;
          ws >> name;
          if (!valid_name(name, true)) fail(p, "invalid constant name '" + name + "'");
          check_fresh(name, p);
          ctx().constants.push_back(ConstantDecl{name});
          while (ws >> flag) {
            if (flag != "positive") fail(p, "unknown constant flag '" + flag + "'");
            ctx().positive.insert(Gen::constant(ctx().num_constants() - 1));
          }
        } else {
          function_decl(entry, p);
        }
      }
    }
  }

  void function_decl(const std::string& entry, Pos p) {
    std::string name = entry;
    int arity = 1;
    int order = 0;
    auto paren = name.find('(');
    if (paren != std::string::npos) {
      if (name.back() != ')') fail(p, "malformed function declaration '" + entry + "'");
      std::string n = name.substr(paren + 1, name.size() - paren - 2);
      if (n.empty() || n.size() > 2 || !std::all_of(n.begin(), n.end(), ::isdigit) || std::stoi(n) < 1) {
        fail(p, "function arity must be a positive integer");
      }
      arity = std::stoi(n);
      name = name.substr(0, paren);
    }
    auto q = name.find('\'');
    if (q != std::string::npos) {
      if (name.find_first_not_of('\'', q) != std::string::npos) fail(p, "malformed function name '" + entry + "'");
      order = static_cast<int>(name.size() - q);
      name = name.substr(0, q);
      if (arity != 1) fail(p, "derivative primes apply to unary functions only");
    }
    if (!valid_name(name, false)) fail(p, "invalid function name '" + name + "'");
    if (auto f = ctx().find_function(name)) {
      auto& decl = ctx().functions[static_cast<std::size_t>(*f)];
      if (decl.arity != arity) fail(p, "conflicting arity for function '" + name + "'");
      decl.declared_order = std::max(decl.declared_order, order);
      return;
    }
    check_fresh(name, p);
    ctx().functions.push_back(FunctionDecl{name, arity, order});
  }

  void positive(const Section& s) {
    no_args(s);
    for (const auto& item : s.items) {
      for (const auto& [name, p] : comma_list(item)) {
        auto g = ctx().resolve(name);
        if (!g || g->kind() == GenKind::Independent) {
          fail(p, "positive: '" + name + "' is not a declared constant, dependent variable or jet coordinate");
        }
        ctx().positive.insert(*g);
      }
    }
  }

  void oracle(const Section& s) {
    no_args(s);
    for (const auto& item : s.items) {
      auto toks = tokenize(item);
      ExprParser head(toks, ExprEnv{&ctx()});
      Pos p = head.peek().pos;
      std::string name = head.identifier("a function name");
      auto f = ctx().find_function(name);
      if (!f) fail(p, "undeclared function '" + name + "'");
      head.expect("(");
      std::vector<std::string> params;
      std::map<std::string, int> slots;
      if (!head.peek().is(")")) {
        do {
          Pos pp = head.peek().pos;
          std::string param = head.identifier("a parameter name");
          if (!valid_name(param, false)) fail(pp, "invalid parameter name '" + param + "'");
          if (slots.count(param)) fail(pp, "repeated parameter '" + param + "'");
          slots[param] = static_cast<int>(params.size());
          params.push_back(param);
        } while (head.accept(","));
      }
      head.expect(")");
      const auto& decl = ctx().functions[static_cast<std::size_t>(*f)];
      if (static_cast<int>(params.size()) != decl.arity) {
        fail(p, "arity mismatch: function '" + name + "' expects " + std::to_string(decl.arity) + " argument(s)");
      }
      head.expect("=");
      Expr e = parse_rest(toks, head, ExprEnv{&ctx(), false, &slots});
      if (ctx().test_functions.count(*f)) fail(p, "test function for '" + name + "' defined twice");
      ctx().test_functions[*f] = TestFunction{e, params};
    }
  }

  // Parse the remaining tokens of `from` as one expression under env.
  static Expr parse_rest(const std::vector<Token>& toks, ExprParser& from, ExprEnv env) {
    std::vector<Token> rest;
    bool copying = false;
    const Token* cur = &from.peek();
    for (const auto& t : toks) {
      if (&t == cur) copying = true;
      if (copying) rest.push_back(t);
    }
    ExprParser p(rest, env);
    Expr e = p.expr();
    p.expect_end();
    return e;
  }

  Expr expression(const Item& item) {
    auto toks = tokenize(item);
    ExprParser p(toks, ExprEnv{&ctx()});
    Expr e = p.expr();
    p.expect_end();
    return e;
  }

  Expr equation(const Item& item) {
    auto toks = tokenize(item);
    ExprParser p(toks, ExprEnv{&ctx()});
    Expr lhs = p.expr();
    if (p.peek().is("=")) {
      Pos eq = p.next().pos;
      Expr rhs = p.expr();
      p.expect_end();
      try {
        return lhs - rhs;
      } catch (const std::exception& e) {
        fail(eq, e.what());
      }
    }
    p.expect_end();
    return lhs;
  }

  void content(const Section& s) {
    const std::string& kw = s.keyword;
    if (kw == "equations" || kw == "constraints") {
      no_args(s);
      auto& dst = kw == "equations" ? file_.equations : file_.constraints;
      for (const auto& item : s.items) dst.push_back(equation(item));
    } else if (kw == "lagrangian") {
      no_args(s);
      if (file_.lagrangian) fail(s.pos, "only one lagrangian section is allowed");
      if (s.items.empty()) fail(s.pos, "empty lagrangian section");
      file_.lagrangian = expression(s.items.front());
    } else if (kw == "operator") {
      operator_section(s);
    } else if (kw == "conservation_law") {
      law_section(s);
    } else if (kw == "symmetry") {
      symmetry_section(s);
    } else if (kw == "kovalevskaya") {
      kovalevskaya_section(s);
    }
  }

  std::string section_name(const Section& s, std::size_t max_args = 1) {
    if (s.args.empty()) fail(s.pos, "section '" + s.keyword + "' needs a name");
    if (s.args.size() > max_args) fail(s.pos, "too many arguments to section '" + s.keyword + "'");
    if (!valid_name(s.args[0], true)) fail(s.pos, "invalid name '" + s.args[0] + "'");
    return s.args[0];
  }

  void operator_section(const Section& s) {
    std::string name = section_name(s);
    for (const auto& o : file_.operators) {
      if (o.name == name) fail(s.pos, "operator '" + name + "' defined twice");
    }
    std::vector<std::vector<TotalDiffOp::Entry>> rows;
    for (const auto& item : s.items) {
      auto toks = tokenize(item);
      ExprParser p(toks, ExprEnv{&ctx(), true});
      p.expect("[");
      std::vector<TotalDiffOp::Entry> row;
      do {
        Pos ep = p.peek().pos;
        Expr e = p.expr();
        row.push_back(to_entry(e, ep));
      } while (p.accept(","));
      p.expect("]");
      p.expect_end();
      if (!rows.empty() && row.size() != rows.front().size()) fail(item.at(0), "operator rows differ in length");
      rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(s.pos, "operator '" + name + "' has no rows");
    TotalDiffOp op(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), ctx().dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < rows[i].size(); ++j) op.set_entry(static_cast<int>(i), static_cast<int>(j), rows[i][j]);
    }
    file_.operators.push_back(NamedOperator{name, std::move(op)});
  }

 public:
  // Split an expression in formal D symbols into coefficient * D_alpha terms.
  static TotalDiffOp::Entry to_entry(const Expr& e, Pos p, int dim) {
    auto is_d = [](const Gen& g) { return g.kind() == GenKind::Param && g.index() >= kOperatorParamBase; };
    for (const auto& [f, k] : e.data().den) {
      for (const Gen& g : f.generators()) {
        if (is_d(g)) fail(p, "derivative symbols may not appear in a denominator");
      }
    }
    std::map<MultiIndex, Poly> parts;
    for (const auto& [m, c] : e.data().num.terms()) {
      MultiIndex alpha(dim);
      Monomial rest;
      for (const auto& [g, k] : m.factors()) {
        if (g.is_atom()) {
          for (const Gen& inner : gens_of(Expr(g), true)) {
            if (is_d(inner)) fail(p, "derivative symbols may only appear as factors");
          }
        }
        if (is_d(g)) {
          if (k < 0) fail(p, "negative power of a derivative symbol");
          alpha = alpha.plus_unit(g.index() - kOperatorParamBase, k);
        } else {
          rest = rest * Monomial::of(g, k);
        }
      }
      parts[alpha] = parts[alpha] + Poly::monomial(rest, c);
    }
    TotalDiffOp::Entry out;
    for (auto& [alpha, poly] : parts) {
      Expr coef = make_expr(std::move(poly), e.data().den);
      if (!coef.is_zero()) out.emplace(alpha, coef);
    }
    return out;
  }

 private:
  TotalDiffOp::Entry to_entry(const Expr& e, Pos p) { return to_entry(e, p, ctx().dim()); }

  void law_section(const Section& s) {
    std::string name = section_name(s);
    for (const auto& l : file_.laws) {
      if (l.name == name) fail(s.pos, "conservation law '" + name + "' defined twice");
    }
    NamedLaw law{name, std::vector<Expr>(static_cast<std::size_t>(ctx().dim()))};
    std::set<int> seen;
    for (const auto& item : s.items) {
      auto toks = tokenize(item);
      ExprParser p(toks, ExprEnv{&ctx()});
      Pos vp = p.peek().pos;
      std::string var = p.identifier("an independent variable");
      auto i = ctx().find_independent(var);
      if (!i) fail(vp, "'" + var + "' is not an independent variable");
      if (!seen.insert(*i).second) fail(vp, "component '" + var + "' given twice");
      p.expect(":");
      Expr e = p.expr();
      p.expect_end();
      law.components[static_cast<std::size_t>(*i)] = e;
    }
    file_.laws.push_back(std::move(law));
  }

  void symmetry_section(const Section& s) {
    std::string name = section_name(s, 2);
    bool fiber = false;
    if (s.args.size() == 2) {
      if (s.args[1] != "fiber") fail(s.pos, "unknown symmetry flag '" + s.args[1] + "'");
      fiber = true;
    }
    for (const auto& sym : file_.symmetries) {
      if (sym.name == name) fail(s.pos, "symmetry '" + name + "' defined twice");
    }
    NamedSymmetry sym{name, std::vector<Expr>(static_cast<std::size_t>(ctx().num_dependents())), fiber};
    std::set<int> seen;
    for (const auto& item : s.items) {
      auto toks = tokenize(item);
      ExprParser p(toks, ExprEnv{&ctx()});
      Pos vp = p.peek().pos;
      std::string var = p.identifier("a dependent variable");
      auto j = ctx().find_dependent(var);
      if (!j) fail(vp, "'" + var + "' is not a dependent variable");
      if (!seen.insert(*j).second) fail(vp, "component '" + var + "' given twice");
      p.expect(":");
      Expr e = p.expr();
      p.expect_end();
      sym.components[static_cast<std::size_t>(*j)] = e;
    }
    file_.symmetries.push_back(std::move(sym));
  }

  void kovalevskaya_section(const Section& s) {
    if (file_.kovalevskaya) fail(s.pos, "only one kovalevskaya section is allowed");
    if (s.args.size() != 1) fail(s.pos, "kovalevskaya section needs exactly one direction");
    auto dir = ctx().find_independent(s.args[0]);
    if (!dir) fail(s.pos, "direction '" + s.args[0] + "' is not an independent variable");
    KovalevskayaData kd;
    kd.direction = *dir;
    kd.orders.assign(static_cast<std::size_t>(ctx().num_dependents()), 0);
    kd.rhs.assign(static_cast<std::size_t>(ctx().num_dependents()), Expr());
    for (const auto& item : s.items) {
      auto toks = tokenize(item);
      ExprParser p(toks, ExprEnv{&ctx()});
      Pos lp = p.peek().pos;
      std::string lhs = p.identifier("a leading derivative");
      auto g = ctx().resolve(lhs);
      if (!g || !g->is_jet()) fail(lp, "'" + lhs + "' is not a jet coordinate");
      int k = g->alpha()[*dir];
      if (k < 1 || g->alpha().order() != k) {
        fail(lp, "left side must be a pure derivative in direction '" + s.args[0] + "'");
      }
      auto j = static_cast<std::size_t>(g->index());
      if (kd.orders[j] != 0) fail(lp, "dependent variable '" + ctx().dependents[j] + "' solved twice");
      p.expect("=");
      Expr rhs = p.expr();
      p.expect_end();
      kd.orders[j] = k;
      kd.rhs[j] = rhs;
    }
    for (std::size_t j = 0; j < kd.orders.size(); ++j) {
      if (kd.orders[j] == 0) {
        fail(s.pos, "kovalevskaya section must solve every dependent variable (missing '" + ctx().dependents[j] + "')");
      }
    }
    file_.kovalevskaya = std::move(kd);
  }

  void covering(const Section& s) {
    no_args(s);
    if (file_.covering) fail(s.pos, "only one covering section is allowed");
    if (s.items.size() != 1) fail(s.pos, "covering section takes one line");
    const Item& item = s.items.front();
    std::stringstream ws(item.text);
    CoveringSpec spec;
    ws >> spec.type;
    if (spec.type != "lagrangian" && spec.type != "potential") {
      fail(item.at(0), "covering type must be 'lagrangian' or 'potential'");
    }
    std::string kv;
    while (ws >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) fail(item.at(0), "expected key=value in covering section, found '" + kv + "'");
      std::string key = kv.substr(0, eq);
      std::string value = kv.substr(eq + 1);
      if (key == "density") {
        spec.density = value;
      } else if (key == "velocity") {
        std::stringstream vs(value);
        std::string v;
        while (std::getline(vs, v, ',')) spec.velocity.push_back(v);
      } else if (key == "law") {
        spec.law = value;
      } else {
        fail(item.at(0), "unknown covering key '" + key + "'");
      }
    }
    auto check_dep = [&](const std::string& n) {
      if (!ctx().find_dependent(n)) fail(item.at(0), "covering role '" + n + "' is not a dependent variable");
    };
    if (spec.type == "lagrangian") {
      check_dep(spec.density);
      for (const auto& v : spec.velocity) check_dep(v);
    } else {
      bool found = std::any_of(file_.laws.begin(), file_.laws.end(), [&](const NamedLaw& l) { return l.name == spec.law; });
      if (!found) fail(item.at(0), "unknown conservation law '" + spec.law + "'");
    }
    file_.covering = std::move(spec);
  }

  std::vector<Section> sections_;
  SystemFile file_;
};

Item single_line(std::string_view text) {
  Item it;
  it.append(text, Pos{1, 1});
  return it;
}

}  // namespace

// ---------------------------------------------------------------------------

PdeSystem SystemFile::system() const {
  PdeSystem s;
  s.ctx = ctx;
  s.equations = equations;
  s.constraints = constraints;
  s.kovalevskaya = kovalevskaya;
  return s;
}

TotalDiffOp SystemFile::find_operator(const std::string& name) const {
  for (const auto& o : operators) {
    if (o.name == name) return o.op;
  }
  if (name == "identity") return TotalDiffOp::identity(ctx->num_dependents(), ctx->dim());
  throw ExprError("unknown operator '" + name + "'");
}

const NamedLaw& SystemFile::find_law(const std::string& name) const {
  for (const auto& l : laws) {
    if (l.name == name) return l;
  }
  throw ExprError("unknown conservation law '" + name + "'");
}

const NamedSymmetry& SystemFile::find_symmetry(const std::string& name) const {
  for (const auto& s : symmetries) {
    if (s.name == name) return s;
  }
  throw ExprError("unknown symmetry '" + name + "'");
}

SystemFile parse_system(std::string_view text) {
  try {
    FileParser p(text);
    return p.run();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(1, 1, e.what());
  }
}

Expr parse_expression(std::string_view text, const Context& ctx) {
  Item item = single_line(text);
  auto toks = tokenize(item);
  ExprParser p(toks, ExprEnv{&ctx});
  Expr e = p.expr();
  p.expect_end();
  return e;
}

TotalDiffOp::Entry parse_operator_entry(std::string_view text, const Context& ctx) {
  Item item = single_line(text);
  auto toks = tokenize(item);
  ExprParser p(toks, ExprEnv{&ctx, true});
  Expr e = p.expr();
  p.expect_end();
  return FileParser::to_entry(e, Pos{1, 1}, ctx.dim());
}

std::string print_system(const SystemFile& file) {
  const Context& ctx = *file.ctx;
  std::ostringstream os;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
  };
  std::set<int> nonlocal(file.nonlocal.begin(), file.nonlocal.end());
  os << "independent: " << join(ctx.independents) << "\n";
  std::vector<std::string> deps, nl;
  for (int j = 0; j < ctx.num_dependents(); ++j) {
    (nonlocal.count(j) ? nl : deps).push_back(ctx.dependents[static_cast<std::size_t>(j)]);
  }
  if (!deps.empty()) os << "dependent: " << join(deps) << "\n";
  if (!nl.empty()) os << "nonlocal: " << join(nl) << "\n";
  if (!ctx.constants.empty()) {
    std::vector<std::string> cs;
    for (int k = 0; k < ctx.num_constants(); ++k) {
      std::string c = ctx.constants[static_cast<std::size_t>(k)].name;
      if (ctx.positive.count(Gen::constant(k))) c += " positive";
      cs.push_back(c);
    }
    os << "constants: " << join(cs) << "\n";
  }
  if (!ctx.functions.empty()) {
    std::vector<std::string> fs;
    for (const auto& f : ctx.functions) {
      if (f.arity == 1) {
        for (int k = 0; k <= f.declared_order; ++k) fs.push_back(f.name + std::string(static_cast<std::size_t>(k), '\''));
      } else {
        fs.push_back(f.name + "(" + std::to_string(f.arity) + ")");
      }
    }
    os << "functions: " << join(fs) << "\n";
  }
  std::vector<std::string> pos;
  for (const Gen& g : ctx.positive) {
    if (g.kind() != GenKind::Constant) pos.push_back(ctx.gen_name(g));
  }
  if (!pos.empty()) os << "positive: " << join(pos) << "\n";
  if (file.covering) {
    const auto& c = *file.covering;
    os << "covering: " << c.type;
    if (c.type == "lagrangian") {
      os << " density=" << c.density << " velocity=";
      for (std::size_t i = 0; i < c.velocity.size(); ++i) os << (i ? "," : "") << c.velocity[i];
    } else {
      os << " law=" << c.law;
    }
    os << "\n";
  }
  auto block = [&](const char* header, const std::vector<Expr>& eqs) {
    if (eqs.empty()) return;
    os << "\n" << header << ":\n";
    for (const auto& e : eqs) os << "  " << format(e, ctx) << " = 0\n";
  };
  block("equations", file.equations);
  block("constraints", file.constraints);
  if (file.kovalevskaya) {
    const auto& kd = *file.kovalevskaya;
    os << "\nkovalevskaya " << ctx.independents[static_cast<std::size_t>(kd.direction)] << ":\n";
    for (std::size_t j = 0; j < kd.orders.size(); ++j) {
      MultiIndex a = MultiIndex::unit(ctx.dim(), kd.direction).plus_unit(kd.direction, kd.orders[j] - 1);
      os << "  " << ctx.jet_name(static_cast<int>(j), a) << " = " << format(kd.rhs[j], ctx) << "\n";
    }
  }
  if (file.lagrangian) os << "\nlagrangian:\n  " << format(*file.lagrangian, ctx) << "\n";
  for (const auto& o : file.operators) {
    os << "\noperator " << o.name << ":\n";
    std::string rows = format(o.op, ctx);
    std::stringstream rs(rows);
    std::string line;
    while (std::getline(rs, line)) os << "  " << line << "\n";
  }
  for (const auto& l : file.laws) {
    os << "\nconservation_law " << l.name << ":\n";
    for (int i = 0; i < ctx.dim(); ++i) {
      os << "  " << ctx.independents[static_cast<std::size_t>(i)] << ": "
         << format(l.components[static_cast<std::size_t>(i)], ctx) << "\n";
    }
  }
  for (const auto& s : file.symmetries) {
    os << "\nsymmetry " << s.name << (s.fiber ? " fiber" : "") << ":\n";
    for (std::size_t j = 0; j < s.components.size(); ++j) {
      if (s.components[j].is_zero()) continue;
      os << "  " << ctx.dependents[j] << ": " << format(s.components[j], ctx) << "\n";
    }
  }
  if (!ctx.test_functions.empty()) {
    os << "\noracle:\n";
    for (const auto& [f, tf] : ctx.test_functions) {
      Context local = ctx;
      for (std::size_t k = 0; k < tf.params.size(); ++k) local.param_names[static_cast<int>(k)] = tf.params[k];
      os << "  " << ctx.functions[static_cast<std::size_t>(f)].name << "(" << join(tf.params)
         << ") = " << format(tf.body, local) << "\n";
    }
  }
  return os.str();
}

}  // namespace jetcalc
