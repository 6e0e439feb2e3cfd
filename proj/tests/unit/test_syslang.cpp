#include <doctest.h>

#include "support.hpp"

using namespace jt;

namespace {

const std::vector<std::string> kCorpus{"heat.pde",
                                       "wave.pde",
                                       "kdv.pde",
                                       "navier_stokes.pde",
                                       "mass_conservation_3d.pde",
                                       "gas_1d_euler.pde",
                                       "gas_2d_euler.pde",
                                       "gas_1d_lagrangian.pde",
                                       "gas_1d_covering.pde",
                                       "green_naghdi_lagrangian.pde"};

ParseError parse_error(const std::string& text) {
  try {
    parse_system(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("no parse error for: " << text);
  return ParseError(0, 0, "");
}

const std::string kHead = "independent: t, x\ndependent: u\n";

}  // namespace

TEST_CASE("equation example") {
  auto f = parse_text(kHead + "equations:\n  u_t + u*u_x = 0\n");
  REQUIRE(f.equations.size() == 1);
  CHECK(f.equations[0] == jet(0, {1, 0}) + jet(0, {0, 0}) * jet(0, {0, 1}));
  CHECK(parse_text(kHead + "equations: u_t + u*u_x = 0\n").equations == f.equations);
  // a right-hand side is moved to the left
  CHECK(parse_text(kHead + "equations:\n  u_t = -u*u_x\n").equations == f.equations);
}

TEST_CASE("corpus round trips") {
  for (const auto& name : kCorpus) {
    INFO(name);
    SystemFile f = load_corpus(name);
    std::string once = print_system(f);
    SystemFile g = parse_system(once);
    CHECK(print_system(g) == once);
    CHECK(g.equations == f.equations);
    CHECK(g.constraints == f.constraints);
    CHECK(g.ctx->independents == f.ctx->independents);
    CHECK(g.ctx->dependents == f.ctx->dependents);
    CHECK(g.lagrangian.has_value() == f.lagrangian.has_value());
    if (f.lagrangian) CHECK(*g.lagrangian == *f.lagrangian);
    CHECK(g.laws.size() == f.laws.size());
    CHECK(g.symmetries.size() == f.symmetries.size());
  }
}

TEST_CASE("Navier-Stokes golden file") {
  std::string golden = read_text(std::string(JETCALC_GOLDEN_DIR) + "/navier_stokes.pde");
  std::string once = print_system(load_corpus("navier_stokes.pde"));
  CHECK(once == golden);
  CHECK(print_system(parse_system(golden)) == golden);
}

TEST_CASE("Green-Naghdi file declares a derivative chain") {
  SystemFile gn = load_corpus("green_naghdi_lagrangian.pde");
  const Context& ctx = *gn.ctx;
  REQUIRE(gn.lagrangian.has_value());
  CHECK(ctx.find_constant("epsilon").has_value());
  CHECK(ctx.find_constant("g").has_value());
  auto h = ctx.find_function("H");
  REQUIRE(h.has_value());
  Expr hx = parse_expression("H(x)", ctx);
  CHECK(partial(hx, ctx.dependent("x")) == parse_expression("H'(x)", ctx));
  CHECK(partial(partial(partial(hx, ctx.dependent("x")), ctx.dependent("x")), ctx.dependent("x")) ==
        parse_expression("H'''(x)", ctx));
  // reversed declaration order gives the same chain
  std::string text = read_text(corpus_path("green_naghdi_lagrangian.pde"));
  auto at = text.find("functions: H, H', H'', H'''");
  REQUIRE(at != std::string::npos);
  text.replace(at, std::string("functions: H, H', H'', H'''").size(), "functions: H''', H'', H', H");
  SystemFile rev = parse_system(text);
  CHECK(print_system(rev) == print_system(gn));
  CHECK(euler(*rev.lagrangian, 1) == euler(*gn.lagrangian, 1));
}

TEST_CASE("diagnostics carry positions") {
  struct Case {
    std::string text;
    int line;
    int column;
    std::string message;
  };
  std::vector<Case> cases{
      {kHead + "equations:\n  u_t + q = 0\n", 4, 9, "undeclared identifier 'q'"},
      {kHead + "equations:\n  u_t + u_z = 0\n", 4, 9,
       "jet suffix 'z' of 'u_z' references an undeclared independent variable"},
      {kHead + "functions: H\nequations:\n  H(u, u) = 0\n", 5, 3, "arity mismatch: function 'H' expects 1 argument(s), got 2"},
      {kHead + "equations:\n  u_t + * u = 0\n", 4, 9, "expected an expression, found '*'"},
      {kHead + "equations:\n  u_t + (u = 0\n", 4, 12, "expected ')', found '='"},
      {kHead + "bogus:\n  u\n", 3, 1, "unknown section 'bogus'"},
      {"  u_t = 0\n" + kHead, 1, 3, "indented line outside of any section"},
      {"independent: t, t\n", 1, 17, "duplicate declaration 't'"},
      {kHead + "equations:\n  u_t + u$ = 0\n", 4, 10, "unexpected character '$'"},
      {kHead + "constants: c fast\n", 3, 12, "unknown constant flag 'fast'"},
  };
  for (const auto& c : cases) {
    INFO(c.text);
    ParseError e = parse_error(c.text);
    CHECK(e.message().rfind(c.message, 0) == 0);
    CHECK(e.line() == c.line);
    CHECK(e.column() == c.column);
    CHECK(std::string(e.what()).rfind("line " + std::to_string(c.line) + ", column ", 0) == 0);
  }
}

TEST_CASE("parser survives random mutations of the corpus" * doctest::timeout(300)) {
  std::mt19937_64 rng(61);
  const std::string alphabet = "u_tx+-*/^()=:,'{}# \n\t0123456789Hxyzpw.";
  std::uniform_int_distribution<std::size_t> pick_char(0, alphabet.size() - 1);
  int errors = 0, parsed = 0;
  for (const auto& name : kCorpus) {
    std::string base = read_text(corpus_path(name));
    for (int n = 0; n < 150; ++n) {
      std::string text = base;
      std::uniform_int_distribution<int> edits(1, 4);
      for (int k = edits(rng); k > 0; --k) {
        std::uniform_int_distribution<std::size_t> where(0, text.size() - 1);
        std::size_t at = where(rng);
        switch (rng() % 3) {
          case 0: text[at] = alphabet[pick_char(rng)]; break;
          case 1: text.insert(at, 1, alphabet[pick_char(rng)]); break;
          default: text.erase(at, 1); break;
        }
      }
      try {
        SystemFile f = parse_system(text);
        // whatever parses must print and parse again
        CHECK(print_system(parse_system(print_system(f))) == print_system(f));
        ++parsed;
      } catch (const ParseError& e) {
        CHECK(e.line() >= 1);
        CHECK(e.column() >= 1);
        ++errors;
      }
    }
  }
  CHECK(errors > 0);
  CHECK(parsed > 0);
}

TEST_CASE("parser survives random bytes") {
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> byte(1, 255);
  std::uniform_int_distribution<int> len(0, 200);
  for (int n = 0; n < 500; ++n) {
    std::string text;
    for (int k = len(rng); k > 0; --k) text.push_back(static_cast<char>(byte(rng)));
    try {
      parse_system(text);
    } catch (const ParseError& e) {
      CHECK(e.line() >= 1);
      CHECK(e.column() >= 1);
    }
  }
  CHECK_THROWS_AS(parse_system(std::string(100000, '(')), ParseError);
  CHECK_THROWS_AS(parse_system(kHead + "equations:\n  " + std::string(5000, '(') + "u" + std::string(5000, ')') + " = 0\n"),
                  ParseError);
}

TEST_CASE("operator and symmetry blocks") {
  SystemFile f = parse_text(kHead + "equations:\n  u_t - u_xx = 0\noperator Delta:\n  [u*D_x + u_x]\n"
                                    "symmetry shift:\n  u: 1\nconservation_law heat:\n  t: u\n  x: -u_x\n");
  TotalDiffOp op = f.find_operator("Delta");
  CHECK(op.rows() == 1);
  CHECK(format(op, *f.ctx) == "[u*D_x + u_x]");
  CHECK(f.find_operator("identity") == TotalDiffOp::identity(1, 2));
  CHECK_THROWS_AS(f.find_operator("missing"), ExprError);
  CHECK(f.find_symmetry("shift").components == std::vector<Expr>{Expr(1)});
  CHECK(f.find_law("heat").components.size() == 2);
  ParseError e = parse_error(kHead + "operator Delta:\n  [1/D_x]\n");
  CHECK(e.message() == "negative power of a derivative symbol");
  CHECK(parse_error(kHead + "operator Delta:\n  [u/(1 + D_x)]\n").message() ==
        "derivative symbols may not appear in a denominator");
}
