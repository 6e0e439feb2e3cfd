#include <doctest.h>

#include "support.hpp"

using namespace jt;

namespace {

MultiIndex d(int dim, int slot, int count = 1) { return MultiIndex::unit(dim, slot, count); }

TotalDiffOp scalar(const Expr& c, const MultiIndex& a) { return TotalDiffOp::term(c, a); }

}  // namespace

TEST_CASE("apply examples") {
  auto ctx = scratch_context(2, 1);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  CHECK(apply_operator(TotalDiffOp::identity(1, 2), {p("u_x")}) == std::vector<Expr>{p("u_x")});
  TotalDiffOp l = scalar(1, d(2, 0)) + scalar(p("u"), d(2, 1)) + scalar(p("u_x"), MultiIndex(2));
  CHECK(apply_operator(l, {Expr(1)}) == std::vector<Expr>{p("u_x")});
  CHECK(apply_operator(scalar(1, d(2, 1, 2)), {p("u^2")}) == std::vector<Expr>{p("2*u_x^2 + 2*u*u_xx")});
  CHECK_THROWS_AS(apply_operator(l, {Expr(1), Expr(2)}), ShapeError);
}

TEST_CASE("compose examples") {
  auto ctx = scratch_context(2, 1);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  TotalDiffOp dx = scalar(1, d(2, 1));
  TotalDiffOp dt = scalar(1, d(2, 0));
  TotalDiffOp mul_u = scalar(p("u"), MultiIndex(2));
  CHECK(compose(dx, mul_u) == scalar(p("u"), d(2, 1)) + scalar(p("u_x"), MultiIndex(2)));
  CHECK(format(compose(dx, mul_u), *ctx) == "[u*D_x + u_x]");
  TotalDiffOp any = scalar(p("u_x*t"), d(2, 0, 2)) + scalar(p("u^2"), d(2, 1));
  CHECK(compose(TotalDiffOp::identity(1, 2), any) == any);
  CHECK(compose(dx, dt) == scalar(1, d(2, 0).plus_unit(1)));
  CHECK(compose(dx, dt) == compose(dt, dx));
  CHECK_THROWS_AS(compose(TotalDiffOp::identity(2, 2), any), ShapeError);
}

TEST_CASE("adjoint examples") {
  auto ctx = scratch_context(2, 1);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  CHECK(adjoint(scalar(1, d(2, 1))) == scalar(-1, d(2, 1)));
  TotalDiffOp a = scalar(p("x*u^2 + u"), MultiIndex(2));
  CHECK(adjoint(a) == a);
  CHECK(adjoint(scalar(p("u"), d(2, 1))) == scalar(p("-u"), d(2, 1)) + scalar(p("-u_x"), MultiIndex(2)));
}

TEST_CASE("adjoint of a matrix operator transposes") {
  auto ctx = scratch_context(2, 2);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  TotalDiffOp op(2, 2, 2);
  op.add_term(0, 1, d(2, 1), p("v"));
  TotalDiffOp adj = adjoint(op);
  CHECK(adj.entry(0, 1).empty());
  CHECK(format_entry(adj.entry(1, 0), *ctx) == "-v*D_x - v_x");
}

TEST_CASE("linearization examples") {
  auto ctx = scratch_context(2, 1);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  TotalDiffOp l = linearize({p("u_t + u*u_x")}, 1, 2);
  CHECK(l == scalar(1, d(2, 0)) + scalar(p("u"), d(2, 1)) + scalar(p("u_x"), MultiIndex(2)));
  CHECK(linearize({p("u_t - u_xx")}, 1, 2) == scalar(1, d(2, 0)) - scalar(1, d(2, 1, 2)));
  TotalDiffOp w = linearize({p("u_tt - u_xx")}, 1, 2);
  CHECK(w == scalar(1, d(2, 0, 2)) - scalar(1, d(2, 1, 2)));
  CHECK(adjoint(w) == w);
  PdeSystem kdv = load_corpus("kdv.pde").system();
  CHECK(format(linearize(kdv), *kdv.ctx) == "[D_xxx + D_t + u*D_x + u_x]");
  CHECK(format(adjoint(linearize(kdv)), *kdv.ctx) == "[-D_xxx - D_t - u*D_x]");
}

TEST_CASE("on-shell operator comparison") {
  PdeSystem heat = load_corpus("heat.pde").system();
  auto p = [&](const std::string& s) { return parse_expression(s, *heat.ctx); };
  TotalDiffOp any = scalar(p("u_x"), d(2, 1)) + scalar(p("u"), d(2, 0));
  CHECK(op_equals_on_shell(any, any, heat).evidence.verdict == Verdict::ProvedEqual);
  CHECK(op_equals_on_shell(scalar(p("u_xx"), MultiIndex(2)), scalar(p("u_t"), MultiIndex(2)), heat)
            .evidence.verdict == Verdict::ProvedEqual);
  // D_x^2 and D_t act on arbitrary test functions, which are not subject to the equation.
  auto c = op_equals_on_shell(scalar(1, d(2, 1, 2)), scalar(1, d(2, 0)), heat);
  CHECK(c.evidence.verdict == Verdict::ProvedUnequal);
  // The same conclusion from generic test vectors evaluated at on-shell points.
  Expr phi(Gen::param(0));
  std::map<Gen, Expr> none;
  PdeSystem no_shell = heat;
  no_shell.kovalevskaya.reset();
  CHECK_THROWS_WITH_AS(op_equals_on_shell(any, any, no_shell), "on-shell comparison requires Kovalevskaya form",
                       ExprError);
}

TEST_CASE("apply on a test vector agrees with the on-shell verdict") {
  // Acting on u itself (a solution), D_x^2 and D_t agree on-shell.
  PdeSystem heat = load_corpus("heat.pde").system();
  auto p = [&](const std::string& s) { return parse_expression(s, *heat.ctx); };
  Expr diff = apply_operator(scalar(1, d(2, 1, 2)) - scalar(1, d(2, 0)), {p("u")})[0];
  CHECK(on_shell_reduce(diff, heat).is_zero());
  CHECK(on_shell_identity_test(diff, heat).verdict == Verdict::ProbablyEqual);
  // Acting on a generic function of the jets they differ.
  Expr g = apply_operator(scalar(1, d(2, 1, 2)) - scalar(1, d(2, 0)), {p("u_x^2")})[0];
  CHECK(on_shell_identity_test(g, heat).verdict == Verdict::ProvedUnequal);
}

TEST_CASE("adjoint is an involution and reverses composition" * doctest::timeout(300)) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 3);
  auto ctx = scratch_context(2, 3);
  for (int n = 0; n < 30; ++n) {
    int r = size(rng), k = size(rng), c = size(rng);
    auto leaves = jet_leaves(2, 1, 1, true);
    TotalDiffOp a = random_operator(rng, r, k, 2, leaves, 3, 2);
    TotalDiffOp b = random_operator(rng, k, c, 2, leaves, 3, 2);
    CHECK(op_equals(adjoint(adjoint(a)), a, *ctx).evidence.verdict == Verdict::ProvedEqual);
    CHECK(op_equals(adjoint(compose(a, b)), compose(adjoint(b), adjoint(a)), *ctx).evidence.verdict ==
          Verdict::ProvedEqual);
  }
}

TEST_CASE("compose agrees with applying twice" * doctest::timeout(300)) {
  std::mt19937_64 rng(32);
  auto ctx = scratch_context(2, 2);
  auto leaves = jet_leaves(2, 2, 1, true);
  for (int n = 0; n < 15; ++n) {
    TotalDiffOp a = random_operator(rng, 2, 2, 2, leaves, 2, 2);
    TotalDiffOp b = random_operator(rng, 2, 2, 2, leaves, 2, 2);
    std::vector<Expr> phi{random_polynomial(rng, leaves, 3, 2), random_polynomial(rng, leaves, 3, 2)};
    auto lhs = apply_operator(compose(a, b), phi);
    auto rhs = apply_operator(a, apply_operator(b, phi));
    for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(equals(lhs[i], rhs[i], *ctx).verdict == Verdict::ProvedEqual);
  }
}

TEST_CASE("apply is linear over rationals") {
  std::mt19937_64 rng(33);
  auto leaves = jet_leaves(2, 1, 1, true);
  TotalDiffOp a = random_operator(rng, 1, 1, 2, leaves, 3, 3);
  Expr f = random_polynomial(rng, leaves, 3, 2);
  Expr g = random_polynomial(rng, leaves, 3, 2);
  Rational q(3, 7);
  CHECK(apply_operator(a, {f + q * g})[0] == apply_operator(a, {f})[0] + q * apply_operator(a, {g})[0]);
}

TEST_CASE("Lagrange identity through the divergence witness" * doctest::timeout(300)) {
  std::mt19937_64 rng(34);
  auto ctx = scratch_context(2, 1);
  auto leaves = jet_leaves(2, 1, 1, true);
  for (int n = 0; n < 15; ++n) {
    TotalDiffOp op = random_operator(rng, 1, 1, 2, leaves, 3, 3);
    Expr phi = random_polynomial(rng, leaves, 3, 2);
    Expr psi = random_polynomial(rng, leaves, 3, 2);
    Expr lhs = psi * apply_operator(op, {phi})[0] - apply_operator(adjoint(op), {psi})[0] * phi;
    auto w = lagrange_divergence_witness(op, phi, psi);
    REQUIRE(w.size() == 2);
    Expr div = total_derivative(w[0], 0) + total_derivative(w[1], 1);
    CHECK(random_identity_test(lhs, div, *ctx).verdict == Verdict::ProbablyEqual);
    CHECK(equals(lhs, div, *ctx).verdict == Verdict::ProvedEqual);
  }
}

TEST_CASE("operator printing") {
  auto ctx = scratch_context(2, 1);
  auto p = [&](const std::string& s) { return parse_expression(s, *ctx); };
  TotalDiffOp op = scalar(p("u + 1"), d(2, 1)) + scalar(-2, d(2, 0, 2));
  CHECK(format(op, *ctx) == "[-2*D_tt + (u + 1)*D_x]");
  CHECK(format(TotalDiffOp(1, 2, 2), *ctx) == "[0, 0]");
  CHECK(parse_operator_entry("(u + 1)*D_x - 2*D_tt", *ctx) == op.entry(0, 0));
}
