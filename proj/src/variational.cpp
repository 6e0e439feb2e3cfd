#include "jetcalc/variational.hpp"

#include <algorithm>

namespace jetcalc {

namespace {

constexpr int kLambdaParam = 2000;

// On-shell zero test of one expression: exact after reduction, sampled if atoms remain.
Evidence on_shell_zero(const Expr& e, Reducer& reducer, const PdeSystem& system, const OracleOptions& opts,
                       Expr& reduced) {
  reduced = reducer.reduce(e);
  if (reduced.is_zero()) {
    notify_proof(e, Expr(), *system.ctx, &*system.kovalevskaya);
    return Evidence{};
  }
  return equals(reduced, Expr(), *system.ctx, opts);
}

void require_shell(const PdeSystem& system) {
  if (!system.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
}

ComponentCheck check_components(const std::vector<Expr>& values, const PdeSystem& system, const OracleOptions& opts) {
  require_shell(system);
  Reducer reducer(system.kovalevskaya->rules());
  ComponentCheck out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Expr r;
    Evidence ev = on_shell_zero(values[i], reducer, system, opts, r);
    out.values.push_back(r);
    if (ev.verdict == Verdict::ProvedUnequal && out.component < 0) {
      out.evidence = ev;
      out.component = static_cast<int>(i);
      out.residual = r;
    } else if (ev.verdict == Verdict::ProbablyEqual && out.evidence.verdict == Verdict::ProvedEqual) {
      out.evidence = ev;
    }
  }
  return out;
}

}  // namespace

std::vector<Expr> euler(const Expr& lagrangian, int num_dependents) {
  std::vector<Expr> out(static_cast<std::size_t>(num_dependents));
  for (const Gen& g : jets_of(lagrangian)) {
    if (g.index() >= num_dependents) throw ExprError("lagrangian refers to an undeclared dependent variable");
    Expr d = total_derivative(partial(lagrangian, g), g.alpha());
    if (g.alpha().order() % 2) d = -d;
    out[static_cast<std::size_t>(g.index())] += d;
  }
  return out;
}

Expr homotopy_lagrangian(const std::vector<Expr>& equations, int num_dependents, const std::vector<Rational>& shift,
                         int dim) {
  const auto m = static_cast<std::size_t>(num_dependents);
  if (equations.size() != m) throw ExprError("homotopy needs one equation per dependent variable");
  if (!shift.empty() && shift.size() != m) throw ExprError("shift must give one value per dependent variable");
  auto c = [&](int j) { return shift.empty() ? Rational(0) : shift[static_cast<std::size_t>(j)]; };
  Expr lambda(Gen::param(kLambdaParam));
  std::map<Gen, Expr> bindings;
  for (const auto& f : equations) {
    for (const Gen& g : jets_of(f)) {
      if (bindings.count(g)) continue;
      if (g.alpha().is_zero()) {
        bindings.emplace(g, Expr(c(g.index())) + lambda * (Expr(g) - Expr(c(g.index()))));
      } else {
        bindings.emplace(g, lambda * Expr(g));
      }
    }
  }
  Expr integrand;
  for (std::size_t j = 0; j < m && dim < 0; ++j) {
    for (const Gen& g : jets_of(equations[j])) dim = g.alpha().dim();
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (equations[j].is_zero()) continue;
    if (dim < 0) throw ExprError("homotopy needs the number of independent variables");
    Expr u(Gen::jet(static_cast<int>(j), MultiIndex(dim)));
    integrand += (u - Expr(c(static_cast<int>(j)))) * substitute(equations[j], bindings);
  }
  const auto& d = integrand.data();
  auto fail = [] { throw ExprError("homotopy requires polynomial jets; supply Lagrangian manually"); };
  for (const auto& [f, k] : d.den) {
    if (f.generators().count(Gen::param(kLambdaParam))) fail();
  }
  std::vector<Poly::Term> terms;
  for (const auto& [mono, coef] : d.num.terms()) {
    int k = 0;
    Monomial rest;
    for (const auto& [g, e] : mono.factors()) {
      if (g == Gen::param(kLambdaParam)) {
        k = e;
      } else {
        if (g.is_atom() && gens_of(Expr(g)).count(Gen::param(kLambdaParam))) fail();
        rest = rest * Monomial::of(g, e);
      }
    }
    if (k < 0) fail();
    terms.emplace_back(rest, coef / (k + 1));
  }
  return make_expr(Poly::from_terms(std::move(terms)), d.den);
}

VariationalResult is_variational(const PdeSystem& system, const OracleOptions& opts, const std::vector<Rational>& shift) {
  VariationalResult out;
  if (!system.is_square()) {
    out.note = "system is not square";
    out.comparison.evidence.verdict = Verdict::ProvedUnequal;
    return out;
  }
  TotalDiffOp l = linearize(system);
  TotalDiffOp la = adjoint(l);
  out.difference = l - la;
  out.comparison = op_equals(l, la, *system.ctx, opts);
  out.variational = out.comparison.equal();
  if (!out.variational) return out;
  try {
    Expr lag = homotopy_lagrangian(system.equations, system.num_dependents(), shift, system.dim());
    auto e = euler(lag, system.num_dependents());
    bool ok = true;
    for (std::size_t j = 0; j < e.size(); ++j) {
      ok = ok && equals(e[j], system.equations[j], *system.ctx, opts).verdict == Verdict::ProvedEqual;
    }
    if (ok) {
      out.lagrangian = lag;
    } else {
      out.note = "homotopy Lagrangian did not reproduce the equations exactly";
    }
  } catch (const ExprError& e) {
    out.note = e.what();
  }
  return out;
}

ComponentCheck is_symmetry(const std::vector<Expr>& phi, const PdeSystem& system, const OracleOptions& opts) {
  require_shell(system);
  TotalDiffOp l = linearize(system);
  std::vector<Expr> values = apply_operator(l, phi);
  if (!system.constraints.empty()) {
    TotalDiffOp lc = linearize(system.constraints, system.num_dependents(), system.dim());
    for (auto& v : apply_operator(lc, phi)) values.push_back(v);
  }
  return check_components(values, system, opts);
}

ComponentCheck is_cosymmetry(const std::vector<Expr>& psi, const PdeSystem& system, const OracleOptions& opts) {
  require_shell(system);
  TotalDiffOp la = adjoint(linearize(system));
  return check_components(apply_operator(la, psi), system, opts);
}

SymplecticResult symplectic_check(const TotalDiffOp& delta, const PdeSystem& system, const OracleOptions& opts) {
  require_shell(system);
  TotalDiffOp l = linearize(system);
  if (delta.rows() != l.rows() || delta.cols() != l.cols()) {
    throw ShapeError("symplectic candidate must be " + std::to_string(l.rows()) + "x" + std::to_string(l.cols()));
  }
  TotalDiffOp lhs = compose(adjoint(delta), l);
  TotalDiffOp rhs = compose(adjoint(l), delta);
  SymplecticResult out;
  out.residual = lhs - rhs;
  out.comparison = op_equals_on_shell(lhs, rhs, system, opts);
  out.note = "checks this representative only; equivalence modulo operators nabla o l_E is not tested";
  return out;
}

NoetherResult noether_map(const TotalDiffOp& delta, const std::vector<Expr>& phi, const PdeSystem& system,
                          const OracleOptions& opts) {
  ComponentCheck sym = is_symmetry(phi, system, opts);
  if (!sym.holds()) throw ExprError("noether map: the given vector is not a symmetry");
  NoetherResult out;
  out.cosymmetry = apply_operator(delta, phi);
  out.check = is_cosymmetry(out.cosymmetry, system, opts);
  if (!out.check.holds()) throw ExprError("candidate not symplectic on this symmetry");
  return out;
}

bool DegeneracyReport::not_a_lift() const {
  return std::any_of(entries.begin(), entries.end(), [](const DegeneracyEntry& e) { return !e.degenerate; });
}

DegeneracyReport degeneracy_check(const TotalDiffOp& delta, const PdeSystem& system,
                                  const std::vector<FiberSymmetry>& symmetries, const std::vector<int>& nonlocal,
                                  const OracleOptions& opts) {
  require_shell(system);
  DegeneracyReport report;
  for (const auto& sym : symmetries) {
    DegeneracyEntry entry;
    entry.name = sym.name;
    bool zero = std::all_of(sym.components.begin(), sym.components.end(), [](const Expr& e) { return e.is_zero(); });
    if (!zero && !sym.fiber) {
      for (std::size_t j = 0; j < sym.components.size(); ++j) {
        bool is_nonlocal = std::find(nonlocal.begin(), nonlocal.end(), static_cast<int>(j)) != nonlocal.end();
        if (!sym.components[j].is_zero() && !is_nonlocal) {
          throw ExprError("symmetry '" + sym.name + "' acts on a base variable; fiber symmetries act on nonlocal variables only");
        }
      }
    }
    if (!is_symmetry(sym.components, system, opts).holds()) {
      throw ExprError("'" + sym.name + "' fails is_symmetry");
    }
    ComponentCheck image = check_components(apply_operator(delta, sym.components), system, opts);
    entry.image = image.values;
    entry.evidence = image.evidence;
    entry.degenerate = image.holds();
    entry.verdict = entry.degenerate ? "lift-compatible (degenerate on " + sym.name + ")"
                                     : "not a lift (nondegenerate on " + sym.name + ")";
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace jetcalc
