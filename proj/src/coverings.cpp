#include "jetcalc/coverings.hpp"

#include <algorithm>

namespace jetcalc {

int time_variable(const Context& ctx) { return ctx.find_independent("t").value_or(0); }

int CoveringSystem::time_index() const { return time_variable(*total.ctx); }

std::vector<int> CoveringSystem::spatial_indices() const {
  std::vector<int> out;
  for (int i = 0; i < total.dim(); ++i) {
    if (i != time_index()) out.push_back(i);
  }
  return out;
}

Expr divergence(const std::vector<Expr>& components) {
  Expr out;
  for (std::size_t i = 0; i < components.size(); ++i) out += total_derivative(components[i], static_cast<int>(i));
  return out;
}

Evidence verify_conservation_law(const std::vector<Expr>& components, const PdeSystem& system,
                                 const OracleOptions& opts) {
  if (static_cast<int>(components.size()) != system.dim()) {
    throw ExprError("conservation law needs one component per independent variable");
  }
  Expr div = divergence(components);
  Expr r = on_shell_reduce(div, system);
  if (r.is_zero()) {
    notify_proof(div, Expr(), *system.ctx, &*system.kovalevskaya);
    return Evidence{};
  }
  return equals(r, Expr(), *system.ctx, opts);
}

namespace {

Expr det(const std::vector<std::vector<Expr>>& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  Expr out;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<Expr>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<Expr> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != c) row.push_back(m[r][k]);
      }
      minor.push_back(std::move(row));
    }
    Expr term = m[0][c] * det(minor);
    out = c % 2 ? out - term : out + term;
  }
  return out;
}

std::string fresh_name(const Context& ctx, const std::string& stem) {
  if (!ctx.is_declared(stem)) return stem;
  for (int i = 1;; ++i) {
    std::string n = stem + std::to_string(i);
    if (!ctx.is_declared(n)) return n;
  }
}

}  // namespace

Expr jacobian_determinant(const std::vector<int>& xi, const std::vector<int>& spatial, int dim) {
  std::vector<std::vector<Expr>> m;
  for (int i : xi) {
    std::vector<Expr> row;
    for (int j : spatial) row.emplace_back(Gen::jet(i, MultiIndex::unit(dim, j)));
    m.push_back(std::move(row));
  }
  return det(m);
}

CoveringSystem build_lagrangian_covering(const PdeSystem& base, const std::string& density,
                                         const std::vector<std::string>& velocity) {
  const Context& bctx = *base.ctx;
  const int n = bctx.dim();
  const int k = n - 1;
  if (k < 1 || k > 3) throw ExprError("lagrangian covering needs t plus 1 to 3 spatial variables");
  if (density.empty()) throw ExprError("missing role: density");
  auto rho = bctx.find_dependent(density);
  if (!rho) throw ExprError("missing role: density '" + density + "' is not a dependent variable");
  if (static_cast<int>(velocity.size()) != k) {
    throw ExprError("missing role: expected " + std::to_string(k) + " velocity components");
  }
  std::vector<int> vel;
  for (const auto& v : velocity) {
    auto j = bctx.find_dependent(v);
    if (!j) throw ExprError("missing role: velocity '" + v + "' is not a dependent variable");
    vel.push_back(*j);
  }

  CoveringSystem cov;
  cov.base = base;
  cov.spec = CoveringSpec{"lagrangian", density, velocity, ""};
  auto ctx = std::make_shared<Context>(bctx);
  std::vector<int> xi;
  for (int i = 0; i < k; ++i) {
    std::string name = fresh_name(*ctx, k == 1 ? "xi" : "xi" + std::to_string(i + 1));
    xi.push_back(ctx->num_dependents());
    ctx->dependents.push_back(name);
  }
  cov.nonlocal = xi;
  const int t = time_variable(*ctx);
  std::vector<int> spatial;
  for (int i = 0; i < n; ++i) {
    if (i != t) spatial.push_back(i);
  }

  cov.total.ctx = ctx;
  cov.total.equations = base.equations;
  cov.total.constraints = base.constraints;
  std::vector<Expr> rhs;
  for (int i : xi) {
    Expr flux;
    for (int s = 0; s < k; ++s) {
      flux += Expr(Gen::jet(vel[static_cast<std::size_t>(s)], MultiIndex(n))) *
              Expr(Gen::jet(i, MultiIndex::unit(n, spatial[static_cast<std::size_t>(s)])));
    }
    cov.total.equations.push_back(Expr(Gen::jet(i, MultiIndex::unit(n, t))) + flux);
    rhs.push_back(-flux);
  }
  Expr jac = jacobian_determinant(xi, spatial, n);
  cov.total.constraints.push_back(Expr(Gen::jet(*rho, MultiIndex(n))) - jac);
  if (base.kovalevskaya && base.kovalevskaya->direction == t) {
    KovalevskayaData kd = *base.kovalevskaya;
    for (const auto& r : rhs) {
      kd.orders.push_back(1);
      kd.rhs.push_back(r);
    }
    cov.total.kovalevskaya = kd;
  }
  if (k == 1 && ctx->is_positive(Gen::jet(*rho, MultiIndex(n)))) {
    ctx->positive.insert(Gen::jet(xi[0], MultiIndex::unit(n, spatial[0])));
  }
  return cov;
}

CoveringSystem build_potential_covering(const PdeSystem& base, const std::vector<Expr>& law,
                                        const std::string& law_name, const OracleOptions& opts) {
  const Context& bctx = *base.ctx;
  if (bctx.dim() != 2) throw ExprError("potential covering implemented for two independent variables only");
  if (law.size() != 2) throw ExprError("conservation law needs one component per independent variable");
  if (base.kovalevskaya) {
    Evidence ev = verify_conservation_law(law, base, opts);
    if (!ev.affirmative()) throw ExprError("'" + law_name + "' is not a conservation law of the base system");
  }
  const int t = time_variable(bctx);
  const int x = 1 - t;
  CoveringSystem cov;
  cov.base = base;
  cov.law = law;
  cov.spec = CoveringSpec{"potential", "", {}, law_name};
  auto ctx = std::make_shared<Context>(bctx);
  int w = ctx->num_dependents();
  ctx->dependents.push_back(fresh_name(*ctx, "w"));
  cov.nonlocal = {w};
  const Expr& tt = law[static_cast<std::size_t>(t)];
  const Expr& tx = law[static_cast<std::size_t>(x)];
  cov.total.ctx = ctx;
  cov.total.equations = base.equations;
  cov.total.constraints = base.constraints;
  cov.total.equations.push_back(Expr(Gen::jet(w, MultiIndex::unit(2, t))) + tx);
  cov.total.constraints.push_back(Expr(Gen::jet(w, MultiIndex::unit(2, x))) - tt);
  if (base.kovalevskaya && base.kovalevskaya->direction == t) {
    KovalevskayaData kd = *base.kovalevskaya;
    kd.orders.push_back(1);
    kd.rhs.push_back(on_shell_reduce(-tx, base));
    cov.total.kovalevskaya = kd;
  }
  return cov;
}

PdeSystem project(const CoveringSystem& cov) {
  const Context& tctx = *cov.total.ctx;
  auto is_nonlocal = [&](int j) { return std::find(cov.nonlocal.begin(), cov.nonlocal.end(), j) != cov.nonlocal.end(); };
  auto touches = [&](const Expr& e) {
    auto jets = jets_of(e);
    return std::any_of(jets.begin(), jets.end(), [&](const Gen& g) { return is_nonlocal(g.index()); });
  };
  auto ctx = std::make_shared<Context>(tctx);
  ctx->dependents.clear();
  for (int j = 0; j < tctx.num_dependents(); ++j) {
    if (is_nonlocal(j)) continue;
    if (static_cast<int>(ctx->dependents.size()) != j) {
      throw ExprError("nonlocal variables must follow the base dependent variables");
    }
    ctx->dependents.push_back(tctx.dependents[static_cast<std::size_t>(j)]);
  }
  std::erase_if(ctx->positive, [&](const Gen& g) { return g.is_jet() && is_nonlocal(g.index()); });
  PdeSystem out;
  out.ctx = ctx;
  for (const auto& e : cov.total.equations) {
    if (!touches(e)) out.equations.push_back(e);
  }
  for (const auto& e : cov.total.constraints) {
    if (!touches(e)) out.constraints.push_back(e);
  }
  if (cov.total.kovalevskaya) {
    KovalevskayaData kd = *cov.total.kovalevskaya;
    kd.orders.resize(ctx->dependents.size());
    kd.rhs.resize(ctx->dependents.size());
    out.kovalevskaya = kd;
  }
  return out;
}

CoveringVerdict verify_covering_consistency(const CoveringSystem& cov, const OracleOptions& opts) {
  const Context& ctx = *cov.total.ctx;
  const int n = ctx.dim();
  const int t = cov.time_index();
  CoveringVerdict out;
  if (cov.spec.type == "potential") {
    const int x = 1 - t;
    const Expr& tt = cov.law[static_cast<std::size_t>(t)];
    const Expr& tx = cov.law[static_cast<std::size_t>(x)];
    // w_x = T^t and w_t = -T^x
    out.expression = total_derivative(tt, t) - total_derivative(-tx, x);
    if (!cov.base.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
    out.residual = on_shell_reduce(out.expression, cov.base);
    if (out.residual.is_zero()) {
      notify_proof(out.expression, Expr(), *cov.base.ctx, &*cov.base.kovalevskaya);
    } else {
      out.evidence = equals(out.residual, Expr(), *cov.base.ctx, opts);
    }
    return out;
  }
  auto rho = ctx.find_dependent(cov.spec.density);
  if (!rho) throw ExprError("covering density is not declared");
  std::vector<int> spatial = cov.spatial_indices();
  Expr jac = jacobian_determinant(cov.nonlocal, spatial, n);
  Expr e = total_derivative(jac, t);
  for (std::size_t s = 0; s < spatial.size(); ++s) {
    auto v = ctx.find_dependent(cov.spec.velocity.at(s));
    if (!v) throw ExprError("covering velocity is not declared");
    e += total_derivative(Expr(Gen::jet(*v, MultiIndex(n))) * jac, spatial[s]);
  }
  out.expression = e;
  LeadingRules rules;
  rules.direction = t;
  rules.rules.resize(static_cast<std::size_t>(ctx.num_dependents()));
  for (int i : cov.nonlocal) {
    Expr flux;
    for (std::size_t s = 0; s < spatial.size(); ++s) {
      auto v = *ctx.find_dependent(cov.spec.velocity[s]);
      flux += Expr(Gen::jet(v, MultiIndex(n))) * Expr(Gen::jet(i, MultiIndex::unit(n, spatial[s])));
    }
    rules.rules[static_cast<std::size_t>(i)] = LeadingRule{1, -flux};
  }
  Reducer reducer(rules);
  out.residual = reducer.reduce(e);
  // rho must obey the same law on the base, or rho = J is not preserved
  std::vector<Expr> law(static_cast<std::size_t>(n));
  const PdeSystem& base = cov.base;
  const Context& bctx = *base.ctx;
  Expr brho(Gen::jet(*bctx.find_dependent(cov.spec.density), MultiIndex(n)));
  law[static_cast<std::size_t>(t)] = brho;
  for (std::size_t s = 0; s < spatial.size(); ++s) {
    Expr v(Gen::jet(*bctx.find_dependent(cov.spec.velocity[s]), MultiIndex(n)));
    law[static_cast<std::size_t>(spatial[s])] = brho * v;
  }
  if (!base.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
  Expr mass = divergence(law);
  out.mass_residual = on_shell_reduce(mass, base);
  if (out.mass_residual.is_zero()) {
    notify_proof(mass, Expr(), bctx, &*base.kovalevskaya);
  } else {
    out.evidence = equals(out.mass_residual, Expr(), bctx, opts);
    if (out.evidence.affirmative()) out.evidence = on_shell_identity_test(mass, base, opts);
    if (!out.evidence.affirmative()) return out;
  }
  if (out.residual.is_zero()) {
    KovalevskayaData transport;
    transport.direction = t;
    // Only the transport rules matter here; base variables get no rule.
    for (int j = 0; j < ctx.num_dependents(); ++j) {
      const auto& r = rules.rules[static_cast<std::size_t>(j)];
      transport.orders.push_back(r ? 1 : 1 << 20);
      transport.rhs.push_back(r ? r->rhs : Expr());
    }
    notify_proof(e, Expr(), ctx, &transport);
  } else {
    out.evidence = equals(out.residual, Expr(), ctx, opts);
  }
  return out;
}

std::vector<FiberSymmetry> label_symmetries(const CoveringSystem& cov) {
  const Context& ctx = *cov.total.ctx;
  const auto m = static_cast<std::size_t>(ctx.num_dependents());
  const int n = ctx.dim();
  std::vector<FiberSymmetry> out;
  if (cov.spec.type != "lagrangian") return out;
  auto name = [&](int j) { return ctx.dependents[static_cast<std::size_t>(j)]; };
  auto xi = [&](int j) { return Expr(Gen::jet(j, MultiIndex(n))); };
  for (int a : cov.nonlocal) {
    FiberSymmetry s{name(a) + "_shift", std::vector<Expr>(m), true};
    s.components[static_cast<std::size_t>(a)] = 1;
    out.push_back(std::move(s));
  }
  for (int a : cov.nonlocal) {
    for (int b : cov.nonlocal) {
      if (a == b) continue;
      FiberSymmetry s{name(a) + "_shear_" + name(b), std::vector<Expr>(m), true};
      s.components[static_cast<std::size_t>(a)] = xi(b);
      out.push_back(std::move(s));
    }
  }
  for (std::size_t i = 0; i + 1 < cov.nonlocal.size(); ++i) {
    int a = cov.nonlocal[i];
    int b = cov.nonlocal[i + 1];
    FiberSymmetry s{name(a) + "_" + name(b) + "_stretch", std::vector<Expr>(m), true};
    s.components[static_cast<std::size_t>(a)] = xi(a);
    s.components[static_cast<std::size_t>(b)] = -xi(b);
    out.push_back(std::move(s));
  }
  return out;
}

CoveringSystem covering_from_file(const SystemFile& file) {
  if (!file.covering) throw ExprError("file has no covering section");
  if (file.nonlocal.empty()) throw ExprError("covering file declares no nonlocal variables");
  CoveringSystem cov;
  cov.total = file.system();
  cov.nonlocal = file.nonlocal;
  cov.spec = *file.covering;
  cov.base = project(cov);
  if (cov.spec.type == "potential") cov.law = file.find_law(cov.spec.law).components;
  return cov;
}

SystemFile covering_to_file(const CoveringSystem& cov) {
  SystemFile f;
  f.ctx = std::make_shared<Context>(*cov.total.ctx);
  f.equations = cov.total.equations;
  f.constraints = cov.total.constraints;
  f.kovalevskaya = cov.total.kovalevskaya;
  f.nonlocal = cov.nonlocal;
  f.covering = cov.spec;
  if (cov.spec.type == "potential") f.laws.push_back(NamedLaw{cov.spec.law, cov.law});
  for (const auto& s : label_symmetries(cov)) f.symmetries.push_back(NamedSymmetry{s.name, s.components, s.fiber});
  return f;
}

}  // namespace jetcalc
