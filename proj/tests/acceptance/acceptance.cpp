// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "support.hpp"

using namespace jt;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
};

Outcome fail_with(const std::string& s) { return {false, s}; }

std::string run_command(const std::string& cmd, int& status) {
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  status = pclose(pipe);
  return out;
}

// 1
Outcome euler_of_divergences() {
  std::mt19937_64 rng(101);
  auto ctx = scratch_context(3, 2);
  auto leaves = jet_leaves(3, 2, 2, true);
  leaves.push_back(Gen::constant(1));
  int zeros = 0, total = 0;
  for (int i = 0; i < 3; ++i) {
    for (int n = 0; n < 20; ++n) {
      Expr g = build(random_raw(rng, leaves, RawOptions{5, false, false}));
      for (const auto& c : euler(total_derivative(g, i), 2)) {
        ++total;
        if (c.is_zero() && equals(c, Expr(), *ctx).verdict == Verdict::ProvedEqual) ++zeros;
      }
    }
  }
  std::string s = std::to_string(zeros) + "/" + std::to_string(total) +
                  " Euler components of D_i(g) are exactly 0 (20 densities x 3 directions)";
  return {zeros == total, s};
}

// 2
Outcome adjoint_algebra() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> size(1, 3);
  auto ctx = scratch_context(2, 3);
  auto leaves = jet_leaves(2, 3, 1, true);
  int inv = 0, contra = 0;
  const int n = 30;
  for (int k = 0; k < n; ++k) {
    int r = size(rng), m = size(rng), c = size(rng);
    TotalDiffOp a = random_operator(rng, r, m, 2, leaves, 3, 3);
    TotalDiffOp b = random_operator(rng, m, c, 2, leaves, 3, 3);
    if (op_equals(adjoint(adjoint(a)), a, *ctx).evidence.verdict == Verdict::ProvedEqual) ++inv;
    if (op_equals(adjoint(compose(a, b)), compose(adjoint(b), adjoint(a)), *ctx).evidence.verdict ==
        Verdict::ProvedEqual) {
      ++contra;
    }
  }
  std::ostringstream s;
  s << "involution proved " << inv << "/" << n << ", contravariance proved " << contra << "/" << n;
  return {inv == n && contra == n, s.str()};
}

// 3
Outcome helmholtz_corpus() {
  auto wave = load_corpus("wave.pde").system();
  auto heat = load_corpus("heat.pde").system();
  auto kdv = load_corpus("kdv.pde").system();
  VariationalResult w = is_variational(wave);
  VariationalResult h = is_variational(heat);
  VariationalResult k = is_variational(kdv);
  bool exact = w.comparison.evidence.verdict == Verdict::ProvedEqual &&
               h.comparison.evidence.verdict == Verdict::ProvedUnequal &&
               k.comparison.evidence.verdict == Verdict::ProvedUnequal;
  std::string diff = format(k.difference, *kdv.ctx);
  std::ostringstream s;
  s << "wave " << (w.variational ? "yes" : "no") << ", heat " << (h.variational ? "yes" : "no") << ", KdV "
    << (k.variational ? "yes" : "no") << " with l_F - l_F* = " << diff;
  return {w.variational && !h.variational && !k.variational && exact && !k.difference.is_zero(), s.str()};
}

// 4
Outcome homotopy_round_trip() {
  std::mt19937_64 rng(104);
  auto ctx = scratch_context(2, 2);
  auto leaves = jet_leaves(2, 2, 2, true);
  int ok = 0;
  const int n = 10;
  for (int k = 0; k < n; ++k) {
    int deps = 1 + k % 2;
    auto lv = jet_leaves(2, deps, 2, true);
    Expr lag = random_polynomial(rng, lv, 4, 3);
    auto f = euler(lag, deps);
    auto back = euler(homotopy_lagrangian(f, deps, {}, 2), deps);
    bool all = true;
    for (int j = 0; j < deps; ++j) all = all && equals(back[j], f[j], *ctx).verdict == Verdict::ProvedEqual;
    ok += all;
  }
  return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " random F = E(L) reproduced exactly"};
}

// 5
Outcome navier_stokes_kovalevskaya() {
  std::string out;
#ifdef JETCALC_CLI_PATH
  int status = 0;
  out = run_command(std::string("NO_COLOR=1 '") + JETCALC_CLI_PATH + "' kovalevskaya '" + corpus_path("navier_stokes.pde") +
                        "' --direction z",
                    status);
  if (status != 0) return fail_with("CLI exited with status " + std::to_string(status));
#else
  return fail_with("built without the CLI");
#endif
  const std::vector<std::string> steps{"1. eliminate w_z from equation 4: ", "2. eliminate u_zz from equation 1: ",
                                       "3. eliminate v_zz from equation 2: ", "4. eliminate p_z from equation 3: "};
  bool b = out.rfind("b = (2,2,1,1)\n", 0) == 0;
  int matched = 0;
  for (const auto& s : steps) matched += out.find("  " + s) != std::string::npos;
  bool five = out.find("  5. ") == std::string::npos;
  // the audit content itself, from the library
  PdeSystem ns = load_corpus("navier_stokes.pde").system();
  KovalevskayaForm f = to_kovalevskaya(ns, 3);
  bool valid = validate_kovalevskaya(f.data, ns, &f.audit).valid;
  std::ostringstream s;
  s << (b ? "b = (2,2,1,1)" : "wrong b") << ", " << matched << "/4 audit steps (w_z eq4, u_zz eq1, v_zz eq2, p_z eq3)"
    << (five ? "" : ", extra steps") << ", form " << (valid ? "valid" : "invalid");
  return {b && matched == 4 && five && valid, s.str()};
}

// 6
Outcome covering_consistency() {
  std::vector<std::pair<std::string, std::vector<std::string>>> cases{
      {"gas_1d_euler.pde", {"u"}}, {"gas_2d_euler.pde", {"u", "v"}}, {"mass_conservation_3d.pde", {"u", "v", "w"}}};
  int ok = 0;
  std::ostringstream s;
  for (const auto& [name, vel] : cases) {
    CoveringSystem cov = build_lagrangian_covering(load_corpus(name).system(), "rho", vel);
    CoveringVerdict v = verify_covering_consistency(cov);
    bool zero = v.residual.is_zero() && v.mass_residual.is_zero() && v.evidence.verdict == Verdict::ProvedEqual;
    ok += zero;
    if (s.tellp() > 0) s << ", ";
    s << vel.size() << "D " << (zero ? "0" : format(v.residual, *cov.total.ctx));
  }
  return {ok == 3, "reduced consistency expression: " + s.str()};
}

// 7
Outcome label_symmetries_pass() {
  int total = 0, ok = 0, expected = 0;
  bool control = true;
  for (const auto& [name, vel] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"gas_1d_euler.pde", {"u"}}, {"gas_2d_euler.pde", {"u", "v"}}}) {
    CoveringSystem cov = build_lagrangian_covering(load_corpus(name).system(), "rho", vel);
    int k = static_cast<int>(vel.size());
    expected += k + k * k - 1;
    auto syms = label_symmetries(cov);
    for (const auto& sym : syms) {
      ++total;
      ok += is_symmetry(sym.components, cov.total).holds();
    }
    // a label dilation changes the Jacobian and must fail
    std::vector<Expr> dil(static_cast<std::size_t>(cov.total.num_dependents()));
    for (int idx : cov.nonlocal) {
      dil[static_cast<std::size_t>(idx)] = parse_expression(cov.total.ctx->dependents[idx], *cov.total.ctx);
    }
    control = control && !is_symmetry(dil, cov.total).holds();
  }
  auto hodograph = load_corpus("gas_1d_covering.pde");
  expected += static_cast<int>(hodograph.symmetries.size());
  for (const auto& sym : hodograph.symmetries) {
    ++total;
    ok += is_symmetry(sym.components, hodograph.system()).holds();
  }
  return {ok == total && total == expected && control,
          std::to_string(ok) + "/" + std::to_string(total) +
              " label translations and volume-preserving linear maps are symmetries (1D, 2D, 1D label form); "
              "label dilation " + (control ? "rejected" : "ACCEPTED")};
}

// 8
Outcome gas_1d() {
  SystemFile gas = load_corpus("gas_1d_lagrangian.pde");
  const Context& ctx = *gas.ctx;
  auto e = euler(*gas.lagrangian, 1);
  Expr hand = parse_expression("-x_tt + C*gamma*x_m^(-gamma - 1)*x_mm", ctx);
  bool symbolic = e.size() == 1 && e[0] == hand;
  // exact points: gamma = p/q and x_m = r^q make every power rational
  std::mt19937_64 rng(108);
  std::uniform_int_distribution<int> pd(1, 9), qd(1, 4);
  int agree = 0, points = 0;
  while (points < 25) {
    int p = pd(rng), q = qd(rng);
    Rational gamma(p, q);
    gamma.canonicalize();
    if (gamma == 1) continue;
    Rational r(pd(rng), pd(rng));
    r.canonicalize();
    Rational xm = 1;
    for (int k = 0; k < q; ++k) xm *= r;
    Rational rp = 1;
    for (int k = 0; k < p; ++k) rp *= r;
    Rational c = draw_value(rng, true), xtt = draw_value(rng, false), xmm = draw_value(rng, false);
    SamplePoint pt;
    pt.values[ctx.jet("x", "m")] = xm;
    pt.values[ctx.jet("x", "tt")] = xtt;
    pt.values[ctx.jet("x", "mm")] = xmm;
    pt.values[ctx.constant("C")] = c;
    pt.values[ctx.constant("gamma")] = gamma;
    // -x_tt + C gamma x_mm / (x_m * x_m^gamma), with x_m^gamma = r^p
    Rational expected = -xtt + c * gamma * xmm / (xm * rp);
    expected.canonicalize();
    Rational got = evaluate(e[0], pt, ctx);
    agree += got == expected;
    ++points;
  }
  bool variational = is_variational(gas.system()).variational;
  bool symplectic =
      symplectic_check(TotalDiffOp::identity(1, 2), gas.system()).comparison.evidence.verdict == Verdict::ProvedEqual;
  std::ostringstream s;
  s << "E(L) = " << format(e[0], ctx) << " (symbolic " << (symbolic ? "match" : "MISMATCH") << ", " << agree
    << "/25 exact points), is_variational " << (variational ? "yes" : "no") << ", symplectic(identity) "
    << (symplectic ? "yes" : "no");
  return {symbolic && agree == 25 && variational && symplectic, s.str()};
}

// 9
Outcome lift_obstruction() {
  auto cov = load_corpus("gas_1d_covering.pde");
  PdeSystem s = cov.system();
  Expr xm = parse_expression("x_m", *cov.ctx);
  bool sym = is_symmetry({xm}, s).holds();
  DegeneracyReport rep = degeneracy_check(TotalDiffOp::identity(1, 2), s, {{"xi_shift", {xm}, true}}, cov.nonlocal);
  bool lift = rep.not_a_lift();
  bool image = rep.entries.size() == 1 && rep.entries[0].image == std::vector<Expr>{xm};
  std::ostringstream o;
  o << "phi = x_m is " << (sym ? "" : "NOT ") << "a symmetry; identity image "
    << (rep.entries.empty() ? "?" : format(rep.entries[0].image[0], *cov.ctx)) << "; report: "
    << (lift ? "not a lift" : "lift-compatible");
  return {sym && lift && image, o.str()};
}

// 10
Outcome green_naghdi(std::string& stretch) {
  auto gn = load_corpus("green_naghdi_lagrangian.pde");
  const Context& ctx = *gn.ctx;
  std::vector<Expr> e;
  try {
    e = euler(*gn.lagrangian, 1);
  } catch (const std::exception& ex) {
    return fail_with(std::string("euler failed: ") + ex.what());
  }
  PdeSystem s;
  s.ctx = gn.ctx;
  s.equations = e;
  TotalDiffOp l = linearize(s);
  TotalDiffOp la = adjoint(l);
  bool proved = op_equals(l, la, ctx).evidence.verdict == Verdict::ProvedEqual;
  // oracle: every coefficient pair agrees at random points with H from the callback
  int pairs = 0, confirmed = 0;
  std::set<MultiIndex> alphas;
  for (const auto& [a, c] : l.entry(0, 0)) alphas.insert(a);
  for (const auto& [a, c] : la.entry(0, 0)) alphas.insert(a);
  for (const auto& a : alphas) {
    auto get = [&](const TotalDiffOp& op) {
      auto it = op.entry(0, 0).find(a);
      return it == op.entry(0, 0).end() ? Expr() : it->second;
    };
    ++pairs;
    Evidence ev = random_identity_test(get(l), get(la), ctx);
    confirmed += ev.verdict == Verdict::ProbablyEqual;
  }
  bool core = proved && confirmed == pairs;
  // stretch: solved form after the rotation (t, m) -> (t + m, m - t)
  PdeSystem rot = s;
  for (auto& eq : rot.equations) eq = change_independent_variables(eq, RationalMatrix{{1, 1}, {-1, 1}});
  try {
    KovalevskayaForm f = to_kovalevskaya(rot, 0);
    KovalevskayaValidation v = validate_kovalevskaya(f.data, rot, &f.audit);
    stretch = v.valid ? "rotated equation solved for x_" + std::string(static_cast<std::size_t>(f.data.orders[0]), 't') +
                            ", form valid"
                      : "rotated form invalid: " + v.reason;
    if (!v.valid) core = false;
  } catch (const ExprError& ex) {
    // search failure is a known limitation, not a failure of this criterion
    stretch = std::string("known limitation: ") + ex.what();
  }
  std::ostringstream o;
  o << "E(L) computed; l_E self-adjoint " << (proved ? "proved" : "NOT proved") << ", oracle confirms " << confirmed
    << "/" << pairs << " coefficients; stretch: " << stretch;
  return {core, o.str()};
}

// 11
Outcome cross_validation() {
  CrossCheckSummary own = cross_check_recorded(OracleOptions{});
  std::size_t checked = own.checked, contradictions = own.contradictions, files = 0;
  std::vector<std::string> bad = own.details;
  namespace fs = std::filesystem;
  if (fs::is_directory(JETCALC_XVAL_DIR)) {
    for (const auto& entry : fs::directory_iterator(JETCALC_XVAL_DIR)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) {
        bad.push_back("unreadable summary " + entry.path().string());
        ++contradictions;
        continue;
      }
      ++files;
      checked += j.value("checked", std::size_t{0});
      contradictions += j.value("contradictions", std::size_t{0});
    }
  }
  std::ostringstream o;
  o << checked << " kernel proofs cross-checked (" << own.checked << " here, rest from " << files
    << " unit-test summaries), " << contradictions << " contradictions";
  for (const auto& d : bad) o << "\n    " << d;
  return {contradictions == 0 && checked > 0, o.str()};
}

}  // namespace

int main() {
  install_proof_recorder();
  std::string stretch;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Euler annihilates divergences", euler_of_divergences},
      {"Adjoint algebra", adjoint_algebra},
      {"Helmholtz classification", helmholtz_corpus},
      {"Homotopy round trip", homotopy_round_trip},
      {"Navier-Stokes Kovalevskaya form", navier_stokes_kovalevskaya},
      {"Covering consistency", covering_consistency},
      {"Label symmetries", label_symmetries_pass},
      {"1D gas dynamics", gas_1d},
      {"Lift obstruction on the 1D covering", lift_obstruction},
      {"Green-Naghdi", [&] { return green_naghdi(stretch); }},
  };
  int failed = 0;
  auto report = [&](std::size_t i, const std::string& name, const std::function<Outcome()>& f) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = fail_with(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i << ". " << name << " [" << std::fixed
              << std::setprecision(2) << secs << "s]: " << o.summary << "\n"
              << std::flush;
  };
  for (std::size_t i = 0; i < criteria.size(); ++i) report(i + 1, criteria[i].first, criteria[i].second);
  // the cross-check covers every proof made above
  report(11, "Oracle cross-validation", cross_validation);
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
