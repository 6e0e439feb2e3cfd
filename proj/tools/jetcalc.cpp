#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "jetcalc/coverings.hpp"
#include "jetcalc/kovalevskaya.hpp"
#include "jetcalc/syslang.hpp"
#include "jetcalc/variational.hpp"

using namespace jetcalc;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Bad invocation or input the command cannot work with: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VerdictItem {
  std::string name;
  Evidence evidence;
  bool check = true;  // false for classifications that are results, not pass/fail checks
  std::string detail;
};

struct Report {
  std::string command;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<VerdictItem> verdicts;
  std::string output;
  std::vector<std::string> audit;
  std::vector<std::string> notes;
  std::string error;

  int exit_code() const {
    if (!error.empty()) return 1;
    for (const auto& v : verdicts) {
      if (v.check && !v.evidence.affirmative()) return 1;
    }
    return 0;
  }
};

struct Globals {
  bool json = false;
  std::uint64_t seed = OracleOptions{}.seed;
  int trials = OracleOptions{}.trials;
  double tol = OracleOptions{}.tol;

  OracleOptions oracle() const {
    OracleOptions o;
    o.seed = seed;
    o.trials = trials;
    o.tol = tol;
    return o;
  }
};

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Loaded {
  SystemFile file;
  PdeSystem system;
};

// Parse a system file; a file with only a Lagrangian stands for its Euler-Lagrange system.
Loaded load(const std::string& path, Report& report) {
  std::string text = read_file(path);
  report.inputs.emplace_back(path, sha256_hex(text));
  Loaded out;
  try {
    out.file = parse_system(text);
  } catch (const ParseError& e) {
    throw UsageError(path + ": " + e.what());
  }
  out.system = out.file.system();
  if (out.system.equations.empty() && out.file.lagrangian) {
    out.system.equations = euler(*out.file.lagrangian, out.system.num_dependents());
    report.notes.push_back("equations taken from the Euler-Lagrange expressions of the lagrangian");
  }
  return out;
}

void require_equations(const Loaded& l) {
  if (l.system.equations.empty()) throw UsageError("file has no equations or lagrangian section");
}

void require_shell(const Loaded& l) {
  require_equations(l);
  if (!l.system.kovalevskaya) throw UsageError("this command needs a kovalevskaya section (see `jetcalc kovalevskaya -o`)");
}

TotalDiffOp lookup_operator(const Loaded& l, const std::string& name) {
  if (name == "linearization") return linearize(l.system);
  try {
    return l.file.find_operator(name);
  } catch (const ExprError& e) {
    throw UsageError(e.what());
  }
}

const NamedSymmetry& lookup_symmetry(const Loaded& l, const std::string& name) {
  try {
    return l.file.find_symmetry(name);
  } catch (const ExprError& e) {
    throw UsageError(e.what());
  }
}

Expr parse_cli_expression(const std::string& text, const Context& ctx, const std::string& what) {
  try {
    return parse_expression(text, ctx);
  } catch (const ParseError& e) {
    throw UsageError(what + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_vector(const std::vector<Expr>& v, const Context& ctx) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format(v[i], ctx);
  }
  return s + ")";
}

void write_output(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

// ---- reporting

json evidence_json(const Evidence& e) {
  json j{{"sampled", e.sampled}, {"float_mode", e.float_mode}};
  if (e.sampled) {
    j["seed"] = e.seed;
    j["trials"] = e.trials;
  }
  if (!e.witness.empty()) j["witness"] = e.witness;
  return j;
}

json report_json(const Report& r, const Globals& g, double ms) {
  json inputs = json::array();
  for (const auto& [path, hash] : r.inputs) inputs.push_back({{"path", path}, {"sha256", hash}});
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    json item{{"name", v.name},
              {"verdict", to_string(v.evidence.verdict)},
              {"affirmative", v.evidence.affirmative()},
              {"check", v.check},
              {"evidence", evidence_json(v.evidence)}};
    if (!v.detail.empty()) item["detail"] = v.detail;
    verdicts.push_back(item);
  }
  json j{{"command", r.command},
         {"version", kVersion},
         {"inputs", inputs},
         {"oracle", {{"seed", g.seed}, {"trials", g.trials}, {"tol", g.tol}}},
         {"verdicts", verdicts},
         {"output", r.output},
         {"audit", r.audit},
         {"notes", r.notes},
         {"exit_code", r.exit_code()},
         {"timing_ms", ms}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

bool use_color() { return std::getenv("NO_COLOR") == nullptr && isatty(STDOUT_FILENO); }

void print_text(const Report& r) {
  const bool color = use_color();
  std::cout << r.output;
  if (!r.output.empty() && r.output.back() != '\n') std::cout << "\n";
  if (!r.audit.empty()) {
    std::cout << "audit:\n";
    for (const auto& a : r.audit) std::cout << "  " << a << "\n";
  }
  for (const auto& v : r.verdicts) {
    std::string verdict = to_string(v.evidence.verdict);
    if (color) verdict = (v.evidence.affirmative() ? "\033[32m" : "\033[31m") + verdict + "\033[0m";
    std::cout << v.name << ": " << verdict;
    if (v.evidence.sampled) {
      std::cout << " (sampled, seed " << v.evidence.seed << ", " << v.evidence.trials << " trials"
                << (v.evidence.float_mode ? ", float mode" : "") << ")";
    } else if (v.evidence.verdict == Verdict::ProvedEqual) {
      std::cout << " (exact)";
    }
    std::cout << "\n";
    if (!v.evidence.witness.empty()) std::cout << "  witness: " << v.evidence.witness << "\n";
    if (!v.detail.empty()) std::cout << "  " << v.detail << "\n";
  }
  for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
  if (!r.error.empty()) std::cerr << "error: " << r.error << "\n";
}

Evidence failed() {
  Evidence e;
  e.verdict = Verdict::ProvedUnequal;
  return e;
}

// ---- subcommands

void cmd_linearize(const std::string& path, Report& r) {
  Loaded l = load(path, r);
  require_equations(l);
  r.output = format(linearize(l.system), *l.system.ctx);
}

void cmd_adjoint(const std::string& path, const std::string& name, Report& r) {
  Loaded l = load(path, r);
  if (name == "linearization") require_equations(l);
  r.output = format(adjoint(lookup_operator(l, name)), *l.system.ctx);
}

void cmd_euler(const std::string& path, Report& r) {
  Loaded l = load(path, r);
  if (!l.file.lagrangian) throw UsageError("file has no lagrangian section");
  const Context& ctx = *l.system.ctx;
  auto e = euler(*l.file.lagrangian, l.system.num_dependents());
  for (std::size_t j = 0; j < e.size(); ++j) r.output += "E_" + ctx.dependents[j] + " = " + format(e[j], ctx) + "\n";
}

void cmd_check_variational(const std::string& path, const std::string& shift_text, const Globals& g, Report& r) {
  Loaded l = load(path, r);
  require_equations(l);
  const Context& ctx = *l.system.ctx;
  std::vector<Rational> shift;
  for (const auto& s : split_list(shift_text)) {
    auto q = parse_cli_expression(s, ctx, "--shift").as_rational();
    if (!q) throw UsageError("--shift values must be rational numbers");
    shift.push_back(*q);
  }
  if (!shift.empty() && static_cast<int>(shift.size()) != l.system.num_dependents()) {
    throw UsageError("--shift needs one value per dependent variable");
  }
  VariationalResult v = is_variational(l.system, g.oracle(), shift);
  VerdictItem item{"l_F = l_F*", v.comparison.evidence, true, ""};
  if (v.variational) {
    r.output = "variational: yes\n";
    if (v.lagrangian) {
      r.output += "L = " + format(*v.lagrangian, ctx) + "\n";
    } else if (!v.note.empty()) {
      r.notes.push_back(v.note);
    }
  } else {
    r.output = "variational: no\n";
    if (!v.note.empty()) {
      r.notes.push_back(v.note);
    } else {
      r.output += "l_F - l_F* =\n" + format(v.difference, ctx) + "\n";
      item.detail = "first differing coefficient at row " + std::to_string(v.comparison.row + 1) + ", column " +
                    std::to_string(v.comparison.col + 1) + ": " + format(v.comparison.residual, ctx);
    }
  }
  r.verdicts.push_back(item);
}

int direction_index(const Context& ctx, const std::string& name) {
  auto d = ctx.find_independent(name);
  if (!d) throw UsageError("unknown independent variable '" + name + "'");
  return *d;
}

void cmd_kovalevskaya(const std::string& path, const std::string& direction, const std::string& hints_arg,
                      const std::string& out_path, const Globals& g, Report& r) {
  Loaded l = load(path, r);
  require_equations(l);
  const Context& ctx = *l.system.ctx;
  int dir = direction_index(ctx, direction);
  KovalevskayaHints hints;
  if (!hints_arg.empty()) {
    std::string text = std::filesystem::exists(hints_arg) ? read_file(hints_arg) : hints_arg;
    try {
      hints = parse_hints(text, ctx);
    } catch (const ExprError& e) {
      throw UsageError(e.what());
    }
  }
  KovalevskayaForm kf = to_kovalevskaya(l.system, dir, hints);
  std::string b = "b = (";
  for (std::size_t j = 0; j < kf.data.orders.size(); ++j) b += (j ? "," : "") + std::to_string(kf.data.orders[j]);
  r.output = b + ")\n";
  for (std::size_t j = 0; j < kf.data.rhs.size(); ++j) {
    MultiIndex a = MultiIndex::unit(ctx.dim(), dir, kf.data.orders[j]);
    r.output += ctx.jet_name(static_cast<int>(j), a) + " = " + format(kf.data.rhs[j], ctx) + "\n";
  }
  std::stringstream audit(format_audit(kf.audit, dir, ctx));
  for (std::string line; std::getline(audit, line);) r.audit.push_back(line);
  KovalevskayaValidation v = validate_kovalevskaya(kf.data, l.system, &kf.audit, g.oracle());
  VerdictItem item{"extended Kovalevskaya form", v.valid ? v.evidence : failed(), true, v.reason};
  r.verdicts.push_back(item);
  if (!out_path.empty()) {
    SystemFile f = l.file;
    if (f.equations.empty()) f.equations = l.system.equations;
    f.kovalevskaya = kf.data;
    write_output(out_path, print_system(f));
    r.notes.push_back("wrote " + out_path);
  }
}

void cmd_cover(const std::string& path, const std::string& type, const std::string& density,
               const std::string& velocity, const std::string& law, const std::string& out_path, const Globals& g,
               Report& r) {
  Loaded l = load(path, r);
  require_shell(l);
  CoveringSystem cov;
  if (type == "lagrangian") {
    if (density.empty() || velocity.empty()) throw UsageError("--type lagrangian needs --density and --velocity");
    cov = build_lagrangian_covering(l.system, density, split_list(velocity));
  } else if (type == "potential") {
    if (law.empty()) throw UsageError("--type potential needs --law");
    const NamedLaw* named = nullptr;
    try {
      named = &l.file.find_law(law);
    } catch (const ExprError& e) {
      throw UsageError(e.what());
    }
    cov = build_potential_covering(l.system, named->components, law, g.oracle());
  } else {
    throw UsageError("--type must be 'lagrangian' or 'potential'");
  }
  std::string text = print_system(covering_to_file(cov));
  if (out_path.empty()) {
    r.output = text;
  } else {
    write_output(out_path, text);
    r.notes.push_back("wrote " + out_path);
  }
}

void cmd_verify_covering(const std::string& path, const Globals& g, Report& r) {
  Loaded l = load(path, r);
  if (!l.file.covering) throw UsageError("file has no covering section (produce one with `jetcalc cover`)");
  CoveringSystem cov;
  try {
    cov = covering_from_file(l.file);
  } catch (const ExprError& e) {
    throw UsageError(e.what());
  }
  const Context& ctx = *cov.total.ctx;
  CoveringVerdict v = verify_covering_consistency(cov, g.oracle());
  r.output = "consistency expression: " + format(v.expression, ctx) + "\nreduced: " + format(v.residual, ctx) + "\n";
  std::string detail;
  if (cov.spec.type == "lagrangian") {
    r.output += "base mass law reduced: " + format(v.mass_residual, *cov.base.ctx) + "\n";
    if (!v.mass_residual.is_zero()) detail = "the density does not obey the mass law on the base system";
  }
  r.verdicts.push_back({"covering consistency", v.evidence, true, detail});
  for (const auto& s : l.file.symmetries) {
    ComponentCheck c = is_symmetry(s.components, cov.total, g.oracle());
    std::string detail;
    if (!c.holds()) detail = "component " + std::to_string(c.component + 1) + " reduces to " + format(c.residual, ctx);
    r.verdicts.push_back({"symmetry " + s.name, c.evidence, true, detail});
  }
}

void cmd_symplectic(const std::string& path, const std::string& name, const Globals& g, Report& r) {
  Loaded l = load(path, r);
  require_shell(l);
  TotalDiffOp delta = lookup_operator(l, name);
  SymplecticResult s = symplectic_check(delta, l.system, g.oracle());
  std::string detail;
  if (!s.comparison.equal()) {
    r.output = "Delta* o l_E - l_E* o Delta =\n" + format(s.residual, *l.system.ctx) + "\n";
    detail = "first nonzero coefficient at row " + std::to_string(s.comparison.row + 1) + ", column " +
             std::to_string(s.comparison.col + 1) + ": " + format(s.comparison.residual, *l.system.ctx);
  }
  r.verdicts.push_back({"Delta* o l_E = l_E* o Delta on-shell", s.comparison.evidence, true, detail});
  r.notes.push_back(s.note);
}

void cmd_noether(const std::string& path, const std::string& op, const std::string& sym, const Globals& g,
                 Report& r) {
  Loaded l = load(path, r);
  require_shell(l);
  TotalDiffOp delta = lookup_operator(l, op);
  const NamedSymmetry& s = lookup_symmetry(l, sym);
  NoetherResult n = noether_map(delta, s.components, l.system, g.oracle());
  r.output = "cosymmetry: " + format_vector(n.cosymmetry, *l.system.ctx) + "\n";
  r.verdicts.push_back({"cosymmetry", n.check.evidence, true, ""});
}

void cmd_degeneracy(const std::string& path, const std::string& op, const std::string& names, const Globals& g,
                    Report& r) {
  Loaded l = load(path, r);
  require_shell(l);
  TotalDiffOp delta = lookup_operator(l, op);
  std::vector<FiberSymmetry> syms;
  for (const auto& name : split_list(names)) {
    const NamedSymmetry& s = lookup_symmetry(l, name);
    syms.push_back(FiberSymmetry{s.name, s.components, s.fiber});
  }
  if (syms.empty()) throw UsageError("--fiber-symmetries needs at least one name");
  DegeneracyReport rep = degeneracy_check(delta, l.system, syms, l.file.nonlocal, g.oracle());
  const Context& ctx = *l.system.ctx;
  for (const auto& e : rep.entries) {
    r.output += e.name + ": Delta(phi) = " + format_vector(e.image, ctx) + "\n";
    r.verdicts.push_back({"Delta(" + e.name + ") = 0 on-shell", e.evidence, false, e.verdict});
  }
  r.output += rep.not_a_lift() ? "result: not a lift\n" : "result: lift-compatible\n";
}

void cmd_oracle(const std::string& path, const std::string& lhs, const std::string& rhs, bool on_shell,
                const Globals& g, Report& r) {
  Loaded l = load(path, r);
  const Context& ctx = *l.system.ctx;
  Expr a = parse_cli_expression(lhs, ctx, "--lhs");
  Expr b = parse_cli_expression(rhs, ctx, "--rhs");
  Evidence e;
  if (on_shell) {
    require_shell(l);
    e = on_shell_identity_test(a - b, l.system, g.oracle());
  } else {
    e = random_identity_test(a, b, ctx, g.oracle());
  }
  r.output = format(a, ctx) + " vs " + format(b, ctx) + "\n";
  r.verdicts.push_back({on_shell ? "lhs = rhs on-shell" : "lhs = rhs", e, true, ""});
}

void cmd_prolong(const std::string& path, int order, Report& r) {
  Loaded l = load(path, r);
  require_equations(l);
  if (order < 0) throw UsageError("--order must be nonnegative");
  const Context& ctx = *l.system.ctx;
  for (std::size_t i = 0; i < l.system.equations.size(); ++i) {
    for (const auto& a : multi_indices_up_to(ctx.dim(), order)) {
      std::string name = "F" + std::to_string(i + 1);
      if (!a.is_zero()) name = "D_" + ctx.derivative_suffix(a) + " " + name;
      r.output += name + " = " + format(total_derivative(l.system.equations[i], a), ctx) + "\n";
    }
  }
}

void cmd_format(const std::string& path, Report& r) {
  Loaded l = load(path, r);
  r.output = print_system(l.file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic jet-space calculus for variational PDE systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_flag("--json", g.json, "Print the structured JSON report");
  app.add_option("--seed", g.seed, "Oracle seed")->capture_default_str();
  app.add_option("--trials", g.trials, "Oracle trials")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--tol", g.tol, "Oracle tolerance in float mode")->check(CLI::PositiveNumber)->capture_default_str();

  std::string file, op, sym, direction, hints, type, density, velocity, law, lhs, rhs, out, shift, names;
  int order = 1;
  bool on_shell = false;
  std::function<void(Report&)> run;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("file", file, "System file")->required()->check(CLI::ExistingFile);
    return sub;
  };

  add("linearize", "Print the universal linearization l_F")->callback([&] {
    run = [&](Report& r) { cmd_linearize(file, r); };
  });
  auto* adj = add("adjoint", "Print the formal adjoint of a named operator");
  adj->add_option("--operator", op, "Operator name (or 'identity', 'linearization')")->required();
  adj->callback([&] { run = [&](Report& r) { cmd_adjoint(file, op, r); }; });
  add("euler", "Print the Euler-Lagrange expressions of the lagrangian")->callback([&] {
    run = [&](Report& r) { cmd_euler(file, r); };
  });
  auto* var = add("check-variational", "Helmholtz test and homotopy Lagrangian");
  var->add_option("--shift", shift, "Base point of the homotopy, one rational per dependent variable");
  var->callback([&] { run = [&](Report& r) { cmd_check_variational(file, shift, g, r); }; });
  auto* kov = add("kovalevskaya", "Search for an extended Kovalevskaya form");
  kov->add_option("--direction", direction, "Independent variable to solve along")->required();
  kov->add_option("--hints", hints, "Hints such as 'u=2, eq4=w', or a file containing them");
  kov->add_option("-o,--output", out, "Write the system with the solved form to this file");
  kov->callback([&] { run = [&](Report& r) { cmd_kovalevskaya(file, direction, hints, out, g, r); }; });
  auto* cov = add("cover", "Build a Lagrangian or potential covering");
  cov->add_option("--type", type, "lagrangian or potential")->required();
  cov->add_option("--density", density, "Density variable");
  cov->add_option("--velocity", velocity, "Comma-separated velocity variables");
  cov->add_option("--law", law, "Conservation law name");
  cov->add_option("-o,--output", out, "Write the covering to this file");
  cov->callback([&] { run = [&](Report& r) { cmd_cover(file, type, density, velocity, law, out, g, r); }; });
  add("verify-covering", "Check the consistency condition of a covering")->callback([&] {
    run = [&](Report& r) { cmd_verify_covering(file, g, r); };
  });
  auto* sym_cmd = add("symplectic", "Check Delta* o l_E = l_E* o Delta on-shell");
  sym_cmd->add_option("--operator", op, "Operator name")->required();
  sym_cmd->callback([&] { run = [&](Report& r) { cmd_symplectic(file, op, g, r); }; });
  auto* noe = add("noether", "Map a symmetry to a cosymmetry");
  noe->add_option("--operator", op, "Operator name")->required();
  noe->add_option("--symmetry", sym, "Symmetry name")->required();
  noe->callback([&] { run = [&](Report& r) { cmd_noether(file, op, sym, g, r); }; });
  auto* deg = add("degeneracy", "Check whether an operator annihilates fiber symmetries");
  deg->add_option("--operator", op, "Operator name")->required();
  deg->add_option("--fiber-symmetries", names, "Comma-separated symmetry names")->required();
  deg->callback([&] { run = [&](Report& r) { cmd_degeneracy(file, op, names, g, r); }; });
  auto* orc = add("oracle", "Randomized identity test");
  orc->add_option("--lhs", lhs, "Left-hand side")->required();
  orc->add_option("--rhs", rhs, "Right-hand side")->required();
  orc->add_flag("--on-shell", on_shell, "Sample points on the solved system");
  orc->callback([&] { run = [&](Report& r) { cmd_oracle(file, lhs, rhs, on_shell, g, r); }; });
  auto* pro = add("prolong", "Print total derivatives of the equations");
  pro->add_option("--order", order, "Prolongation order")->capture_default_str();
  pro->callback([&] { run = [&](Report& r) { cmd_prolong(file, order, r); }; });
  add("format", "Print the system in canonical form")->callback([&] {
    run = [&](Report& r) { cmd_format(file, r); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Report report;
  report.command = app.get_subcommands().front()->get_name();
  auto start = std::chrono::steady_clock::now();
  int code = 0;
  try {
    run(report);
    code = report.exit_code();
  } catch (const UsageError& e) {
    report.error = e.what();
    code = 2;
  } catch (const ParseError& e) {
    report.error = e.what();
    code = 2;
  } catch (const std::exception& e) {
    report.error = e.what();
    code = 1;
  }
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (g.json) {
    json j = report_json(report, g, ms);
    j["exit_code"] = code;
    std::cout << j.dump(2) << "\n";
  } else {
    print_text(report);
  }
  return code;
}
