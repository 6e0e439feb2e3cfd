#include "jetcalc/kovalevskaya.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace jetcalc {

namespace {

struct Candidate {
  int equation = -1;
  int dependent = -1;
  int order = 0;
  Expr coefficient;
  Expr rhs;
};

// Pure-direction derivative orders of dependent j present in e.
std::vector<int> pure_orders(const Expr& e, int j, int dir) {
  std::vector<int> out;
  for (const Gen& g : jets_of(e, j)) {
    int k = g.alpha()[dir];
    if (k >= 1 && g.alpha().order() == k) out.push_back(k);
  }
  return out;
}

int count_candidate_dependents(const Expr& e, int m, int dir) {
  int n = 0;
  for (int j = 0; j < m; ++j) n += pure_orders(e, j, dir).empty() ? 0 : 1;
  return n;
}

// Try to solve the reduced equation fr for the highest pure derivative of j.
std::optional<Candidate> solve_for(const Expr& fr, int eq, int j, int dir, int dim, std::optional<int> forced_order) {
  auto orders = pure_orders(fr, j, dir);
  if (orders.empty()) return std::nullopt;
  int k = *std::max_element(orders.begin(), orders.end());
  if (forced_order && *forced_order != k) return std::nullopt;
  Gen pivot = Gen::jet(j, MultiIndex::unit(dim, dir, k));
  for (const Gen& g : jets_of(fr, j)) {
    if (g.alpha()[dir] >= k && !(g == pivot)) return std::nullopt;
  }
  // The pivot may not hide inside an atom.
  for (const Gen& g : gens_of(fr, true)) {
    if (g.is_atom() && gens_of(Expr(g), true).count(pivot)) return std::nullopt;
  }
  Expr c = partial(fr, pivot);
  if (c.is_zero() || !partial(c, pivot).is_zero()) return std::nullopt;
  Candidate out{eq, j, k, c, Expr(pivot) - fr / c};
  return out;
}

class Eliminator {
 public:
  Eliminator(const PdeSystem& system, int direction) : sys_(system), dir_(direction) {
    if (direction < 0 || direction >= system.dim()) throw ExprError("direction out of range");
    if (!system.is_square()) throw ExprError("Kovalevskaya search needs a square system");
    rules_.direction = direction;
    rules_.rules.resize(static_cast<std::size_t>(system.num_dependents()));
  }

  Expr reduced(int eq) {
    Reducer r(rules_);
    return r.reduce(sys_.equations[static_cast<std::size_t>(eq)]);
  }

  void commit(const Candidate& c) {
    rules_.rules[static_cast<std::size_t>(c.dependent)] = LeadingRule{c.order, c.rhs};
    Reducer r(rules_);
    for (auto& rule : rules_.rules) {
      if (rule) rule->rhs = r.reduce(rule->rhs);
    }
    audit_.push_back(Elimination{c.equation, c.dependent, c.order, c.coefficient, c.rhs});
  }

  bool solved(int j) const { return rules_.rules[static_cast<std::size_t>(j)].has_value(); }

  KovalevskayaData data() const {
    KovalevskayaData kd;
    kd.direction = dir_;
    for (const auto& r : rules_.rules) {
      kd.orders.push_back(r->order);
      kd.rhs.push_back(r->rhs);
    }
    return kd;
  }

  const std::vector<Elimination>& audit() const { return audit_; }
  int direction() const { return dir_; }
  const PdeSystem& system() const { return sys_; }

 private:
  const PdeSystem& sys_;
  int dir_;
  LeadingRules rules_;
  std::vector<Elimination> audit_;
};

}  // namespace

KovalevskayaForm to_kovalevskaya(const PdeSystem& system, int direction, const KovalevskayaHints& hints) {
  Eliminator el(system, direction);
  const int m = system.num_dependents();
  const int dim = system.dim();
  std::vector<int> flexibility;
  for (const auto& f : system.equations) flexibility.push_back(count_candidate_dependents(f, m, direction));
  std::vector<bool> pending(static_cast<std::size_t>(m), true);
  for (int step = 0; step < m; ++step) {
    std::optional<Candidate> best;
    std::tuple<int, int, int, int> best_key;
    for (int i = 0; i < m; ++i) {
      if (!pending[static_cast<std::size_t>(i)]) continue;
      Expr fr = el.reduced(i);
      auto assigned = hints.assignment.find(i);
      for (int j = 0; j < m; ++j) {
        if (el.solved(j)) continue;
        if (assigned != hints.assignment.end() && assigned->second != j) continue;
        std::optional<int> forced;
        if (auto h = hints.orders.find(j); h != hints.orders.end()) forced = h->second;
        auto c = solve_for(fr, i, j, direction, dim, forced);
        if (!c) continue;
        auto key = std::make_tuple(flexibility[static_cast<std::size_t>(i)], c->order, i, j);
        if (!best || key < best_key) {
          best = c;
          best_key = key;
        }
      }
    }
    if (!best) throw ExprError("Kovalevskaya search failed; supply hints");
    el.commit(*best);
    pending[static_cast<std::size_t>(best->equation)] = false;
  }
  return KovalevskayaForm{el.data(), el.audit()};
}

KovalevskayaData replay_eliminations(const PdeSystem& system, int direction, const std::vector<Elimination>& audit) {
  Eliminator el(system, direction);
  if (static_cast<int>(audit.size()) != system.num_dependents()) throw ExprError("audit trail has the wrong length");
  for (const auto& step : audit) {
    if (step.equation < 0 || step.equation >= system.num_dependents() || step.dependent < 0 ||
        step.dependent >= system.num_dependents() || el.solved(step.dependent)) {
      throw ExprError("audit trail step is inconsistent");
    }
    auto c = solve_for(el.reduced(step.equation), step.equation, step.dependent, direction, system.dim(), step.order);
    if (!c) throw ExprError("audit trail step cannot be replayed");
    el.commit(*c);
  }
  return el.data();
}

KovalevskayaHints parse_hints(const std::string& text, const Context& ctx) {
  KovalevskayaHints h;
  std::string cleaned;
  for (char c : text) cleaned += (c == '\n' || c == ';') ? ',' : c;
  std::stringstream ss(cleaned);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ExprError("malformed hint '" + item + "'");
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    auto is_number = [](const std::string& s) {
      return !s.empty() && s.size() < 4 && std::all_of(s.begin(), s.end(), ::isdigit);
    };
    if (key.size() > 2 && key.compare(0, 2, "eq") == 0 && is_number(key.substr(2))) {
      int e = std::stoi(key.substr(2)) - 1;
      auto j = ctx.find_dependent(value);
      if (e < 0 || !j) throw ExprError("malformed hint '" + item + "'");
      h.assignment[e] = *j;
    } else {
      auto j = ctx.find_dependent(key);
      if (!j || !is_number(value) || std::stoi(value) < 1) throw ExprError("malformed hint '" + item + "'");
      h.orders[*j] = std::stoi(value);
    }
  }
  return h;
}

KovalevskayaValidation validate_kovalevskaya(const KovalevskayaData& data, const PdeSystem& system,
                                             const std::vector<Elimination>* audit, const OracleOptions& opts) {
  KovalevskayaValidation out;
  const Context& ctx = *system.ctx;
  const auto m = static_cast<std::size_t>(system.num_dependents());
  if (data.orders.size() != m || data.rhs.size() != m) {
    out.reason = "form must solve every dependent variable";
    return out;
  }
  LeadingRules rules = data.rules();
  for (std::size_t j = 0; j < m; ++j) {
    if (data.orders[j] < 1) {
      out.reason = "order for '" + ctx.dependents[j] + "' must be positive";
      return out;
    }
    if (auto g = rules.find_leading(data.rhs[j])) {
      out.offending = *g;
      out.reason = "right-hand side for '" + ctx.dependents[j] + "' contains leading coordinate '" + ctx.gen_name(*g) + "'";
      return out;
    }
  }
  PdeSystem solved = system;
  solved.kovalevskaya = data;
  Reducer reducer(rules);
  for (std::size_t i = 0; i < system.equations.size(); ++i) {
    Expr r = reducer.reduce(system.equations[i]);
    if (r.is_zero()) {
      notify_proof(system.equations[i], Expr(), ctx, &data);
      continue;
    }
    Evidence ev = equals(r, Expr(), ctx, opts);
    if (!ev.affirmative()) {
      out.reason = "equation " + std::to_string(i + 1) + " does not vanish on the solved form: " + format(r, ctx);
      out.evidence = ev;
      return out;
    }
    out.evidence = ev;
  }
  // Reverse inclusion.
  std::vector<Elimination> derived;
  if (audit) {
    derived = *audit;
  } else {
    KovalevskayaHints hints;
    for (std::size_t j = 0; j < m; ++j) hints.orders[static_cast<int>(j)] = data.orders[j];
    try {
      derived = to_kovalevskaya(system, data.direction, hints).audit;
    } catch (const ExprError&) {
      out.reason = "could not derive the solved equations from the originals";
      return out;
    }
  }
  KovalevskayaData replayed;
  try {
    replayed = replay_eliminations(system, data.direction, derived);
  } catch (const ExprError& e) {
    out.reason = std::string("audit trail replay failed: ") + e.what();
    return out;
  }
  if (replayed.orders != data.orders) {
    out.reason = "derived orders differ from the given form";
    return out;
  }
  for (std::size_t j = 0; j < m; ++j) {
    Expr r = reducer.reduce(replayed.rhs[j] - data.rhs[j]);
    if (r.is_zero()) continue;
    Evidence ev = equals(r, Expr(), ctx, opts);
    if (!ev.affirmative()) {
      out.reason = "solved equation for '" + ctx.dependents[j] + "' is not derived from the originals";
      return out;
    }
  }
  for (const auto& step : derived) {
    if (reducer.reduce(step.coefficient).is_zero()) {
      out.reason = "elimination coefficient vanishes on the solved form";
      return out;
    }
  }
  out.valid = true;
  return out;
}

std::string format_audit(const std::vector<Elimination>& audit, int direction, const Context& ctx) {
  std::ostringstream os;
  for (std::size_t s = 0; s < audit.size(); ++s) {
    const auto& e = audit[s];
    MultiIndex a = MultiIndex::unit(ctx.dim(), direction, e.order);
    os << s + 1 << ". eliminate " << ctx.jet_name(e.dependent, a) << " from equation " << e.equation + 1 << ": "
       << ctx.jet_name(e.dependent, a) << " = " << format(e.rhs, ctx) << "\n";
  }
  return os.str();
}

}  // namespace jetcalc
