#include "jetcalc/jet.hpp"

#include <algorithm>

namespace jetcalc {

bool LeadingRules::is_leading(const Gen& g) const {
  if (!g.is_jet()) return false;
  auto j = static_cast<std::size_t>(g.index());
  if (j >= rules.size() || !rules[j]) return false;
  return g.alpha()[direction] >= rules[j]->order;
}

std::optional<Gen> LeadingRules::find_leading(const Expr& e) const {
  for (const Gen& g : gens_of(e, true)) {
    if (is_leading(g)) return g;
  }
  return std::nullopt;
}

LeadingRules KovalevskayaData::rules() const {
  LeadingRules r;
  r.direction = direction;
  for (std::size_t j = 0; j < orders.size(); ++j) r.rules.push_back(LeadingRule{orders[j], rhs[j]});
  return r;
}

Expr total_derivative(const Expr& e, int direction) {
  std::function<Expr(const Gen&)> leaf = [direction](const Gen& g) -> Expr {
    switch (g.kind()) {
      case GenKind::Independent: return g.index() == direction ? Expr(1) : Expr();
      case GenKind::Jet: return Expr(Gen::jet(g.index(), g.alpha().plus_unit(direction)));
      default: return Expr();
    }
  };
  return derive(e, leaf);
}

Expr total_derivative(const Expr& e, const MultiIndex& alpha) {
  Expr out = e;
  for (int slot = alpha.dim() - 1; slot >= 0; --slot) {
    for (int k = 0; k < alpha[slot]; ++k) out = total_derivative(out, slot);
  }
  return out;
}

std::vector<Expr> prolong(const PdeSystem& system, int order) {
  if (order < 0) throw ExprError("prolongation order must be nonnegative");
  std::vector<Expr> out;
  auto indices = multi_indices_up_to(system.dim(), order);
  for (const auto& f : system.equations) {
    std::map<MultiIndex, Expr> memo;
    memo.emplace(MultiIndex(system.dim()), f);
    for (const auto& alpha : indices) {
      if (!alpha.is_zero()) {
        int slot = alpha.first_nonzero();
        memo.emplace(alpha, total_derivative(memo.at(alpha.minus_unit(slot)), slot));
      }
      out.push_back(memo.at(alpha));
    }
  }
  return out;
}

std::set<Gen> jets_of(const Expr& e, int dependent) {
  std::set<Gen> out;
  for (const Gen& g : gens_of(e, true)) {
    if (g.is_jet() && (dependent < 0 || g.index() == dependent)) out.insert(g);
  }
  return out;
}

// ---------------------------------------------------------------------------

Reducer::Reducer(LeadingRules rules, int max_depth) : rules_(std::move(rules)), max_depth_(max_depth) {}

Expr Reducer::leading_value(const Gen& jet) {
  auto it = memo_.find(jet);
  if (it != memo_.end()) return it->second;
  if (!in_progress_.insert(jet).second || ++depth_ > max_depth_) {
    throw ExprError("on-shell reduction does not terminate (right-hand sides depend on leading coordinates)");
  }
  const auto& rule = *rules_.rules[static_cast<std::size_t>(jet.index())];
  const int dir = rules_.direction;
  MultiIndex beta = jet.alpha().minus_unit(dir, rule.order);
  Expr value;
  if (beta.is_zero()) {
    value = reduce(rule.rhs);
  } else {
    int slot = -1;
    for (int k = 0; k < beta.dim(); ++k) {
      if (k != dir && beta[k] > 0) {
        slot = k;
        break;
      }
    }
    if (slot < 0) slot = dir;
    Gen prev = Gen::jet(jet.index(), jet.alpha().minus_unit(slot));
    value = total_derivative(leading_value(prev), slot);
    if (!is_internal(value)) value = reduce(value);
  }
  --depth_;
  in_progress_.erase(jet);
  memo_.emplace(jet, value);
  return value;
}

Expr Reducer::reduce(const Expr& e) {
  Expr cur = e;
  for (int round = 0; round < 64; ++round) {
    std::map<Gen, Expr> bindings;
    for (const Gen& g : gens_of(cur, true)) {
      if (rules_.is_leading(g)) bindings.emplace(g, leading_value(g));
    }
    if (bindings.empty()) return cur;
    cur = substitute(cur, bindings);
  }
  throw ExprError("on-shell reduction exceeded its iteration bound");
}

Expr on_shell_reduce(const Expr& e, const PdeSystem& system) {
  if (!system.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
  Reducer r(system.kovalevskaya->rules());
  return r.reduce(e);
}

// ---------------------------------------------------------------------------

RationalMatrix invert(const RationalMatrix& m) {
  const std::size_t n = m.size();
  for (const auto& row : m) {
    if (row.size() != n) throw ExprError("change of variables needs a square matrix");
  }
  RationalMatrix a = m;
  RationalMatrix inv(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) throw ExprError("singular matrix in change of independent variables");
    std::swap(a[pivot], a[col]);
    std::swap(inv[pivot], inv[col]);
    Rational p = a[col][col];
    for (std::size_t k = 0; k < n; ++k) {
      a[col][k] /= p;
      inv[col][k] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0) continue;
      Rational f = a[r][col];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[col][k];
        inv[r][k] -= f * inv[col][k];
      }
    }
  }
  return inv;
}

Expr change_independent_variables(const Expr& e, const RationalMatrix& m) {
  const int n = static_cast<int>(m.size());
  RationalMatrix inv = invert(m);
  std::map<Gen, Expr> bindings;
  for (const Gen& g : gens_of(e, true)) {
    if (g.kind() == GenKind::Independent) {
      Expr v;
      for (int k = 0; k < n; ++k) {
        if (inv[static_cast<std::size_t>(g.index())][static_cast<std::size_t>(k)] != 0) {
          v = v + Expr(inv[static_cast<std::size_t>(g.index())][static_cast<std::size_t>(k)]) * Expr(Gen::independent(k));
        }
      }
      bindings.emplace(g, v);
    } else if (g.is_jet() && !g.alpha().is_zero()) {
      if (g.alpha().dim() != n) throw ExprError("matrix size does not match the number of independent variables");
      // d/dx_i = sum_k M[k][i] d/dy_k
      std::map<MultiIndex, Rational> poly{{MultiIndex(n), Rational(1)}};
      for (int i = 0; i < n; ++i) {
        for (int r = 0; r < g.alpha()[i]; ++r) {
          std::map<MultiIndex, Rational> next;
          for (const auto& [gamma, c] : poly) {
            for (int k = 0; k < n; ++k) {
              const Rational& mk = m[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
              if (mk != 0) next[gamma.plus_unit(k)] += c * mk;
            }
          }
          poly = std::move(next);
        }
      }
      Expr v;
      for (const auto& [gamma, c] : poly) {
        if (c != 0) v = v + Expr(c) * Expr(Gen::jet(g.index(), gamma));
      }
      bindings.emplace(g, v);
    }
  }
  return substitute(e, bindings);
}

PdeSystem change_independent_variables(const PdeSystem& system, const RationalMatrix& m) {
  if (static_cast<int>(m.size()) != system.dim()) {
    throw ExprError("matrix size does not match the number of independent variables");
  }
  PdeSystem out;
  out.ctx = system.ctx;
  for (const auto& f : system.equations) out.equations.push_back(change_independent_variables(f, m));
  for (const auto& f : system.constraints) out.constraints.push_back(change_independent_variables(f, m));
  return out;
}

}  // namespace jetcalc
