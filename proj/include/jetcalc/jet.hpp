#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jetcalc/context.hpp"
#include "jetcalc/expr.hpp"

namespace jetcalc {

/// u^j_{b e_n} = rhs for one dependent variable.
struct LeadingRule {
  int order = 1;
  Expr rhs;
};

/// Rewrite rules solving some dependent variables for a pure derivative in one
/// direction. A full set (one rule per dependent variable) is an extended
/// Kovalevskaya form.
struct LeadingRules {
  int direction = 0;
  std::vector<std::optional<LeadingRule>> rules;  // indexed by dependent variable

  bool is_leading(const Gen& g) const;
  /// First leading coordinate occurring in e, if any.
  std::optional<Gen> find_leading(const Expr& e) const;
};

struct KovalevskayaData {
  int direction = 0;
  std::vector<int> orders;
  std::vector<Expr> rhs;

  LeadingRules rules() const;
};

/// A system F^1 = 0, ..., F^m = 0 in one declaration context. Constraints are
/// additional relations (e.g. the Jacobian constraint of a covering) that are
/// not part of the solved evolution system.
struct PdeSystem {
  ContextPtr ctx;
  std::vector<Expr> equations;
  std::vector<Expr> constraints;
  std::optional<KovalevskayaData> kovalevskaya;

  int dim() const { return ctx->dim(); }
  int num_dependents() const { return ctx->num_dependents(); }
  bool is_square() const { return equations.size() == static_cast<std::size_t>(num_dependents()); }
};

/// D_i(e): partial in x^i plus the chain terms over jet coordinates present in e.
Expr total_derivative(const Expr& e, int direction);
/// D_alpha = D_1^{alpha_1} o ... o D_n^{alpha_n}.
Expr total_derivative(const Expr& e, const MultiIndex& alpha);

/// All D_alpha(F^i), |alpha| <= order, equation-major, graded order in alpha.
std::vector<Expr> prolong(const PdeSystem& system, int order);

/// Jet coordinates of dependent variable j (or all, j < 0) occurring in e, including inside atoms.
std::set<Gen> jets_of(const Expr& e, int dependent = -1);

/// On-shell reduction by leading-derivative substitution, memoizing D_beta(rhs).
class Reducer {
 public:
  explicit Reducer(LeadingRules rules, int max_depth = 4000);

  const LeadingRules& rules() const { return rules_; }
  Expr reduce(const Expr& e);
  /// Reduced value of a leading coordinate.
  Expr leading_value(const Gen& jet);
  bool is_internal(const Expr& e) const { return !rules_.find_leading(e); }

 private:
  LeadingRules rules_;
  int max_depth_;
  int depth_ = 0;
  std::map<Gen, Expr> memo_;
  std::set<Gen> in_progress_;
};

/// Reduce modulo the prolonged system. Requires Kovalevskaya data.
Expr on_shell_reduce(const Expr& e, const PdeSystem& system);

using RationalMatrix = std::vector<std::vector<Rational>>;

/// Inverse of a square rational matrix; throws ExprError if singular.
RationalMatrix invert(const RationalMatrix& m);

/// Rewrite e for new independent variables y = M x (chain rule on every jet).
Expr change_independent_variables(const Expr& e, const RationalMatrix& m);
/// Same for every equation of a system; Kovalevskaya data is dropped.
PdeSystem change_independent_variables(const PdeSystem& system, const RationalMatrix& m);

}  // namespace jetcalc
