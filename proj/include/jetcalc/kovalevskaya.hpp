#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jetcalc/jet.hpp"
#include "jetcalc/oracle.hpp"

namespace jetcalc {

/// One step of the elimination: equation `equation` solved for u^dependent_{order x^dir}.
struct Elimination {
  int equation = -1;
  int dependent = -1;
  int order = 0;
  Expr coefficient;  // d(reduced equation)/d(pivot)
  Expr rhs;          // right-hand side when solved (before later re-reduction)
};

/// Optional constraints on the search: orders per dependent variable and
/// equation-to-dependent assignments.
struct KovalevskayaHints {
  std::map<int, int> orders;
  std::map<int, int> assignment;
};

struct KovalevskayaForm {
  KovalevskayaData data;
  std::vector<Elimination> audit;
};

/// Greedy elimination. Throws ExprError("Kovalevskaya search failed; supply hints").
KovalevskayaForm to_kovalevskaya(const PdeSystem& system, int direction, const KovalevskayaHints& hints = {});

/// Re-run the recorded eliminations on the original equations.
KovalevskayaData replay_eliminations(const PdeSystem& system, int direction, const std::vector<Elimination>& audit);

/// Parse hints such as "u=2, v=2, eq4=w" (1-based equation numbers).
KovalevskayaHints parse_hints(const std::string& text, const Context& ctx);

struct KovalevskayaValidation {
  bool valid = false;
  std::string reason;
  std::optional<Gen> offending;  // leading coordinate found in a right-hand side
  Evidence evidence;             // strongest evidence used for the equation checks
};

/// Independence invariant, forward inclusion (every original equation reduces
/// to zero) and reverse inclusion (every solved equation is derived from the
/// originals, via the audit trail or a fresh search with the same orders).
KovalevskayaValidation validate_kovalevskaya(const KovalevskayaData& data, const PdeSystem& system,
                                             const std::vector<Elimination>* audit = nullptr,
                                             const OracleOptions& opts = {});

/// Numbered elimination script, one line per step.
std::string format_audit(const std::vector<Elimination>& audit, int direction, const Context& ctx);

}  // namespace jetcalc
