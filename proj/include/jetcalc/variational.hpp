#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jetcalc/operators.hpp"
#include "jetcalc/oracle.hpp"

namespace jetcalc {

/// E_j(L) = sum_alpha (-1)^|alpha| D_alpha(dL/du^j_alpha), j = 0..m-1.
std::vector<Expr> euler(const Expr& lagrangian, int num_dependents);

struct VariationalResult {
  bool variational = false;
  OperatorComparison comparison;  // l_F against l_F*
  TotalDiffOp difference;         // l_F - l_F*, expanded
  std::optional<Expr> lagrangian;  // homotopy certificate, verified through euler
  std::string note;
};

/// Helmholtz test: F is an Euler-Lagrange expression iff l_F is formally self-adjoint.
VariationalResult is_variational(const PdeSystem& system, const OracleOptions& opts = {},
                                 const std::vector<Rational>& shift = {});

/// L = int_0^1 sum_j (u^j - c^j) F_j(c + lambda (u - c)) d lambda for polynomial F.
/// `shift` gives the base point c (defaults to 0). `dim` is inferred from the
/// jets of F when negative.
Expr homotopy_lagrangian(const std::vector<Expr>& equations, int num_dependents,
                         const std::vector<Rational>& shift = {}, int dim = -1);

/// Outcome of a componentwise on-shell check.
struct ComponentCheck {
  Evidence evidence;
  int component = -1;  // first failing component
  Expr residual;       // its on-shell value
  std::vector<Expr> values;  // every component after on-shell reduction

  bool holds() const { return evidence.affirmative(); }
};

/// l_F(phi) and the linearized constraints vanish on-shell.
ComponentCheck is_symmetry(const std::vector<Expr>& phi, const PdeSystem& system, const OracleOptions& opts = {});
/// l_F*(psi) vanishes on-shell.
ComponentCheck is_cosymmetry(const std::vector<Expr>& psi, const PdeSystem& system, const OracleOptions& opts = {});

struct SymplecticResult {
  OperatorComparison comparison;
  TotalDiffOp residual;  // adj(Delta) o l_F - adj(l_F) o Delta before reduction
  std::string note;
};

/// Representative-level test of Delta* o l_E = l_E* o Delta.
SymplecticResult symplectic_check(const TotalDiffOp& delta, const PdeSystem& system, const OracleOptions& opts = {});

struct NoetherResult {
  std::vector<Expr> cosymmetry;
  ComponentCheck check;
};

/// psi = Delta(phi); throws ExprError("candidate not symplectic on this symmetry")
/// if psi is not a cosymmetry.
NoetherResult noether_map(const TotalDiffOp& delta, const std::vector<Expr>& phi, const PdeSystem& system,
                          const OracleOptions& opts = {});

struct FiberSymmetry {
  std::string name;
  std::vector<Expr> components;
  bool fiber = false;  // declared to act on nonlocal variables only
};

struct DegeneracyEntry {
  std::string name;
  bool degenerate = false;
  std::vector<Expr> image;  // Delta(phi), reduced on-shell
  Evidence evidence;
  std::string verdict;
};

struct DegeneracyReport {
  std::vector<DegeneracyEntry> entries;
  /// True when some fiber symmetry is not annihilated.
  bool not_a_lift() const;
};

/// For every fiber symmetry decide whether Delta(phi) vanishes on-shell.
DegeneracyReport degeneracy_check(const TotalDiffOp& delta, const PdeSystem& system,
                                  const std::vector<FiberSymmetry>& symmetries, const std::vector<int>& nonlocal,
                                  const OracleOptions& opts = {});

}  // namespace jetcalc
