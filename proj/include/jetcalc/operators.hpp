#pragma once

#include <map>
#include <string>
#include <vector>

#include "jetcalc/jet.hpp"
#include "jetcalc/oracle.hpp"

namespace jetcalc {

/// Matrix operator in total derivatives. Entry (i, j) is sum_alpha a_alpha D_alpha,
/// stored expanded with every D_alpha to the right of its coefficient.
class TotalDiffOp {
 public:
  using Entry = std::map<MultiIndex, Expr>;

  TotalDiffOp() = default;
  TotalDiffOp(int rows, int cols, int dim);

  static TotalDiffOp identity(int size, int dim);
  /// 1x1 operator with a single term coefficient * D_alpha.
  static TotalDiffOp term(const Expr& coefficient, const MultiIndex& alpha);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int dim() const { return dim_; }

  const Entry& entry(int i, int j) const;
  /// Adds coefficient * D_alpha to entry (i, j), dropping the term if it cancels.
  void add_term(int i, int j, const MultiIndex& alpha, const Expr& coefficient);
  void set_entry(int i, int j, Entry e);

  /// Highest |alpha| with a nonzero coefficient, or -1 for the zero operator.
  int order() const;
  bool is_zero() const;

  TotalDiffOp operator+(const TotalDiffOp& other) const;
  TotalDiffOp operator-(const TotalDiffOp& other) const;
  TotalDiffOp operator-() const;
  bool operator==(const TotalDiffOp& other) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int dim_ = 0;
  std::vector<Entry> entries_;
  void check_shape(const TotalDiffOp& other) const;
};

class ShapeError : public ExprError {
 public:
  using ExprError::ExprError;
};

std::vector<Expr> apply_operator(const TotalDiffOp& op, const std::vector<Expr>& phi);
TotalDiffOp compose(const TotalDiffOp& outer, const TotalDiffOp& inner);
/// Formal adjoint: (A*)^{ij} = sum_alpha (-1)^|alpha| D_alpha o a^{ji}_alpha, expanded.
TotalDiffOp adjoint(const TotalDiffOp& op);

/// Universal linearization of F^1..F^r in m dependent variables.
TotalDiffOp linearize(const std::vector<Expr>& equations, int num_dependents, int dim);
TotalDiffOp linearize(const PdeSystem& system);

/// Where two operators first differ, with the evidence behind the verdict.
struct OperatorComparison {
  Evidence evidence;
  int row = -1;
  int col = -1;
  MultiIndex alpha;
  Expr residual;  // coefficient of the difference at (row, col, alpha)

  bool equal() const { return evidence.affirmative(); }
};

/// Off-shell comparison of expanded operators, coefficient by coefficient.
OperatorComparison op_equals(const TotalDiffOp& a, const TotalDiffOp& b, const Context& ctx,
                             const OracleOptions& opts = {});

/// Compare operators restricted to the system: every coefficient of a - b must
/// reduce to zero modulo the prolonged equations.
OperatorComparison op_equals_on_shell(const TotalDiffOp& a, const TotalDiffOp& b, const PdeSystem& system,
                                      const OracleOptions& opts = {});

/// Components W^i with sum_i D_i(W^i) = psi * op(phi) - op*(psi) * phi for a
/// scalar operator, built by integrating by parts term by term.
std::vector<Expr> lagrange_divergence_witness(const TotalDiffOp& op, const Expr& phi, const Expr& psi);

std::string format_entry(const TotalDiffOp::Entry& entry, const Context& ctx);
/// One bracketed row per line, e.g. "[D_t + u*D_x + u_x]".
std::string format(const TotalDiffOp& op, const Context& ctx);

}  // namespace jetcalc
