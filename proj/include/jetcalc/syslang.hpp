#pragma once
// Reader and canonical printer for `.pde` system files. The grammar is
// documented in docs/syslang.md.

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jetcalc/jet.hpp"
#include "jetcalc/operators.hpp"

namespace jetcalc {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

struct NamedOperator {
  std::string name;
  TotalDiffOp op;
};

/// Current components (T^1, ..., T^n), one per independent variable.
struct NamedLaw {
  std::string name;
  std::vector<Expr> components;
};

/// Generating function, one component per dependent variable. `fiber` marks a
/// symmetry acting on nonlocal variables only.
struct NamedSymmetry {
  std::string name;
  std::vector<Expr> components;
  bool fiber = false;
};

/// Metadata recorded by `cover`: how the nonlocal part was built.
struct CoveringSpec {
  std::string type;  // "lagrangian" or "potential"
  std::string density;
  std::vector<std::string> velocity;
  std::string law;
};

struct SystemFile {
  std::shared_ptr<Context> ctx = std::make_shared<Context>();
  std::vector<Expr> equations;
  std::vector<Expr> constraints;
  std::optional<KovalevskayaData> kovalevskaya;
  std::optional<Expr> lagrangian;
  std::vector<int> nonlocal;  // dependent indices
  std::optional<CoveringSpec> covering;
  std::vector<NamedOperator> operators;
  std::vector<NamedLaw> laws;
  std::vector<NamedSymmetry> symmetries;

  PdeSystem system() const;
  /// Declared operator, or the built-in `identity`. Throws ExprError if unknown.
  TotalDiffOp find_operator(const std::string& name) const;
  const NamedLaw& find_law(const std::string& name) const;
  const NamedSymmetry& find_symmetry(const std::string& name) const;
};

SystemFile parse_system(std::string_view text);
std::string print_system(const SystemFile& file);

/// Parse one expression against an existing context (positions are on line 1).
Expr parse_expression(std::string_view text, const Context& ctx);
/// Parse an operator entry such as "u*D_x + u_x" into coefficient form.
TotalDiffOp::Entry parse_operator_entry(std::string_view text, const Context& ctx);

}  // namespace jetcalc
