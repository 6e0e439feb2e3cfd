#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jetcalc/expr.hpp"

namespace jetcalc {

struct ConstantDecl {
  std::string name;
};

struct FunctionDecl {
  std::string name;
  int arity = 1;
  /// Highest derivative written out in the declaration (H, H', H'' gives 2).
  int declared_order = 0;
};

/// Numeric stand-in for a declared function symbol, used only by the oracle.
/// The body is written in Gen::param(slot) for each argument slot; derivatives
/// are obtained by differentiating the body.
struct TestFunction {
  Expr body;
  std::vector<std::string> params;  // display names of the argument slots
};

/// One declaration context: the names behind every generator index.
class Context {
 public:
  std::vector<std::string> independents;
  std::vector<std::string> dependents;
  std::vector<ConstantDecl> constants;
  std::vector<FunctionDecl> functions;
  /// Constants, dependent variables or jet coordinates assumed strictly positive.
  std::set<Gen> positive;
  std::map<int, TestFunction> test_functions;
  /// Display names for auxiliary parameters.
  std::map<int, std::string> param_names;

  int dim() const { return static_cast<int>(independents.size()); }
  int num_dependents() const { return static_cast<int>(dependents.size()); }
  int num_constants() const { return static_cast<int>(constants.size()); }

  std::optional<int> find_independent(const std::string& name) const;
  std::optional<int> find_dependent(const std::string& name) const;
  std::optional<int> find_constant(const std::string& name) const;
  std::optional<int> find_function(const std::string& name) const;
  bool is_declared(const std::string& name) const;

  Gen independent(const std::string& name) const;
  Gen dependent(const std::string& name) const;  // the jet u^j_0
  Gen constant(const std::string& name) const;
  Gen jet(const std::string& dependent, const std::string& suffix) const;

  /// Resolve `u`, `u_tx`, `t`, `gamma` to a generator; nullopt if not a leaf name.
  std::optional<Gen> resolve(const std::string& identifier) const;
  /// Split a jet suffix such as "txx" into a multi-index.
  std::optional<MultiIndex> parse_suffix(const std::string& suffix) const;

  std::string jet_name(int dependent, const MultiIndex& alpha) const;
  std::string derivative_suffix(const MultiIndex& alpha) const;
  /// Name of a non-atom generator.
  std::string gen_name(const Gen& g) const;
  std::string function_name(int function, const std::vector<int>& orders) const;

  bool is_positive(const Gen& g) const;

  /// Throws ExprError("undeclared variable ...") unless g belongs to this context.
  void check_declared(const Gen& g) const;
};

using ContextPtr = std::shared_ptr<const Context>;

/// Canonical text for an expression, parseable by the system-file reader.
std::string format(const Expr& e, const Context& ctx);
std::string format_gen(const Gen& g, const Context& ctx);

}  // namespace jetcalc
