#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jetcalc/coverings.hpp"
#include "jetcalc/kovalevskaya.hpp"
#include "jetcalc/oracle.hpp"
#include "jetcalc/syslang.hpp"
#include "jetcalc/variational.hpp"

namespace jt {

using namespace jetcalc;

std::string corpus_path(const std::string& name);
std::string read_text(const std::string& path);
SystemFile load_corpus(const std::string& name);
SystemFile parse_text(const std::string& text);

/// Independents t, x, y (first `dim`), dependents u, v, w (first `deps`),
/// constants a (positive) and b.
ContextPtr scratch_context(int dim = 2, int deps = 1);
Expr jet(int dependent, const std::vector<int>& alpha);

/// Expression tree kept exactly as generated. Its evaluator works on the tree
/// itself and never calls into the kernel.
struct Raw {
  enum class Kind { Literal, Leaf, Sum, Product, Power, Quotient };
  Kind kind = Kind::Literal;
  Rational value;
  Gen leaf;
  int exponent = 0;
  std::vector<Raw> kids;
};

struct RawOptions {
  int max_depth = 6;
  bool division = true;
  bool negative_powers = true;
};

/// Trees whose kernel construction divides by zero are redrawn.
Raw random_raw(std::mt19937_64& rng, const std::vector<Gen>& leaves, const RawOptions& opts = {});
/// Build the kernel expression by plain arithmetic on the tree.
Expr build(const Raw& r);
/// Direct evaluation; nullopt when a divisor vanishes.
std::optional<Rational> eval_raw(const Raw& r, const std::map<Gen, Rational>& point);
std::string show(const Raw& r, const Context& ctx);

Expr random_polynomial(std::mt19937_64& rng, const std::vector<Gen>& leaves, int terms, int max_degree);
/// Jet coordinates of the first `deps` dependents up to `max_order`, plus independents if asked.
std::vector<Gen> jet_leaves(int dim, int deps, int max_order, bool independents = false);
TotalDiffOp random_operator(std::mt19937_64& rng, int rows, int cols, int dim, const std::vector<Gen>& leaves,
                            int max_order, int max_terms);
std::map<Gen, Rational> random_point(std::mt19937_64& rng, const std::vector<Gen>& leaves, const Context& ctx);

/// Kernel proofs collected through the proof observer.
struct CrossCheckSummary {
  std::size_t recorded = 0;
  std::size_t checked = 0;
  std::size_t on_shell = 0;
  std::size_t contradictions = 0;
  std::size_t undecidable = 0;
  std::vector<std::string> details;
};

void install_proof_recorder();
std::size_t recorded_proofs();
CrossCheckSummary cross_check_recorded(const OracleOptions& opts);
/// Cross-check one record: sampled off-shell, or at on-shell points when it carries a solved system.
Evidence cross_check(const ProofRecord& record, const OracleOptions& opts);

}  // namespace jt
