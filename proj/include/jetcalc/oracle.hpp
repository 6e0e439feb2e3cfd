#pragma once

// Numeric ground truth for symbolic identities: exact-rational evaluation at
// random points, high-precision floating evaluation when irrational powers are
// present, and on-shell sampling through a solved (Kovalevskaya) form.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "jetcalc/context.hpp"
#include "jetcalc/expr.hpp"
#include "jetcalc/jet.hpp"

namespace jetcalc {

using Float = boost::multiprecision::cpp_bin_float_50;

enum class Verdict { ProvedEqual, ProvedUnequal, ProbablyEqual };

std::string to_string(Verdict v);

struct OracleOptions {
  int trials = 25;
  double tol = 1e-9;
  std::uint64_t seed = 20240611;
  int resample_cap = 100;
};

/// Outcome of an identity check together with what backs it.
struct Evidence {
  Verdict verdict = Verdict::ProvedEqual;
  bool sampled = false;  // true when the verdict comes from the oracle
  bool float_mode = false;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string witness;  // description of a separating point, if any

  bool affirmative() const { return verdict != Verdict::ProvedUnequal; }
};

/// Raised when an evaluation hits a pole or leaves the real domain.
class SingularPoint : public std::runtime_error {
 public:
  SingularPoint() : std::runtime_error("singular sample point") {}
};

class UndecidableError : public ExprError {
 public:
  UndecidableError() : ExprError("undecidable at sampled points") {}
};

/// Assignment of exact values to leaves.
struct SamplePoint {
  std::map<Gen, Rational> values;
  /// Coordinates known only to working precision (computed through non-integer powers).
  std::map<Gen, Float> approximate;
};

/// True when e (or a test function it calls) contains a non-integer power, so
/// that exact rational evaluation is impossible.
bool needs_float(const Expr& e, const Context& ctx);

/// Evaluate exactly. Throws ExprError for an uncovered leaf, SingularPoint on poles.
Rational evaluate(const Expr& e, const SamplePoint& p, const Context& ctx);
Float evaluate_float(const Expr& e, const SamplePoint& p, const Context& ctx);

template <typename T>
using LeafValue = std::function<T(const Gen&)>;

/// Evaluate with leaf values supplied on demand (used for on-shell points).
Rational evaluate_with(const Expr& e, const LeafValue<Rational>& leaf, const Context& ctx);
Float evaluate_with(const Expr& e, const LeafValue<Float>& leaf, const Context& ctx);

/// Draw a value for a leaf: numerator in [-9, 9], denominator in [1, 9];
/// positive leaves get a positive numerator.
Rational draw_value(std::mt19937_64& rng, bool positive);

/// Random-point identity test of a == b.
Evidence random_identity_test(const Expr& a, const Expr& b, const Context& ctx, const OracleOptions& opts = {});

/// Kernel decision with oracle fallback: ProvedEqual iff a - b normalizes to 0;
/// ProvedUnequal for a nonzero difference in the rational fragment; otherwise
/// sampled.
Evidence equals(const Expr& a, const Expr& b, const Context& ctx, const OracleOptions& opts = {});

/// Lazily built point on a system in extended Kovalevskaya form: internal
/// coordinates are drawn at random, leading coordinates are computed by
/// evaluating D_beta(Phi) numerically at the point.
template <typename T>
class OnShellPoint {
 public:
  OnShellPoint(const Context& ctx, const KovalevskayaData& kd, std::mt19937_64& rng);

  T value(const Gen& g);
  T evaluate(const Expr& e);
  /// Drawn internal values (exact).
  const std::map<Gen, Rational>& drawn() const { return drawn_; }

 private:
  const Context& ctx_;
  const KovalevskayaData& kd_;
  std::mt19937_64& rng_;
  std::map<Gen, Rational> drawn_;
  std::map<Gen, T> computed_;
  std::map<std::pair<int, MultiIndex>, Expr> derivatives_;
  int depth_ = 0;

  const Expr& derivative_of_rhs(int j, const MultiIndex& beta);
};

extern template class OnShellPoint<Rational>;
extern template class OnShellPoint<Float>;

/// Point on the prolonged system: every jet with |alpha| <= order, plus
/// independents and constants. Drawn coordinates are exact; computed ones are
/// exact unless the solved form needs non-integer powers, in which case they go
/// to `approximate`. Resamples on singular draws.
SamplePoint on_shell_sample(const PdeSystem& system, int order, std::mt19937_64& rng, int resample_cap = 100);

/// Test e == 0 at random on-shell points.
Evidence on_shell_identity_test(const Expr& e, const PdeSystem& system, const OracleOptions& opts = {});

/// A kernel proof that lhs == rhs, optionally modulo a solved system.
struct ProofRecord {
  Expr lhs;
  Expr rhs;
  std::shared_ptr<const Context> ctx;
  std::optional<KovalevskayaData> shell;
};

using ProofObserver = std::function<void(const ProofRecord&)>;

/// Install a process-wide observer of kernel proofs (testing aid); pass an empty function to remove it.
void set_proof_observer(ProofObserver observer);
/// Report a kernel proof to the observer, if one is installed.
void notify_proof(const Expr& lhs, const Expr& rhs, const Context& ctx, const KovalevskayaData* shell = nullptr);

}  // namespace jetcalc
