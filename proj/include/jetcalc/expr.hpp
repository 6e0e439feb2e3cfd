#pragma once

// Exact symbolic expressions over a jet space.
//
// Every Expr is stored in canonical form: a Laurent polynomial numerator over
// generators (independent variables, constants, jet coordinates, auxiliary
// parameters and opaque atoms) divided by a product of monic polynomial factors.
// Zero has exactly one representation, so zero testing in the rational
// fragment is exact.

#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "jetcalc/multi_index.hpp"
#include "jetcalc/rational.hpp"

namespace jetcalc {

struct ExprData;
struct AtomData;
class Gen;

class Expr {
 public:
  Expr();
  Expr(int value);  // NOLINT(google-explicit-constructor)
  Expr(long value);  // NOLINT(google-explicit-constructor)
  Expr(const Rational& value);  // NOLINT(google-explicit-constructor)
  explicit Expr(const Gen& g);

  bool is_zero() const;
  /// The value if this expression is a rational number.
  std::optional<Rational> as_rational() const;
  /// The generator if this expression is exactly one generator.
  std::optional<Gen> as_gen() const;
  /// No denominator factors and no negative exponents.
  bool is_polynomial() const;
  bool has_atoms() const;

  const ExprData& data() const { return *data_; }

  Expr operator-() const;
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  Expr& operator+=(const Expr& b) { return *this = *this + b; }
  Expr& operator-=(const Expr& b) { return *this = *this - b; }
  Expr& operator*=(const Expr& b) { return *this = *this * b; }

  /// Structural comparison of canonical forms. Equal iff identical.
  std::strong_ordering compare(const Expr& other) const;
  friend bool operator==(const Expr& a, const Expr& b) { return a.compare(b) == 0; }
  friend bool operator<(const Expr& a, const Expr& b) { return a.compare(b) < 0; }

  explicit Expr(std::shared_ptr<const ExprData> d) : data_(std::move(d)) {}

 private:
  std::shared_ptr<const ExprData> data_;
};

Expr pow(const Expr& base, long exponent);
/// General power. Integer exponents are exact; otherwise a power atom is formed
/// (positive base assumed).
Expr pow(const Expr& base, const Expr& exponent);

enum class GenKind : std::uint8_t { Independent = 0, Constant = 1, Jet = 2, Param = 3, Atom = 4 };

/// A generator of the polynomial algebra.
class Gen {
 public:
  static Gen independent(int i);
  static Gen constant(int k);
  static Gen jet(int dependent, const MultiIndex& alpha);
  static Gen param(int id);
  static Gen atom(std::shared_ptr<const AtomData> data);

  GenKind kind() const { return kind_; }
  int index() const { return index_; }
  const MultiIndex& alpha() const { return alpha_; }
  const AtomData& atom() const { return *atom_; }
  const std::shared_ptr<const AtomData>& atom_ptr() const { return atom_; }

  bool is_jet() const { return kind_ == GenKind::Jet; }
  bool is_atom() const { return kind_ == GenKind::Atom; }

  std::strong_ordering operator<=>(const Gen& other) const;
  bool operator==(const Gen& other) const { return (*this <=> other) == 0; }

 private:
  GenKind kind_ = GenKind::Independent;
  int index_ = 0;
  MultiIndex alpha_;
  std::shared_ptr<const AtomData> atom_;
};

/// Opaque generator: a power with non-integer exponent, or an application of a
/// declared function symbol (possibly differentiated).
struct AtomData {
  enum class Kind : std::uint8_t { Power, Function };
  Kind kind = Kind::Power;
  // Power: base^exponent, exponent has no integer part and positive leading coefficient.
  Expr base;
  Expr exponent;
  // Function: f^{(orders)}(args).
  int function = -1;
  std::vector<int> orders;
  std::vector<Expr> args;

  std::strong_ordering compare(const AtomData& other) const;
  /// Rational exponent 1/q when this is a root atom.
  std::optional<Rational> rational_exponent() const;
};

Expr function_application(int function, std::vector<int> orders, std::vector<Expr> args);

class Monomial {
 public:
  using Factor = std::pair<Gen, int>;

  Monomial() = default;
  static Monomial of(const Gen& g, int exp = 1);

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }
  int degree() const { return degree_; }
  int exponent(const Gen& g) const;
  bool has_negative() const;

  Monomial operator*(const Monomial& other) const;
  Monomial operator/(const Monomial& other) const;
  Monomial pow(int k) const;
  /// Componentwise minimum with other (absent generators count as zero).
  Monomial min_with(const Monomial& other) const;
  /// True iff other / *this has only nonnegative exponents.
  bool divides(const Monomial& other) const;
  Monomial without(const Gen& g) const;

  /// Graded lexicographic order on exponent vectors.
  std::strong_ordering operator<=>(const Monomial& other) const;
  bool operator==(const Monomial& other) const { return factors_ == other.factors_; }

 private:
  std::vector<Factor> factors_;  // sorted by generator, nonzero exponents
  int degree_ = 0;
  void recompute_degree();
};

class Poly {
 public:
  using Term = std::pair<Monomial, Rational>;

  Poly() = default;
  static Poly constant(const Rational& c);
  static Poly monomial(const Monomial& m, const Rational& c = 1);
  static Poly from_terms(std::vector<Term> terms);  // sorts and merges

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  std::size_t size() const { return terms_.size(); }
  const Term& leading() const { return terms_.back(); }
  Rational constant_term() const;

  Poly operator+(const Poly& other) const;
  Poly operator-(const Poly& other) const;
  Poly operator-() const;
  Poly operator*(const Poly& other) const;
  Poly scaled(const Rational& c) const;
  Poly times(const Monomial& m) const;
  Poly times(const Monomial& m, const Rational& c) const;
  Poly pow(int k) const;

  /// Per-generator minimum exponent over all terms (absent counts as zero).
  Monomial content_monomial() const;
  bool has_negative_exponents() const;
  /// Derivative with respect to a generator, treating other generators as independent.
  Poly partial(const Gen& g) const;
  std::set<Gen> generators() const;

  std::strong_ordering operator<=>(const Poly& other) const;
  bool operator==(const Poly& other) const;

 private:
  std::vector<Term> terms_;  // ascending monomial order, nonzero coefficients
};

/// Exact division in the Laurent polynomial ring; nullopt if divisor does not divide.
std::optional<Poly> exact_divide(const Poly& dividend, const Poly& divisor);

using DenFactors = std::vector<std::pair<Poly, int>>;

struct ExprData {
  Poly num;
  DenFactors den;  // sorted, each factor monic with no monomial content, positive exponents
  bool atoms = false;
};

/// Build a canonical expression from a numerator and normalized denominator factors.
Expr make_expr(Poly num, DenFactors den);

/// Collect generators occurring in e. With recurse_atoms, the leaves inside atoms
/// are added as well (the atoms themselves are always included).
void collect_gens(const Expr& e, std::set<Gen>& out, bool recurse_atoms = true);
std::set<Gen> gens_of(const Expr& e, bool recurse_atoms = true);

/// Apply a derivation. leaf_derivative supplies the derivative of every
/// non-atom generator; atoms are differentiated by the chain rule.
Expr derive(const Expr& e, const std::function<Expr(const Gen&)>& leaf_derivative);

/// Partial derivative with respect to a non-atom generator.
Expr partial(const Expr& e, const Gen& v);

/// Simultaneous single-pass substitution of generators (including inside atoms).
Expr substitute(const Expr& e, const std::map<Gen, Expr>& bindings);

/// Rebuild the canonical form from scratch.
Expr renormalize(const Expr& e);

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jetcalc
