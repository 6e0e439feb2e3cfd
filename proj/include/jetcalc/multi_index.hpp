#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "jetcalc/rational.hpp"

namespace jetcalc {

inline constexpr int kMaxIndependent = 6;

/// Exponents (alpha_1, ..., alpha_n) of a derivative D_alpha, one slot per
/// independent variable.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int dim);
  MultiIndex(std::initializer_list<int> exponents);

  static MultiIndex unit(int dim, int slot, int count = 1);

  int dim() const { return dim_; }
  int operator[](int slot) const { return exps_[static_cast<std::size_t>(slot)]; }
  int order() const;
  bool is_zero() const { return order() == 0; }

  MultiIndex plus_unit(int slot, int count = 1) const;
  MultiIndex minus_unit(int slot, int count = 1) const;
  MultiIndex operator+(const MultiIndex& other) const;
  MultiIndex operator-(const MultiIndex& other) const;

  /// True iff other <= *this componentwise.
  bool contains(const MultiIndex& other) const;

  /// First slot with a nonzero exponent, or -1.
  int first_nonzero() const;

  /// Graded: total order first, then lexicographic on the exponent vector.
  std::strong_ordering operator<=>(const MultiIndex& other) const;
  bool operator==(const MultiIndex& other) const = default;

 private:
  std::array<std::uint8_t, kMaxIndependent> exps_{};
  std::uint8_t dim_ = 0;
};

/// All multi-indices of the given dimension with |alpha| <= max_order, graded order.
std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order);

/// All gamma with gamma <= alpha componentwise.
std::vector<MultiIndex> sub_indices(const MultiIndex& alpha);

/// Product of binomial coefficients prod_i C(alpha_i, gamma_i).
Integer multi_binomial(const MultiIndex& alpha, const MultiIndex& gamma);

std::string to_string(const MultiIndex& alpha);

}  // namespace jetcalc
