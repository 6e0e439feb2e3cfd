#include "jetcalc/multi_index.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace jetcalc {

namespace {
std::uint8_t checked_dim(int dim) {
  if (dim < 0 || dim > kMaxIndependent) {
    throw std::invalid_argument("multi-index dimension out of range: " + std::to_string(dim));
  }
  return static_cast<std::uint8_t>(dim);
}

std::uint8_t checked_exp(int e) {
  if (e < 0 || e > 255) throw std::invalid_argument("multi-index exponent out of range");
  return static_cast<std::uint8_t>(e);
}
}  // namespace

MultiIndex::MultiIndex(int dim) : dim_(checked_dim(dim)) {}

MultiIndex::MultiIndex(std::initializer_list<int> exponents)
    : dim_(checked_dim(static_cast<int>(exponents.size()))) {
  std::size_t i = 0;
  for (int e : exponents) exps_[i++] = checked_exp(e);
}

MultiIndex MultiIndex::unit(int dim, int slot, int count) {
  return MultiIndex(dim).plus_unit(slot, count);
}

int MultiIndex::order() const {
  return std::accumulate(exps_.begin(), exps_.begin() + dim_, 0);
}

MultiIndex MultiIndex::plus_unit(int slot, int count) const {
  if (slot < 0 || slot >= dim_) throw std::out_of_range("multi-index slot out of range");
  MultiIndex out = *this;
  out.exps_[static_cast<std::size_t>(slot)] = checked_exp(exps_[static_cast<std::size_t>(slot)] + count);
  return out;
}

MultiIndex MultiIndex::minus_unit(int slot, int count) const { return plus_unit(slot, -count); }

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("multi-index dimension mismatch");
  MultiIndex out = *this;
  for (int i = 0; i < dim_; ++i) out.exps_[i] = checked_exp(exps_[i] + other.exps_[i]);
  return out;
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("multi-index dimension mismatch");
  MultiIndex out = *this;
  for (int i = 0; i < dim_; ++i) out.exps_[i] = checked_exp(exps_[i] - other.exps_[i]);
  return out;
}

bool MultiIndex::contains(const MultiIndex& other) const {
  if (other.dim_ != dim_) return false;
  for (int i = 0; i < dim_; ++i) {
    if (other.exps_[i] > exps_[i]) return false;
  }
  return true;
}

int MultiIndex::first_nonzero() const {
  for (int i = 0; i < dim_; ++i) {
    if (exps_[i] != 0) return i;
  }
  return -1;
}

std::strong_ordering MultiIndex::operator<=>(const MultiIndex& other) const {
  if (auto c = dim_ <=> other.dim_; c != 0) return c;
  if (auto c = order() <=> other.order(); c != 0) return c;
  for (int i = 0; i < dim_; ++i) {
    if (auto c = exps_[i] <=> other.exps_[i]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order) {
  std::vector<MultiIndex> out{MultiIndex(dim)};
  std::size_t begin = 0;
  for (int k = 1; k <= max_order; ++k) {
    std::size_t end = out.size();
    std::vector<MultiIndex> layer;
    for (std::size_t idx = begin; idx < end; ++idx) {
      for (int slot = 0; slot < dim; ++slot) layer.push_back(out[idx].plus_unit(slot));
    }
    std::sort(layer.begin(), layer.end());
    layer.erase(std::unique(layer.begin(), layer.end()), layer.end());
    begin = out.size();
    out.insert(out.end(), layer.begin(), layer.end());
  }
  return out;
}

std::vector<MultiIndex> sub_indices(const MultiIndex& alpha) {
  std::vector<MultiIndex> out{MultiIndex(alpha.dim())};
  for (int slot = 0; slot < alpha.dim(); ++slot) {
    std::vector<MultiIndex> next;
    for (const auto& g : out) {
      for (int e = 0; e <= alpha[slot]; ++e) next.push_back(g.plus_unit(slot, e));
    }
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Integer multi_binomial(const MultiIndex& alpha, const MultiIndex& gamma) {
  Integer out = 1;
  for (int i = 0; i < alpha.dim(); ++i) {
    out *= binomial(static_cast<unsigned long>(alpha[i]), static_cast<unsigned long>(gamma[i]));
  }
  return out;
}

std::string to_string(const MultiIndex& alpha) {
  std::string s = "(";
  for (int i = 0; i < alpha.dim(); ++i) {
    if (i) s += ",";
    s += std::to_string(alpha[i]);
  }
  return s + ")";
}

}  // namespace jetcalc
