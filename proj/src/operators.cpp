#include "jetcalc/operators.hpp"

#include <algorithm>
#include <set>

namespace jetcalc {

TotalDiffOp::TotalDiffOp(int rows, int cols, int dim)
    : rows_(rows), cols_(cols), dim_(dim), entries_(static_cast<std::size_t>(rows * cols)) {
  if (rows < 0 || cols < 0) throw ShapeError("negative operator shape");
}

TotalDiffOp TotalDiffOp::identity(int size, int dim) {
  TotalDiffOp op(size, size, dim);
  for (int i = 0; i < size; ++i) op.add_term(i, i, MultiIndex(dim), 1);
  return op;
}

TotalDiffOp TotalDiffOp::term(const Expr& coefficient, const MultiIndex& alpha) {
  TotalDiffOp op(1, 1, alpha.dim());
  op.add_term(0, 0, alpha, coefficient);
  return op;
}

const TotalDiffOp::Entry& TotalDiffOp::entry(int i, int j) const {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("operator entry out of range");
  return entries_[static_cast<std::size_t>(i * cols_ + j)];
}

void TotalDiffOp::add_term(int i, int j, const MultiIndex& alpha, const Expr& coefficient) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("operator entry out of range");
  if (alpha.dim() != dim_) throw ShapeError("multi-index dimension does not match operator");
  if (coefficient.is_zero()) return;
  auto& e = entries_[static_cast<std::size_t>(i * cols_ + j)];
  auto it = e.find(alpha);
  if (it == e.end()) {
    e.emplace(alpha, coefficient);
  } else {
    it->second = it->second + coefficient;
    if (it->second.is_zero()) e.erase(it);
  }
}

void TotalDiffOp::set_entry(int i, int j, Entry e) {
  if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("operator entry out of range");
  std::erase_if(e, [](const auto& kv) { return kv.second.is_zero(); });
  entries_[static_cast<std::size_t>(i * cols_ + j)] = std::move(e);
}

int TotalDiffOp::order() const {
  int k = -1;
  for (const auto& e : entries_) {
    for (const auto& [alpha, c] : e) k = std::max(k, alpha.order());
  }
  return k;
}

bool TotalDiffOp::is_zero() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.empty(); });
}

void TotalDiffOp::check_shape(const TotalDiffOp& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_ || dim_ != other.dim_) {
    throw ShapeError("operator shape mismatch");
  }
}

TotalDiffOp TotalDiffOp::operator+(const TotalDiffOp& other) const {
  check_shape(other);
  TotalDiffOp out = *this;
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) {
      for (const auto& [alpha, c] : other.entry(i, j)) out.add_term(i, j, alpha, c);
    }
  }
  return out;
}

TotalDiffOp TotalDiffOp::operator-() const {
  TotalDiffOp out = *this;
  for (auto& e : out.entries_) {
    for (auto& [alpha, c] : e) c = -c;
  }
  return out;
}

TotalDiffOp TotalDiffOp::operator-(const TotalDiffOp& other) const { return *this + (-other); }

bool TotalDiffOp::operator==(const TotalDiffOp& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && dim_ == other.dim_ && entries_ == other.entries_;
}

// ---------------------------------------------------------------------------

namespace {
// D_gamma(f) for all gamma requested, memoized by building on smaller indices.
class DerivativeCache {
 public:
  explicit DerivativeCache(Expr f) : f_(std::move(f)) {}

  const Expr& get(const MultiIndex& gamma) {
    auto it = memo_.find(gamma);
    if (it != memo_.end()) return it->second;
    Expr v;
    if (gamma.is_zero()) {
      v = f_;
    } else {
      int slot = gamma.first_nonzero();
      v = total_derivative(get(gamma.minus_unit(slot)), slot);
    }
    return memo_.emplace(gamma, std::move(v)).first->second;
  }

 private:
  Expr f_;
  std::map<MultiIndex, Expr> memo_;
};
}  // namespace

std::vector<Expr> apply_operator(const TotalDiffOp& op, const std::vector<Expr>& phi) {
  if (static_cast<int>(phi.size()) != op.cols()) {
    throw ShapeError("operator has " + std::to_string(op.cols()) + " columns but the vector has " +
                     std::to_string(phi.size()) + " components");
  }
  std::vector<DerivativeCache> caches;
  caches.reserve(phi.size());
  for (const auto& p : phi) caches.emplace_back(p);
  std::vector<Expr> out(static_cast<std::size_t>(op.rows()));
  for (int i = 0; i < op.rows(); ++i) {
    Expr sum;
    for (int j = 0; j < op.cols(); ++j) {
      for (const auto& [alpha, c] : op.entry(i, j)) {
        sum = sum + c * caches[static_cast<std::size_t>(j)].get(alpha);
      }
    }
    out[static_cast<std::size_t>(i)] = sum;
  }
  return out;
}

TotalDiffOp compose(const TotalDiffOp& outer, const TotalDiffOp& inner) {
  if (outer.cols() != inner.rows()) throw ShapeError("cannot compose: inner rows do not match outer columns");
  if (outer.dim() != inner.dim()) throw ShapeError("cannot compose operators of different dimensions");
  TotalDiffOp out(outer.rows(), inner.cols(), outer.dim());
  // Cache derivatives of inner coefficients.
  std::map<std::tuple<int, int, MultiIndex>, DerivativeCache> caches;
  auto cache_for = [&](int k, int j, const MultiIndex& beta) -> DerivativeCache& {
    auto key = std::make_tuple(k, j, beta);
    auto it = caches.find(key);
    if (it == caches.end()) it = caches.emplace(key, DerivativeCache(inner.entry(k, j).at(beta))).first;
    return it->second;
  };
  for (int i = 0; i < outer.rows(); ++i) {
    for (int k = 0; k < outer.cols(); ++k) {
      for (const auto& [alpha, a] : outer.entry(i, k)) {
        auto gammas = sub_indices(alpha);
        for (int j = 0; j < inner.cols(); ++j) {
          for (const auto& [beta, b] : inner.entry(k, j)) {
            (void)b;
            for (const auto& gamma : gammas) {
              Expr d = cache_for(k, j, beta).get(gamma);
              if (d.is_zero()) continue;
              Rational binom(multi_binomial(alpha, gamma));
              out.add_term(i, j, alpha - gamma + beta, a * d * Expr(binom));
            }
          }
        }
      }
    }
  }
  return out;
}

TotalDiffOp adjoint(const TotalDiffOp& op) {
  TotalDiffOp out(op.cols(), op.rows(), op.dim());
  for (int i = 0; i < op.rows(); ++i) {
    for (int j = 0; j < op.cols(); ++j) {
      for (const auto& [alpha, a] : op.entry(i, j)) {
        DerivativeCache cache(a);
        Rational sign = alpha.order() % 2 == 0 ? 1 : -1;
        for (const auto& gamma : sub_indices(alpha)) {
          Expr d = cache.get(alpha - gamma);
          if (d.is_zero()) continue;
          Rational binom(multi_binomial(alpha, gamma));
          out.add_term(j, i, gamma, d * Expr(sign * binom));
        }
      }
    }
  }
  return out;
}

TotalDiffOp linearize(const std::vector<Expr>& equations, int num_dependents, int dim) {
  TotalDiffOp out(static_cast<int>(equations.size()), num_dependents, dim);
  for (std::size_t i = 0; i < equations.size(); ++i) {
    for (const Gen& g : jets_of(equations[i])) {
      if (g.index() >= num_dependents) throw ShapeError("equation refers to an undeclared dependent variable");
      Expr c = partial(equations[i], g);
      out.add_term(static_cast<int>(i), g.index(), g.alpha(), c);
    }
  }
  return out;
}

TotalDiffOp linearize(const PdeSystem& system) {
  return linearize(system.equations, system.num_dependents(), system.dim());
}

namespace {
Expr coefficient(const TotalDiffOp& op, int i, int j, const MultiIndex& alpha) {
  const auto& e = op.entry(i, j);
  auto it = e.find(alpha);
  return it == e.end() ? Expr() : it->second;
}

OperatorComparison compare_coefficients(const TotalDiffOp& a, const TotalDiffOp& b, const Context& ctx,
                                        const OracleOptions& opts, const KovalevskayaData* shell) {
  std::optional<Reducer> reducer;
  if (shell) reducer.emplace(shell->rules());
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("operators have different shapes");
  OperatorComparison result;
  result.evidence.verdict = Verdict::ProvedEqual;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      std::set<MultiIndex> alphas;
      for (const auto& [alpha, c] : a.entry(i, j)) alphas.insert(alpha);
      for (const auto& [alpha, c] : b.entry(i, j)) alphas.insert(alpha);
      for (const auto& alpha : alphas) {
        Expr ca = coefficient(a, i, j, alpha);
        Expr cb = coefficient(b, i, j, alpha);
        Expr c = ca - cb;
        if (c.is_zero()) {
          notify_proof(ca, cb, ctx);
          continue;
        }
        Expr r = reducer ? reducer->reduce(c) : c;
        if (r.is_zero()) {
          notify_proof(c, Expr(), ctx, shell);
          continue;
        }
        Evidence ev = equals(r, Expr(), ctx, opts);
        if (ev.verdict == Verdict::ProvedUnequal) {
          result.evidence = ev;
          result.row = i;
          result.col = j;
          result.alpha = alpha;
          result.residual = r;
          return result;
        }
        if (ev.verdict == Verdict::ProbablyEqual) result.evidence = ev;
      }
    }
  }
  return result;
}
}  // namespace

OperatorComparison op_equals(const TotalDiffOp& a, const TotalDiffOp& b, const Context& ctx,
                             const OracleOptions& opts) {
  return compare_coefficients(a, b, ctx, opts, nullptr);
}

OperatorComparison op_equals_on_shell(const TotalDiffOp& a, const TotalDiffOp& b, const PdeSystem& system,
                                      const OracleOptions& opts) {
  if (!system.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
  return compare_coefficients(a, b, *system.ctx, opts, &*system.kovalevskaya);
}

std::vector<Expr> lagrange_divergence_witness(const TotalDiffOp& op, const Expr& phi, const Expr& psi) {
  if (op.rows() != 1 || op.cols() != 1) throw ShapeError("divergence witness needs a scalar operator");
  const int n = op.dim();
  std::vector<Expr> w(static_cast<std::size_t>(n));
  DerivativeCache dphi(phi);
  for (const auto& [alpha, a] : op.entry(0, 0)) {
    // g * D_rest(phi) = D_i(g * D_{rest - e_i} phi) - D_i(g) * D_{rest - e_i} phi
    Expr g = psi * a;
    MultiIndex rest = alpha;
    while (!rest.is_zero()) {
      int slot = rest.first_nonzero();
      rest = rest.minus_unit(slot);
      w[static_cast<std::size_t>(slot)] = w[static_cast<std::size_t>(slot)] + g * dphi.get(rest);
      g = -total_derivative(g, slot);
    }
  }
  return w;
}

std::string format_entry(const TotalDiffOp::Entry& entry, const Context& ctx) {
  if (entry.empty()) return "0";
  std::string out;
  bool first = true;
  for (auto it = entry.rbegin(); it != entry.rend(); ++it) {
    const auto& [alpha, c] = *it;
    Expr coef = c;
    bool negative = false;
    const auto& d = c.data();
    if (d.den.empty() && d.num.size() == 1 && d.num.terms()[0].second < 0) {
      negative = true;
      coef = -c;
    }
    std::string cs = format(coef, ctx);
    bool compound = !(coef.data().den.empty() && coef.data().num.size() == 1);
    std::string term;
    if (alpha.is_zero()) {
      term = compound ? "(" + cs + ")" : cs;
    } else {
      std::string dpart = "D_" + ctx.derivative_suffix(alpha);
      if (auto r = coef.as_rational(); r && *r == 1) {
        term = dpart;
      } else {
        term = (compound ? "(" + cs + ")" : cs) + "*" + dpart;
      }
    }
    if (first) {
      out = negative ? "-" + term : term;
    } else {
      out += negative ? " - " : " + ";
      out += term;
    }
    first = false;
  }
  return out;
}

std::string format(const TotalDiffOp& op, const Context& ctx) {
  std::string out;
  for (int i = 0; i < op.rows(); ++i) {
    out += "[";
    for (int j = 0; j < op.cols(); ++j) {
      if (j) out += ", ";
      out += format_entry(op.entry(i, j), ctx);
    }
    out += "]";
    if (i + 1 < op.rows()) out += "\n";
  }
  return out;
}

}  // namespace jetcalc
