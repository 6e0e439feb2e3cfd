#include "jetcalc/oracle.hpp"

#include <sstream>

namespace jetcalc {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ProvedEqual: return "ProvedEqual";
    case Verdict::ProvedUnequal: return "ProvedUnequal";
    case Verdict::ProbablyEqual: return "ProbablyEqual";
  }
  return "?";
}

namespace {

Float to_float(const Rational& r) {
  return Float(r.get_num().get_str()) / Float(r.get_den().get_str());
}

template <typename T>
T from_rational(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>) {
    return r;
  } else {
    return to_float(r);
  }
}

template <typename T>
bool is_zero_value(const T& v) {
  return v == 0;
}

template <typename T>
T int_pow(const T& base, int e) {
  if (e < 0) {
    if (is_zero_value(base)) throw SingularPoint();
    return T(1) / int_pow(base, -e);
  }
  T out = 1;
  T b = base;
  while (e > 0) {
    if (e & 1) out *= b;
    e >>= 1;
    if (e) b *= b;
  }
  return out;
}

// Exact k-th root of a nonnegative integer, if there is one.
std::optional<mpz_class> exact_root(const mpz_class& n, unsigned long k) {
  mpz_class r;
  if (mpz_root(r.get_mpz_t(), n.get_mpz_t(), k) == 0) return std::nullopt;
  return r;
}

// b^(p/q) when b is a perfect q-th power.
Rational exact_power(const Rational& b, const Rational& x) {
  if (b <= 0) throw SingularPoint();
  if (x.get_den() > 1024 || abs(x.get_num()) > 4096) throw ExprError("exact evaluation of a non-integer power");
  unsigned long q = x.get_den().get_ui();
  auto num = exact_root(b.get_num(), q);
  auto den = exact_root(b.get_den(), q);
  if (!num || !den) throw ExprError("exact evaluation of a non-integer power");
  Rational root(*num, *den);
  return int_pow(root, static_cast<int>(x.get_num().get_si()));
}

template <typename T>
class Evaluator {
 public:
  Evaluator(const LeafValue<T>& leaf, const Context& ctx) : leaf_(leaf), ctx_(ctx) {}

  T gen(const Gen& g) {
    auto it = memo_.find(g);
    if (it != memo_.end()) return it->second;
    T v;
    if (!g.is_atom()) {
      v = leaf_(g);
    } else {
      const auto& a = g.atom();
      if (a.kind == AtomData::Kind::Power) {
        if constexpr (std::is_same_v<T, Rational>) {
          v = exact_power(run(a.base), run(a.exponent));
        } else {
          T b = run(a.base);
          T x = run(a.exponent);
          if (b <= 0) throw SingularPoint();
          v = boost::multiprecision::pow(b, x);
        }
      } else {
        auto tf = ctx_.test_functions.find(a.function);
        if (tf == ctx_.test_functions.end()) {
          throw ExprError("no test callback registered for function '" + ctx_.function_name(a.function, {}) + "'");
        }
        Expr body = tf->second.body;
        for (std::size_t slot = 0; slot < a.orders.size(); ++slot) {
          for (int k = 0; k < a.orders[slot]; ++k) body = partial(body, Gen::param(static_cast<int>(slot)));
        }
        std::vector<T> args;
        for (const auto& arg : a.args) args.push_back(run(arg));
        LeafValue<T> inner = [&](const Gen& p) -> T {
          if (p.kind() == GenKind::Param && p.index() >= 0 && static_cast<std::size_t>(p.index()) < args.size()) {
            return args[static_cast<std::size_t>(p.index())];
          }
          return leaf_(p);
        };
        Evaluator<T> sub(inner, ctx_);
        v = sub.run(body);
      }
    }
    memo_.emplace(g, v);
    return v;
  }

  T poly(const Poly& p) {
    T sum = 0;
    for (const auto& [m, c] : p.terms()) {
      T term = from_rational<T>(c);
      for (const auto& [g, e] : m.factors()) term *= int_pow(gen(g), e);
      sum += term;
    }
    return sum;
  }

  T run(const Expr& e) {
    T num = poly(e.data().num);
    if (e.data().den.empty()) return num;
    T den = 1;
    for (const auto& [f, k] : e.data().den) den *= int_pow(poly(f), k);
    if (is_zero_value(den)) throw SingularPoint();
    return num / den;
  }

 private:
  const LeafValue<T>& leaf_;
  const Context& ctx_;
  std::map<Gen, T> memo_;
};

bool needs_float_rec(const Expr& e, const Context& ctx, std::set<int>& seen_functions) {
  for (const Gen& g : gens_of(e, true)) {
    if (!g.is_atom()) continue;
    const auto& a = g.atom();
    if (a.kind == AtomData::Kind::Power) return true;
    if (seen_functions.insert(a.function).second) {
      auto tf = ctx.test_functions.find(a.function);
      if (tf != ctx.test_functions.end() && needs_float_rec(tf->second.body, ctx, seen_functions)) return true;
    }
  }
  return false;
}

template <typename T>
LeafValue<T> point_leaf(const SamplePoint& p, const Context& ctx) {
  return [&p, &ctx](const Gen& g) -> T {
    if (auto a = p.approximate.find(g); a != p.approximate.end()) {
      if constexpr (std::is_same_v<T, Rational>) {
        throw ExprError("sample point has only an approximate value for '" + ctx.gen_name(g) + "'");
      } else {
        return a->second;
      }
    }
    auto it = p.values.find(g);
    if (it == p.values.end()) throw ExprError("sample point does not cover '" + ctx.gen_name(g) + "'");
    return from_rational<T>(it->second);
  };
}

std::string describe_point(const SamplePoint& p, const Context& ctx) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [g, v] : p.values) {
    if (!first) os << ", ";
    os << ctx.gen_name(g) << "=" << v.get_str();
    first = false;
  }
  return os.str();
}

}  // namespace

bool needs_float(const Expr& e, const Context& ctx) {
  std::set<int> seen;
  return needs_float_rec(e, ctx, seen);
}

Rational evaluate(const Expr& e, const SamplePoint& p, const Context& ctx) {
  return evaluate_with(e, point_leaf<Rational>(p, ctx), ctx);
}

Float evaluate_float(const Expr& e, const SamplePoint& p, const Context& ctx) {
  return evaluate_with(e, point_leaf<Float>(p, ctx), ctx);
}

Rational evaluate_with(const Expr& e, const LeafValue<Rational>& leaf, const Context& ctx) {
  Evaluator<Rational> ev(leaf, ctx);
  return ev.run(e);
}

Float evaluate_with(const Expr& e, const LeafValue<Float>& leaf, const Context& ctx) {
  Evaluator<Float> ev(leaf, ctx);
  return ev.run(e);
}

Rational draw_value(std::mt19937_64& rng, bool positive) {
  std::uniform_int_distribution<long> num_dist(positive ? 1 : -9, 9);
  std::uniform_int_distribution<long> den_dist(1, 9);
  long n = num_dist(rng);
  long d = den_dist(rng);
  return make_rational(n, d);
}

Evidence random_identity_test(const Expr& a, const Expr& b, const Context& ctx, const OracleOptions& opts) {
  if (opts.trials < 1) throw ExprError("oracle needs at least one trial");
  std::set<Gen> leaves;
  collect_gens(a, leaves, true);
  collect_gens(b, leaves, true);
  bool use_float = needs_float(a, ctx) || needs_float(b, ctx);

  Evidence ev;
  ev.sampled = true;
  ev.float_mode = use_float;
  ev.seed = opts.seed;
  ev.verdict = Verdict::ProbablyEqual;

  std::mt19937_64 rng(opts.seed);
  int failures = 0;
  Float tol(opts.tol);
  while (ev.trials < opts.trials) {
    SamplePoint p;
    for (const Gen& g : leaves) {
      if (g.is_atom()) continue;
      p.values[g] = draw_value(rng, ctx.is_positive(g));
    }
    try {
      bool equal = false;
      if (use_float) {
        Float va = evaluate_float(a, p, ctx);
        Float vb = evaluate_float(b, p, ctx);
        equal = boost::multiprecision::abs(va - vb) <= tol;
      } else {
        equal = evaluate(a, p, ctx) == evaluate(b, p, ctx);
      }
      ++ev.trials;
      failures = 0;
      if (!equal) {
        ev.verdict = Verdict::ProvedUnequal;
        ev.witness = describe_point(p, ctx);
        return ev;
      }
    } catch (const SingularPoint&) {
      if (++failures >= opts.resample_cap) throw UndecidableError();
    }
  }
  return ev;
}

Evidence equals(const Expr& a, const Expr& b, const Context& ctx, const OracleOptions& opts) {
  Expr diff = a - b;
  Evidence ev;
  if (diff.is_zero()) {
    ev.verdict = Verdict::ProvedEqual;
    notify_proof(a, b, ctx);
    return ev;
  }
  if (!diff.has_atoms()) {
    ev.verdict = Verdict::ProvedUnequal;
    return ev;
  }
  return random_identity_test(a, b, ctx, opts);
}

}  // namespace jetcalc
