#include <mutex>

#include "jetcalc/oracle.hpp"

namespace jetcalc {

namespace {

template <typename T>
T convert(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>) {
    return r;
  } else {
    return Float(r.get_num().get_str()) / Float(r.get_den().get_str());
  }
}

bool is_leading(const KovalevskayaData& kd, const Gen& g) {
  if (!g.is_jet()) return false;
  auto j = static_cast<std::size_t>(g.index());
  return j < kd.orders.size() && g.alpha()[kd.direction] >= kd.orders[j];
}

}  // namespace

template <typename T>
OnShellPoint<T>::OnShellPoint(const Context& ctx, const KovalevskayaData& kd, std::mt19937_64& rng)
    : ctx_(ctx), kd_(kd), rng_(rng) {}

template <typename T>
const Expr& OnShellPoint<T>::derivative_of_rhs(int j, const MultiIndex& beta) {
  auto key = std::make_pair(j, beta);
  auto it = derivatives_.find(key);
  if (it != derivatives_.end()) return it->second;
  Expr v;
  if (beta.is_zero()) {
    v = kd_.rhs[static_cast<std::size_t>(j)];
  } else {
    int slot = beta.first_nonzero();
    v = total_derivative(derivative_of_rhs(j, beta.minus_unit(slot)), slot);
  }
  return derivatives_.emplace(key, std::move(v)).first->second;
}

template <typename T>
T OnShellPoint<T>::value(const Gen& g) {
  if (auto it = computed_.find(g); it != computed_.end()) return it->second;
  if (is_leading(kd_, g)) {
    if (++depth_ > 4000) throw ExprError("on-shell sampling does not terminate");
    const int j = g.index();
    MultiIndex beta = g.alpha().minus_unit(kd_.direction, kd_.orders[static_cast<std::size_t>(j)]);
    const Expr& d = derivative_of_rhs(j, beta);
    LeafValue<T> leaf = [this](const Gen& h) { return value(h); };
    T v = evaluate_with(d, leaf, ctx_);
    --depth_;
    computed_.emplace(g, v);
    return v;
  }
  if (g.kind() == GenKind::Param) throw ExprError("auxiliary parameter in on-shell evaluation");
  Rational r = draw_value(rng_, ctx_.is_positive(g));
  drawn_.emplace(g, r);
  T v = convert<T>(r);
  computed_.emplace(g, v);
  return v;
}

template <typename T>
T OnShellPoint<T>::evaluate(const Expr& e) {
  LeafValue<T> leaf = [this](const Gen& h) { return value(h); };
  return evaluate_with(e, leaf, ctx_);
}

template class OnShellPoint<Rational>;
template class OnShellPoint<Float>;

namespace {

template <typename T>
SamplePoint sample_point(const Context& ctx, const KovalevskayaData& kd, int order, std::mt19937_64& rng) {
  OnShellPoint<T> point(ctx, kd, rng);
  std::vector<Gen> gens;
  for (int i = 0; i < ctx.dim(); ++i) gens.push_back(Gen::independent(i));
  for (int k = 0; k < ctx.num_constants(); ++k) gens.push_back(Gen::constant(k));
  for (const auto& alpha : multi_indices_up_to(ctx.dim(), order)) {
    for (int j = 0; j < ctx.num_dependents(); ++j) gens.push_back(Gen::jet(j, alpha));
  }
  SamplePoint out;
  for (const Gen& g : gens) {
    T v = point.value(g);
    if constexpr (std::is_same_v<T, Rational>) {
      out.values[g] = v;
    } else if (!point.drawn().count(g)) {
      out.approximate[g] = v;
    }
  }
  for (const auto& [g, v] : point.drawn()) out.values[g] = v;
  return out;
}

}  // namespace

SamplePoint on_shell_sample(const PdeSystem& system, int order, std::mt19937_64& rng, int resample_cap) {
  if (!system.kovalevskaya) throw ExprError("on-shell sampling requires Kovalevskaya form");
  const Context& ctx = *system.ctx;
  bool use_float = false;
  for (const auto& r : system.kovalevskaya->rhs) use_float = use_float || needs_float(r, ctx);
  for (int attempt = 0; attempt < resample_cap; ++attempt) {
    try {
      return use_float ? sample_point<Float>(ctx, *system.kovalevskaya, order, rng)
                       : sample_point<Rational>(ctx, *system.kovalevskaya, order, rng);
    } catch (const SingularPoint&) {
    }
  }
  throw UndecidableError();
}

Evidence on_shell_identity_test(const Expr& e, const PdeSystem& system, const OracleOptions& opts) {
  if (!system.kovalevskaya) throw ExprError("on-shell comparison requires Kovalevskaya form");
  if (opts.trials < 1) throw ExprError("oracle needs at least one trial");
  const Context& ctx = *system.ctx;
  const auto& kd = *system.kovalevskaya;
  bool use_float = needs_float(e, ctx);
  for (const auto& r : kd.rhs) use_float = use_float || needs_float(r, ctx);

  Evidence ev;
  ev.sampled = true;
  ev.float_mode = use_float;
  ev.seed = opts.seed;
  ev.verdict = Verdict::ProbablyEqual;
  std::mt19937_64 rng(opts.seed);
  Float tol(opts.tol);
  int failures = 0;
  while (ev.trials < opts.trials) {
    try {
      bool zero = false;
      std::map<Gen, Rational> drawn;
      if (use_float) {
        OnShellPoint<Float> p(ctx, kd, rng);
        zero = boost::multiprecision::abs(p.evaluate(e)) <= tol;
        drawn = p.drawn();
      } else {
        OnShellPoint<Rational> p(ctx, kd, rng);
        zero = p.evaluate(e) == 0;
        drawn = p.drawn();
      }
      ++ev.trials;
      failures = 0;
      if (!zero) {
        ev.verdict = Verdict::ProvedUnequal;
        std::string w;
        for (const auto& [g, v] : drawn) w += (w.empty() ? "" : ", ") + ctx.gen_name(g) + "=" + v.get_str();
        ev.witness = w;
        return ev;
      }
    } catch (const SingularPoint&) {
      if (++failures >= opts.resample_cap) throw UndecidableError();
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------

namespace {
std::mutex observer_mutex;
ProofObserver observer;
}  // namespace

void set_proof_observer(ProofObserver obs) {
  std::lock_guard lock(observer_mutex);
  observer = std::move(obs);
}

void notify_proof(const Expr& lhs, const Expr& rhs, const Context& ctx, const KovalevskayaData* shell) {
  ProofObserver obs;
  {
    std::lock_guard lock(observer_mutex);
    obs = observer;
  }
  if (!obs) return;
  ProofRecord rec{lhs, rhs, std::make_shared<Context>(ctx), shell ? std::optional(*shell) : std::nullopt};
  obs(rec);
}

}  // namespace jetcalc
