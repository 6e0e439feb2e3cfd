#include "support.hpp"

#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace jt {

std::string corpus_path(const std::string& name) { return std::string(JETCALC_CORPUS_DIR) + "/" + name; }

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SystemFile load_corpus(const std::string& name) { return parse_system(read_text(corpus_path(name))); }

SystemFile parse_text(const std::string& text) { return parse_system(text); }

ContextPtr scratch_context(int dim, int deps) {
  auto ctx = std::make_shared<Context>();
  const char* ind[] = {"t", "x", "y"};
  const char* dep[] = {"u", "v", "w"};
  for (int i = 0; i < dim; ++i) ctx->independents.emplace_back(ind[i]);
  for (int j = 0; j < deps; ++j) ctx->dependents.emplace_back(dep[j]);
  ctx->constants.push_back({"a"});
  ctx->constants.push_back({"b"});
  ctx->positive.insert(Gen::constant(0));
  return ctx;
}

Expr jet(int dependent, const std::vector<int>& alpha) {
  MultiIndex m(static_cast<int>(alpha.size()));
  for (std::size_t i = 0; i < alpha.size(); ++i) m = m.plus_unit(static_cast<int>(i), alpha[i]);
  return Expr(Gen::jet(dependent, m));
}

namespace {

Rational small_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<long> num(-5, 5);
  std::uniform_int_distribution<long> den(1, 4);
  return Rational(num(rng), den(rng));
}

Raw random_raw_at(std::mt19937_64& rng, const std::vector<Gen>& leaves, const RawOptions& opts, int depth) {
  Raw r;
  std::uniform_real_distribution<double> coin(0, 1);
  if (depth >= opts.max_depth || coin(rng) < 0.25 + 0.1 * depth) {
    if (coin(rng) < 0.25) {
      r.kind = Raw::Kind::Literal;
      r.value = small_rational(rng);
      r.value.canonicalize();
    } else {
      r.kind = Raw::Kind::Leaf;
      r.leaf = leaves[std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng)];
    }
    return r;
  }
  double pick = coin(rng);
  if (pick < 0.4) {
    r.kind = Raw::Kind::Sum;
    int n = std::uniform_int_distribution<int>(2, 3)(rng);
    for (int i = 0; i < n; ++i) r.kids.push_back(random_raw_at(rng, leaves, opts, depth + 1));
  } else if (pick < 0.75) {
    r.kind = Raw::Kind::Product;
    for (int i = 0; i < 2; ++i) r.kids.push_back(random_raw_at(rng, leaves, opts, depth + 1));
  } else if (pick < 0.9 || !opts.division) {
    r.kind = Raw::Kind::Power;
    std::vector<int> exps = opts.negative_powers ? std::vector<int>{2, 3, -1, -2} : std::vector<int>{2, 3};
    r.exponent = exps[std::uniform_int_distribution<std::size_t>(0, exps.size() - 1)(rng)];
    // Powers of deep subtrees grow quickly; keep the base shallow.
    RawOptions shallow = opts;
    shallow.max_depth = std::min(opts.max_depth, depth + 3);
    r.kids.push_back(random_raw_at(rng, leaves, shallow, depth + 1));
  } else {
    r.kind = Raw::Kind::Quotient;
    for (int i = 0; i < 2; ++i) r.kids.push_back(random_raw_at(rng, leaves, opts, depth + 1));
  }
  return r;
}

}  // namespace

Raw random_raw(std::mt19937_64& rng, const std::vector<Gen>& leaves, const RawOptions& opts) {
  // Redraw trees that divide by an identically vanishing subtree.
  for (;;) {
    Raw r = random_raw_at(rng, leaves, opts, 0);
    try {
      build(r);
      return r;
    } catch (const ExprError&) {
    }
  }
}

Expr build(const Raw& r) {
  switch (r.kind) {
    case Raw::Kind::Literal: return Expr(r.value);
    case Raw::Kind::Leaf: return Expr(r.leaf);
    case Raw::Kind::Sum: {
      Expr s;
      for (const auto& k : r.kids) s = s + build(k);
      return s;
    }
    case Raw::Kind::Product: return build(r.kids[0]) * build(r.kids[1]);
    case Raw::Kind::Power: return pow(build(r.kids[0]), static_cast<long>(r.exponent));
    case Raw::Kind::Quotient: return build(r.kids[0]) / build(r.kids[1]);
  }
  return Expr();
}

std::optional<Rational> eval_raw(const Raw& r, const std::map<Gen, Rational>& point) {
  switch (r.kind) {
    case Raw::Kind::Literal: return r.value;
    case Raw::Kind::Leaf: return point.at(r.leaf);
    case Raw::Kind::Sum: {
      Rational s = 0;
      for (const auto& k : r.kids) {
        auto v = eval_raw(k, point);
        if (!v) return std::nullopt;
        s += *v;
      }
      return s;
    }
    case Raw::Kind::Product: {
      auto a = eval_raw(r.kids[0], point);
      auto b = eval_raw(r.kids[1], point);
      if (!a || !b) return std::nullopt;
      return Rational(*a * *b);
    }
    case Raw::Kind::Power: {
      auto a = eval_raw(r.kids[0], point);
      if (!a) return std::nullopt;
      if (r.exponent < 0 && *a == 0) return std::nullopt;
      Rational out = 1;
      for (int i = 0; i < std::abs(r.exponent); ++i) out *= *a;
      if (r.exponent < 0) out = 1 / out;
      return out;
    }
    case Raw::Kind::Quotient: {
      auto a = eval_raw(r.kids[0], point);
      auto b = eval_raw(r.kids[1], point);
      if (!a || !b || *b == 0) return std::nullopt;
      return Rational(*a / *b);
    }
  }
  return std::nullopt;
}

std::string show(const Raw& r, const Context& ctx) {
  switch (r.kind) {
    case Raw::Kind::Literal: return "(" + r.value.get_str() + ")";
    case Raw::Kind::Leaf: return ctx.gen_name(r.leaf);
    case Raw::Kind::Sum: {
      std::string s = "(";
      for (std::size_t i = 0; i < r.kids.size(); ++i) s += (i ? " + " : "") + show(r.kids[i], ctx);
      return s + ")";
    }
    case Raw::Kind::Product: return "(" + show(r.kids[0], ctx) + "*" + show(r.kids[1], ctx) + ")";
    case Raw::Kind::Power: return "(" + show(r.kids[0], ctx) + ")^(" + std::to_string(r.exponent) + ")";
    case Raw::Kind::Quotient: return "(" + show(r.kids[0], ctx) + "/" + show(r.kids[1], ctx) + ")";
  }
  return "";
}

Expr random_polynomial(std::mt19937_64& rng, const std::vector<Gen>& leaves, int terms, int max_degree) {
  Expr out;
  std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  for (int t = 0; t < terms; ++t) {
    Rational c = small_rational(rng);
    c.canonicalize();
    if (c == 0) c = 1;
    Expr term(c);
    int d = deg(rng);
    for (int k = 0; k < d; ++k) term = term * Expr(leaves[pick(rng)]);
    out = out + term;
  }
  return out;
}

std::vector<Gen> jet_leaves(int dim, int deps, int max_order, bool independents) {
  std::vector<Gen> out;
  for (int j = 0; j < deps; ++j) {
    for (const auto& a : multi_indices_up_to(dim, max_order)) out.push_back(Gen::jet(j, a));
  }
  if (independents) {
    for (int i = 0; i < dim; ++i) out.push_back(Gen::independent(i));
  }
  return out;
}

TotalDiffOp random_operator(std::mt19937_64& rng, int rows, int cols, int dim, const std::vector<Gen>& leaves,
                            int max_order, int max_terms) {
  TotalDiffOp op(rows, cols, dim);
  auto alphas = multi_indices_up_to(dim, max_order);
  std::uniform_int_distribution<std::size_t> pick(0, alphas.size() - 1);
  std::uniform_int_distribution<int> nterms(0, max_terms);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      int n = nterms(rng);
      for (int k = 0; k < n; ++k) op.add_term(i, j, alphas[pick(rng)], random_polynomial(rng, leaves, 2, 2));
    }
  }
  return op;
}

std::map<Gen, Rational> random_point(std::mt19937_64& rng, const std::vector<Gen>& leaves, const Context& ctx) {
  std::map<Gen, Rational> p;
  for (const Gen& g : leaves) p[g] = draw_value(rng, ctx.is_positive(g));
  return p;
}

namespace {

std::mutex recorder_mutex;
std::vector<ProofRecord> records;
std::size_t total_records = 0;

}  // namespace

void install_proof_recorder() {
  set_proof_observer([](const ProofRecord& r) {
    std::lock_guard lock(recorder_mutex);
    ++total_records;
    records.push_back(r);
  });
}

std::size_t recorded_proofs() {
  std::lock_guard lock(recorder_mutex);
  return total_records;
}

Evidence cross_check(const ProofRecord& record, const OracleOptions& opts) {
  if (record.shell) {
    PdeSystem system;
    system.ctx = record.ctx;
    system.kovalevskaya = record.shell;
    return on_shell_identity_test(record.lhs - record.rhs, system, opts);
  }
  return random_identity_test(record.lhs, record.rhs, *record.ctx, opts);
}

CrossCheckSummary cross_check_recorded(const OracleOptions& opts) {
  std::vector<ProofRecord> batch;
  CrossCheckSummary s;
  {
    std::lock_guard lock(recorder_mutex);
    batch.swap(records);
    s.recorded = total_records;
  }
  // The cross-check runs the oracle, which must not feed the recorder.
  set_proof_observer({});
  for (const auto& r : batch) {
    ++s.checked;
    if (r.shell) ++s.on_shell;
    try {
      Evidence e = cross_check(r, opts);
      if (e.verdict == Verdict::ProvedUnequal) {
        ++s.contradictions;
        if (s.details.size() < 10) {
          s.details.push_back(format(r.lhs, *r.ctx) + " vs " + format(r.rhs, *r.ctx) + " at " + e.witness);
        }
      }
    } catch (const UndecidableError&) {
      ++s.undecidable;
    }
  }
  install_proof_recorder();
  return s;
}

}  // namespace jt
