#include "jetcalc/expr.hpp"

#include <algorithm>
#include <cassert>

namespace jetcalc {

// ---------------------------------------------------------------------------
// Gen

Gen Gen::independent(int i) {
  Gen g;
  g.kind_ = GenKind::Independent;
  g.index_ = i;
  return g;
}

Gen Gen::constant(int k) {
  Gen g;
  g.kind_ = GenKind::Constant;
  g.index_ = k;
  return g;
}

Gen Gen::jet(int dependent, const MultiIndex& alpha) {
  Gen g;
  g.kind_ = GenKind::Jet;
  g.index_ = dependent;
  g.alpha_ = alpha;
  return g;
}

Gen Gen::param(int id) {
  Gen g;
  g.kind_ = GenKind::Param;
  g.index_ = id;
  return g;
}

Gen Gen::atom(std::shared_ptr<const AtomData> data) {
  Gen g;
  g.kind_ = GenKind::Atom;
  g.atom_ = std::move(data);
  return g;
}

namespace {
// Jets dominate the monomial order, then atoms, parameters, constants and
// independent variables.
int kind_rank(GenKind k) {
  switch (k) {
    case GenKind::Jet: return 0;
    case GenKind::Atom: return 1;
    case GenKind::Param: return 2;
    case GenKind::Constant: return 3;
    case GenKind::Independent: return 4;
  }
  return 5;
}
}  // namespace

std::strong_ordering Gen::operator<=>(const Gen& other) const {
  if (kind_ != other.kind_) return kind_rank(kind_) <=> kind_rank(other.kind_);
  switch (kind_) {
    case GenKind::Jet:
      if (auto c = index_ <=> other.index_; c != 0) return c;
      return alpha_ <=> other.alpha_;
    case GenKind::Atom:
      if (atom_ == other.atom_) return std::strong_ordering::equal;
      return atom_->compare(*other.atom_);
    default:
      return index_ <=> other.index_;
  }
}

std::strong_ordering AtomData::compare(const AtomData& other) const {
  if (kind != other.kind) return kind <=> other.kind;
  if (kind == Kind::Power) {
    if (auto c = base.compare(other.base); c != 0) return c;
    return exponent.compare(other.exponent);
  }
  if (auto c = function <=> other.function; c != 0) return c;
  if (auto c = orders <=> other.orders; c != 0) return c;
  if (auto c = args.size() <=> other.args.size(); c != 0) return c;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (auto c = args[i].compare(other.args[i]); c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::optional<Rational> AtomData::rational_exponent() const {
  if (kind != Kind::Power) return std::nullopt;
  return exponent.as_rational();
}

// ---------------------------------------------------------------------------
// Monomial

Monomial Monomial::of(const Gen& g, int exp) {
  Monomial m;
  if (exp != 0) m.factors_.emplace_back(g, exp);
  m.degree_ = exp;
  return m;
}

void Monomial::recompute_degree() {
  degree_ = 0;
  for (const auto& f : factors_) degree_ += f.second;
}

int Monomial::exponent(const Gen& g) const {
  auto it = std::lower_bound(factors_.begin(), factors_.end(), g,
                             [](const Factor& f, const Gen& key) { return f.first < key; });
  if (it != factors_.end() && it->first == g) return it->second;
  return 0;
}

bool Monomial::has_negative() const {
  return std::any_of(factors_.begin(), factors_.end(), [](const Factor& f) { return f.second < 0; });
}

namespace {
template <typename Combine>
Monomial merge_monomials(const std::vector<Monomial::Factor>& a, const std::vector<Monomial::Factor>& b,
                         Combine combine, std::vector<Monomial::Factor>& out) {
  out.clear();
  out.reserve(a.size() + b.size());
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    int ea = 0;
    int eb = 0;
    const Gen* g = nullptr;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      g = &ia->first;
      ea = ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      g = &ib->first;
      eb = ib->second;
      ++ib;
    } else {
      g = &ia->first;
      ea = ia->second;
      eb = ib->second;
      ++ia;
      ++ib;
    }
    int e = combine(ea, eb);
    if (e != 0) out.emplace_back(*g, e);
  }
  return {};
}
}  // namespace

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.factors_.empty()) return *this;
  if (factors_.empty()) return other;
  Monomial out;
  merge_monomials(factors_, other.factors_, [](int x, int y) { return x + y; }, out.factors_);
  out.recompute_degree();
  return out;
}

Monomial Monomial::operator/(const Monomial& other) const {
  if (other.factors_.empty()) return *this;
  Monomial out;
  merge_monomials(factors_, other.factors_, [](int x, int y) { return x - y; }, out.factors_);
  out.recompute_degree();
  return out;
}

Monomial Monomial::pow(int k) const {
  Monomial out;
  if (k == 0) return out;
  out.factors_ = factors_;
  for (auto& f : out.factors_) f.second *= k;
  out.recompute_degree();
  return out;
}

Monomial Monomial::min_with(const Monomial& other) const {
  Monomial out;
  merge_monomials(factors_, other.factors_, [](int x, int y) { return std::min(x, y); }, out.factors_);
  out.recompute_degree();
  return out;
}

bool Monomial::divides(const Monomial& other) const {
  // other / this must be nonnegative everywhere.
  auto ia = factors_.begin();
  auto ib = other.factors_.begin();
  while (ia != factors_.end() || ib != other.factors_.end()) {
    if (ib == other.factors_.end() || (ia != factors_.end() && ia->first < ib->first)) {
      if (ia->second > 0) return false;
      ++ia;
    } else if (ia == factors_.end() || ib->first < ia->first) {
      if (ib->second < 0) return false;
      ++ib;
    } else {
      if (ib->second < ia->second) return false;
      ++ia;
      ++ib;
    }
  }
  return true;
}

Monomial Monomial::without(const Gen& g) const {
  Monomial out;
  for (const auto& f : factors_) {
    if (!(f.first == g)) out.factors_.push_back(f);
  }
  out.recompute_degree();
  return out;
}

std::strong_ordering Monomial::operator<=>(const Monomial& other) const {
  if (auto c = degree_ <=> other.degree_; c != 0) return c;
  auto ia = factors_.begin();
  auto ib = other.factors_.begin();
  while (ia != factors_.end() || ib != other.factors_.end()) {
    if (ib == other.factors_.end() || (ia != factors_.end() && ia->first < ib->first)) {
      return ia->second <=> 0;
    }
    if (ia == factors_.end() || ib->first < ia->first) {
      return 0 <=> ib->second;
    }
    if (ia->second != ib->second) return ia->second <=> ib->second;
    ++ia;
    ++ib;
  }
  return std::strong_ordering::equal;
}

// ---------------------------------------------------------------------------
// Poly

Poly Poly::constant(const Rational& c) {
  Poly p;
  if (c != 0) p.terms_.emplace_back(Monomial(), c);
  return p;
}

Poly Poly::monomial(const Monomial& m, const Rational& c) {
  Poly p;
  if (c != 0) p.terms_.emplace_back(m, c);
  return p;
}

Poly Poly::from_terms(std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
  Poly p;
  p.terms_.reserve(terms.size());
  for (auto& t : terms) {
    if (!p.terms_.empty() && p.terms_.back().first == t.first) {
      p.terms_.back().second += t.second;
    } else {
      if (!p.terms_.empty() && p.terms_.back().second == 0) p.terms_.pop_back();
      p.terms_.push_back(std::move(t));
    }
  }
  if (!p.terms_.empty() && p.terms_.back().second == 0) p.terms_.pop_back();
  return p;
}

bool Poly::is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].first.is_one()); }

Rational Poly::constant_term() const {
  for (const auto& t : terms_) {
    if (t.first.is_one()) return t.second;
  }
  return 0;
}

Poly Poly::operator+(const Poly& other) const {
  if (other.terms_.empty()) return *this;
  if (terms_.empty()) return other;
  Poly out;
  out.terms_.reserve(terms_.size() + other.terms_.size());
  auto ia = terms_.begin();
  auto ib = other.terms_.begin();
  while (ia != terms_.end() && ib != other.terms_.end()) {
    auto c = ia->first <=> ib->first;
    if (c < 0) {
      out.terms_.push_back(*ia++);
    } else if (c > 0) {
      out.terms_.push_back(*ib++);
    } else {
      Rational s = ia->second + ib->second;
      if (s != 0) out.terms_.emplace_back(ia->first, std::move(s));
      ++ia;
      ++ib;
    }
  }
  out.terms_.insert(out.terms_.end(), ia, terms_.end());
  out.terms_.insert(out.terms_.end(), ib, other.terms_.end());
  return out;
}

Poly Poly::operator-() const {
  Poly out = *this;
  for (auto& t : out.terms_) t.second = -t.second;
  return out;
}

Poly Poly::operator-(const Poly& other) const { return *this + (-other); }

Poly Poly::operator*(const Poly& other) const {
  if (terms_.empty() || other.terms_.empty()) return {};
  if (other.terms_.size() == 1) return times(other.terms_[0].first, other.terms_[0].second);
  if (terms_.size() == 1) return other.times(terms_[0].first, terms_[0].second);
  std::vector<Term> prods;
  prods.reserve(terms_.size() * other.terms_.size());
  for (const auto& a : terms_) {
    for (const auto& b : other.terms_) prods.emplace_back(a.first * b.first, a.second * b.second);
  }
  return from_terms(std::move(prods));
}

Poly Poly::scaled(const Rational& c) const {
  if (c == 0) return {};
  Poly out = *this;
  for (auto& t : out.terms_) t.second *= c;
  return out;
}

Poly Poly::times(const Monomial& m) const {
  if (m.is_one()) return *this;
  Poly out;
  out.terms_.reserve(terms_.size());
  for (const auto& t : terms_) out.terms_.emplace_back(t.first * m, t.second);
  // Multiplying by a monomial preserves the order.
  return out;
}

Poly Poly::times(const Monomial& m, const Rational& c) const {
  if (c == 0) return {};
  Poly out;
  out.terms_.reserve(terms_.size());
  for (const auto& t : terms_) out.terms_.emplace_back(t.first * m, t.second * c);
  return out;
}

Poly Poly::pow(int k) const {
  if (k < 0) throw ExprError("negative power of a polynomial");
  Poly result = constant(1);
  Poly base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k) base = base * base;
  }
  return result;
}

Monomial Poly::content_monomial() const {
  if (terms_.empty()) return {};
  Monomial m = terms_[0].first;
  for (std::size_t i = 1; i < terms_.size(); ++i) m = m.min_with(terms_[i].first);
  // Generators absent from some term have minimum zero unless negative elsewhere.
  return m;
}

bool Poly::has_negative_exponents() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.first.has_negative(); });
}

Poly Poly::partial(const Gen& g) const {
  std::vector<Term> out;
  for (const auto& t : terms_) {
    int e = t.first.exponent(g);
    if (e == 0) continue;
    out.emplace_back(t.first / Monomial::of(g), t.second * e);
  }
  return from_terms(std::move(out));
}

std::set<Gen> Poly::generators() const {
  std::set<Gen> out;
  for (const auto& t : terms_) {
    for (const auto& f : t.first.factors()) out.insert(f.first);
  }
  return out;
}

std::strong_ordering Poly::operator<=>(const Poly& other) const {
  auto ia = terms_.rbegin();
  auto ib = other.terms_.rbegin();
  for (; ia != terms_.rend() && ib != other.terms_.rend(); ++ia, ++ib) {
    if (auto c = ia->first <=> ib->first; c != 0) return c;
    int s = cmp(ia->second, ib->second);
    if (s != 0) return s < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  return terms_.size() <=> other.terms_.size();
}

bool Poly::operator==(const Poly& other) const {
  if (terms_.size() != other.terms_.size()) return false;
  return (*this <=> other) == 0;
}

// ---------------------------------------------------------------------------
// Exact division

namespace {
std::map<Gen, std::pair<int, int>> degree_bounds(const Poly& p) {
  std::map<Gen, std::pair<int, int>> out;  // gen -> (min, max)
  for (const auto& t : p.terms()) {
    for (const auto& f : t.first.factors()) {
      auto [it, inserted] = out.try_emplace(f.first, f.second, f.second);
      if (!inserted) {
        it->second.first = std::min(it->second.first, f.second);
        it->second.second = std::max(it->second.second, f.second);
      }
    }
  }
  return out;
}
}  // namespace

std::optional<Poly> exact_divide(const Poly& dividend, const Poly& divisor) {
  if (divisor.is_zero()) throw ExprError("division by zero polynomial");
  if (dividend.is_zero()) return Poly();
  if (divisor.is_constant()) return dividend.scaled(1 / divisor.terms()[0].second);

  // Shift the dividend into the polynomial ring.
  Monomial shift;
  {
    Monomial content = dividend.content_monomial();
    std::vector<Monomial::Factor> neg;
    for (const auto& f : content.factors()) {
      if (f.second < 0) neg.emplace_back(f.first, -f.second);
    }
    for (const auto& f : neg) shift = shift * Monomial::of(f.first, f.second);
  }
  Poly r = dividend.times(shift);

  // Degree screen: every generator of the divisor must appear in the dividend
  // with at least the divisor's degree span.
  auto dbounds = degree_bounds(divisor);
  auto rbounds = degree_bounds(r);
  for (const auto& [g, mm] : dbounds) {
    int span = mm.second - mm.first;
    if (span == 0) continue;
    auto it = rbounds.find(g);
    if (it == rbounds.end()) return std::nullopt;
    if (it->second.second < mm.second) return std::nullopt;
  }

  const auto& [lead_m, lead_c] = divisor.leading();
  std::vector<Poly::Term> quotient;
  while (!r.is_zero()) {
    const auto& [rm, rc] = r.leading();
    if (!lead_m.divides(rm)) return std::nullopt;
    Monomial t = rm / lead_m;
    Rational c = rc / lead_c;
    quotient.emplace_back(t, c);
    r = r - divisor.times(t, c);
  }
  Poly q = Poly::from_terms(std::move(quotient));
  return q.times(Monomial().operator/(shift));
}

// ---------------------------------------------------------------------------
// Canonical construction

namespace {

const std::shared_ptr<const ExprData>& zero_data() {
  static const std::shared_ptr<const ExprData> z = std::make_shared<ExprData>();
  return z;
}

bool poly_has_atoms(const Poly& p) {
  for (const auto& t : p.terms()) {
    for (const auto& f : t.first.factors()) {
      if (f.first.is_atom()) return true;
    }
  }
  return false;
}

struct DivisorParts {
  Rational scale;      // divisor = scale * unit * primitive
  Monomial unit;
  Poly primitive;      // monic, no monomial content; constant 1 if trivial
};

DivisorParts split_divisor(const Poly& q) {
  Monomial content = q.content_monomial();
  Poly shifted = q.times(Monomial() / content);
  Rational lead = shifted.leading().second;
  return {lead, content, shifted.scaled(1 / lead)};
}

void sort_factors(DenFactors& den) {
  std::sort(den.begin(), den.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  DenFactors merged;
  for (auto& f : den) {
    if (!merged.empty() && merged.back().first == f.first) {
      merged.back().second += f.second;
    } else {
      merged.push_back(std::move(f));
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(), [](const auto& f) { return f.second == 0; }),
               merged.end());
  den = std::move(merged);
}

bool root_out_of_range(const Poly& p) {
  for (const auto& t : p.terms()) {
    for (const auto& [g, e] : t.first.factors()) {
      if (!g.is_atom()) continue;
      auto r = g.atom().rational_exponent();
      if (!r) continue;
      long q = r->get_den().get_si();
      if (e < 0 || e >= q) return true;
    }
  }
  return false;
}

Expr poly_expr(const Poly& p) {
  return make_expr(p, {});
}

thread_local int root_fix_depth = 0;

// Rewrite [b^(1/q)]^k with k outside [0, q) as b^floor(k/q) * [b^(1/q)]^(k mod q).
Expr fix_roots_in_poly(const Poly& p) {
  Expr sum;
  Poly plain;
  for (const auto& [m, c] : p.terms()) {
    Monomial keep;
    Expr extra = 1;
    bool touched = false;
    for (const auto& [g, e] : m.factors()) {
      std::optional<Rational> r;
      if (g.is_atom()) r = g.atom().rational_exponent();
      if (r) {
        long q = r->get_den().get_si();
        long fl = e >= 0 ? e / q : -((-e + q - 1) / q);
        long rem = e - fl * q;
        if (fl != 0) {
          extra = extra * pow(g.atom().base, fl);
          touched = true;
        }
        if (rem != 0) keep = keep * Monomial::of(g, static_cast<int>(rem));
      } else {
        keep = keep * Monomial::of(g, e);
      }
    }
    if (touched) {
      sum = sum + poly_expr(Poly::monomial(keep, c)) * extra;
    } else {
      plain = plain + Poly::monomial(keep, c);
    }
  }
  return sum + poly_expr(plain);
}

}  // namespace

Expr make_expr(Poly num, DenFactors den) {
  if (num.is_zero()) return Expr();
  sort_factors(den);
  for (auto& [f, e] : den) {
    while (e > 0) {
      auto q = exact_divide(num, f);
      if (!q) break;
      num = std::move(*q);
      --e;
    }
  }
  den.erase(std::remove_if(den.begin(), den.end(), [](const auto& f) { return f.second == 0; }), den.end());

  bool atoms = poly_has_atoms(num);
  for (const auto& f : den) atoms = atoms || poly_has_atoms(f.first);

  if (atoms && root_fix_depth < 8) {
    bool bad = root_out_of_range(num);
    for (const auto& f : den) bad = bad || root_out_of_range(f.first);
    if (bad) {
      ++root_fix_depth;
      Expr n = fix_roots_in_poly(num);
      Expr d = 1;
      for (const auto& [f, e] : den) d = d * pow(fix_roots_in_poly(f), e);
      Expr out = n / d;
      --root_fix_depth;
      return out;
    }
  }

  auto data = std::make_shared<ExprData>();
  data->num = std::move(num);
  data->den = std::move(den);
  data->atoms = atoms;
  return Expr(std::shared_ptr<const ExprData>(std::move(data)));
}

// ---------------------------------------------------------------------------
// Expr

Expr::Expr() : data_(zero_data()) {}
Expr::Expr(int value) : Expr(Rational(value)) {}
Expr::Expr(long value) : Expr(Rational(value)) {}

Expr::Expr(const Rational& value) {
  if (value == 0) {
    data_ = zero_data();
  } else {
    auto d = std::make_shared<ExprData>();
    d->num = Poly::constant(value);
    data_ = std::move(d);
  }
}

Expr::Expr(const Gen& g) {
  auto d = std::make_shared<ExprData>();
  d->num = Poly::monomial(Monomial::of(g));
  d->atoms = g.is_atom();
  data_ = std::move(d);
}

bool Expr::is_zero() const { return data_->num.is_zero(); }

std::optional<Rational> Expr::as_rational() const {
  if (!data_->den.empty() || !data_->num.is_constant()) return std::nullopt;
  if (data_->num.is_zero()) return Rational(0);
  return data_->num.terms()[0].second;
}

std::optional<Gen> Expr::as_gen() const {
  if (!data_->den.empty() || data_->num.size() != 1) return std::nullopt;
  const auto& [m, c] = data_->num.terms()[0];
  if (c != 1 || m.factors().size() != 1 || m.factors()[0].second != 1) return std::nullopt;
  return m.factors()[0].first;
}

bool Expr::is_polynomial() const { return data_->den.empty() && !data_->num.has_negative_exponents(); }

bool Expr::has_atoms() const { return data_->atoms; }

std::strong_ordering Expr::compare(const Expr& other) const {
  if (data_ == other.data_) return std::strong_ordering::equal;
  if (auto c = data_->num <=> other.data_->num; c != 0) return c;
  if (auto c = data_->den.size() <=> other.data_->den.size(); c != 0) return c;
  for (std::size_t i = 0; i < data_->den.size(); ++i) {
    if (auto c = data_->den[i].first <=> other.data_->den[i].first; c != 0) return c;
    if (auto c = data_->den[i].second <=> other.data_->den[i].second; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

Expr Expr::operator-() const {
  if (is_zero()) return *this;
  auto d = std::make_shared<ExprData>(*data_);
  d->num = -d->num;
  return Expr(std::shared_ptr<const ExprData>(std::move(d)));
}

namespace {
// Multiply p by prod f^e over the listed factors.
Poly times_factors(Poly p, const DenFactors& factors) {
  for (const auto& [f, e] : factors) {
    for (int i = 0; i < e; ++i) p = p * f;
  }
  return p;
}
}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const auto& da = a.data();
  const auto& db = b.data();
  if (da.den.empty() && db.den.empty()) return make_expr(da.num + db.num, {});
  if (da.den == db.den) {
    return make_expr(da.num + db.num, da.den);
  }
  // lcm of factor lists
  DenFactors lcm;
  DenFactors missing_a;
  DenFactors missing_b;
  auto ia = da.den.begin();
  auto ib = db.den.begin();
  while (ia != da.den.end() || ib != db.den.end()) {
    if (ib == db.den.end() || (ia != da.den.end() && ia->first < ib->first)) {
      lcm.push_back(*ia);
      missing_b.push_back(*ia);
      ++ia;
    } else if (ia == da.den.end() || ib->first < ia->first) {
      lcm.push_back(*ib);
      missing_a.push_back(*ib);
      ++ib;
    } else {
      int e = std::max(ia->second, ib->second);
      lcm.emplace_back(ia->first, e);
      if (e > ia->second) missing_a.emplace_back(ia->first, e - ia->second);
      if (e > ib->second) missing_b.emplace_back(ib->first, e - ib->second);
      ++ia;
      ++ib;
    }
  }
  Poly num = times_factors(da.num, missing_a) + times_factors(db.num, missing_b);
  return make_expr(std::move(num), std::move(lcm));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr();
  const auto& da = a.data();
  const auto& db = b.data();
  if (da.den.empty() && db.den.empty()) {
    Poly num = da.num * db.num;
    if (!da.atoms && !db.atoms) {
      auto d = std::make_shared<ExprData>();
      d->num = std::move(num);
      return Expr(std::shared_ptr<const ExprData>(std::move(d)));
    }
    return make_expr(std::move(num), {});
  }
  DenFactors den = da.den;
  den.insert(den.end(), db.den.begin(), db.den.end());
  return make_expr(da.num * db.num, std::move(den));
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw ExprError("division by zero");
  if (a.is_zero()) return Expr();
  const auto& db = b.data();
  DivisorParts parts = split_divisor(db.num);
  Poly num = times_factors(a.data().num, db.den)
                 .times(Monomial() / parts.unit, 1 / parts.scale);
  DenFactors den = a.data().den;
  if (!parts.primitive.is_constant()) den.emplace_back(parts.primitive, 1);
  return make_expr(std::move(num), std::move(den));
}

Expr pow(const Expr& base, long exponent) {
  if (exponent == 0) return 1;
  if (exponent < 0) {
    if (base.is_zero()) throw ExprError("division by zero");
    return Expr(1) / pow(base, -exponent);
  }
  if (exponent == 1) return base;
  const auto& d = base.data();
  if (d.num.size() == 1 && d.den.empty()) {
    const auto& [m, c] = d.num.terms()[0];
    Rational cc = 1;
    for (long i = 0; i < exponent; ++i) cc *= c;
    return make_expr(Poly::monomial(m.pow(static_cast<int>(exponent)), cc), {});
  }
  Expr result = 1;
  Expr b = base;
  long k = exponent;
  while (k > 0) {
    if (k & 1) result = result * b;
    k >>= 1;
    if (k) b = b * b;
  }
  return result;
}

namespace {

std::optional<Integer> exact_root(const Integer& v, unsigned long q) {
  if (v < 0) return std::nullopt;
  Integer r;
  if (mpz_root(r.get_mpz_t(), v.get_mpz_t(), q) != 0) return r;
  return std::nullopt;
}

Expr make_power_atom(const Expr& base, const Expr& exponent) {
  auto a = std::make_shared<AtomData>();
  a->kind = AtomData::Kind::Power;
  a->base = base;
  a->exponent = exponent;
  return Expr(Gen::atom(std::move(a)));
}

// base^exponent where exponent is not an integer, base treated as a unit.
Expr power_atom(const Expr& base, const Expr& exponent) {
  long int_part = 0;
  Expr rest = exponent;
  if (exponent.data().den.empty()) {
    Rational c0 = exponent.data().num.constant_term();
    Integer fl = floor_of(c0);
    int_part = fl.get_si();
    rest = exponent - Expr(Rational(fl));
  }
  if (rest.is_zero()) return pow(base, int_part);
  Expr head = pow(base, int_part);
  if (auto r = rest.as_rational()) {
    Rational root = Rational(Integer(1), r->get_den());
    return head * pow(make_power_atom(base, Expr(root)), r->get_num().get_si());
  }
  Rational lead = rest.data().num.leading().second;
  if (lead < 0) return head / make_power_atom(base, -rest);
  return head * make_power_atom(base, rest);
}

}  // namespace

Expr pow(const Expr& base, const Expr& exponent) {
  if (auto r = exponent.as_rational(); r && is_integer(*r)) {
    return pow(base, r->get_num().get_si());
  }
  if (base.is_zero()) {
    if (auto r = exponent.as_rational(); r && *r > 0) return Expr();
    throw ExprError("zero raised to a non-positive or symbolic power");
  }
  const auto& d = base.data();
  if (auto c = base.as_rational()) {
    if (*c == 1) return 1;
    if (auto r = exponent.as_rational(); r && *c > 0) {
      unsigned long q = r->get_den().get_ui();
      auto rn = exact_root(c->get_num(), q);
      auto rd = exact_root(c->get_den(), q);
      if (rn && rd) return pow(Expr(Rational(*rn, *rd)), r->get_num().get_si());
    }
    return power_atom(base, exponent);
  }
  if (d.den.empty() && d.num.size() == 1) {
    const auto& [m, c] = d.num.terms()[0];
    Expr out = c == 1 ? Expr(1) : pow(Expr(c), exponent);
    for (const auto& [g, e] : m.factors()) {
      Expr ge(g);
      Expr ex = exponent * Expr(e);
      if (auto r = ex.as_rational(); r && is_integer(*r)) {
        out = out * pow(ge, r->get_num().get_si());
      } else if (g.is_atom() && g.atom().kind == AtomData::Kind::Power) {
        // (b^s)^x = b^(s*x) under the positivity assumption
        out = out * pow(g.atom().base, g.atom().exponent * ex);
      } else {
        out = out * power_atom(ge, ex);
      }
    }
    return out;
  }
  return power_atom(base, exponent);
}

Expr function_application(int function, std::vector<int> orders, std::vector<Expr> args) {
  if (orders.size() != args.size()) throw ExprError("function derivative orders do not match arity");
  auto a = std::make_shared<AtomData>();
  a->kind = AtomData::Kind::Function;
  a->function = function;
  a->orders = std::move(orders);
  a->args = std::move(args);
  return Expr(Gen::atom(std::move(a)));
}

// ---------------------------------------------------------------------------
// Traversal

namespace {
void collect_poly(const Poly& p, std::set<Gen>& out, bool recurse) {
  for (const auto& t : p.terms()) {
    for (const auto& f : t.first.factors()) {
      const Gen& g = f.first;
      if (!out.insert(g).second) continue;
      if (recurse && g.is_atom()) {
        const auto& a = g.atom();
        if (a.kind == AtomData::Kind::Power) {
          collect_gens(a.base, out, recurse);
          collect_gens(a.exponent, out, recurse);
        } else {
          for (const auto& arg : a.args) collect_gens(arg, out, recurse);
        }
      }
    }
  }
}
}  // namespace

void collect_gens(const Expr& e, std::set<Gen>& out, bool recurse_atoms) {
  collect_poly(e.data().num, out, recurse_atoms);
  for (const auto& f : e.data().den) collect_poly(f.first, out, recurse_atoms);
}

std::set<Gen> gens_of(const Expr& e, bool recurse_atoms) {
  std::set<Gen> out;
  collect_gens(e, out, recurse_atoms);
  return out;
}

namespace {

class Deriver {
 public:
  explicit Deriver(const std::function<Expr(const Gen&)>& leaf) : leaf_(leaf) {}

  Expr gen_derivative(const Gen& g) {
    auto it = memo_.find(g);
    if (it != memo_.end()) return it->second;
    Expr d;
    if (!g.is_atom()) {
      d = leaf_(g);
    } else {
      const auto& a = g.atom();
      if (a.kind == AtomData::Kind::Power) {
        Expr db = run(a.base);
        Expr de = run(a.exponent);
        if (!de.is_zero()) throw ExprError("derivative with respect to an exponent is not supported");
        if (!db.is_zero()) d = a.exponent * Expr(g) * db / a.base;
      } else {
        for (std::size_t slot = 0; slot < a.args.size(); ++slot) {
          Expr darg = run(a.args[slot]);
          if (darg.is_zero()) continue;
          std::vector<int> orders = a.orders;
          ++orders[slot];
          d = d + function_application(a.function, std::move(orders), a.args) * darg;
        }
      }
    }
    memo_.emplace(g, d);
    return d;
  }

  // Derivative of a Laurent polynomial; polynomial parts stay in Poly arithmetic.
  Expr poly_derivative(const Poly& p) {
    Poly acc;
    Expr rest;
    for (const Gen& g : p.generators()) {
      Expr dg = gen_derivative(g);
      if (dg.is_zero()) continue;
      Poly pg = p.partial(g);
      if (dg.data().den.empty()) {
        acc = acc + pg * dg.data().num;
      } else {
        rest = rest + make_expr(pg, {}) * dg;
      }
    }
    return make_expr(std::move(acc), {}) + rest;
  }

  Expr run(const Expr& e) {
    if (e.is_zero()) return e;
    const auto& d = e.data();
    Expr dnum = poly_derivative(d.num);
    if (d.den.empty()) return dnum;
    Expr out = dnum.is_zero() ? Expr() : make_expr(dnum.data().num, d.den);
    if (!dnum.data().den.empty()) {
      // Fallback through general division when dnum itself is rational.
      Expr den = 1;
      for (const auto& [f, k] : d.den) den = den * pow(make_expr(f, {}), k);
      out = dnum / den;
    }
    Expr log_sum;
    for (const auto& [f, k] : d.den) {
      Expr df = poly_derivative(f);
      if (df.is_zero()) continue;
      log_sum = log_sum + Expr(k) * df / make_expr(f, {});
    }
    if (!log_sum.is_zero()) out = out - e * log_sum;
    return out;
  }

 private:
  const std::function<Expr(const Gen&)>& leaf_;
  std::map<Gen, Expr> memo_;
};

}  // namespace

Expr derive(const Expr& e, const std::function<Expr(const Gen&)>& leaf_derivative) {
  Deriver d(leaf_derivative);
  return d.run(e);
}

Expr partial(const Expr& e, const Gen& v) {
  if (v.is_atom()) throw ExprError("partial derivative with respect to an atom");
  std::function<Expr(const Gen&)> leaf = [&v](const Gen& g) { return g == v ? Expr(1) : Expr(); };
  return derive(e, leaf);
}

namespace {

class Rebuilder {
 public:
  Rebuilder(const std::map<Gen, Expr>& bindings, bool force) : bindings_(bindings), force_(force) {}

  bool touches(const Gen& g) {
    if (force_) return true;
    auto it = touch_memo_.find(g);
    if (it != touch_memo_.end()) return it->second;
    bool t = bindings_.count(g) > 0;
    if (!t && g.is_atom()) {
      const auto& a = g.atom();
      if (a.kind == AtomData::Kind::Power) {
        t = touches_expr(a.base) || touches_expr(a.exponent);
      } else {
        for (const auto& arg : a.args) t = t || touches_expr(arg);
      }
    }
    touch_memo_.emplace(g, t);
    return t;
  }

  bool touches_expr(const Expr& e) {
    for (const auto& t : e.data().num.terms()) {
      for (const auto& f : t.first.factors()) {
        if (touches(f.first)) return true;
      }
    }
    for (const auto& [p, k] : e.data().den) {
      for (const auto& t : p.terms()) {
        for (const auto& f : t.first.factors()) {
          if (touches(f.first)) return true;
        }
      }
    }
    return false;
  }

  Expr image(const Gen& g) {
    auto it = memo_.find(g);
    if (it != memo_.end()) return it->second;
    Expr out;
    if (auto b = bindings_.find(g); b != bindings_.end()) {
      out = b->second;
    } else if (g.is_atom()) {
      const auto& a = g.atom();
      if (a.kind == AtomData::Kind::Power) {
        out = pow(run(a.base), run(a.exponent));
      } else {
        std::vector<Expr> args;
        args.reserve(a.args.size());
        for (const auto& arg : a.args) args.push_back(run(arg));
        out = function_application(a.function, a.orders, std::move(args));
      }
    } else {
      out = Expr(g);
    }
    memo_.emplace(g, out);
    return out;
  }

  Expr poly(const Poly& p) {
    Poly plain;
    Expr rest;
    for (const auto& [m, c] : p.terms()) {
      Monomial keep;
      Expr factor = 1;
      bool hit = false;
      for (const auto& [g, e] : m.factors()) {
        if (touches(g)) {
          factor = factor * pow(image(g), e);
          hit = true;
        } else {
          keep = keep * Monomial::of(g, e);
        }
      }
      if (hit) {
        rest = rest + make_expr(Poly::monomial(keep, c), {}) * factor;
      } else {
        plain = plain + Poly::monomial(keep, c);
      }
    }
    return make_expr(std::move(plain), {}) + rest;
  }

  Expr run(const Expr& e) {
    if (!force_ && !touches_expr(e)) return e;
    Expr num = poly(e.data().num);
    if (e.data().den.empty()) return num;
    Expr den = 1;
    for (const auto& [f, k] : e.data().den) den = den * pow(poly(f), k);
    return num / den;
  }

 private:
  const std::map<Gen, Expr>& bindings_;
  bool force_;
  std::map<Gen, bool> touch_memo_;
  std::map<Gen, Expr> memo_;
};

}  // namespace

Expr substitute(const Expr& e, const std::map<Gen, Expr>& bindings) {
  if (bindings.empty()) return e;
  Rebuilder r(bindings, false);
  return r.run(e);
}

Expr renormalize(const Expr& e) {
  std::map<Gen, Expr> none;
  Rebuilder r(none, true);
  return r.run(e);
}

}  // namespace jetcalc
