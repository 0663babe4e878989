#include "solinv/solver.hpp"

#include <algorithm>
#include <sstream>

#include "solinv/sat.hpp"

namespace solinv::solver {

using sat::Lit;

namespace {

unsigned bits_for(std::int64_t lo, std::int64_t hi) {
  unsigned w = 1;
  while (true) {
    const std::int64_t min = -(std::int64_t{1} << (w - 1));
    const std::int64_t max = (std::int64_t{1} << (w - 1)) - 1;
    if (lo >= min && hi <= max) return w;
    ++w;
  }
}

unsigned unsigned_bits(std::int64_t max_value) {
  unsigned w = 0;
  while (max_value > 0) {
    ++w;
    max_value >>= 1;
  }
  return w;
}

using Bits = std::vector<Lit>;  // two's complement, least significant first

// Translates terms to CNF over a sat::Solver.
class Blaster {
 public:
  Blaster(sat::Solver& s, const std::vector<std::string>& names, const std::vector<std::int64_t>& domains,
          const std::unordered_map<std::string, std::size_t>& index)
      : s_(s), names_(names), domains_(domains), index_(index) {
    true_ = Lit::make(s_.new_var());
    s_.add_clause({true_});
    var_bits_.resize(names.size());
  }

  Lit lit_true() const { return true_; }
  Lit lit_false() const { return ~true_; }

  Lit boolean(const Term& t) {
    if (auto it = bool_cache_.find(t.get()); it != bool_cache_.end()) return it->second;
    Lit r;
    switch (t->op) {
      case Op::Const: r = t->value != 0 ? true_ : ~true_; break;
      case Op::Not: r = ~boolean(t->kids[0]); break;
      case Op::And: r = mk_and(boolean(t->kids[0]), boolean(t->kids[1])); break;
      case Op::Or: r = ~mk_and(~boolean(t->kids[0]), ~boolean(t->kids[1])); break;
      case Op::Eq: {
        if (t->kids[0]->boolean && t->kids[1]->boolean) {
          r = ~mk_xor(boolean(t->kids[0]), boolean(t->kids[1]));
        } else {
          r = equal(bits(t->kids[0]), bits(t->kids[1]));
        }
        break;
      }
      case Op::Lt: r = less(bits(t->kids[0]), bits(t->kids[1])); break;
      case Op::Le: r = ~less(bits(t->kids[1]), bits(t->kids[0])); break;
      case Op::Ite: r = mux(boolean(t->kids[0]), boolean(t->kids[1]), boolean(t->kids[2])); break;
      case Op::Var:
        if (t->domain <= 2) {
          r = bits(t)[0];
          break;
        }
        [[fallthrough]];
      default: {
        // integer term used as a condition: nonzero test
        const Bits b = bits(t);
        Lit any = ~true_;
        for (const Lit l : b) any = mk_or(any, l);
        r = any;
      }
    }
    bool_cache_.emplace(t.get(), r);
    return r;
  }

  const Bits& var_bits(std::size_t i) {
    if (var_bits_[i].empty()) {
      const auto domain = domains_[i];
      const unsigned w = std::max(1u, unsigned_bits(domain - 1));
      Bits b;
      for (unsigned k = 0; k < w; ++k) b.push_back(Lit::make(s_.new_var()));
      b.push_back(~true_);  // sign
      const std::int64_t full = std::int64_t{1} << w;
      if (domain < full) {
        s_.add_clause({~less(constant_bits(domain - 1, w + 1), b)});
      }
      var_bits_[i] = std::move(b);
    }
    return var_bits_[i];
  }

  bool var_blasted(std::size_t i) const { return !var_bits_[i].empty(); }

 private:
  Bits bits(const Term& t) {
    if (auto it = cache_.find(t.get()); it != cache_.end()) return it->second;
    Bits r;
    const unsigned w = bits_for(t->range.lo, t->range.hi);
    switch (t->op) {
      case Op::Const: r = constant_bits(t->value, bits_for(t->value, t->value)); break;
      case Op::Var: {
        auto it = index_.find(t->name);
        r = var_bits(it->second);
        break;
      }
      case Op::Add: r = adder(fit(bits(t->kids[0]), w), fit(bits(t->kids[1]), w), ~true_); break;
      case Op::Sub: r = adder(fit(bits(t->kids[0]), w), invert(fit(bits(t->kids[1]), w)), true_); break;
      case Op::Mul: r = multiply(bits(t->kids[0]), bits(t->kids[1]), w); break;
      case Op::Div: r = divide(t); break;
      case Op::Wrap: {
        const auto width = static_cast<unsigned>(t->value);
        const Bits x = extend(bits(t->kids[0]), width + 1);
        r.assign(x.begin(), x.begin() + width);
        r.push_back(~true_);
        break;
      }
      case Op::Ite: {
        const Lit c = boolean(t->kids[0]);
        const Bits a = fit(bits(t->kids[1]), w);
        const Bits b = fit(bits(t->kids[2]), w);
        for (unsigned k = 0; k < w; ++k) r.push_back(mux(c, a[k], b[k]));
        break;
      }
      default:
        r = {boolean(t), ~true_};
    }
    cache_.emplace(t.get(), r);
    return r;
  }

  Bits constant_bits(std::int64_t v, unsigned w) const {
    Bits r;
    for (unsigned k = 0; k < w; ++k) r.push_back(((v >> std::min(k, 62u)) & 1) ? true_ : ~true_);
    return r;
  }

  static Bits extend(Bits b, unsigned w) {
    while (b.size() < w) b.push_back(b.back());
    return b;
  }

  // Sign-extends or truncates to w bits. Truncation is exact when the value
  // is known to fit, which holds for operands sized by the result's range.
  static Bits fit(Bits b, unsigned w) {
    if (b.size() > w) b.resize(w);
    return extend(std::move(b), w);
  }

  static Bits invert(Bits b) {
    for (auto& l : b) l = ~l;
    return b;
  }

  bool is_const(Lit l) const { return l.var() == true_.var(); }
  bool const_value(Lit l) const { return l == true_; }

  Lit mk_and(Lit a, Lit b) {
    if (a == ~true_ || b == ~true_) return ~true_;
    if (a == true_) return b;
    if (b == true_) return a;
    if (a == b) return a;
    if (a == ~b) return ~true_;
    if (a.code > b.code) std::swap(a, b);
    const std::uint64_t key = (std::uint64_t{a.code} << 32) | b.code;
    if (auto it = and_cache_.find(key); it != and_cache_.end()) return it->second;
    const Lit g = Lit::make(s_.new_var());
    s_.add_clause({~g, a});
    s_.add_clause({~g, b});
    s_.add_clause({g, ~a, ~b});
    and_cache_.emplace(key, g);
    return g;
  }

  Lit mk_or(Lit a, Lit b) { return ~mk_and(~a, ~b); }

  Lit mk_xor(Lit a, Lit b) {
    if (is_const(a)) return const_value(a) ? ~b : b;
    if (is_const(b)) return const_value(b) ? ~a : a;
    if (a == b) return ~true_;
    if (a == ~b) return true_;
    bool flip = false;
    if (a.negated()) { a = ~a; flip = !flip; }
    if (b.negated()) { b = ~b; flip = !flip; }
    if (a.code > b.code) std::swap(a, b);
    const std::uint64_t key = (std::uint64_t{a.code} << 32) | b.code;
    Lit g;
    if (auto it = xor_cache_.find(key); it != xor_cache_.end()) {
      g = it->second;
    } else {
      g = Lit::make(s_.new_var());
      s_.add_clause({~g, a, b});
      s_.add_clause({~g, ~a, ~b});
      s_.add_clause({g, ~a, b});
      s_.add_clause({g, a, ~b});
      xor_cache_.emplace(key, g);
    }
    return flip ? ~g : g;
  }

  Lit mux(Lit c, Lit a, Lit b) {
    if (is_const(c)) return const_value(c) ? a : b;
    if (a == b) return a;
    return mk_or(mk_and(c, a), mk_and(~c, b));
  }

  Bits adder(const Bits& a, const Bits& b, Lit carry) {
    Bits r;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const Lit axb = mk_xor(a[k], b[k]);
      r.push_back(mk_xor(axb, carry));
      carry = mk_or(mk_and(a[k], b[k]), mk_and(carry, axb));
    }
    return r;
  }

  Bits multiply(const Bits& x, const Bits& y, unsigned w) {
    const Bits a = extend(x, w);
    const Bits b = extend(y, w);
    Bits acc = constant_bits(0, w);
    for (unsigned i = 0; i < w; ++i) {
      if (b[i] == ~true_) continue;
      Bits partial(w, ~true_);
      for (unsigned k = i; k < w; ++k) partial[k] = mk_and(a[k - i], b[i]);
      acc = adder(acc, partial, ~true_);
    }
    return acc;
  }

  Lit equal(const Bits& x, const Bits& y) {
    const unsigned w = static_cast<unsigned>(std::max(x.size(), y.size()));
    const Bits a = extend(x, w);
    const Bits b = extend(y, w);
    Lit acc = true_;
    for (unsigned k = 0; k < w; ++k) acc = mk_and(acc, ~mk_xor(a[k], b[k]));
    return acc;
  }

  // signed a < b
  Lit less(const Bits& x, const Bits& y) {
    const unsigned w = static_cast<unsigned>(std::max(x.size(), y.size())) + 1;
    const Bits d = adder(extend(x, w), invert(extend(y, w)), true_);
    return d.back();
  }

  Bits fresh(unsigned w) {
    Bits r;
    for (unsigned k = 0; k < w; ++k) r.push_back(Lit::make(s_.new_var()));
    return r;
  }

  // Floor division by a non-negative divisor: fresh quotient q and remainder r
  // with x == y*q + r and 0 <= r < y when y != 0; q == 0 when y == 0.
  Bits divide(const Term& t) {
    const Bits x = bits(t->kids[0]);
    const Bits y = bits(t->kids[1]);
    const unsigned wq = bits_for(t->range.lo, t->range.hi);
    const auto& yr = t->kids[1]->range;
    const unsigned wr = bits_for(0, std::max<std::int64_t>(0, yr.hi));
    Bits q = fresh(wq);
    Bits r = fresh(wr - 1);
    r.push_back(~true_);  // r >= 0
    const unsigned wide = static_cast<unsigned>(std::max<std::size_t>(x.size(), y.size() + wq + 1)) + 2;
    const Bits prod = multiply(y, q, wide);
    const Bits sum = adder(prod, extend(r, wide), ~true_);
    Lit nonzero = ~true_;
    for (const Lit l : y) nonzero = mk_or(nonzero, l);
    const Lit holds = mk_and(equal(sum, extend(x, wide)), less(r, y));
    s_.add_clause({~nonzero, holds});
    const Lit q_zero = equal(q, constant_bits(0, 1));
    s_.add_clause({nonzero, q_zero});
    return q;
  }

  sat::Solver& s_;
  const std::vector<std::string>& names_;
  const std::vector<std::int64_t>& domains_;
  const std::unordered_map<std::string, std::size_t>& index_;
  Lit true_;
  std::vector<Bits> var_bits_;
  std::unordered_map<const TermNode*, Bits> cache_;
  std::unordered_map<const TermNode*, Lit> bool_cache_;
  std::unordered_map<std::uint64_t, Lit> and_cache_;
  std::unordered_map<std::uint64_t, Lit> xor_cache_;
};

}  // namespace

std::int64_t Model::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("no such variable in model: " + name);
}

bool Model::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

Assignment Model::as_assignment() const {
  Assignment a;
  for (std::size_t i = 0; i < names.size(); ++i) a.emplace(names[i], values[i]);
  return a;
}

Term Store::declare(const std::string& name, std::int64_t domain) {
  if (auto it = index_.find(name); it != index_.end()) {
    if (domains_[it->second] != domain) {
      throw std::invalid_argument("variable redeclared with a different domain: " + name);
    }
    return var(name, domain);
  }
  index_.emplace(name, names_.size());
  names_.push_back(name);
  domains_.push_back(domain);
  return var(name, domain);
}

void Store::assert_term(const Term& t) {
  for (const auto& name : free_vars(t)) {
    if (!declared(name)) throw UndeclaredVariable(name);
  }
  // domains are checked against the declaration as well
  std::vector<const TermNode*> stack{t.get()};
  std::unordered_map<const TermNode*, bool> seen;
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    if (!seen.emplace(n, true).second) continue;
    if (n->op == Op::Var && domains_[index_.at(n->name)] != n->domain) {
      throw std::invalid_argument("variable used with a different domain: " + n->name);
    }
    for (const auto& k : n->kids) stack.push_back(k.get());
  }
  assertions_.push_back(t);
}

void Store::push() { scopes_.push_back(assertions_.size()); }

void Store::pop() {
  if (scopes_.empty()) throw std::logic_error("pop without matching push");
  assertions_.resize(scopes_.back());
  scopes_.pop_back();
}

CheckResult Store::check() const {
  sat::Solver s;
  Blaster b(s, names_, domains_, index_);
  for (const auto& a : assertions_) {
    if (!s.add_clause({b.boolean(a)})) return Unsat{};
  }
  // Blast every variable that occurs so the model covers them.
  const auto budget = budget_.conflicts_per_call;
  auto first = s.solve({}, budget);
  if (first == sat::Result::Unknown) return BudgetExceeded{};
  if (first == sat::Result::Unsat) return Unsat{};

  // Lexicographic minimisation: fix bits from the first declared variable's
  // most significant bit down, preferring 0 whenever satisfiable.
  std::vector<Lit> fixed;
  std::vector<bool> current(s.num_vars());
  auto snapshot = [&] {
    current.assign(s.num_vars(), false);
    for (std::uint32_t v = 0; v < s.num_vars(); ++v) current[v] = s.model_value(Lit::make(v));
  };
  snapshot();
  Model m;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    m.names.push_back(names_[i]);
    if (!b.var_blasted(i)) {
      m.values.push_back(0);
      continue;
    }
    const auto& vb = b.var_bits(i);
    std::int64_t value = 0;
    for (std::size_t k = vb.size() - 1; k-- > 0;) {
      const Lit bit = vb[k];
      const bool in_model = current[bit.var()] != bit.negated();
      if (!in_model) {
        fixed.push_back(~bit);
        continue;
      }
      fixed.push_back(~bit);
      const auto r = s.solve(fixed, budget);
      if (r == sat::Result::Unknown) return BudgetExceeded{};
      if (r == sat::Result::Sat) {
        snapshot();
      } else {
        fixed.back() = bit;
        value |= std::int64_t{1} << k;
      }
    }
    m.values.push_back(value);
  }
  return Sat{std::move(m)};
}

std::string Store::dump() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < names_.size(); ++i) os << "(declare " << names_[i] << ' ' << domains_[i] << ")\n";
  for (const auto& a : assertions_) os << "(assert " << to_sexpr(a) << ")\n";
  return os.str();
}

}  // namespace solinv::solver
