#include "solinv/term.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace solinv::solver {

namespace {

constexpr std::int64_t kRangeLimit = std::int64_t{1} << 60;

std::int64_t clamp_checked(__int128 v) {
  if (v > kRangeLimit || v < -kRangeLimit) {
    throw std::overflow_error("term value range exceeds the supported width");
  }
  return static_cast<std::int64_t>(v);
}

Term make(Op op, std::vector<Term> kids, Range r, bool is_bool) {
  auto n = std::make_shared<TermNode>();
  n->op = op;
  n->kids = std::move(kids);
  n->range = r;
  n->boolean = is_bool;
  return n;
}

Range bool_range() { return {0, 1}; }

}  // namespace

std::int64_t floor_div(std::int64_t x, std::int64_t y) {
  if (y == 0) return 0;
  std::int64_t q = x / y;
  if ((x % y != 0) && ((x < 0) != (y < 0))) --q;
  return q;
}

std::int64_t wrap_value(std::int64_t x, unsigned width) {
  const std::int64_t mod = std::int64_t{1} << width;
  std::int64_t r = x % mod;
  if (r < 0) r += mod;
  return r;
}

Term constant(std::int64_t v) {
  auto n = std::make_shared<TermNode>();
  n->op = Op::Const;
  n->value = v;
  n->range = {v, v};
  return n;
}

Term boolean(bool b) {
  static const Term t = [] {
    auto n = std::make_shared<TermNode>();
    n->op = Op::Const;
    n->value = 1;
    n->range = {1, 1};
    n->boolean = true;
    return Term(n);
  }();
  static const Term f = [] {
    auto n = std::make_shared<TermNode>();
    n->op = Op::Const;
    n->value = 0;
    n->range = {0, 0};
    n->boolean = true;
    return Term(n);
  }();
  return b ? t : f;
}

Term var(const std::string& name, std::int64_t domain) {
  if (domain <= 0) throw std::invalid_argument("variable domain must be positive: " + name);
  auto n = std::make_shared<TermNode>();
  n->op = Op::Var;
  n->name = name;
  n->domain = domain;
  n->range = {0, domain - 1};
  return n;
}

Term add(const Term& a, const Term& b) {
  if (a->is_const() && b->is_const()) return constant(clamp_checked(__int128(a->value) + b->value));
  if (a->is_const() && a->value == 0) return b;
  if (b->is_const() && b->value == 0) return a;
  Range r{clamp_checked(__int128(a->range.lo) + b->range.lo),
          clamp_checked(__int128(a->range.hi) + b->range.hi)};
  return make(Op::Add, {a, b}, r, false);
}

Term sub(const Term& a, const Term& b) {
  if (a->is_const() && b->is_const()) return constant(clamp_checked(__int128(a->value) - b->value));
  if (b->is_const() && b->value == 0) return a;
  if (a == b) return constant(0);
  Range r{clamp_checked(__int128(a->range.lo) - b->range.hi),
          clamp_checked(__int128(a->range.hi) - b->range.lo)};
  return make(Op::Sub, {a, b}, r, false);
}

Term mul(const Term& a, const Term& b) {
  if (a->is_const() && b->is_const()) return constant(clamp_checked(__int128(a->value) * b->value));
  if ((a->is_const() && a->value == 0) || (b->is_const() && b->value == 0)) return constant(0);
  if (a->is_const() && a->value == 1) return b;
  if (b->is_const() && b->value == 1) return a;
  __int128 c[4] = {__int128(a->range.lo) * b->range.lo, __int128(a->range.lo) * b->range.hi,
                   __int128(a->range.hi) * b->range.lo, __int128(a->range.hi) * b->range.hi};
  Range r{clamp_checked(*std::min_element(c, c + 4)), clamp_checked(*std::max_element(c, c + 4))};
  return make(Op::Mul, {a, b}, r, false);
}

Term div(const Term& a, const Term& b) {
  if (b->range.lo < 0) throw std::invalid_argument("division by a possibly negative term");
  if (a->is_const() && b->is_const()) return constant(floor_div(a->value, b->value));
  if (b->is_const() && b->value == 1) return a;
  if (b->is_const() && b->value == 0) return constant(0);
  if (a->is_const() && a->value == 0) return constant(0);
  std::vector<std::int64_t> cands{0};
  for (std::int64_t x : {a->range.lo, a->range.hi}) {
    for (std::int64_t y : {std::max<std::int64_t>(1, b->range.lo), b->range.hi}) {
      if (y >= 1) cands.push_back(floor_div(x, y));
    }
  }
  Range r{*std::min_element(cands.begin(), cands.end()), *std::max_element(cands.begin(), cands.end())};
  if (b->range.lo >= 1) {
    // y never zero: drop the artificial 0 candidate unless the corners allow it
    cands.erase(cands.begin());
    r = {*std::min_element(cands.begin(), cands.end()), *std::max_element(cands.begin(), cands.end())};
  }
  return make(Op::Div, {a, b}, r, false);
}

Term abs_value(const Term& a) {
  if (a->range.lo >= 0) return a;
  if (a->is_const()) return constant(-a->value);
  const std::int64_t hi = std::max(-a->range.lo, a->range.hi);
  const std::int64_t lo = a->range.hi < 0 ? -a->range.hi : 0;
  return make(Op::Ite, {lt(a, constant(0)), sub(constant(0), a), a}, Range{lo, hi}, false);
}

Term signed_div(const Term& a, const Term& b) {
  if (b->range.lo >= 0) return div(a, b);
  // floor(x / y) == floor(-x / -y)
  const Term m = abs_value(b);
  return ite(lt(b, constant(0)), div(sub(constant(0), a), m), div(a, m));
}

Term wrap(const Term& a, unsigned width) {
  const std::int64_t mod = std::int64_t{1} << width;
  if (a->is_const()) return constant(wrap_value(a->value, width));
  if (a->range.lo >= 0 && a->range.hi < mod) return a;
  auto t = make(Op::Wrap, {a}, Range{0, mod - 1}, false);
  std::const_pointer_cast<TermNode>(t)->value = width;
  return t;
}

Term ite(const Term& c, const Term& t, const Term& e) {
  if (c->is_const()) return c->value != 0 ? t : e;
  if (t == e) return t;
  if (t->is_const() && e->is_const() && t->value == e->value && t->boolean == e->boolean) return t;
  if (t->boolean && e->boolean) {
    if (t->is_true() && e->is_false()) return c;
    if (t->is_false() && e->is_true()) return lnot(c);
  }
  Range r{std::min(t->range.lo, e->range.lo), std::max(t->range.hi, e->range.hi)};
  return make(Op::Ite, {c, t, e}, r, t->boolean && e->boolean);
}

Term eq(const Term& a, const Term& b) {
  if (a == b) return boolean(true);
  if (a->is_const() && b->is_const()) return boolean(a->value == b->value);
  if (a->range.hi < b->range.lo || b->range.hi < a->range.lo) return boolean(false);
  if (a->boolean && b->is_const()) return b->value != 0 ? a : lnot(a);
  if (b->boolean && a->is_const()) return a->value != 0 ? b : lnot(b);
  return make(Op::Eq, {a, b}, bool_range(), true);
}

Term ne(const Term& a, const Term& b) { return lnot(eq(a, b)); }

Term lt(const Term& a, const Term& b) {
  if (a->range.hi < b->range.lo) return boolean(true);
  if (a->range.lo >= b->range.hi) return boolean(false);
  return make(Op::Lt, {a, b}, bool_range(), true);
}

Term le(const Term& a, const Term& b) {
  if (a->range.hi <= b->range.lo) return boolean(true);
  if (a->range.lo > b->range.hi) return boolean(false);
  if (a == b) return boolean(true);
  return make(Op::Le, {a, b}, bool_range(), true);
}

Term gt(const Term& a, const Term& b) { return lt(b, a); }
Term ge(const Term& a, const Term& b) { return le(b, a); }

Term lnot(const Term& a) {
  if (a->is_const()) return boolean(a->value == 0);
  if (a->op == Op::Not) return a->kids[0];
  return make(Op::Not, {a}, bool_range(), true);
}

Term land(const Term& a, const Term& b) {
  if (a->is_false() || b->is_false()) return boolean(false);
  if (a->is_true()) return b;
  if (b->is_true()) return a;
  if (a == b) return a;
  return make(Op::And, {a, b}, bool_range(), true);
}

Term lor(const Term& a, const Term& b) {
  if (a->is_true() || b->is_true()) return boolean(true);
  if (a->is_false()) return b;
  if (b->is_false()) return a;
  if (a == b) return a;
  return make(Op::Or, {a, b}, bool_range(), true);
}

Term implies(const Term& a, const Term& b) { return lor(lnot(a), b); }

Term land(std::span<const Term> xs) {
  Term acc = boolean(true);
  for (const auto& x : xs) acc = land(acc, x);
  return acc;
}

Term lor(std::span<const Term> xs) {
  Term acc = boolean(false);
  for (const auto& x : xs) acc = lor(acc, x);
  return acc;
}

Term select(std::span<const Term> entries, const Term& index, const Term& fallback) {
  if (index->is_const()) {
    const auto i = index->value;
    if (i >= 0 && i < static_cast<std::int64_t>(entries.size())) return entries[static_cast<std::size_t>(i)];
    return fallback;
  }
  Term acc = fallback;
  const std::int64_t lo = std::max<std::int64_t>(0, index->range.lo);
  const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(entries.size()) - 1, index->range.hi);
  for (std::int64_t i = hi; i >= lo; --i) {
    if (i == index->range.hi && index->range.lo >= 0 &&
        index->range.hi < static_cast<std::int64_t>(entries.size())) {
      // index can never exceed this entry: no need to test for it
      acc = entries[static_cast<std::size_t>(i)];
      continue;
    }
    acc = ite(eq(index, constant(i)), entries[static_cast<std::size_t>(i)], acc);
  }
  return acc;
}

std::int64_t evaluate(const Term& root, const Assignment& values) {
  std::unordered_map<const TermNode*, std::int64_t> memo;
  std::function<std::int64_t(const Term&)> go = [&](const Term& t) -> std::int64_t {
    if (auto it = memo.find(t.get()); it != memo.end()) return it->second;
    std::int64_t v = 0;
    switch (t->op) {
      case Op::Const: v = t->value; break;
      case Op::Var: {
        auto it = values.find(t->name);
        if (it == values.end()) throw std::out_of_range("unassigned variable " + t->name);
        v = it->second;
        break;
      }
      case Op::Add: v = go(t->kids[0]) + go(t->kids[1]); break;
      case Op::Sub: v = go(t->kids[0]) - go(t->kids[1]); break;
      case Op::Mul: v = go(t->kids[0]) * go(t->kids[1]); break;
      case Op::Div: v = floor_div(go(t->kids[0]), go(t->kids[1])); break;
      case Op::Wrap: v = wrap_value(go(t->kids[0]), static_cast<unsigned>(t->value)); break;
      case Op::Ite: v = go(t->kids[0]) != 0 ? go(t->kids[1]) : go(t->kids[2]); break;
      case Op::Eq: v = go(t->kids[0]) == go(t->kids[1]); break;
      case Op::Lt: v = go(t->kids[0]) < go(t->kids[1]); break;
      case Op::Le: v = go(t->kids[0]) <= go(t->kids[1]); break;
      case Op::Not: v = go(t->kids[0]) == 0; break;
      case Op::And: v = go(t->kids[0]) != 0 && go(t->kids[1]) != 0; break;
      case Op::Or: v = go(t->kids[0]) != 0 || go(t->kids[1]) != 0; break;
    }
    memo.emplace(t.get(), v);
    return v;
  };
  return go(root);
}

std::string to_sexpr(const Term& t) {
  std::ostringstream os;
  std::function<void(const Term&)> go = [&](const Term& n) {
    switch (n->op) {
      case Op::Const:
        if (n->boolean) os << (n->value ? "true" : "false");
        else os << n->value;
        return;
      case Op::Var: os << n->name; return;
      default: break;
    }
    static const char* names[] = {"", "", "+", "-", "*", "div", "wrap", "ite", "=", "<", "<=", "not", "and", "or"};
    os << '(' << names[static_cast<int>(n->op)];
    if (n->op == Op::Wrap) os << ' ' << n->value;
    for (const auto& k : n->kids) {
      os << ' ';
      go(k);
    }
    os << ')';
  };
  go(t);
  return os.str();
}

std::vector<std::string> free_vars(const Term& root) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::unordered_set<const TermNode*> visited;
  std::function<void(const TermNode*)> go = [&](const TermNode* n) {
    if (!visited.insert(n).second) return;
    if (n->op == Op::Var && seen.insert(n->name).second) out.push_back(n->name);
    for (const auto& k : n->kids) go(k.get());
  };
  go(root.get());
  return out;
}

}  // namespace solinv::solver
