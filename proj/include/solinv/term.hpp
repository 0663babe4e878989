#pragma once

// Integer/boolean term language shared by the symbolic encoder and the
// finite-domain solver. Terms are immutable DAG nodes; the smart constructors
// fold constants and use value ranges to decide trivial comparisons.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace solinv::solver {

enum class Op {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,   // floor division; x / 0 == 0
  Wrap,  // x mod 2^width, result in [0, 2^width)
  Ite,
  Eq,
  Lt,
  Le,
  Not,
  And,
  Or,
};

struct Range {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
};

class TermNode;
using Term = std::shared_ptr<const TermNode>;

class TermNode {
 public:
  Op op;
  std::int64_t value = 0;  // Const value, Wrap width
  std::string name;        // Var name
  std::int64_t domain = 0; // Var domain size: values in [0, domain)
  std::vector<Term> kids;
  Range range;
  bool boolean = false;

  bool is_const() const { return op == Op::Const; }
  bool is_true() const { return op == Op::Const && value != 0; }
  bool is_false() const { return op == Op::Const && value == 0; }
};

// Constructors.
Term constant(std::int64_t v);
Term boolean(bool b);
Term var(const std::string& name, std::int64_t domain);
Term add(const Term& a, const Term& b);
Term sub(const Term& a, const Term& b);
Term mul(const Term& a, const Term& b);
Term div(const Term& a, const Term& b);  // divisor range must be non-negative
Term signed_div(const Term& a, const Term& b);  // floor division, any divisor
Term abs_value(const Term& a);
Term wrap(const Term& a, unsigned width);
Term ite(const Term& c, const Term& t, const Term& e);
Term eq(const Term& a, const Term& b);
Term ne(const Term& a, const Term& b);
Term lt(const Term& a, const Term& b);
Term le(const Term& a, const Term& b);
Term gt(const Term& a, const Term& b);
Term ge(const Term& a, const Term& b);
Term lnot(const Term& a);
Term land(const Term& a, const Term& b);
Term lor(const Term& a, const Term& b);
Term implies(const Term& a, const Term& b);
Term land(std::span<const Term> xs);
Term lor(std::span<const Term> xs);

// entries[index] as an if-then-else chain; out-of-range index selects
// `fallback`.
Term select(std::span<const Term> entries, const Term& index, const Term& fallback);

// Evaluates a term under a total assignment of its variables (by name).
using Assignment = std::unordered_map<std::string, std::int64_t>;
std::int64_t evaluate(const Term& t, const Assignment& values);

// Floor division with the x / 0 == 0 convention, shared by every evaluator.
std::int64_t floor_div(std::int64_t x, std::int64_t y);
std::int64_t wrap_value(std::int64_t x, unsigned width);

// S-expression rendering, e.g. (<= (+ x y) 3).
std::string to_sexpr(const Term& t);

// Distinct variable names in first-occurrence (depth-first) order.
std::vector<std::string> free_vars(const Term& t);

}  // namespace solinv::solver
