#pragma once

// Small CDCL SAT engine: two-watched-literal propagation, first-UIP clause
// learning, activity-ordered decisions, Luby restarts and solving under
// assumptions. Used as the Boolean backend of the finite-domain store.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace solinv::sat {

struct Lit {
  std::uint32_t code = 0;  // 2 * var + negated

  static Lit make(std::uint32_t var, bool negated = false) { return Lit{2 * var + (negated ? 1u : 0u)}; }
  std::uint32_t var() const { return code >> 1; }
  bool negated() const { return code & 1u; }
  Lit operator~() const { return Lit{code ^ 1u}; }
  bool operator==(const Lit&) const = default;
};

enum class Result { Sat, Unsat, Unknown };

class Solver {
 public:
  std::uint32_t new_var();
  std::uint32_t num_vars() const { return static_cast<std::uint32_t>(assigns_.size()); }

  // Returns false once the clause set is trivially unsatisfiable.
  bool add_clause(std::span<const Lit> lits);
  bool add_clause(std::initializer_list<Lit> lits) { return add_clause(std::span<const Lit>(lits.begin(), lits.size())); }

  // conflict_budget < 0 means unlimited.
  Result solve(std::span<const Lit> assumptions = {}, std::int64_t conflict_budget = -1);

  // Valid after Sat.
  bool model_value(Lit l) const { return model_[l.var()] != l.negated(); }

  std::int64_t conflicts() const { return total_conflicts_; }

 private:
  struct Clause {
    std::vector<Lit> lits;
    bool learnt = false;
  };
  enum : std::int8_t { kUndef = -1, kFalse = 0, kTrue = 1 };

  std::int8_t value(Lit l) const {
    const auto a = assigns_[l.var()];
    if (a == kUndef) return kUndef;
    return static_cast<std::int8_t>(a ^ static_cast<std::int8_t>(l.negated()));
  }
  void enqueue(Lit l, std::int32_t reason);
  std::int32_t propagate();
  void analyze(std::int32_t conflict, std::vector<Lit>& learnt, std::uint32_t& backjump);
  void backtrack(std::uint32_t level);
  std::optional<Lit> pick_branch();
  void bump(std::uint32_t v);
  void decay();
  void heap_insert(std::uint32_t v);
  void heap_up(std::size_t i);
  void heap_down(std::size_t i);
  std::uint32_t heap_pop();
  std::uint32_t level() const { return static_cast<std::uint32_t>(trail_lim_.size()); }
  void attach(std::int32_t ci);

  std::vector<Clause> clauses_;
  std::vector<std::vector<std::int32_t>> watches_;  // by literal code
  std::vector<std::int8_t> assigns_;
  std::vector<std::int8_t> phase_;
  std::vector<std::uint32_t> levels_;
  std::vector<std::int32_t> reasons_;
  std::vector<Lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_ = 0;
  std::vector<double> activity_;
  double var_inc_ = 1.0;
  std::vector<std::uint32_t> heap_;
  std::vector<std::int32_t> heap_pos_;
  std::vector<std::uint8_t> seen_;
  std::vector<bool> model_;
  bool ok_ = true;
  std::int64_t total_conflicts_ = 0;
};

}  // namespace solinv::sat
