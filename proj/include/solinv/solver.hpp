#pragma once

// Finite-domain constraint store. Variables are declared with a domain size
// n and range over [0, n). Assertions are Boolean terms; `check` decides the
// conjunction and, when satisfiable, returns the lexicographically smallest
// model over the declaration order.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "solinv/term.hpp"

namespace solinv::solver {

class UndeclaredVariable : public std::runtime_error {
 public:
  explicit UndeclaredVariable(const std::string& name)
      : std::runtime_error("undeclared variable: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

struct Model {
  std::vector<std::string> names;          // declaration order
  std::vector<std::int64_t> values;        // parallel to names

  std::int64_t at(const std::string& name) const;
  bool has(const std::string& name) const;
  Assignment as_assignment() const;
};

struct Sat {
  Model model;
};
struct Unsat {};
struct BudgetExceeded {};

using CheckResult = std::variant<Sat, Unsat, BudgetExceeded>;

inline bool is_sat(const CheckResult& r) { return std::holds_alternative<Sat>(r); }
inline bool is_unsat(const CheckResult& r) { return std::holds_alternative<Unsat>(r); }

struct Budget {
  // Conflicts allowed per SAT call; negative means unlimited.
  std::int64_t conflicts_per_call = 2'000'000;
};

class Store {
 public:
  explicit Store(Budget budget = {}) : budget_(budget) {}

  // Declares (or re-declares with the same domain) a variable and returns it.
  Term declare(const std::string& name, std::int64_t domain);
  bool declared(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t num_vars() const { return names_.size(); }

  void assert_term(const Term& t);
  void push();
  void pop();
  std::size_t num_assertions() const { return assertions_.size(); }

  CheckResult check() const;

  // Optional debug dump: (declare x 16) lines followed by (assert ...) lines.
  std::string dump() const;

 private:
  Budget budget_;
  std::vector<std::string> names_;
  std::vector<std::int64_t> domains_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Term> assertions_;
  std::vector<std::size_t> scopes_;
};

}  // namespace solinv::solver
