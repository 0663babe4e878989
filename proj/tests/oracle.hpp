#pragma once

// Brute-force references: breadth-first exploration of concrete transaction
// sequences, and a generator of small random contracts with candidates.

#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "solinv/semantics.hpp"

namespace oracle {

using solinv::ContractState;
using solinv::Transaction;
using solinv::TransitionSystem;

// Every well-typed transaction with delta drawn from `deltas`.
inline std::vector<Transaction> all_transactions(const TransitionSystem& ts, const std::vector<std::int64_t>& deltas) {
  std::vector<Transaction> out;
  for (const auto& a : ts.actions) {
    std::vector<std::int64_t> dom;
    for (const auto& p : a.params) dom.push_back(ts.dom.domain_of(p.type));
    std::vector<std::int64_t> args(dom.size(), 0);
    while (true) {
      for (std::int64_t s = 0; s < ts.dom.addresses - 1; ++s) {
        for (auto d : deltas) out.push_back(Transaction{a.name, s, args, d});
      }
      std::size_t i = args.size();
      while (i > 0 && ++args[i - 1] == dom[i - 1]) args[--i] = 0;
      if (i == 0) break;
    }
  }
  return out;
}

struct Exploration {
  std::optional<std::size_t> violation_depth;  // length of the shortest violating sequence
  std::vector<Transaction> witness;
  int violation_line = 0;
  std::size_t states = 0;
};

// Shortest violating sequence of length <= depth, by breadth-first search over
// distinct post-states. Transitions depend on the state alone, so merging
// equal states loses nothing.
inline Exploration explore(const TransitionSystem& ts, const std::vector<std::int64_t>& init_args, std::size_t depth,
                           const std::vector<std::int64_t>& deltas = {0}) {
  Exploration ex;
  const auto init = solinv::run(ts, init_args, {});
  if (init.violation) {
    ex.violation_depth = 0;
    ex.violation_line = init.violation->line;
    return ex;
  }
  if (init.init_reverted) return ex;
  const auto txs = all_transactions(ts, deltas);

  struct Node {
    ContractState state;
    long parent;
    std::size_t tx;
  };
  std::vector<Node> nodes{{init.states[0], -1, 0}};
  std::unordered_map<std::string, std::size_t> seen{{init.states[0].digest(), 0}};
  std::vector<std::size_t> frontier{0};
  for (std::size_t d = 1; d <= depth && !frontier.empty(); ++d) {
    std::vector<std::size_t> next;
    for (auto n : frontier) {
      for (std::size_t t = 0; t < txs.size(); ++t) {
        const auto r = solinv::step(ts, nodes[n].state, txs[t]);
        if (r.violation) {
          ex.violation_depth = d;
          ex.violation_line = r.violation->line;
          ex.witness.insert(ex.witness.begin(), txs[t]);
          for (long p = static_cast<long>(n); nodes[p].parent >= 0; p = nodes[p].parent) {
            ex.witness.insert(ex.witness.begin(), txs[nodes[p].tx]);
          }
          ex.states = nodes.size();
          return ex;
        }
        if (r.steps[0].status != solinv::StepResult::Status::Ok) continue;
        auto [it, fresh] = seen.emplace(r.states[0].digest(), nodes.size());
        if (!fresh) continue;
        nodes.push_back({r.states[0], static_cast<long>(n), t});
        next.push_back(nodes.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  ex.states = nodes.size();
  return ex;
}

// Random contracts ------------------------------------------------------------

struct RandomContract {
  std::string source;
  std::vector<std::string> candidates;  // "<anchor> <template>"
};

class ContractGen {
 public:
  explicit ContractGen(std::uint32_t seed) : rng_(seed) {}

  RandomContract next(int index) {
    lines_.clear();
    RandomContract rc;
    add("contract R" + std::to_string(index) + " {");
    add("  uint a;");
    add("  uint b;");
    add("  mapping(address => uint) m;");
    if (coin()) {
      add("  constructor() {");
      add("    a = " + std::to_string(pick(0, 3)) + ";");
      if (coin()) add("    b = a;");
      add("  }");
    }
    const int fns = pick(2, 3);
    for (int f = 0; f < fns; ++f) {
      const bool has_x = coin();
      add("  function f" + std::to_string(f) + "(" + (has_x ? "uint x" : "") + ") public {");
      const int stmts = pick(1, 3);
      for (int s = 0; s < stmts; ++s) add("    " + statement(has_x));
      const int last = static_cast<int>(lines_.size());
      add("  }");
      // candidates after the last statement of the body
      if (coin()) rc.candidates.push_back(std::to_string(last) + "+ assert(" + predicate() + ");");
      if (has_x && pick(0, 3) == 0) rc.candidates.push_back(std::to_string(last) + "+ assert(x <= a + b);");
      if (pick(0, 3) == 0) rc.candidates.push_back(std::to_string(last) + "+ assert(a >= Old(a));");
    }
    const int close = static_cast<int>(lines_.size());
    add("}");
    rc.candidates.push_back(std::to_string(close) + " Invariant(" + predicate() + ");");
    for (const auto& l : lines_) rc.source += l + "\n";
    return rc;
  }

 private:
  void add(std::string l) { lines_.push_back(std::move(l)); }
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return pick(0, 1) == 1; }
  std::string small() { return std::to_string(pick(0, 9)); }

  std::string statement(bool has_x) {
    const std::string v = coin() ? "a" : "b";
    const std::string w = v == "a" ? "b" : "a";
    const std::string operand = has_x && coin() ? "x" : std::to_string(pick(1, 3));
    switch (pick(0, 8)) {
      case 0: return "require(" + v + " < " + small() + ");";
      case 1: return has_x ? "require(x <= " + small() + ");" : "require(" + v + " != " + small() + ");";
      case 2: return v + " += " + operand + ";";
      case 3: return v + " -= " + operand + ";";
      case 4: return v + " = " + w + ";";
      case 5: return "a += 1; b += 1;";
      case 6: return "m[msg.sender] += " + operand + ";";
      case 7: return "if (" + v + " > " + small() + ") { " + w + " = 0; }";
      default: return v + " = " + w + " + " + std::to_string(pick(0, 2)) + ";";
    }
  }

  std::string predicate() {
    switch (pick(0, 7)) {
      case 0: return "a <= b";
      case 1: return "a == b";
      case 2: return "a + b < " + std::to_string(pick(5, 15));
      case 3: return "sumMapping(m) <= " + std::to_string(pick(3, 15));
      case 4: return "a < " + std::to_string(pick(4, 15));
      case 5: return "b <= a + " + std::to_string(pick(0, 3));
      case 6: return "sumMapping(m) <= a + b || b == 0";
      default: return "a != " + small();
    }
  }

  std::mt19937 rng_;
  std::vector<std::string> lines_;
};

}  // namespace oracle
