#pragma once

// One-step inductiveness check of an instrumented contract: the candidate
// holds after construction and is preserved by every action.

#include <optional>
#include <string>
#include <vector>

#include "solinv/encoder.hpp"
#include "solinv/invariants.hpp"

namespace solinv {

enum class InductiveOutcome { Proven, NotProven, Unknown };
const char* outcome_name(InductiveOutcome o);

struct Obligation {
  std::string name;  // "init" or "consecution(<action>)"
  enum class Status { Holds, Fails, Unknown } status = Status::Holds;
  std::string digest;  // FNV-1a of the query
};

// A counterexample to induction: a (not necessarily reachable) pre-state and
// the transaction that breaks the candidate from it.
struct InductionWitness {
  std::string obligation;
  std::optional<ContractState> pre;  // absent for the init obligation
  std::optional<Transaction> tx;
  std::vector<std::int64_t> init_args;
};

struct Proof {
  std::string digest;  // over all obligations, in order
  std::vector<Obligation> obligations;
};

struct InductiveResult {
  InductiveOutcome outcome = InductiveOutcome::Unknown;
  std::vector<Obligation> obligations;
  std::optional<Proof> proof;  // set when Proven
  std::optional<InductionWitness> witness;
};

// `ts` must already carry the candidate's checks. When `predicate` is given
// (a state predicate), it is assumed before each action and required after.
InductiveResult inductive_check(const TransitionSystem& ts, const Expr* predicate, solver::Budget budget = {});

// Convenience: the candidate's expression when it is a state predicate.
const Expr* state_predicate(const InvariantCandidate& c);

std::string fnv1a(const std::string& text);

}  // namespace solinv
