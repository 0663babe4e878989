#pragma once

// Bounded model checking by stratified inlining over the transaction harness:
// main runs the constructor and calls dispatch, and dispatch k executes the
// k-th transaction and calls dispatch k+1.

#include <stdexcept>
#include <string>
#include <vector>

#include "solinv/encoder.hpp"

namespace solinv {

struct BmcConfig {
  int max_txs = 4;  // m: recursion bound on dispatch
  solver::Budget budget;
  int max_rounds = 64;
};

enum class BmcOutcome { Counterexample, NoCounterexampleWithinBound, Unknown };
const char* outcome_name(BmcOutcome o);

struct BmcResult {
  BmcOutcome outcome = BmcOutcome::Unknown;
  std::vector<std::int64_t> init_args;
  std::vector<Transaction> txs;
  Trace trace;  // concrete replay of the counterexample
  int rounds = 0;
  std::size_t inlined_sites = 0;
};

// The solver produced a sequence the interpreter does not confirm.
class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Number of dispatch frames is the recursion depth of a site.
struct SiteSplit {
  std::vector<CallSite> within;  // depth < bound
  std::vector<CallSite> beyond;
};
SiteSplit split_on_recursive_depth(const std::vector<CallSite>& open, int bound);

BmcResult bmc(const TransitionSystem& ts, const BmcConfig& cfg = {});

}  // namespace solinv
