#pragma once

// Lowering of instrumented contracts to a transition system, and the concrete
// transaction interpreter.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "solinv/ir.hpp"

namespace solinv {

enum class ArithMode { Revert, Wrap };

struct Domain {
  int width = 8;       // W: uint values live in [0, 2^W)
  int addresses = 3;   // A: address universe 0..A-1, A-1 is the contract itself
  ArithMode arith = ArithMode::Revert;
  std::int64_t gas_cap = 0;  // statements per transaction, 0 = unlimited

  std::int64_t uint_size() const { return std::int64_t{1} << width; }
  std::int64_t self() const { return addresses - 1; }
  std::int64_t domain_of(Type t) const;
  void validate() const;
};

class UnsupportedConstruct : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Slot {
  std::string name;  // "price", "shares[1]", "token1.balance[2]", "token1.supply", "block.timestamp"
  Type type = Type::Uint;
  std::int64_t domain = 0;
};

struct StateLayout {
  std::vector<Slot> slots;
  std::map<std::string, std::size_t> var_base;    // state variable -> first slot
  std::map<std::string, std::size_t> token_base;  // token -> first balance slot; supply follows the A balances
  std::size_t timestamp = 0;
};

struct LoweredFunction {
  std::string name;
  std::vector<Param> params;
  std::optional<Type> return_type;
  std::vector<StmtPtr> body;
  bool entry = false;
  bool has_checks = false;  // contains candidate checks, directly or through calls
  int line = 0;
};

struct Action {
  enum class Kind { Function, TokenTransfer, TokenTransferFrom };
  Kind kind = Kind::Function;
  std::string name;  // "deposit", "token1.transfer", "token1.transferFrom"
  std::string token;
  std::size_t function = 0;  // index into TransitionSystem::functions
  std::vector<Param> params;
};

struct TransitionSystem {
  std::string contract;
  Domain dom;
  StateLayout layout;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::string, ExprPtr>> initializers;  // state variable initializers
  LoweredFunction constructor;
  std::vector<LoweredFunction> functions;
  std::vector<Action> actions;  // entry functions, then harness token operations
  std::vector<StmtPtr> global_checks;
  std::map<std::string, std::set<std::size_t>> mod_sets;  // function -> slots it may write

  const LoweredFunction* find(const std::string& name) const;
  const Action* find_action(const std::string& name) const;
};

// Unrolls loops, splices modifiers and lays out state. Throws
// UnsupportedConstruct.
TransitionSystem lower(const ContractIr& ir, const Domain& dom);

struct ContractState {
  std::vector<std::int64_t> values;  // parallel to layout.slots
  bool operator==(const ContractState&) const = default;
  std::string digest() const;
};

ContractState default_state(const TransitionSystem& ts);

struct Transaction {
  std::string fn;
  std::int64_t sender = 0;
  std::vector<std::int64_t> args;
  std::int64_t delta = 0;
  bool operator==(const Transaction&) const = default;
};

struct Violation {
  int candidate = -1;
  int line = 0;
  CheckKind kind = CheckKind::Assertion;
  std::size_t step = 0;  // 0 = constructor, i = i-th transaction
};

struct StepResult {
  enum class Status { Ok, Reverted, Violated };
  Status status = Status::Ok;
  std::string reason;
  std::int64_t gas = 0;
};

struct Trace {
  bool init_reverted = false;
  std::vector<ContractState> states;  // states[i] = state after step i
  std::vector<StepResult> steps;      // steps[0] = constructor
  std::optional<Violation> violation;
};

// Executes the constructor then each transaction. A revert rolls the state
// back and the sequence continues; a violation ends it. Throws
// std::invalid_argument for ill-typed transactions.
Trace run(const TransitionSystem& ts, const std::vector<std::int64_t>& init_args, const std::vector<Transaction>& txs);

// Runs a single transaction from an arbitrary state (used to replay inductive
// witnesses). The returned trace has one step.
Trace step(const TransitionSystem& ts, const ContractState& pre, const Transaction& tx);

// Evaluates a state predicate (no Old, sender, parameters or calls) with
// unbounded arithmetic.
bool holds(const TransitionSystem& ts, const ContractState& s, const Expr& predicate);

std::string render_tx(const Transaction& tx);
nlohmann::json trace_to_json(const TransitionSystem& ts, const std::vector<Transaction>& txs, const Trace& trace);
nlohmann::json state_to_json(const TransitionSystem& ts, const ContractState& s);

}  // namespace solinv
