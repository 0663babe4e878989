#pragma once

// Symbolic execution of a transition system into solver terms. Mirrors the
// concrete interpreter: every update is guarded by `live`, reverts and
// violations accumulate into flags, and calls go through a site policy.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "solinv/semantics.hpp"
#include "solinv/solver.hpp"

namespace solinv {

using solver::Term;

struct CallSite {
  std::string id;      // e.g. "d2.deposit/getRealPrice#0"
  std::string callee;
  std::vector<std::string> stack;  // "main", "dispatch"..., then callees down to this one
  int depth = 0;                   // dispatch frames on the stack
};

enum class SitePolicy { Inline, Block, Summarize };
using PolicyFn = std::function<SitePolicy(const CallSite&)>;

struct SymState {
  std::vector<Term> values;  // parallel to layout.slots
};

// Symbolic transaction inputs. Action parameters take the slots of their type
// in order: uints from `uints`, addresses from `addrs`, bools from `bools`.
struct SymTx {
  Term fn;  // index into ts.actions
  Term sender;
  Term delta;
  std::vector<Term> uints, addrs, bools;
};

// Largest number of uint / address / bool parameters over all actions.
struct ArgShape {
  std::size_t uints = 0, addrs = 0, bools = 0;
};
ArgShape arg_shape(const TransitionSystem& ts);
// Same, for the constructor.
ArgShape ctor_shape(const TransitionSystem& ts);

// Declares fn/sender/delta and argument slots named "<prefix>.fn", "<prefix>.u0", ...
SymTx declare_tx(const TransitionSystem& ts, solver::Store& store, const std::string& prefix);
// Concrete argument vector of `action` under a model.
std::vector<std::int64_t> action_args(const Action& a, const solver::Model& m, const std::string& prefix);

class Encoder {
 public:
  Encoder(const TransitionSystem& ts, solver::Store& store, PolicyFn policy = {});

  SymState default_state() const;
  // One fresh variable per slot, named "<prefix>.<slot>".
  SymState fresh_state(const std::string& prefix);
  // Fresh variable declared in the store (summaries and the like).
  Term fresh(const std::string& what, std::int64_t domain);

  // Initializers, constructor (sender 0, timestamp 0) and global checks from
  // the default state. Afterwards live excludes a reverted constructor.
  void constructor(const std::vector<Term>& args);

  // One transaction from `state`, effective only where `active` holds. With
  // `only` set the action is fixed and tx.fn is ignored.
  void transaction(const SymTx& tx, const Term& active, int depth, const std::string& frame,
                   std::optional<std::size_t> only = std::nullopt);

  // Check-mode value of a state predicate over s.
  Term predicate(const Expr& e, const SymState& s);

  SymState state;
  Term live;
  Term rev;      // revert flag of the last transaction
  Term viol;     // some check failed on a live path
  Term blocked;  // some live path reached a blocked site

  // Sites met during encoding, in order, with the policy they received.
  struct SeenSite {
    CallSite site;
    SitePolicy policy;
  };
  const std::vector<SeenSite>& sites() const { return sites_; }

 private:
  struct Frame;
  enum class Mode { Contract, Check };

  Term truth(const Term& t) const;
  Term as_int(const Term& t) const;
  void revert_unless(const Term& c);
  void violate_unless(const Term& c);
  void tick();
  Term arith(BinOp op, const Term& a, const Term& b, Mode mode);
  Term eval(const Expr& e, Frame& fr, Mode mode);
  Term read_index(const Expr& e, Frame& fr, Mode mode);
  std::optional<std::pair<std::size_t, Term>> map_range(const Expr& base, std::size_t& count);
  void write_entries(std::size_t first, std::size_t count, const Term& index, const Term& v);
  Term token_call(const Expr& e, Frame& fr, Mode mode);
  Term call(const Expr& e, Frame& fr, Mode mode);
  void exec(const std::vector<StmtPtr>& body, Frame& fr);
  void assign(const Stmt& s, Frame& fr);
  void credit(std::size_t slot, const Term& amount);

  const TransitionSystem& ts_;
  solver::Store& store_;
  PolicyFn policy_;
  std::vector<SeenSite> sites_;
  SymState* cur_ = nullptr;
  const SymState* old_ = nullptr;
  Term sender_;
  Term gas_;
  bool gas_on_ = true;
  int depth_ = 0;
  int fresh_count_ = 0;
};

}  // namespace solinv
