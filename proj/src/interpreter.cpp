#include <sstream>

#include "solinv/semantics.hpp"
#include "solinv/term.hpp"

namespace solinv {

using solver::floor_div;
using solver::wrap_value;

std::string ContractState::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  for (auto v : values) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

ContractState default_state(const TransitionSystem& ts) {
  ContractState s;
  s.values.assign(ts.layout.slots.size(), 0);
  return s;
}

namespace {

struct RevertSignal {
  std::string reason;
};
struct ViolationSignal {
  Violation v;
};

struct Frame {
  std::map<std::string, std::int64_t> locals;
  std::int64_t ret = 0;
  bool returned = false;
};

class Machine {
 public:
  Machine(const TransitionSystem& ts, ContractState& st, std::int64_t sender, const ContractState* old, bool count_gas)
      : ts_(ts), st_(st), sender_(sender), old_(old), count_gas_(count_gas) {}

  std::int64_t gas() const { return gas_; }

  std::int64_t call(const LoweredFunction& f, const std::vector<std::int64_t>& args) {
    Frame fr;
    for (std::size_t i = 0; i < f.params.size(); ++i) fr.locals[f.params[i].name] = args[i];
    exec(f.body, fr);
    return fr.ret;
  }

  void run_initializers() {
    Frame fr;
    for (const auto& [name, e] : ts_.initializers) {
      st_.values[ts_.layout.var_base.at(name)] = eval(*e, fr);
    }
  }

  void global_checks() {
    Frame fr;
    for (const auto& c : ts_.global_checks) exec_check(*c, fr);
  }

  std::int64_t check_value(const Expr& e, Frame& fr) { return eval_check(e, fr); }

 private:
  const Domain& dom() const { return ts_.dom; }

  void tick() {
    if (!count_gas_) return;
    ++gas_;
    if (dom().gas_cap > 0 && gas_ > dom().gas_cap) throw RevertSignal{"out of gas"};
  }

  std::int64_t arith(BinOp op, std::int64_t a, std::int64_t b) {
    const std::int64_t size = dom().uint_size();
    std::int64_t r = 0;
    switch (op) {
      case BinOp::Add: r = a + b; break;
      case BinOp::Sub: r = a - b; break;
      case BinOp::Mul: r = a * b; break;
      case BinOp::Div:
        if (b == 0) throw RevertSignal{"division by zero"};
        return a / b;
      default: break;
    }
    if (r < 0 || r >= size) {
      if (dom().arith == ArithMode::Revert) throw RevertSignal{r < 0 ? "underflow" : "overflow"};
      r = wrap_value(r, static_cast<unsigned>(dom().width));
    }
    return r;
  }

  // nullopt for keys outside the key domain, which only check expressions can
  // produce; such entries read as 0
  std::optional<std::size_t> index_slot(const Expr& e, Frame& fr, bool check_mode) {
    const Expr& base = *e.args[0];
    const auto first = ts_.layout.var_base.at(base.name);
    const std::int64_t k1 = check_mode ? eval_check(*e.args[1], fr) : eval(*e.args[1], fr);
    if (k1 < 0 || k1 >= dom().addresses) return std::nullopt;
    if (e.args.size() == 3) {
      const std::int64_t k2 = check_mode ? eval_check(*e.args[2], fr) : eval(*e.args[2], fr);
      if (k2 < 0 || k2 >= dom().uint_size()) return std::nullopt;
      return first + static_cast<std::size_t>(k1 * dom().uint_size() + k2);
    }
    return first + static_cast<std::size_t>(k1);
  }

  std::int64_t read_index(const Expr& e, Frame& fr, bool check_mode) {
    const auto i = index_slot(e, fr, check_mode);
    return i ? st_.values[*i] : 0;
  }

  std::size_t token_slot(const std::string& token, std::int64_t addr) const {
    return ts_.layout.token_base.at(token) + static_cast<std::size_t>(addr);
  }
  std::size_t supply_slot(const std::string& token) const {
    return ts_.layout.token_base.at(token) + static_cast<std::size_t>(dom().addresses);
  }

  void credit(std::size_t slot, std::int64_t amount) {
    const std::int64_t v = st_.values[slot] + amount;
    if (v >= dom().uint_size()) throw RevertSignal{"token balance overflow"};
    st_.values[slot] = v;
  }

  std::int64_t token_call(const Expr& e, Frame& fr, bool check_mode) {
    std::vector<std::int64_t> a;
    for (const auto& x : e.args) a.push_back(check_mode ? eval_check(*x, fr) : eval(*x, fr));
    if (e.method == "balanceOf") return st_.values[token_slot(e.name, a[0])];
    if (e.method == "totalSupply") return st_.values[supply_slot(e.name)];
    if (check_mode) throw RevertSignal{"token effects inside a check"};
    std::int64_t from = 0, to = 0, amount = 0;
    if (e.method == "mint") {
      credit(supply_slot(e.name), a[1]);
      credit(token_slot(e.name, a[0]), a[1]);
      return 0;
    }
    if (e.method == "transfer") {
      from = dom().self();
      to = a[0];
      amount = a[1];
    } else {
      from = a[0];
      to = a[1];
      amount = a[2];
    }
    auto& fb = st_.values[token_slot(e.name, from)];
    if (fb < amount) throw RevertSignal{"insufficient token balance"};
    fb -= amount;
    credit(token_slot(e.name, to), amount);
    return 0;
  }

  std::int64_t call_expr(const Expr& e, Frame& fr, bool check_mode) {
    const LoweredFunction* f = ts_.find(e.name);
    std::vector<std::int64_t> args;
    for (const auto& a : e.args) args.push_back(check_mode ? eval_check(*a, fr) : eval(*a, fr));
    if (!check_mode) return call(*f, args);
    // effects of calls made by checks are discarded
    ContractState copy = st_;
    Machine m(ts_, copy, sender_, old_, false);
    return m.call(*f, args);
  }

  std::int64_t read_var(const Expr& e, Frame& fr) {
    if (e.scope == VarScope::State) return st_.values[ts_.layout.var_base.at(e.name)];
    return fr.locals.at(e.name);
  }

  std::int64_t eval(const Expr& e, Frame& fr) {
    switch (e.kind) {
      case ExprKind::IntLit:
      case ExprKind::BoolLit:
      case ExprKind::AddressLit: return e.value;
      case ExprKind::Var: return read_var(e, fr);
      case ExprKind::MsgSender: return sender_;
      case ExprKind::Timestamp: return st_.values[ts_.layout.timestamp];
      case ExprKind::This: return dom().self();
      case ExprKind::Index: return read_index(e, fr, false);
      case ExprKind::Not: return eval(*e.args[0], fr) ? 0 : 1;
      case ExprKind::Binary: {
        if (e.op == BinOp::And) return eval(*e.args[0], fr) && eval(*e.args[1], fr) ? 1 : 0;
        if (e.op == BinOp::Or) return eval(*e.args[0], fr) || eval(*e.args[1], fr) ? 1 : 0;
        const std::int64_t a = eval(*e.args[0], fr);
        const std::int64_t b = eval(*e.args[1], fr);
        return compare_or(e.op, a, b, [&] { return arith(e.op, a, b); });
      }
      case ExprKind::Call: return call_expr(e, fr, false);
      case ExprKind::TokenCall: return token_call(e, fr, false);
      case ExprKind::Old:
      case ExprKind::SumMapping:
      case ExprKind::KScaled: return eval_check(e, fr);
    }
    return 0;
  }

  template <typename F>
  static std::int64_t compare_or(BinOp op, std::int64_t a, std::int64_t b, F&& otherwise) {
    switch (op) {
      case BinOp::Eq: return a == b;
      case BinOp::Ne: return a != b;
      case BinOp::Lt: return a < b;
      case BinOp::Le: return a <= b;
      case BinOp::Gt: return a > b;
      case BinOp::Ge: return a >= b;
      default: return otherwise();
    }
  }

  // Candidate expressions: unbounded integers, x / 0 == 0, no reverts from
  // arithmetic.
  std::int64_t eval_check(const Expr& e, Frame& fr) {
    switch (e.kind) {
      case ExprKind::Index: return read_index(e, fr, true);
      case ExprKind::Not: return eval_check(*e.args[0], fr) ? 0 : 1;
      case ExprKind::Binary: {
        if (e.op == BinOp::And) return eval_check(*e.args[0], fr) && eval_check(*e.args[1], fr) ? 1 : 0;
        if (e.op == BinOp::Or) return eval_check(*e.args[0], fr) || eval_check(*e.args[1], fr) ? 1 : 0;
        const std::int64_t a = eval_check(*e.args[0], fr);
        const std::int64_t b = eval_check(*e.args[1], fr);
        return compare_or(e.op, a, b, [&]() -> std::int64_t {
          switch (e.op) {
            case BinOp::Add: return a + b;
            case BinOp::Sub: return a - b;
            case BinOp::Mul: return a * b;
            default: return floor_div(a, b);
          }
        });
      }
      case ExprKind::Call: return call_expr(e, fr, true);
      case ExprKind::TokenCall: return token_call(e, fr, true);
      case ExprKind::Old: {
        if (!old_) throw std::logic_error("Old() evaluated without a snapshot state");
        ContractState copy = *old_;
        Machine m(ts_, copy, sender_, nullptr, false);
        Frame empty;
        return m.eval_check(*e.args[0], empty);
      }
      case ExprKind::SumMapping: {
        const auto first = ts_.layout.var_base.at(e.name);
        std::size_t count = static_cast<std::size_t>(dom().addresses);
        if (ts_.layout.slots[first].name.find("][") != std::string::npos) {
          count *= static_cast<std::size_t>(dom().uint_size());
        }
        std::int64_t sum = 0;
        for (std::size_t i = 0; i < count; ++i) sum += st_.values[first + i];
        return sum;
      }
      case ExprKind::KScaled: return floor_div(eval_check(*e.args[0], fr) * e.k_num, e.k_den);
      default: return eval(e, fr);
    }
  }

  void exec_check(const Stmt& s, Frame& fr) {
    if (!eval_check(*s.expr, fr)) throw ViolationSignal{{s.candidate, s.loc.line, s.check_kind, 0}};
  }

  void assign(const Stmt& s, Frame& fr) {
    const Expr& lhs = *s.lhs;
    std::int64_t* target = nullptr;
    if (lhs.kind == ExprKind::Index) {
      target = &st_.values[*index_slot(lhs, fr, false)];
    } else if (lhs.scope == VarScope::State) {
      target = &st_.values[ts_.layout.var_base.at(lhs.name)];
    }
    if (s.kind == StmtKind::Delete) {
      if (target) {
        *target = 0;
      } else {
        fr.locals[lhs.name] = 0;
      }
      return;
    }
    const std::int64_t rhs = eval(*s.expr, fr);
    // keys are evaluated before the right-hand side, the current value after it
    const std::int64_t cur = target ? *target : fr.locals[lhs.name];
    std::int64_t v = rhs;
    switch (s.assign_op) {
      case AssignOp::Set: break;
      case AssignOp::Add: v = arith(BinOp::Add, cur, rhs); break;
      case AssignOp::Sub: v = arith(BinOp::Sub, cur, rhs); break;
      case AssignOp::Mul: v = arith(BinOp::Mul, cur, rhs); break;
      case AssignOp::Div: v = arith(BinOp::Div, cur, rhs); break;
    }
    if (target) {
      *target = v;
    } else {
      fr.locals[lhs.name] = v;
    }
  }

  void exec(const std::vector<StmtPtr>& body, Frame& fr) {
    for (const auto& sp : body) {
      if (fr.returned) return;
      const Stmt& s = *sp;
      const bool snapshot = s.synthetic && s.kind == StmtKind::LocalDecl;
      if (s.kind != StmtKind::Check && !snapshot) tick();
      switch (s.kind) {
        case StmtKind::LocalDecl:
          fr.locals[s.name] = !s.expr ? 0 : snapshot ? eval_check(*s.expr, fr) : eval(*s.expr, fr);
          break;
        case StmtKind::Assign:
        case StmtKind::Delete: assign(s, fr); break;
        case StmtKind::If:
          if (eval(*s.expr, fr)) {
            exec(s.body, fr);
          } else {
            exec(s.else_body, fr);
          }
          break;
        case StmtKind::Require:
          if (!eval(*s.expr, fr)) throw RevertSignal{s.message.empty() ? "require failed" : s.message};
          break;
        case StmtKind::Return:
          if (s.expr) fr.ret = eval(*s.expr, fr);
          fr.returned = true;
          return;
        case StmtKind::ExprStmt: eval(*s.expr, fr); break;
        case StmtKind::Check: exec_check(s, fr); break;
        case StmtKind::LoopExit:
          if (eval(*s.expr, fr)) throw RevertSignal{"loop bound exceeded"};
          break;
        case StmtKind::While:
        case StmtKind::Placeholder: throw std::logic_error("statement left after lowering");
      }
    }
  }

  const TransitionSystem& ts_;
  ContractState& st_;
  std::int64_t sender_;
  const ContractState* old_;
  bool count_gas_;
  std::int64_t gas_ = 0;
};

void validate_args(const TransitionSystem& ts, const std::vector<Param>& params, const std::vector<std::int64_t>& args,
                   const std::string& what) {
  if (params.size() != args.size()) {
    throw std::invalid_argument(what + " expects " + std::to_string(params.size()) + " argument(s)");
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] < 0 || args[i] >= ts.dom.domain_of(params[i].type)) {
      throw std::invalid_argument(what + ": argument " + params[i].name + " out of domain");
    }
  }
}

StepResult apply(const TransitionSystem& ts, ContractState& st, const Transaction& tx, std::optional<Violation>& viol) {
  const Action* a = ts.find_action(tx.fn);
  if (!a) throw std::invalid_argument("unknown action " + tx.fn);
  if (tx.sender < 0 || tx.sender >= ts.dom.addresses - 1) throw std::invalid_argument("sender out of range");
  if (tx.delta < 0 || tx.delta >= ts.dom.uint_size()) throw std::invalid_argument("timestamp delta out of range");
  validate_args(ts, a->params, tx.args, tx.fn);

  StepResult r;
  const ContractState pre = st;
  const std::int64_t now = st.values[ts.layout.timestamp] + tx.delta;
  if (now >= ts.dom.uint_size()) {
    r.status = StepResult::Status::Reverted;
    r.reason = "timestamp overflow";
    return r;
  }
  st.values[ts.layout.timestamp] = now;
  const ContractState entry = st;
  Machine m(ts, st, tx.sender, &entry, true);
  try {
    if (a->kind == Action::Kind::Function) {
      m.call(ts.functions[a->function], tx.args);
    } else {
      const std::size_t base = ts.layout.token_base.at(a->token);
      const std::int64_t to = a->kind == Action::Kind::TokenTransfer ? tx.args[0] : tx.args[1];
      const std::int64_t amount = tx.args.back();
      auto& supply = st.values[base + static_cast<std::size_t>(ts.dom.addresses)];
      auto& bal = st.values[base + static_cast<std::size_t>(to)];
      if (supply + amount >= ts.dom.uint_size() || bal + amount >= ts.dom.uint_size()) {
        throw RevertSignal{"token balance overflow"};
      }
      supply += amount;
      bal += amount;
    }
    m.global_checks();
  } catch (const RevertSignal& s) {
    st = pre;
    r.status = StepResult::Status::Reverted;
    r.reason = s.reason;
  } catch (const ViolationSignal& s) {
    viol = s.v;
    r.status = StepResult::Status::Violated;
    r.reason = "check violated at line " + std::to_string(s.v.line);
  }
  r.gas = m.gas();
  return r;
}

}  // namespace

Trace run(const TransitionSystem& ts, const std::vector<std::int64_t>& init_args, const std::vector<Transaction>& txs) {
  validate_args(ts, ts.constructor.params, init_args, "constructor");
  Trace t;
  ContractState st = default_state(ts);
  const ContractState genesis = st;
  StepResult init;
  Machine m(ts, st, 0, &genesis, true);
  try {
    m.run_initializers();
    m.call(ts.constructor, init_args);
    m.global_checks();
  } catch (const RevertSignal& s) {
    init.status = StepResult::Status::Reverted;
    init.reason = s.reason;
    init.gas = m.gas();
    t.init_reverted = true;
    t.steps.push_back(init);
    return t;
  } catch (const ViolationSignal& s) {
    init.status = StepResult::Status::Violated;
    init.reason = "check violated at line " + std::to_string(s.v.line);
    t.violation = s.v;
  }
  init.gas = m.gas();
  t.steps.push_back(init);
  t.states.push_back(st);
  if (t.violation) return t;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    std::optional<Violation> v;
    StepResult r = apply(ts, st, txs[i], v);
    t.steps.push_back(r);
    t.states.push_back(st);
    if (v) {
      v->step = i + 1;
      t.violation = v;
      break;
    }
  }
  return t;
}

Trace step(const TransitionSystem& ts, const ContractState& pre, const Transaction& tx) {
  Trace t;
  ContractState st = pre;
  std::optional<Violation> v;
  t.steps.push_back(apply(ts, st, tx, v));
  t.states.push_back(st);
  if (v) {
    v->step = 1;
    t.violation = v;
  }
  return t;
}

bool holds(const TransitionSystem& ts, const ContractState& s, const Expr& predicate) {
  ContractState copy = s;
  Machine m(ts, copy, 0, nullptr, false);
  Frame fr;
  return m.check_value(predicate, fr) != 0;
}

std::string render_tx(const Transaction& tx) {
  std::string s = tx.fn + "(";
  for (std::size_t i = 0; i < tx.args.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(tx.args[i]);
  }
  s += ") from " + std::to_string(tx.sender);
  if (tx.delta) s += " +" + std::to_string(tx.delta);
  return s;
}

nlohmann::json state_to_json(const TransitionSystem& ts, const ContractState& s) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < s.values.size(); ++i) j[ts.layout.slots[i].name] = s.values[i];
  return j;
}

nlohmann::json trace_to_json(const TransitionSystem& ts, const std::vector<Transaction>& txs, const Trace& trace) {
  auto status = [](StepResult::Status st) {
    switch (st) {
      case StepResult::Status::Ok: return "ok";
      case StepResult::Status::Reverted: return "reverted";
      case StepResult::Status::Violated: return "violated";
    }
    return "?";
  };
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    nlohmann::json e;
    e["tx"] = i == 0 ? "constructor" : render_tx(txs[i - 1]);
    e["status"] = status(trace.steps[i].status);
    if (!trace.steps[i].reason.empty()) e["reason"] = trace.steps[i].reason;
    if (i < trace.states.size()) e["post_state_digest"] = trace.states[i].digest();
    if (trace.violation && trace.violation->step == i) e["violation"] = {{"line", trace.violation->line}};
    steps.push_back(e);
  }
  (void)ts;
  return steps;
}

}  // namespace solinv
