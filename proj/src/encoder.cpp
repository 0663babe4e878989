#include "solinv/encoder.hpp"

#include <map>

namespace solinv {

using namespace solver;

namespace {

ArgShape shape_of(const std::vector<Param>& ps) {
  ArgShape s;
  for (const auto& p : ps) {
    if (p.type == Type::Address) {
      ++s.addrs;
    } else if (p.type == Type::Bool) {
      ++s.bools;
    } else {
      ++s.uints;
    }
  }
  return s;
}

// Maps parameters to the typed argument slots of a transaction.
template <typename F>
void for_each_slot(const std::vector<Param>& ps, F&& f) {
  std::size_t u = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].type == Type::Address) {
      f(i, 'a', a++);
    } else if (ps[i].type == Type::Bool) {
      f(i, 'b', b++);
    } else {
      f(i, 'u', u++);
    }
  }
}

}  // namespace

ArgShape arg_shape(const TransitionSystem& ts) {
  ArgShape s;
  for (const auto& a : ts.actions) {
    const auto t = shape_of(a.params);
    s.uints = std::max(s.uints, t.uints);
    s.addrs = std::max(s.addrs, t.addrs);
    s.bools = std::max(s.bools, t.bools);
  }
  return s;
}

ArgShape ctor_shape(const TransitionSystem& ts) { return shape_of(ts.constructor.params); }

SymTx declare_tx(const TransitionSystem& ts, Store& store, const std::string& prefix) {
  SymTx tx;
  const auto& d = ts.dom;
  tx.fn = store.declare(prefix + ".fn", static_cast<std::int64_t>(std::max<std::size_t>(1, ts.actions.size())));
  tx.sender = store.declare(prefix + ".sender", d.addresses - 1);
  tx.delta = store.declare(prefix + ".delta", d.uint_size());
  const auto shape = arg_shape(ts);
  for (std::size_t i = 0; i < shape.uints; ++i) tx.uints.push_back(store.declare(prefix + ".u" + std::to_string(i), d.uint_size()));
  for (std::size_t i = 0; i < shape.addrs; ++i) tx.addrs.push_back(store.declare(prefix + ".a" + std::to_string(i), d.addresses));
  for (std::size_t i = 0; i < shape.bools; ++i) tx.bools.push_back(store.declare(prefix + ".b" + std::to_string(i), 2));
  return tx;
}

std::vector<std::int64_t> action_args(const Action& a, const Model& m, const std::string& prefix) {
  std::vector<std::int64_t> out(a.params.size(), 0);
  for_each_slot(a.params, [&](std::size_t i, char kind, std::size_t k) {
    const std::string name = prefix + "." + kind + std::to_string(k);
    out[i] = m.has(name) ? m.at(name) : 0;
  });
  return out;
}

struct Encoder::Frame {
  std::map<std::string, Term> locals;
  Term ret = constant(0);
  std::string id;
  std::vector<std::string> stack;
  int calls = 0;
};

Encoder::Encoder(const TransitionSystem& ts, Store& store, PolicyFn policy)
    : ts_(ts), store_(store), policy_(std::move(policy)) {
  state = default_state();
  live = boolean(true);
  rev = boolean(false);
  viol = boolean(false);
  blocked = boolean(false);
  sender_ = constant(0);
  gas_ = constant(0);
  cur_ = &state;
}

SymState Encoder::default_state() const {
  SymState s;
  s.values.assign(ts_.layout.slots.size(), constant(0));
  return s;
}

SymState Encoder::fresh_state(const std::string& prefix) {
  SymState s;
  for (const auto& slot : ts_.layout.slots) s.values.push_back(store_.declare(prefix + "." + slot.name, slot.domain));
  return s;
}

Term Encoder::fresh(const std::string& what, std::int64_t domain) {
  return store_.declare("s" + std::to_string(fresh_count_++) + "." + what, domain);
}

Term Encoder::truth(const Term& t) const { return t->boolean ? t : ne(t, constant(0)); }
Term Encoder::as_int(const Term& t) const { return t->boolean ? ite(t, constant(1), constant(0)) : t; }

void Encoder::revert_unless(const Term& c) {
  rev = lor(rev, land(live, lnot(c)));
  live = land(live, c);
}

void Encoder::violate_unless(const Term& c) {
  viol = lor(viol, land(live, lnot(c)));
  live = land(live, c);
}

void Encoder::tick() {
  if (!gas_on_ || ts_.dom.gas_cap <= 0) return;
  gas_ = ite(live, add(gas_, constant(1)), gas_);
  revert_unless(le(gas_, constant(ts_.dom.gas_cap)));
}

Term Encoder::arith(BinOp op, const Term& a, const Term& b, Mode mode) {
  if (mode == Mode::Check) {
    switch (op) {
      case BinOp::Add: return add(a, b);
      case BinOp::Sub: return sub(a, b);
      case BinOp::Mul: return mul(a, b);
      default: return signed_div(a, b);
    }
  }
  const auto w = static_cast<unsigned>(ts_.dom.width);
  Term r;
  switch (op) {
    case BinOp::Add: r = add(a, b); break;
    case BinOp::Sub: r = sub(a, b); break;
    case BinOp::Mul: r = mul(a, b); break;
    default:
      revert_unless(ne(b, constant(0)));
      return div(a, b);
  }
  if (ts_.dom.arith == ArithMode::Revert) {
    revert_unless(land(ge(r, constant(0)), lt(r, constant(ts_.dom.uint_size()))));
  }
  return wrap(r, w);
}

// First slot and entry count of a mapping variable.
std::optional<std::pair<std::size_t, Term>> Encoder::map_range(const Expr& base, std::size_t& count) {
  const auto first = ts_.layout.var_base.at(base.name);
  count = static_cast<std::size_t>(ts_.dom.addresses);
  if (base.type == Type::Map2) count *= static_cast<std::size_t>(ts_.dom.uint_size());
  return std::make_pair(first, Term{});
}

Term Encoder::read_index(const Expr& e, Frame& fr, Mode mode) {
  std::size_t count = 0;
  const auto first = map_range(*e.args[0], count)->first;
  Term key = as_int(eval(*e.args[1], fr, mode));
  Term in_range = land(ge(key, constant(0)), lt(key, constant(ts_.dom.addresses)));
  if (e.args.size() == 3) {
    const Term k2 = as_int(eval(*e.args[2], fr, mode));
    in_range = land(in_range, land(ge(k2, constant(0)), lt(k2, constant(ts_.dom.uint_size()))));
    key = add(mul(key, constant(ts_.dom.uint_size())), k2);
  }
  std::vector<Term> entries(cur_->values.begin() + static_cast<std::ptrdiff_t>(first),
                            cur_->values.begin() + static_cast<std::ptrdiff_t>(first + count));
  return ite(in_range, select(entries, key, constant(0)), constant(0));
}

void Encoder::write_entries(std::size_t first, std::size_t count, const Term& index, const Term& v) {
  for (std::size_t i = 0; i < count; ++i) {
    auto& slot = cur_->values[first + i];
    slot = ite(land(live, eq(index, constant(static_cast<std::int64_t>(i)))), v, slot);
  }
}

void Encoder::credit(std::size_t slot, const Term& amount) {
  const Term v = add(cur_->values[slot], amount);
  revert_unless(lt(v, constant(ts_.dom.uint_size())));
  cur_->values[slot] = ite(live, wrap(v, static_cast<unsigned>(ts_.dom.width)), cur_->values[slot]);
}

Term Encoder::token_call(const Expr& e, Frame& fr, Mode mode) {
  std::vector<Term> a;
  for (const auto& x : e.args) a.push_back(as_int(eval(*x, fr, mode)));
  const std::size_t base = ts_.layout.token_base.at(e.name);
  const auto A = static_cast<std::size_t>(ts_.dom.addresses);
  auto balances = [&] {
    return std::vector<Term>(cur_->values.begin() + static_cast<std::ptrdiff_t>(base),
                             cur_->values.begin() + static_cast<std::ptrdiff_t>(base + A));
  };
  if (e.method == "balanceOf") return select(balances(), a[0], constant(0));
  if (e.method == "totalSupply") return cur_->values[base + A];
  if (mode == Mode::Check) {
    revert_unless(boolean(false));
    return constant(0);
  }
  if (e.method == "mint") {
    credit(base + A, a[1]);
    const Term v = add(select(balances(), a[0], constant(0)), a[1]);
    revert_unless(lt(v, constant(ts_.dom.uint_size())));
    write_entries(base, A, a[0], wrap(v, static_cast<unsigned>(ts_.dom.width)));
    return constant(0);
  }
  Term from, to, amount;
  if (e.method == "transfer") {
    from = constant(ts_.dom.self());
    to = a[0];
    amount = a[1];
  } else {
    from = a[0];
    to = a[1];
    amount = a[2];
  }
  const Term fb = select(balances(), from, constant(0));
  revert_unless(ge(fb, amount));
  write_entries(base, A, from, sub(fb, amount));
  const Term v = add(select(balances(), to, constant(0)), amount);
  revert_unless(lt(v, constant(ts_.dom.uint_size())));
  write_entries(base, A, to, wrap(v, static_cast<unsigned>(ts_.dom.width)));
  return constant(0);
}

Term Encoder::call(const Expr& e, Frame& fr, Mode mode) {
  const LoweredFunction* f = ts_.find(e.name);
  std::vector<Term> args;
  for (const auto& a : e.args) args.push_back(as_int(eval(*a, fr, mode)));

  CallSite site;
  site.id = fr.id + "/" + e.name + "#" + std::to_string(fr.calls++);
  site.callee = e.name;
  site.stack = fr.stack;
  site.stack.push_back(e.name);
  site.depth = depth_;
  const SitePolicy policy = policy_ ? policy_(site) : SitePolicy::Inline;
  sites_.push_back({site, policy});

  const Term entry_live = live;
  Term ret = constant(0);
  // calls made by checks run on a copy without gas accounting
  SymState copy;
  SymState* saved = cur_;
  const bool saved_gas = gas_on_;
  if (mode == Mode::Check) {
    copy = *cur_;
    cur_ = &copy;
    gas_on_ = false;
  }
  switch (policy) {
    case SitePolicy::Inline: {
      Frame callee;
      callee.id = site.id;
      callee.stack = site.stack;
      for (std::size_t i = 0; i < f->params.size(); ++i) callee.locals[f->params[i].name] = args[i];
      exec(f->body, callee);
      ret = callee.ret;
      break;
    }
    case SitePolicy::Block:
      blocked = lor(blocked, live);
      live = boolean(false);
      break;
    case SitePolicy::Summarize: {
      for (const auto slot : ts_.mod_sets.at(f->name)) {
        auto& v = cur_->values[slot];
        v = ite(live, fresh(ts_.layout.slots[slot].name, ts_.layout.slots[slot].domain), v);
      }
      if (gas_on_ && ts_.dom.gas_cap > 0) gas_ = ite(live, fresh("gas", ts_.dom.gas_cap + 1), gas_);
      if (f->return_type) ret = fresh(e.name + ".ret", ts_.dom.domain_of(*f->return_type));
      if (f->has_checks) viol = lor(viol, land(live, truth(fresh(e.name + ".viol", 2))));
      rev = lor(rev, land(live, truth(fresh(e.name + ".rev", 2))));
      break;
    }
  }
  cur_ = saved;
  gas_on_ = saved_gas;
  live = land(entry_live, land(lnot(rev), land(lnot(viol), lnot(blocked))));
  return ret;
}

Term Encoder::eval(const Expr& e, Frame& fr, Mode mode) {
  switch (e.kind) {
    case ExprKind::IntLit:
    case ExprKind::AddressLit: return constant(e.value);
    case ExprKind::BoolLit: return boolean(e.value != 0);
    case ExprKind::Var:
      if (e.scope == VarScope::State) return cur_->values[ts_.layout.var_base.at(e.name)];
      return fr.locals.at(e.name);
    case ExprKind::MsgSender: return sender_;
    case ExprKind::Timestamp: return cur_->values[ts_.layout.timestamp];
    case ExprKind::This: return constant(ts_.dom.self());
    case ExprKind::Index: return read_index(e, fr, mode);
    case ExprKind::Not: return lnot(truth(eval(*e.args[0], fr, mode)));
    case ExprKind::Binary: {
      if (e.op == BinOp::And || e.op == BinOp::Or) {
        const Term a = truth(eval(*e.args[0], fr, mode));
        const Term l0 = live;
        const bool is_and = e.op == BinOp::And;
        live = land(l0, is_and ? a : lnot(a));
        const Term b = truth(eval(*e.args[1], fr, mode));
        live = lor(live, land(l0, is_and ? lnot(a) : a));
        return is_and ? land(a, b) : lor(a, b);
      }
      const Term a = as_int(eval(*e.args[0], fr, mode));
      const Term b = as_int(eval(*e.args[1], fr, mode));
      switch (e.op) {
        case BinOp::Eq: return eq(a, b);
        case BinOp::Ne: return ne(a, b);
        case BinOp::Lt: return lt(a, b);
        case BinOp::Le: return le(a, b);
        case BinOp::Gt: return gt(a, b);
        case BinOp::Ge: return ge(a, b);
        default: return arith(e.op, a, b, mode);
      }
    }
    case ExprKind::Call: return call(e, fr, mode);
    case ExprKind::TokenCall: return token_call(e, fr, mode);
    case ExprKind::Old: {
      if (!old_) throw std::logic_error("Old() encoded without a snapshot state");
      SymState copy = *old_;
      SymState* saved = cur_;
      const SymState* saved_old = old_;
      cur_ = &copy;
      old_ = nullptr;
      Frame inner;
      inner.id = fr.id + "/old" + std::to_string(fr.calls++);
      inner.stack = fr.stack;
      const Term v = eval(*e.args[0], inner, Mode::Check);
      cur_ = saved;
      old_ = saved_old;
      return v;
    }
    case ExprKind::SumMapping: {
      Expr base;
      base.name = e.name;
      base.type = ts_.layout.slots[ts_.layout.var_base.at(e.name)].name.find("][") != std::string::npos ? Type::Map2
                                                                                                          : Type::Map1;
      std::size_t count = 0;
      const auto first = map_range(base, count)->first;
      Term sum = constant(0);
      for (std::size_t i = 0; i < count; ++i) sum = add(sum, cur_->values[first + i]);
      return sum;
    }
    case ExprKind::KScaled:
      return div(mul(as_int(eval(*e.args[0], fr, Mode::Check)), constant(e.k_num)), constant(e.k_den));
  }
  return constant(0);
}

void Encoder::assign(const Stmt& s, Frame& fr) {
  const Expr& lhs = *s.lhs;
  std::optional<std::size_t> slot;
  std::size_t first = 0, count = 0;
  Term index;
  if (lhs.kind == ExprKind::Index) {
    first = map_range(*lhs.args[0], count)->first;
    index = as_int(eval(*lhs.args[1], fr, Mode::Contract));
    if (lhs.args.size() == 3) {
      index = add(mul(index, constant(ts_.dom.uint_size())), as_int(eval(*lhs.args[2], fr, Mode::Contract)));
    }
  } else if (lhs.scope == VarScope::State) {
    slot = ts_.layout.var_base.at(lhs.name);
  }
  auto read = [&]() -> Term {
    if (index) {
      std::vector<Term> entries(cur_->values.begin() + static_cast<std::ptrdiff_t>(first),
                                cur_->values.begin() + static_cast<std::ptrdiff_t>(first + count));
      return select(entries, index, constant(0));
    }
    if (slot) return cur_->values[*slot];
    auto it = fr.locals.find(lhs.name);
    return it == fr.locals.end() ? constant(0) : it->second;
  };
  auto write = [&](const Term& v) {
    if (index) {
      write_entries(first, count, index, v);
    } else if (slot) {
      cur_->values[*slot] = ite(live, v, cur_->values[*slot]);
    } else {
      fr.locals[lhs.name] = ite(live, v, read());
    }
  };
  if (s.kind == StmtKind::Delete) {
    write(constant(0));
    return;
  }
  const Term rhs = as_int(eval(*s.expr, fr, Mode::Contract));
  const Term cur = read();
  Term v = rhs;
  switch (s.assign_op) {
    case AssignOp::Set: break;
    case AssignOp::Add: v = arith(BinOp::Add, cur, rhs, Mode::Contract); break;
    case AssignOp::Sub: v = arith(BinOp::Sub, cur, rhs, Mode::Contract); break;
    case AssignOp::Mul: v = arith(BinOp::Mul, cur, rhs, Mode::Contract); break;
    case AssignOp::Div: v = arith(BinOp::Div, cur, rhs, Mode::Contract); break;
  }
  write(v);
}

void Encoder::exec(const std::vector<StmtPtr>& body, Frame& fr) {
  for (const auto& sp : body) {
    const Stmt& s = *sp;
    if (live->is_false()) return;
    const bool snapshot = s.synthetic && s.kind == StmtKind::LocalDecl;
    if (s.kind != StmtKind::Check && !snapshot) tick();
    switch (s.kind) {
      case StmtKind::LocalDecl: {
        Term v = constant(0);
        if (s.expr) v = as_int(eval(*s.expr, fr, snapshot ? Mode::Check : Mode::Contract));
        auto it = fr.locals.find(s.name);
        const Term old = it == fr.locals.end() ? constant(0) : it->second;
        fr.locals[s.name] = ite(live, v, old);
        break;
      }
      case StmtKind::Assign:
      case StmtKind::Delete: assign(s, fr); break;
      case StmtKind::If: {
        const Term c = truth(eval(*s.expr, fr, Mode::Contract));
        const Term l0 = live;
        live = land(l0, c);
        exec(s.body, fr);
        const Term then_live = live;
        live = land(l0, lnot(c));
        exec(s.else_body, fr);
        live = lor(then_live, live);
        break;
      }
      case StmtKind::Require: revert_unless(truth(eval(*s.expr, fr, Mode::Contract))); break;
      case StmtKind::Return:
        if (s.expr) {
          const Term v = as_int(eval(*s.expr, fr, Mode::Contract));
          fr.ret = ite(live, v, fr.ret);
        }
        live = boolean(false);
        return;
      case StmtKind::ExprStmt: eval(*s.expr, fr, Mode::Contract); break;
      case StmtKind::Check: violate_unless(truth(eval(*s.expr, fr, Mode::Check))); break;
      case StmtKind::LoopExit: revert_unless(lnot(truth(eval(*s.expr, fr, Mode::Contract)))); break;
      case StmtKind::While:
      case StmtKind::Placeholder: throw std::logic_error("statement left after lowering");
    }
  }
}

void Encoder::constructor(const std::vector<Term>& args) {
  state = default_state();
  cur_ = &state;
  const SymState genesis = state;
  old_ = &genesis;
  sender_ = constant(0);
  gas_ = constant(0);
  gas_on_ = true;
  depth_ = 0;
  rev = boolean(false);
  const Term live0 = live;

  Frame init;
  init.id = "ctor";
  init.stack = {"main", "constructor"};
  for (const auto& [name, e] : ts_.initializers) {
    const Term v = as_int(eval(*e, init, Mode::Contract));
    auto& slot = state.values[ts_.layout.var_base.at(name)];
    slot = ite(live, v, slot);
  }
  Frame body;
  body.id = "ctor";
  body.stack = init.stack;
  body.calls = init.calls;
  for (std::size_t i = 0; i < ts_.constructor.params.size(); ++i) body.locals[ts_.constructor.params[i].name] = args[i];
  exec(ts_.constructor.body, body);
  live = land(live0, land(lnot(rev), land(lnot(viol), lnot(blocked))));

  Frame global;
  global.id = "ctor.global";
  global.stack = init.stack;
  exec(ts_.global_checks, global);
  live = land(live0, land(lnot(rev), land(lnot(viol), lnot(blocked))));
  old_ = nullptr;
}

void Encoder::transaction(const SymTx& tx, const Term& active, int depth, const std::string& frame,
                          std::optional<std::size_t> only) {
  const Term live0 = land(live, active);
  live = live0;
  rev = boolean(false);
  gas_ = constant(0);
  gas_on_ = true;
  depth_ = depth;
  sender_ = tx.sender;
  cur_ = &state;
  const SymState pre = state;

  const Term now = add(state.values[ts_.layout.timestamp], tx.delta);
  revert_unless(lt(now, constant(ts_.dom.uint_size())));
  auto& tslot = state.values[ts_.layout.timestamp];
  tslot = ite(live, wrap(now, static_cast<unsigned>(ts_.dom.width)), tslot);
  const SymState entry = state;
  const Term started = live;

  std::vector<std::string> stack{"main"};
  for (int i = 0; i < depth; ++i) stack.push_back("dispatch");

  std::vector<Term> ends;
  for (std::size_t j = 0; j < ts_.actions.size(); ++j) {
    if (only && *only != j) continue;
    const Action& a = ts_.actions[j];
    live = only ? started : land(started, eq(tx.fn, constant(static_cast<std::int64_t>(j))));
    if (live->is_false()) continue;
    std::vector<Term> args(a.params.size());
    for_each_slot(a.params, [&](std::size_t i, char kind, std::size_t k) {
      args[i] = kind == 'a' ? tx.addrs.at(k) : kind == 'b' ? tx.bools.at(k) : tx.uints.at(k);
    });
    if (a.kind == Action::Kind::Function) {
      const LoweredFunction& f = ts_.functions[a.function];
      Frame fr;
      fr.id = frame + "." + f.name;
      fr.stack = stack;
      fr.stack.push_back(f.name);
      for (std::size_t i = 0; i < f.params.size(); ++i) fr.locals[f.params[i].name] = args[i];
      const Term entry_live = live;
      exec(f.body, fr);
      live = land(entry_live, land(lnot(rev), land(lnot(viol), lnot(blocked))));
    } else {
      // harness token action: credits the recipient and grows the supply
      const std::size_t base = ts_.layout.token_base.at(a.token);
      const auto A = static_cast<std::size_t>(ts_.dom.addresses);
      const Term to = a.kind == Action::Kind::TokenTransfer ? args[0] : args[1];
      const Term amount = args.back();
      std::vector<Term> bal(state.values.begin() + static_cast<std::ptrdiff_t>(base),
                            state.values.begin() + static_cast<std::ptrdiff_t>(base + A));
      const Term supply = add(state.values[base + A], amount);
      const Term b = add(select(bal, to, constant(0)), amount);
      const Term size = constant(ts_.dom.uint_size());
      revert_unless(land(lt(supply, size), lt(b, size)));
      const auto w = static_cast<unsigned>(ts_.dom.width);
      state.values[base + A] = ite(live, wrap(supply, w), state.values[base + A]);
      write_entries(base, A, to, wrap(b, w));
    }
    ends.push_back(live);
  }
  live = lor(std::span<const Term>(ends));

  old_ = &entry;
  Frame global;
  global.id = frame + ".global";
  global.stack = stack;
  exec(ts_.global_checks, global);
  old_ = nullptr;

  for (std::size_t i = 0; i < state.values.size(); ++i) state.values[i] = ite(rev, pre.values[i], state.values[i]);
  live = land(live0, land(lnot(viol), lnot(blocked)));
}

Term Encoder::predicate(const Expr& e, const SymState& s) {
  SymState copy = s;
  SymState* saved = cur_;
  const Term saved_live = live;
  const Term saved_rev = rev;
  cur_ = &copy;
  Frame fr;
  fr.id = "pred";
  const Term v = truth(eval(e, fr, Mode::Check));
  cur_ = saved;
  live = saved_live;
  rev = saved_rev;
  return v;
}

}  // namespace solinv
