#include <algorithm>
#include <functional>

#include "solinv/semantics.hpp"

namespace solinv {

std::int64_t Domain::domain_of(Type t) const {
  switch (t) {
    case Type::Bool: return 2;
    case Type::Address: return addresses;
    default: return uint_size();
  }
}

void Domain::validate() const {
  if (width < 1 || width > 16) throw std::invalid_argument("width must be in [1, 16]");
  if (addresses < 2 || addresses > 8) throw std::invalid_argument("address universe must be in [2, 8]");
  if (gas_cap < 0) throw std::invalid_argument("gas cap must be non-negative");
}

const LoweredFunction* TransitionSystem::find(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const Action* TransitionSystem::find_action(const std::string& name) const {
  for (const auto& a : actions) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

namespace {

void check_literals(const Expr& e, const Domain& dom) {
  if (e.kind == ExprKind::IntLit && e.value >= dom.uint_size()) {
    throw UnsupportedConstruct("literal " + std::to_string(e.value) + " does not fit in " + std::to_string(dom.width) +
                               " bits (line " + std::to_string(e.loc.line) + ")");
  }
  if (e.kind == ExprKind::AddressLit && e.value >= dom.addresses) {
    throw UnsupportedConstruct("address(" + std::to_string(e.value) + ") lies outside the address universe (line " +
                               std::to_string(e.loc.line) + ")");
  }
  for (const auto& a : e.args) check_literals(*a, dom);
}

void check_body_literals(const std::vector<StmtPtr>& body, const Domain& dom) {
  for (const auto& s : body) {
    if (s->kind == StmtKind::Check || (s->synthetic && s->kind == StmtKind::LocalDecl)) continue;
    if (s->lhs) check_literals(*s->lhs, dom);
    if (s->expr) check_literals(*s->expr, dom);
    check_body_literals(s->body, dom);
    check_body_literals(s->else_body, dom);
  }
}

std::vector<StmtPtr> splice(const std::vector<StmtPtr>& outer, const std::vector<StmtPtr>& inner) {
  std::vector<StmtPtr> out;
  for (const auto& s : outer) {
    if (s->kind == StmtKind::Placeholder) {
      for (const auto& t : clone(inner)) out.push_back(t);
      continue;
    }
    auto c = clone(s);
    c->body = splice(s->body, inner);
    c->else_body = splice(s->else_body, inner);
    out.push_back(c);
  }
  return out;
}

std::vector<StmtPtr> unroll_body(const std::vector<StmtPtr>& body);

std::vector<StmtPtr> unroll_loop(const Stmt& w, const std::vector<StmtPtr>& lowered_body, int n) {
  std::vector<StmtPtr> out = clone(w.head_checks);
  if (n == 0) {
    auto exit = std::make_shared<Stmt>();
    exit->kind = StmtKind::LoopExit;
    exit->loc = w.loc;
    exit->expr = w.expr;
    out.push_back(exit);
    return out;
  }
  auto branch = std::make_shared<Stmt>();
  branch->kind = StmtKind::If;
  branch->loc = w.loc;
  branch->expr = w.expr;
  branch->body = clone(lowered_body);
  for (auto& s : unroll_loop(w, lowered_body, n - 1)) branch->body.push_back(s);
  out.push_back(branch);
  return out;
}

std::vector<StmtPtr> unroll_body(const std::vector<StmtPtr>& body) {
  std::vector<StmtPtr> out;
  for (const auto& s : body) {
    if (s->kind == StmtKind::While) {
      const auto inner = unroll_body(s->body);
      for (auto& t : unroll_loop(*s, inner, s->unroll)) out.push_back(t);
      continue;
    }
    auto c = std::make_shared<Stmt>(*s);
    c->body = unroll_body(s->body);
    c->else_body = unroll_body(s->else_body);
    out.push_back(c);
  }
  return out;
}

LoweredFunction lower_function(const ContractIr& ir, const FunctionIr& f, const Domain& dom) {
  LoweredFunction lf;
  lf.name = f.name;
  lf.params = f.params;
  lf.return_type = f.return_type;
  lf.entry = !f.is_constructor && f.visibility != Visibility::Internal;
  lf.line = f.loc.line;
  std::vector<StmtPtr> body = clone(f.body);
  for (auto it = f.modifiers.rbegin(); it != f.modifiers.rend(); ++it) {
    const ModifierDecl* m = ir.find_modifier(*it);
    if (!m) throw UnsupportedConstruct("unknown modifier " + *it);
    body = splice(m->body, body);
  }
  lf.body = unroll_body(body);
  check_body_literals(lf.body, dom);
  return lf;
}

bool direct_checks(const std::vector<StmtPtr>& body) {
  for (const auto& s : body) {
    if (s->kind == StmtKind::Check) return true;
    if (direct_checks(s->body) || direct_checks(s->else_body)) return true;
  }
  return false;
}

void calls_in(const Expr& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::Call) out.insert(e.name);
  for (const auto& a : e.args) calls_in(*a, out);
}

void calls_in(const std::vector<StmtPtr>& body, std::set<std::string>& out) {
  for (const auto& s : body) {
    if (s->lhs) calls_in(*s->lhs, out);
    if (s->expr) calls_in(*s->expr, out);
    calls_in(s->body, out);
    calls_in(s->else_body, out);
  }
}

// Writes performed directly by a body; calls are resolved by the caller.
void direct_writes(const TransitionSystem& ts, const Expr& e, std::set<std::size_t>& out) {
  if (e.kind == ExprKind::TokenCall && e.method != "balanceOf" && e.method != "totalSupply") {
    const auto base = ts.layout.token_base.at(e.name);
    for (int a = 0; a <= ts.dom.addresses; ++a) out.insert(base + static_cast<std::size_t>(a));
  }
  for (const auto& a : e.args) direct_writes(ts, *a, out);
}

void direct_writes(const TransitionSystem& ts, const std::vector<StmtPtr>& body, std::set<std::size_t>& out) {
  for (const auto& s : body) {
    if ((s->kind == StmtKind::Assign || s->kind == StmtKind::Delete) && s->lhs) {
      const Expr* base = s->lhs.get();
      if (base->kind == ExprKind::Index) base = base->args[0].get();
      if (base->kind == ExprKind::Var && base->scope == VarScope::State) {
        const auto first = ts.layout.var_base.at(base->name);
        std::size_t count = 1;
        if (base->type == Type::Map1) count = static_cast<std::size_t>(ts.dom.addresses);
        if (base->type == Type::Map2) count = static_cast<std::size_t>(ts.dom.addresses * ts.dom.uint_size());
        for (std::size_t i = 0; i < count; ++i) out.insert(first + i);
      }
    }
    if (s->kind != StmtKind::Check) {
      if (s->lhs) direct_writes(ts, *s->lhs, out);
      if (s->expr) direct_writes(ts, *s->expr, out);
    }
    direct_writes(ts, s->body, out);
    direct_writes(ts, s->else_body, out);
  }
}

}  // namespace

TransitionSystem lower(const ContractIr& ir, const Domain& dom_in) {
  Domain dom = dom_in;
  if (dom.gas_cap == 0) dom.gas_cap = ir.gas_cap;
  dom.validate();
  TransitionSystem ts;
  ts.contract = ir.name;
  ts.dom = dom;

  auto& L = ts.layout;
  for (const auto& v : ir.state_vars) {
    L.var_base[v.name] = L.slots.size();
    switch (v.type) {
      case Type::Map1:
        for (int a = 0; a < dom.addresses; ++a) L.slots.push_back({v.name + "[" + std::to_string(a) + "]", Type::Uint, dom.uint_size()});
        break;
      case Type::Map2: {
        if (dom.addresses * dom.uint_size() > 4096) {
          throw UnsupportedConstruct("nested mapping " + v.name + " is too large for width " + std::to_string(dom.width));
        }
        for (int a = 0; a < dom.addresses; ++a) {
          for (std::int64_t k = 0; k < dom.uint_size(); ++k) {
            L.slots.push_back({v.name + "[" + std::to_string(a) + "][" + std::to_string(k) + "]", Type::Uint, dom.uint_size()});
          }
        }
        break;
      }
      default:
        L.slots.push_back({v.name, v.type, dom.domain_of(v.type)});
    }
    if (v.init) {
      check_literals(*v.init, dom);
      ts.initializers.emplace_back(v.name, v.init);
    }
  }
  for (const auto& t : ir.tokens) {
    ts.tokens.push_back(t.name);
    L.token_base[t.name] = L.slots.size();
    for (int a = 0; a < dom.addresses; ++a) {
      L.slots.push_back({t.name + ".balance[" + std::to_string(a) + "]", Type::Uint, dom.uint_size()});
    }
    L.slots.push_back({t.name + ".supply", Type::Uint, dom.uint_size()});
  }
  L.timestamp = L.slots.size();
  L.slots.push_back({"block.timestamp", Type::Uint, dom.uint_size()});

  if (ir.constructor) {
    ts.constructor = lower_function(ir, *ir.constructor, dom);
  } else {
    ts.constructor.name = "constructor";
  }
  for (const auto& f : ir.functions) ts.functions.push_back(lower_function(ir, f, dom));
  ts.global_checks = clone(ir.global_checks);

  // transitive closure over the (acyclic) call graph
  std::map<std::string, std::set<std::string>> callees;
  std::map<std::string, std::set<std::size_t>> writes;
  std::map<std::string, bool> checks;
  auto note = [&](const LoweredFunction& f) {
    calls_in(f.body, callees[f.name]);
    direct_writes(ts, f.body, writes[f.name]);
    checks[f.name] = direct_checks(f.body);
  };
  for (const auto& f : ts.functions) note(f);
  note(ts.constructor);
  std::function<void(const std::string&, std::set<std::string>&)> reach = [&](const std::string& n, std::set<std::string>& seen) {
    for (const auto& c : callees[n]) {
      if (seen.insert(c).second) reach(c, seen);
    }
  };
  auto finish = [&](LoweredFunction& f) {
    std::set<std::string> seen;
    reach(f.name, seen);
    auto ws = writes[f.name];
    bool has = checks[f.name];
    for (const auto& c : seen) {
      ws.insert(writes[c].begin(), writes[c].end());
      has = has || checks[c];
    }
    ts.mod_sets[f.name] = ws;
    f.has_checks = has;
  };
  for (auto& f : ts.functions) finish(f);
  finish(ts.constructor);

  for (std::size_t i = 0; i < ts.functions.size(); ++i) {
    const auto& f = ts.functions[i];
    if (!f.entry) continue;
    Action a;
    a.kind = Action::Kind::Function;
    a.name = f.name;
    a.function = i;
    a.params = f.params;
    ts.actions.push_back(a);
  }
  for (const auto& t : ts.tokens) {
    Action tr;
    tr.kind = Action::Kind::TokenTransfer;
    tr.name = t + ".transfer";
    tr.token = t;
    tr.params = {{"to", Type::Address}, {"amount", Type::Uint}};
    ts.actions.push_back(tr);
    Action tf = tr;
    tf.kind = Action::Kind::TokenTransferFrom;
    tf.name = t + ".transferFrom";
    tf.params = {{"from", Type::Address}, {"to", Type::Address}, {"amount", Type::Uint}};
    ts.actions.push_back(tf);
  }
  return ts;
}

}  // namespace solinv
