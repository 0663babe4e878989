#include "solinv/ir.hpp"

namespace solinv {

const char* type_name(Type t) {
  switch (t) {
    case Type::Uint: return "uint";
    case Type::Bool: return "bool";
    case Type::Address: return "address";
    case Type::Map1: return "mapping(address => uint)";
    case Type::Map2: return "mapping(address => mapping(uint => uint))";
    case Type::Token: return "IERC20";
    case Type::Void: return "void";
  }
  return "?";
}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

const VarDecl* ContractIr::find_state(const std::string& n) const {
  for (const auto& v : state_vars) {
    if (v.name == n) return &v;
  }
  return nullptr;
}

const VarDecl* ContractIr::find_token(const std::string& n) const {
  for (const auto& v : tokens) {
    if (v.name == n) return &v;
  }
  return nullptr;
}

const FunctionIr* ContractIr::find_function(const std::string& n) const {
  for (const auto& f : functions) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

FunctionIr* ContractIr::find_function(const std::string& n) {
  for (auto& f : functions) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

const ModifierDecl* ContractIr::find_modifier(const std::string& n) const {
  for (const auto& m : modifiers) {
    if (m.name == n) return &m;
  }
  return nullptr;
}

std::vector<const FunctionIr*> ContractIr::entry_points() const {
  std::vector<const FunctionIr*> out;
  for (const auto& f : functions) {
    if (f.visibility != Visibility::Internal) out.push_back(&f);
  }
  return out;
}

ExprPtr make_int(std::int64_t v, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::IntLit;
  e->type = Type::Uint;
  e->value = v;
  e->loc = loc;
  return e;
}

ExprPtr make_bool(bool v, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::BoolLit;
  e->type = Type::Bool;
  e->value = v ? 1 : 0;
  e->loc = loc;
  return e;
}

StmtPtr clone(const StmtPtr& s) {
  auto c = std::make_shared<Stmt>(*s);
  c->body = clone(s->body);
  c->else_body = clone(s->else_body);
  c->head_checks = clone(s->head_checks);
  return c;
}

std::vector<StmtPtr> clone(const std::vector<StmtPtr>& body) {
  std::vector<StmtPtr> out;
  out.reserve(body.size());
  for (const auto& s : body) out.push_back(clone(s));
  return out;
}

bool is_state_predicate(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Old:
    case ExprKind::MsgSender:
    case ExprKind::Call:
      return false;
    case ExprKind::Var:
      if (e.scope == VarScope::Param || e.scope == VarScope::Local) return false;
      break;
    default:
      break;
  }
  for (const auto& a : e.args) {
    if (!is_state_predicate(*a)) return false;
  }
  return true;
}

}  // namespace solinv
