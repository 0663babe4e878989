#pragma once

// Typed IR for MiniSol contracts. Every node keeps the 1-based source line of
// its first token; instrumentation adds synthetic nodes with `synthetic` set.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace solinv {

enum class Type {
  Uint,
  Bool,
  Address,
  Map1,   // mapping(address => uint)
  Map2,   // mapping(address => mapping(uint => uint))
  Token,  // IERC20 stub
  Void,
};

const char* type_name(Type t);

struct Loc {
  int line = 0;
  int col = 0;
};

enum class ExprKind {
  IntLit,
  BoolLit,
  AddressLit,  // address(N); address(this) is This
  Var,
  MsgSender,
  Timestamp,
  This,
  Index,      // args[0][args[1]]
  Binary,
  Not,
  Call,       // internal function call, name = callee
  TokenCall,  // name = token, method = balanceOf/totalSupply/transfer/...
  Old,        // candidate only
  SumMapping, // candidate only, name = mapping
  KScaled,    // candidate only: args[0] * k, k = k_num / k_den
};

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

const char* binop_text(BinOp op);

enum class VarScope { State, Param, Local, Token };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind = ExprKind::IntLit;
  Type type = Type::Uint;
  Loc loc;
  std::int64_t value = 0;  // literals
  std::string name;
  std::string method;
  BinOp op = BinOp::Add;
  VarScope scope = VarScope::State;
  std::int64_t k_num = 2;
  std::int64_t k_den = 1;
  std::vector<ExprPtr> args;
};

enum class AssignOp { Set, Add, Sub, Mul, Div };

enum class CheckKind {
  Assertion,
  Assume,
  Ensures,
  Require,
  Modifier,  // prologue guard woven in by modifier instrumentation
  Global,
  LoopHead,
};

enum class StmtKind {
  LocalDecl,
  Assign,
  If,
  While,
  Require,    // source-level require/assert: reverts
  Return,
  ExprStmt,   // internal call or token call
  Delete,
  Placeholder,  // `_;` inside modifiers
  Check,      // instrumented candidate check
  LoopExit,   // lowered loops only: revert if the guard still holds
};

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct Stmt {
  StmtKind kind = StmtKind::ExprStmt;
  Loc loc;
  bool synthetic = false;
  std::string name;  // LocalDecl
  Type type = Type::Uint;
  AssignOp assign_op = AssignOp::Set;
  ExprPtr lhs;
  ExprPtr expr;  // rhs, condition, return value, call
  std::vector<StmtPtr> body;
  std::vector<StmtPtr> else_body;
  int unroll = 4;
  std::string message;
  // Check statements
  CheckKind check_kind = CheckKind::Assertion;
  int candidate = -1;
  // While: checks evaluated each time the guard is about to be tested
  std::vector<StmtPtr> head_checks;
};

struct VarDecl {
  std::string name;
  Type type = Type::Uint;
  Loc loc;
  ExprPtr init;
};

struct Param {
  std::string name;
  Type type = Type::Uint;
};

enum class Visibility { External, Public, Internal };

struct FunctionIr {
  std::string name;
  Loc loc;  // signature line
  int end_line = 0;
  std::vector<Param> params;
  Visibility visibility = Visibility::Public;
  std::vector<std::string> modifiers;
  std::vector<StmtPtr> body;
  std::optional<Type> return_type;
  bool is_constructor = false;
  // instrumentation: local names of Old snapshots, in creation order
  std::vector<std::string> snapshots;
};

struct ModifierDecl {
  std::string name;
  Loc loc;
  std::vector<StmtPtr> body;
  bool synthetic = false;
};

struct Annotation {
  int line = 0;
  std::string text;
};

struct ContractIr {
  std::string name;
  Loc loc;
  int end_line = 0;
  std::vector<VarDecl> state_vars;  // scalars and mappings, declaration order
  std::vector<VarDecl> tokens;
  std::optional<FunctionIr> constructor;
  std::vector<FunctionIr> functions;
  std::vector<ModifierDecl> modifiers;

  // Source metadata
  std::vector<Annotation> comments;
  std::vector<Annotation> inline_candidates;  // //@inv:
  std::vector<Annotation> expected_bugs;      // //@expect-bug:
  std::int64_t gas_cap = 0;                   // //@gas-cap N
  std::vector<std::string> warnings;
  int num_lines = 0;

  // Instrumentation state
  std::vector<StmtPtr> global_checks;
  std::vector<std::string> applied_candidates;

  const VarDecl* find_state(const std::string& n) const;
  const VarDecl* find_token(const std::string& n) const;
  const FunctionIr* find_function(const std::string& n) const;
  FunctionIr* find_function(const std::string& n);
  const ModifierDecl* find_modifier(const std::string& n) const;
  // Public/external functions in declaration order.
  std::vector<const FunctionIr*> entry_points() const;
};

// Expression helpers used by the parser, instrumentation and tests.
ExprPtr make_int(std::int64_t v, Loc loc = {});
ExprPtr make_bool(bool v, Loc loc = {});

// Deep copies of statement trees (statements are mutable during
// instrumentation; expressions are shared).
StmtPtr clone(const StmtPtr& s);
std::vector<StmtPtr> clone(const std::vector<StmtPtr>& body);

// False when e mentions Old, msg.sender, a parameter, a local or a call, i.e.
// when it is not a predicate over contract state alone.
bool is_state_predicate(const Expr& e);

}  // namespace solinv
