#include "solinv/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace solinv {

namespace {

std::string where(Loc loc) { return "line " + std::to_string(loc.line) + ", col " + std::to_string(loc.col); }

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

}  // namespace

ParseError::ParseError(const std::string& msg, Loc l, std::vector<std::string> exp)
    : std::runtime_error(where(l) + ": " + msg), loc(l), expected(std::move(exp)) {}

TypeError::TypeError(const std::string& msg, Loc l) : std::runtime_error(where(l) + ": " + msg), loc(l) {}

DuplicateDecl::DuplicateDecl(const std::string& name) : std::runtime_error("duplicate declaration: " + name) {}

SourceFile SourceFile::from_text(std::string text, std::string path) {
  SourceFile f;
  f.path = std::move(path);
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    f.lines.push_back(line);
  }
  return f;
}

SourceFile SourceFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

std::string SourceFile::text() const {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- lexer

LexResult lex(const std::string& text, int first_line) {
  LexResult r;
  int line = first_line;
  int col = 1;
  std::size_t i = 0;
  int pending_unroll = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < text.size(); ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  static const char* const kMulti[] = {"==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "++", "--", "=>"};
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    const Loc loc{line, col};
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      std::size_t end = text.find('\n', i);
      if (end == std::string::npos) end = text.size();
      r.comments.push_back({loc.line, text.substr(i, end - i)});
      advance(end - i);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      std::size_t end = text.find("*/", i + 2);
      if (end == std::string::npos) throw ParseError("unterminated comment", loc, {"*/"});
      std::string body = text.substr(i, end + 2 - i);
      r.comments.push_back({loc.line, body});
      const std::string inner = trim(body.substr(2, body.size() - 4));
      if (inner.rfind("@unroll", 0) == 0) {
        try {
          pending_unroll = std::stoi(inner.substr(7));
        } catch (const std::exception&) {
          throw ParseError("malformed @unroll annotation", loc, {"@unroll N"});
        }
        if (pending_unroll < 0) throw ParseError("negative @unroll bound", loc);
      }
      advance(end + 2 - i);
      continue;
    }
    Token t;
    t.loc = loc;
    t.unroll = pending_unroll;
    pending_unroll = 0;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_' || text[j] == '$')) ++j;
      t.kind = TokKind::Ident;
      t.text = text.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      int base = 10;
      if (c == '0' && i + 1 < text.size() && (text[i + 1] == 'x' || text[i + 1] == 'X')) {
        base = 16;
        j += 2;
        while (j < text.size() && std::isxdigit(static_cast<unsigned char>(text[j]))) ++j;
      } else {
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      t.kind = TokKind::Number;
      t.text = text.substr(i, j - i);
      const std::string digits = base == 16 ? t.text.substr(2) : t.text;
      if (digits.empty()) throw ParseError("malformed number", loc, {"digit"});
      __int128 v = 0;
      for (char d : digits) {
        const int dv = std::isdigit(static_cast<unsigned char>(d)) ? d - '0' : std::tolower(d) - 'a' + 10;
        v = v * base + dv;
        if (v > (__int128{1} << 62)) throw ParseError("number literal too large", loc);
      }
      t.number = static_cast<std::int64_t>(v);
      advance(j - i);
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < text.size() && text[j] != c && text[j] != '\n') ++j;
      if (j >= text.size() || text[j] != c) throw ParseError("unterminated string", loc, {std::string(1, c)});
      t.kind = TokKind::String;
      t.text = text.substr(i + 1, j - i - 1);
      advance(j + 1 - i);
    } else {
      t.kind = TokKind::Punct;
      t.text = std::string(1, c);
      for (const char* m : kMulti) {
        if (text.compare(i, 2, m) == 0) {
          t.text = m;
          break;
        }
      }
      if (t.text.size() == 1 && std::string("{}()[];,.=+-*/<>!?:").find(c) == std::string::npos) {
        throw ParseError(std::string("unexpected character '") + c + "'", loc);
      }
      advance(t.text.size());
    }
    r.tokens.push_back(std::move(t));
  }
  Token end;
  end.kind = TokKind::End;
  end.loc = {line, col};
  r.tokens.push_back(end);
  return r;
}

// ---------------------------------------------------------------- expressions

namespace {

const std::set<std::string> kReserved = {
    "contract", "function", "modifier", "constructor", "if",      "else",   "while",  "return",
    "require",  "assert",   "true",     "false",       "mapping", "uint",   "bool",   "address",
    "msg",      "block",    "IERC20",   "delete",      "returns", "public", "external", "internal",
    "private",  "view",     "pure",     "payable",     "revert",  "this",   "uint256"};

bool is_uint_type_name(const std::string& s) {
  if (s == "uint") return true;
  if (s.rfind("uint", 0) != 0) return false;
  const std::string rest = s.substr(4);
  return !rest.empty() && std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

class Cursor {
 public:
  Cursor(const std::vector<Token>& toks, std::size_t& pos) : t_(toks), p_(pos) {}

  const Token& peek(std::size_t k = 0) const {
    const auto i = std::min(p_ + k, t_.size() - 1);
    return t_[i];
  }
  bool at(const std::string& s, std::size_t k = 0) const {
    const auto& tk = peek(k);
    return (tk.kind == TokKind::Punct || tk.kind == TokKind::Ident) && tk.text == s;
  }
  bool at_end() const { return peek().kind == TokKind::End; }
  const Token& next() {
    const Token& tk = peek();
    if (p_ < t_.size() - 1) ++p_;
    return tk;
  }
  bool accept(const std::string& s) {
    if (!at(s)) return false;
    next();
    return true;
  }
  const Token& expect(const std::string& s) {
    if (!at(s)) fail({s});
    return next();
  }
  std::string ident() {
    if (peek().kind != TokKind::Ident) fail({"identifier"});
    return next().text;
  }
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const auto& tk = peek();
    std::string found = tk.kind == TokKind::End ? "end of input" : "'" + tk.text + "'";
    std::string msg = "expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    throw ParseError(msg + ", found " + found, tk.loc, std::move(expected));
  }
  std::size_t pos() const { return p_; }
  void seek(std::size_t p) { p_ = p; }

 private:
  const std::vector<Token>& t_;
  std::size_t& p_;
};

std::shared_ptr<Expr> node(ExprKind k, Type t, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->type = t;
  e->loc = loc;
  return e;
}

// Marker for a bare `k` in candidate text; replaced by KScaled at a product.
bool is_k_marker(const ExprPtr& e) { return e->kind == ExprKind::KScaled && e->args.empty(); }

class ExprParser {
 public:
  ExprParser(Cursor& c, const ExprContext& ctx) : c_(c), ctx_(ctx) {}

  ExprPtr parse() {
    auto e = parse_or();
    reject_k_marker(e);
    return e;
  }

 private:
  void reject_k_marker(const ExprPtr& e) {
    if (is_k_marker(e)) throw TypeError("k may only appear as a factor of a product", e->loc);
    for (const auto& a : e->args) reject_k_marker(a);
  }

  void want(const ExprPtr& e, Type t, const char* what) {
    if (e->type != t) {
      throw TypeError(std::string(what) + " expects " + type_name(t) + ", got " + type_name(e->type), e->loc);
    }
  }

  ExprPtr binary(BinOp op, ExprPtr a, ExprPtr b, Loc loc) {
    auto e = node(ExprKind::Binary, Type::Uint, loc);
    e->op = op;
    switch (op) {
      case BinOp::Add:
      case BinOp::Sub:
      case BinOp::Mul:
      case BinOp::Div:
        want(a, Type::Uint, binop_text(op));
        want(b, Type::Uint, binop_text(op));
        e->type = Type::Uint;
        break;
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Gt:
      case BinOp::Ge:
        want(a, Type::Uint, binop_text(op));
        want(b, Type::Uint, binop_text(op));
        e->type = Type::Bool;
        break;
      case BinOp::Eq:
      case BinOp::Ne:
        if (a->type != b->type || (a->type != Type::Uint && a->type != Type::Bool && a->type != Type::Address)) {
          throw TypeError(std::string("cannot compare ") + type_name(a->type) + " with " + type_name(b->type), loc);
        }
        e->type = Type::Bool;
        break;
      case BinOp::And:
      case BinOp::Or:
        want(a, Type::Bool, binop_text(op));
        want(b, Type::Bool, binop_text(op));
        e->type = Type::Bool;
        break;
    }
    e->args = {std::move(a), std::move(b)};
    return e;
  }

  ExprPtr parse_or() {
    auto a = parse_and();
    while (c_.at("||")) {
      const Loc loc = c_.next().loc;
      a = binary(BinOp::Or, a, parse_and(), loc);
    }
    return a;
  }
  ExprPtr parse_and() {
    auto a = parse_eq();
    while (c_.at("&&")) {
      const Loc loc = c_.next().loc;
      a = binary(BinOp::And, a, parse_eq(), loc);
    }
    return a;
  }
  ExprPtr parse_eq() {
    auto a = parse_rel();
    while (c_.at("==") || c_.at("!=")) {
      const auto& tk = c_.next();
      const BinOp op = tk.text == "==" ? BinOp::Eq : BinOp::Ne;
      a = binary(op, a, parse_rel(), tk.loc);
    }
    return a;
  }
  ExprPtr parse_rel() {
    auto a = parse_add();
    while (c_.at("<") || c_.at("<=") || c_.at(">") || c_.at(">=")) {
      const auto& tk = c_.next();
      BinOp op = BinOp::Lt;
      if (tk.text == "<=") op = BinOp::Le;
      if (tk.text == ">") op = BinOp::Gt;
      if (tk.text == ">=") op = BinOp::Ge;
      a = binary(op, a, parse_add(), tk.loc);
    }
    return a;
  }
  ExprPtr parse_add() {
    auto a = parse_mul();
    while (c_.at("+") || c_.at("-")) {
      const auto& tk = c_.next();
      a = binary(tk.text == "+" ? BinOp::Add : BinOp::Sub, a, parse_mul(), tk.loc);
    }
    return a;
  }
  ExprPtr parse_mul() {
    auto a = parse_unary();
    while (c_.at("*") || c_.at("/")) {
      const auto& tk = c_.next();
      auto b = parse_unary();
      if (tk.text == "*" && (is_k_marker(a) || is_k_marker(b))) {
        if (is_k_marker(a) && is_k_marker(b)) throw TypeError("k * k is not supported", tk.loc);
        auto factor = is_k_marker(a) ? b : a;
        want(factor, Type::Uint, "* k");
        auto e = node(ExprKind::KScaled, Type::Uint, tk.loc);
        e->k_num = ctx_.k_num;
        e->k_den = ctx_.k_den;
        e->args = {factor};
        a = e;
        continue;
      }
      a = binary(tk.text == "*" ? BinOp::Mul : BinOp::Div, a, b, tk.loc);
    }
    return a;
  }
  ExprPtr parse_unary() {
    if (c_.at("!")) {
      const Loc loc = c_.next().loc;
      auto a = parse_unary();
      want(a, Type::Bool, "!");
      auto e = node(ExprKind::Not, Type::Bool, loc);
      e->args = {a};
      return e;
    }
    return parse_postfix();
  }

  std::vector<ExprPtr> call_args() {
    std::vector<ExprPtr> args;
    c_.expect("(");
    if (!c_.at(")")) {
      do {
        args.push_back(parse_or());
      } while (c_.accept(","));
    }
    c_.expect(")");
    return args;
  }

  ExprPtr parse_postfix() {
    auto e = parse_primary();
    while (c_.at("[")) {
      const Loc loc = c_.next().loc;
      auto key = parse_or();
      c_.expect("]");
      if (e->type == Type::Map1) {
        want(key, Type::Address, "mapping key");
        auto idx = node(ExprKind::Index, Type::Uint, loc);
        idx->args = {e, key};
        e = idx;
      } else if (e->type == Type::Map2) {
        want(key, Type::Address, "mapping key");
        c_.expect("[");
        auto key2 = parse_or();
        c_.expect("]");
        want(key2, Type::Uint, "inner mapping key");
        auto idx = node(ExprKind::Index, Type::Uint, loc);
        idx->args = {e, key, key2};
        e = idx;
      } else {
        throw TypeError(std::string("cannot index a value of type ") + type_name(e->type), loc);
      }
    }
    return e;
  }

  ExprPtr token_call(const std::string& token, Loc loc) {
    c_.expect(".");
    const std::string method = c_.ident();
    auto args = call_args();
    auto e = node(ExprKind::TokenCall, Type::Void, loc);
    e->name = token;
    e->method = method;
    auto arity = [&](std::size_t n) {
      if (args.size() != n) {
        throw TypeError(token + "." + method + " takes " + std::to_string(n) + " argument(s)", loc);
      }
    };
    if (method == "balanceOf") {
      arity(1);
      want(args[0], Type::Address, "balanceOf");
      e->type = Type::Uint;
    } else if (method == "totalSupply") {
      arity(0);
      e->type = Type::Uint;
    } else if (method == "transfer" || method == "mint") {
      arity(2);
      want(args[0], Type::Address, method.c_str());
      want(args[1], Type::Uint, method.c_str());
    } else if (method == "transferFrom" || method == "safeTransferFrom") {
      arity(3);
      want(args[0], Type::Address, method.c_str());
      want(args[1], Type::Address, method.c_str());
      want(args[2], Type::Uint, method.c_str());
      e->method = "transferFrom";
    } else {
      throw TypeError("unknown token method " + method, loc);
    }
    e->args = std::move(args);
    return e;
  }

  ExprPtr function_call(const std::string& name, Loc loc) {
    const FunctionIr* f = ctx_.ir->find_function(name);
    if (!f) throw TypeError("unknown identifier " + name, loc);
    auto args = call_args();
    if (args.size() != f->params.size()) {
      throw TypeError(name + " takes " + std::to_string(f->params.size()) + " argument(s)", loc);
    }
    for (std::size_t i = 0; i < args.size(); ++i) want(args[i], f->params[i].type, name.c_str());
    auto e = node(ExprKind::Call, f->return_type.value_or(Type::Void), loc);
    e->name = name;
    e->args = std::move(args);
    return e;
  }

  ExprPtr parse_primary() {
    const Token& tk = c_.peek();
    const Loc loc = tk.loc;
    if (tk.kind == TokKind::Number) {
      c_.next();
      std::int64_t v = tk.number;
      if (c_.at("hours") || c_.at("seconds")) {
        c_.next();
      } else if (c_.at("days")) {
        c_.next();
        v *= 24;
      }
      return make_int(v, loc);
    }
    if (c_.accept("(")) {
      auto e = parse_or();
      c_.expect(")");
      return e;
    }
    if (tk.kind != TokKind::Ident) c_.fail({"expression"});
    const std::string name = tk.text;
    c_.next();
    if (name == "true" || name == "false") return make_bool(name == "true", loc);
    if (name == "msg") {
      c_.expect(".");
      if (c_.ident() != "sender") throw TypeError("only msg.sender is supported", loc);
      return node(ExprKind::MsgSender, Type::Address, loc);
    }
    if (name == "block") {
      c_.expect(".");
      if (c_.ident() != "timestamp") throw TypeError("only block.timestamp is supported", loc);
      return node(ExprKind::Timestamp, Type::Uint, loc);
    }
    if (name == "address") {
      c_.expect("(");
      ExprPtr e;
      if (c_.accept("this")) {
        e = node(ExprKind::This, Type::Address, loc);
      } else if (c_.peek().kind == TokKind::Number) {
        auto a = node(ExprKind::AddressLit, Type::Address, loc);
        a->value = c_.next().number;
        e = a;
      } else {
        c_.fail({"this", "number"});
      }
      c_.expect(")");
      return e;
    }
    if (ctx_.candidate && name == "Old") {
      c_.expect("(");
      auto inner = parse_or();
      c_.expect(")");
      if (inner->type != Type::Uint && inner->type != Type::Bool && inner->type != Type::Address) {
        throw TypeError("Old() needs a scalar expression", loc);
      }
      auto e = node(ExprKind::Old, inner->type, loc);
      e->args = {inner};
      return e;
    }
    if (ctx_.candidate && (name == "SumMapping" || name == "sumMapping")) {
      c_.expect("(");
      const Loc mloc = c_.peek().loc;
      const std::string m = c_.ident();
      c_.expect(")");
      const VarDecl* v = ctx_.ir->find_state(m);
      if (!v) throw TypeError("unknown identifier " + m, mloc);
      if (v->type != Type::Map1 && v->type != Type::Map2) throw TypeError(m + " is not a mapping", mloc);
      auto e = node(ExprKind::SumMapping, Type::Uint, loc);
      e->name = m;
      return e;
    }
    // locals shadow parameters shadow state
    for (auto it = ctx_.locals.rbegin(); it != ctx_.locals.rend(); ++it) {
      if (it->name == name) {
        auto e = node(ExprKind::Var, it->type, loc);
        e->name = name;
        e->scope = VarScope::Local;
        return e;
      }
    }
    if (ctx_.fn) {
      for (const auto& p : ctx_.fn->params) {
        if (p.name == name) {
          auto e = node(ExprKind::Var, p.type, loc);
          e->name = name;
          e->scope = VarScope::Param;
          return e;
        }
      }
    }
    if (const VarDecl* v = ctx_.ir->find_state(name)) {
      auto e = node(ExprKind::Var, v->type, loc);
      e->name = name;
      e->scope = VarScope::State;
      return e;
    }
    if (ctx_.ir->find_token(name)) return token_call(name, loc);
    if (c_.at("(")) return function_call(name, loc);
    if (ctx_.candidate && name == "k") {
      auto e = node(ExprKind::KScaled, Type::Uint, loc);
      return e;  // marker
    }
    throw TypeError("unknown identifier " + name, loc);
  }

  Cursor& c_;
  const ExprContext& ctx_;
};

}  // namespace

ExprPtr parse_expression(const std::vector<Token>& tokens, std::size_t& pos, const ExprContext& ctx) {
  Cursor c(tokens, pos);
  ExprParser p(c, ctx);
  return p.parse();
}

// ---------------------------------------------------------------- contract parser

namespace {

struct PendingBody {
  enum Kind { Function, Constructor, Modifier, StateInit } kind;
  std::size_t index;  // into functions / modifiers / state_vars
  std::size_t begin;  // token position of '{' (or initializer expression)
};

class ContractParser {
 public:
  ContractParser(const std::vector<Token>& toks, ContractIr& ir) : pos_(0), c_(toks, pos_), ir_(ir) {}

  void run() {
    while (c_.at("pragma") || c_.at("import")) {
      const Loc loc = c_.next().loc;
      while (!c_.at_end() && !c_.at(";")) c_.next();
      c_.expect(";");
      ir_.warnings.push_back("line " + std::to_string(loc.line) + ": ignored pragma/import");
    }
    c_.accept("abstract");
    const Loc cloc = c_.expect("contract").loc;
    ir_.loc = cloc;
    ir_.name = c_.ident();
    c_.expect("{");
    while (!c_.at("}")) {
      if (c_.at_end()) c_.fail({"}"});
      member();
    }
    ir_.end_line = c_.next().loc.line;
    if (!c_.at_end()) c_.fail({"end of input"});

    for (const auto& f : ir_.functions) {
      for (const auto& m : f.modifiers) {
        if (!ir_.find_modifier(m)) throw TypeError("unknown modifier " + m, f.loc);
      }
    }
    for (const auto& b : pending_) body(b);
    check_recursion();
  }

 private:
  void declare_name(const std::string& name, Loc loc) {
    if (kReserved.count(name) || is_uint_type_name(name)) throw ParseError("reserved word " + name, loc, {"identifier"});
    if (!names_.insert(name).second) throw TypeError("duplicate declaration " + name, loc);
  }

  bool at_type() const {
    const auto& tk = c_.peek();
    return tk.kind == TokKind::Ident &&
           (is_uint_type_name(tk.text) || tk.text == "bool" || tk.text == "address" || tk.text == "mapping");
  }

  Type parse_type() {
    const Token& tk = c_.peek();
    if (tk.kind != TokKind::Ident) c_.fail({"type"});
    if (is_uint_type_name(tk.text)) {
      c_.next();
      return Type::Uint;
    }
    if (tk.text == "bool") {
      c_.next();
      return Type::Bool;
    }
    if (tk.text == "address") {
      c_.next();
      c_.accept("payable");
      return Type::Address;
    }
    if (tk.text == "mapping") {
      c_.next();
      c_.expect("(");
      if (c_.ident() != "address") throw TypeError("mapping keys must be address", tk.loc);
      c_.expect("=>");
      Type r = Type::Map1;
      if (c_.at("mapping")) {
        c_.next();
        c_.expect("(");
        if (!is_uint_type_name(c_.ident())) throw TypeError("inner mapping keys must be uint", tk.loc);
        c_.expect("=>");
        if (!is_uint_type_name(c_.ident())) throw TypeError("mapping values must be uint", tk.loc);
        c_.expect(")");
        r = Type::Map2;
      } else if (!is_uint_type_name(c_.ident())) {
        throw TypeError("mapping values must be uint", tk.loc);
      }
      c_.expect(")");
      return r;
    }
    c_.fail({"uint", "bool", "address", "mapping"});
  }

  void skip_block() {
    c_.expect("{");
    int depth = 1;
    while (depth > 0) {
      if (c_.at_end()) c_.fail({"}"});
      const auto& tk = c_.next();
      if (tk.kind == TokKind::Punct && tk.text == "{") ++depth;
      if (tk.kind == TokKind::Punct && tk.text == "}") --depth;
    }
  }

  std::vector<Param> params() {
    std::vector<Param> out;
    c_.expect("(");
    if (!c_.at(")")) {
      do {
        Param p;
        p.type = parse_type();
        if (p.type == Type::Map1 || p.type == Type::Map2) throw TypeError("mapping parameters are not supported", c_.peek().loc);
        c_.accept("memory");
        c_.accept("calldata");
        p.name = c_.ident();
        for (const auto& q : out) {
          if (q.name == p.name) throw TypeError("duplicate parameter " + p.name, c_.peek().loc);
        }
        out.push_back(p);
      } while (c_.accept(","));
    }
    c_.expect(")");
    return out;
  }

  void member() {
    const Token& tk = c_.peek();
    if (tk.kind != TokKind::Ident) c_.fail({"declaration"});
    if (tk.text == "IERC20") {
      c_.next();
      do {
        const Loc loc = c_.peek().loc;
        VarDecl v;
        v.name = c_.ident();
        v.type = Type::Token;
        v.loc = loc;
        declare_name(v.name, loc);
        ir_.tokens.push_back(v);
      } while (c_.accept(","));
      c_.expect(";");
      return;
    }
    if (tk.text == "function" || tk.text == "constructor") {
      function();
      return;
    }
    if (tk.text == "modifier") {
      const Loc loc = c_.next().loc;
      ModifierDecl m;
      m.name = c_.ident();
      m.loc = loc;
      declare_name(m.name, loc);
      if (c_.accept("(")) c_.expect(")");
      pending_.push_back({PendingBody::Modifier, ir_.modifiers.size(), c_.pos()});
      skip_block();
      ir_.modifiers.push_back(std::move(m));
      return;
    }
    if (at_type()) {
      const Loc loc = tk.loc;
      const Type t = parse_type();
      while (c_.at("public") || c_.at("private") || c_.at("internal") || c_.at("immutable") || c_.at("constant")) c_.next();
      std::size_t first = ir_.state_vars.size();
      do {
        VarDecl v;
        v.loc = c_.peek().loc;
        v.name = c_.ident();
        v.type = t;
        declare_name(v.name, v.loc);
        ir_.state_vars.push_back(v);
      } while (c_.accept(","));
      if (c_.accept("=")) {
        if (ir_.state_vars.size() != first + 1) throw TypeError("initializer needs a single variable", loc);
        if (t == Type::Map1 || t == Type::Map2) throw TypeError("mappings cannot be initialized", loc);
        pending_.push_back({PendingBody::StateInit, first, c_.pos()});
        while (!c_.at(";") && !c_.at_end()) c_.next();
      }
      c_.expect(";");
      return;
    }
    c_.fail({"function", "modifier", "constructor", "IERC20", "type"});
  }

  void function() {
    FunctionIr f;
    f.loc = c_.peek().loc;
    if (c_.accept("constructor")) {
      f.is_constructor = true;
      f.name = "constructor";
      if (ir_.constructor) throw TypeError("duplicate constructor", f.loc);
    } else {
      c_.expect("function");
      const Loc nloc = c_.peek().loc;
      f.name = c_.ident();
      declare_name(f.name, nloc);
    }
    f.params = params();
    bool saw_visibility = false;
    while (true) {
      const Token& a = c_.peek();
      if (a.kind != TokKind::Ident) break;
      if (a.text == "public" || a.text == "external" || a.text == "internal" || a.text == "private") {
        f.visibility = a.text == "public"     ? Visibility::Public
                       : a.text == "external" ? Visibility::External
                                              : Visibility::Internal;
        saw_visibility = true;
        c_.next();
      } else if (a.text == "view" || a.text == "pure" || a.text == "payable" || a.text == "virtual" ||
                 a.text == "override" || a.text == "nonpayable") {
        c_.next();
      } else if (a.text == "returns") {
        c_.next();
        c_.expect("(");
        f.return_type = parse_type();
        if (*f.return_type != Type::Uint && *f.return_type != Type::Bool && *f.return_type != Type::Address) {
          throw TypeError("functions may only return scalars", a.loc);
        }
        if (c_.peek().kind == TokKind::Ident) c_.next();
        c_.expect(")");
      } else {
        f.modifiers.push_back(a.text);
        c_.next();
        if (c_.accept("(")) c_.expect(")");
      }
    }
    if (!saw_visibility && !f.is_constructor) f.visibility = Visibility::Public;
    if (!c_.at("{")) c_.fail({"{"});
    if (f.is_constructor) {
      pending_.push_back({PendingBody::Constructor, 0, c_.pos()});
      skip_block();
      ir_.constructor = std::move(f);
    } else {
      pending_.push_back({PendingBody::Function, ir_.functions.size(), c_.pos()});
      skip_block();
      ir_.functions.push_back(std::move(f));
    }
  }

  // ---- bodies

  struct Scope {
    const FunctionIr* fn = nullptr;
    std::vector<Param> locals;
    std::set<std::string> all_locals;
    bool in_modifier = false;
  };

  ExprPtr expr(Scope& s) {
    ExprContext ctx;
    ctx.ir = &ir_;
    ctx.fn = s.fn;
    ctx.locals = s.locals;
    return parse_expression(tokens(), pos_, ctx);
  }

  const std::vector<Token>& tokens() const { return toks_ref(); }
  const std::vector<Token>& toks_ref() const { return *toks_; }

  void body(const PendingBody& b) {
    c_.seek(b.begin);
    Scope s;
    switch (b.kind) {
      case PendingBody::StateInit: {
        auto e = expr(s);
        auto& v = ir_.state_vars[b.index];
        if (e->type != v.type) throw TypeError("initializer type mismatch for " + v.name, e->loc);
        v.init = e;
        return;
      }
      case PendingBody::Modifier: {
        s.in_modifier = true;
        auto& m = ir_.modifiers[b.index];
        m.body = block(s);
        return;
      }
      case PendingBody::Constructor: {
        s.fn = &*ir_.constructor;
        auto stmts = block(s);
        ir_.constructor->body = std::move(stmts);
        ir_.constructor->end_line = last_close_line_;
        return;
      }
      case PendingBody::Function: {
        s.fn = &ir_.functions[b.index];
        auto stmts = block(s);
        ir_.functions[b.index].body = std::move(stmts);
        ir_.functions[b.index].end_line = last_close_line_;
        return;
      }
    }
  }

  std::vector<StmtPtr> block(Scope& s) {
    c_.expect("{");
    const auto saved = s.locals.size();
    std::vector<StmtPtr> out;
    while (!c_.at("}")) {
      if (c_.at_end()) c_.fail({"}"});
      statement(s, out);
    }
    last_close_line_ = c_.next().loc.line;
    s.locals.resize(saved);
    return out;
  }

  // Parses a statement or a braced block (flattened when braced).
  std::vector<StmtPtr> sub_statement(Scope& s) {
    if (c_.at("{")) return block(s);
    std::vector<StmtPtr> out;
    const auto saved = s.locals.size();
    statement(s, out);
    s.locals.resize(saved);
    return out;
  }

  StmtPtr make(StmtKind k, Loc loc) {
    auto st = std::make_shared<Stmt>();
    st->kind = k;
    st->loc = loc;
    return st;
  }

  void check_lvalue(const ExprPtr& e) {
    if (e->kind == ExprKind::Var && e->type != Type::Map1 && e->type != Type::Map2) return;
    if (e->kind == ExprKind::Index) return;
    throw TypeError("expression is not assignable", e->loc);
  }

  void statement(Scope& s, std::vector<StmtPtr>& out) {
    const Token& tk = c_.peek();
    const Loc loc = tk.loc;
    if (tk.kind == TokKind::Punct && tk.text == "{") {
      auto inner = block(s);
      out.insert(out.end(), inner.begin(), inner.end());
      return;
    }
    if (tk.kind != TokKind::Ident) c_.fail({"statement"});
    const std::string& w = tk.text;
    if (w == "_" && c_.at(";", 1)) {
      if (!s.in_modifier) throw ParseError("'_' outside a modifier", loc);
      c_.next();
      c_.next();
      out.push_back(make(StmtKind::Placeholder, loc));
      return;
    }
    if (w == "if") {
      c_.next();
      auto st = make(StmtKind::If, loc);
      c_.expect("(");
      st->expr = expr(s);
      if (st->expr->type != Type::Bool) throw TypeError("if condition must be bool", st->expr->loc);
      c_.expect(")");
      st->body = sub_statement(s);
      if (c_.accept("else")) st->else_body = sub_statement(s);
      out.push_back(st);
      return;
    }
    if (w == "while") {
      const Token& wt = c_.next();
      auto st = make(StmtKind::While, loc);
      st->unroll = 4;
      if (wt.unroll > 0) st->unroll = wt.unroll;
      const Token& lp = c_.expect("(");
      if (lp.unroll > 0) st->unroll = lp.unroll;
      st->expr = expr(s);
      if (st->expr->type != Type::Bool) throw TypeError("while condition must be bool", st->expr->loc);
      c_.expect(")");
      st->body = sub_statement(s);
      out.push_back(st);
      return;
    }
    if (w == "require" || w == "assert") {
      c_.next();
      auto st = make(StmtKind::Require, loc);
      c_.expect("(");
      st->expr = expr(s);
      if (st->expr->type != Type::Bool) throw TypeError(w + " condition must be bool", st->expr->loc);
      if (c_.accept(",")) {
        if (c_.peek().kind != TokKind::String) c_.fail({"string"});
        st->message = c_.next().text;
      }
      c_.expect(")");
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (w == "revert") {
      c_.next();
      auto st = make(StmtKind::Require, loc);
      st->expr = make_bool(false, loc);
      c_.expect("(");
      if (c_.peek().kind == TokKind::String) st->message = c_.next().text;
      c_.expect(")");
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (w == "return") {
      c_.next();
      auto st = make(StmtKind::Return, loc);
      if (s.in_modifier || !s.fn) throw ParseError("return outside a function", loc);
      if (!c_.at(";")) {
        st->expr = expr(s);
        if (!s.fn->return_type) throw TypeError(s.fn->name + " does not return a value", loc);
        if (st->expr->type != *s.fn->return_type) throw TypeError("return type mismatch", st->expr->loc);
      } else if (s.fn->return_type) {
        throw TypeError(s.fn->name + " must return a value", loc);
      }
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (w == "delete") {
      c_.next();
      auto st = make(StmtKind::Delete, loc);
      st->lhs = expr(s);
      check_lvalue(st->lhs);
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (w == "for" || w == "do" || w == "struct" || w == "emit" || w == "assembly" || w == "unchecked") {
      throw ParseError("unsupported construct '" + w + "'", loc, {"statement"});
    }
    if (at_type() && !(w == "address" && c_.at("(", 1))) {
      const Type t = parse_type();
      if (t == Type::Map1 || t == Type::Map2) throw TypeError("local mappings are not supported", loc);
      c_.accept("memory");
      const Loc nloc = c_.peek().loc;
      const std::string name = c_.ident();
      if (kReserved.count(name)) throw ParseError("reserved word " + name, nloc, {"identifier"});
      if (!s.all_locals.insert(name).second) throw TypeError("duplicate local " + name, nloc);
      if (s.fn) {
        for (const auto& p : s.fn->params) {
          if (p.name == name) throw TypeError("local shadows parameter " + name, nloc);
        }
      }
      auto st = make(StmtKind::LocalDecl, loc);
      st->name = name;
      st->type = t;
      if (c_.accept("=")) {
        st->expr = expr(s);
        if (st->expr->type != t) throw TypeError("initializer type mismatch for " + name, st->expr->loc);
      }
      c_.expect(";");
      s.locals.push_back({name, t});
      out.push_back(st);
      return;
    }
    // assignment, increment or call
    auto e = expr(s);
    if (c_.at("=") || c_.at("+=") || c_.at("-=") || c_.at("*=") || c_.at("/=")) {
      const std::string op = c_.next().text;
      check_lvalue(e);
      auto st = make(StmtKind::Assign, loc);
      st->lhs = e;
      st->expr = expr(s);
      st->assign_op = op == "=" ? AssignOp::Set : op == "+=" ? AssignOp::Add : op == "-=" ? AssignOp::Sub
                                            : op == "*=" ? AssignOp::Mul
                                                         : AssignOp::Div;
      if (st->assign_op == AssignOp::Set) {
        if (st->expr->type != e->type) throw TypeError("assignment type mismatch", st->expr->loc);
      } else if (e->type != Type::Uint || st->expr->type != Type::Uint) {
        throw TypeError("compound assignment needs uint operands", st->expr->loc);
      }
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (c_.at("++") || c_.at("--")) {
      const bool inc = c_.next().text == "++";
      check_lvalue(e);
      if (e->type != Type::Uint) throw TypeError("++/-- need a uint", e->loc);
      auto st = make(StmtKind::Assign, loc);
      st->lhs = e;
      st->expr = make_int(1, loc);
      st->assign_op = inc ? AssignOp::Add : AssignOp::Sub;
      c_.expect(";");
      out.push_back(st);
      return;
    }
    if (e->kind != ExprKind::Call && e->kind != ExprKind::TokenCall) {
      c_.fail({"=", "+=", "-=", "*=", "/=", "++", "--", ";"});
    }
    c_.expect(";");
    auto st = make(StmtKind::ExprStmt, loc);
    st->expr = e;
    out.push_back(st);
  }

  void collect_calls(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (e->kind == ExprKind::Call) out.insert(e->name);
    for (const auto& a : e->args) collect_calls(a, out);
  }
  void collect_calls(const std::vector<StmtPtr>& body, std::set<std::string>& out) {
    for (const auto& s : body) {
      collect_calls(s->lhs, out);
      collect_calls(s->expr, out);
      collect_calls(s->body, out);
      collect_calls(s->else_body, out);
    }
  }

  void check_recursion() {
    std::map<std::string, std::set<std::string>> graph;
    for (const auto& f : ir_.functions) {
      auto& callees = graph[f.name];
      collect_calls(f.body, callees);
      for (const auto& m : f.modifiers) {
        if (const auto* md = ir_.find_modifier(m)) collect_calls(md->body, callees);
      }
    }
    std::map<std::string, int> color;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
      color[n] = 1;
      for (const auto& m : graph[n]) {
        if (color[m] == 1) throw TypeError("recursive call to " + m + " is not supported", ir_.find_function(m)->loc);
        if (color[m] == 0) dfs(m);
      }
      color[n] = 2;
    };
    for (const auto& f : ir_.functions) {
      if (color[f.name] == 0) dfs(f.name);
    }
  }

  std::size_t pos_;
  Cursor c_;
  ContractIr& ir_;
  const std::vector<Token>* toks_ = nullptr;
  std::set<std::string> names_;
  std::vector<PendingBody> pending_;
  int last_close_line_ = 0;

 public:
  void set_tokens(const std::vector<Token>* t) { toks_ = t; }
};

void extract_annotations(ContractIr& ir, const std::vector<Annotation>& comments) {
  for (const auto& c : comments) {
    ir.comments.push_back(c);
    if (c.text.rfind("//", 0) != 0) continue;
    const std::string body = trim(c.text.substr(2));
    if (body.rfind("@inv:", 0) == 0) {
      ir.inline_candidates.push_back({c.line, trim(body.substr(5))});
    } else if (body.rfind("@expect-bug:", 0) == 0) {
      ir.expected_bugs.push_back({c.line, trim(body.substr(12))});
    } else if (body.rfind("@gas-cap", 0) == 0) {
      try {
        ir.gas_cap = std::stoll(body.substr(8));
      } catch (const std::exception&) {
        throw ParseError("malformed @gas-cap annotation", {c.line, 1}, {"@gas-cap N"});
      }
    }
  }
}

}  // namespace

ContractIr parse(const SourceFile& source) {
  LexResult lr = lex(source.text());
  ContractIr ir;
  ir.num_lines = static_cast<int>(source.lines.size());
  ContractParser p(lr.tokens, ir);
  p.set_tokens(&lr.tokens);
  p.run();
  extract_annotations(ir, lr.comments);
  return ir;
}

ContractIr declare_token_stub(ContractIr ir, const std::string& name) {
  if (ir.find_token(name) || ir.find_state(name) || ir.find_function(name) || ir.find_modifier(name)) {
    throw DuplicateDecl(name);
  }
  VarDecl v;
  v.name = name;
  v.type = Type::Token;
  ir.tokens.push_back(v);
  return ir;
}

std::vector<Param> locals_in_scope(const FunctionIr& fn, int line) {
  std::vector<Param> out;
  std::function<bool(const std::vector<StmtPtr>&)> walk = [&](const std::vector<StmtPtr>& body) -> bool {
    const auto saved = out.size();
    for (const auto& s : body) {
      if (s->synthetic) {
        if (s->kind == StmtKind::LocalDecl) out.push_back({s->name, s->type});
        continue;
      }
      if (s->loc.line > line) return true;
      if (s->kind == StmtKind::LocalDecl) out.push_back({s->name, s->type});
      if (s->kind == StmtKind::If || s->kind == StmtKind::While) {
        // enter a nested block only when the line lies inside it
        const auto mark = out.size();
        if (walk(s->body)) return true;
        out.resize(mark);
        if (walk(s->else_body)) return true;
        out.resize(mark);
      }
    }
    (void)saved;
    return false;
  };
  walk(fn.body);
  return out;
}

// ---------------------------------------------------------------- printing

std::string render_expr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntLit: return std::to_string(e.value);
    case ExprKind::BoolLit: return e.value ? "true" : "false";
    case ExprKind::AddressLit: return "address(" + std::to_string(e.value) + ")";
    case ExprKind::Var: return e.name;
    case ExprKind::MsgSender: return "msg.sender";
    case ExprKind::Timestamp: return "block.timestamp";
    case ExprKind::This: return "address(this)";
    case ExprKind::Index: {
      std::string s = render_expr(*e.args[0]) + "[" + render_expr(*e.args[1]) + "]";
      if (e.args.size() == 3) s += "[" + render_expr(*e.args[2]) + "]";
      return s;
    }
    case ExprKind::Binary:
      return "(" + render_expr(*e.args[0]) + " " + binop_text(e.op) + " " + render_expr(*e.args[1]) + ")";
    case ExprKind::Not: return "!" + render_expr(*e.args[0]);
    case ExprKind::Call:
    case ExprKind::TokenCall: {
      std::string s = e.kind == ExprKind::Call ? e.name : e.name + "." + e.method;
      s += "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += render_expr(*e.args[i]);
      }
      return s + ")";
    }
    case ExprKind::Old: return "Old(" + render_expr(*e.args[0]) + ")";
    case ExprKind::SumMapping: return "SumMapping(" + e.name + ")";
    case ExprKind::KScaled:
      if (e.args.empty()) return "k";
      return "(" + render_expr(*e.args[0]) + " * k)";
  }
  return "?";
}

namespace {

class Printer {
 public:
  std::string out;

  void at_line(int line) {
    if (line <= 0) return;
    while (cur_ < line) {
      out += '\n';
      ++cur_;
      fresh_ = true;
    }
  }
  void put(const std::string& s, int indent) {
    if (fresh_) {
      out += std::string(static_cast<std::size_t>(indent) * 2, ' ');
      fresh_ = false;
    } else if (!out.empty() && out.back() != '\n') {
      out += ' ';
    }
    out += s;
  }
  void finish() {
    if (out.empty() || out.back() != '\n') out += '\n';
  }

  void stmts(const std::vector<StmtPtr>& body, int indent) {
    for (const auto& s : body) stmt(*s, indent);
  }

  void stmt(const Stmt& s, int indent) {
    if (!s.synthetic) at_line(s.loc.line);
    switch (s.kind) {
      case StmtKind::LocalDecl:
        put(std::string(type_name(s.type)) + " " + s.name + (s.expr ? " = " + render_expr(*s.expr) : "") + ";", indent);
        break;
      case StmtKind::Assign: {
        static const char* ops[] = {"=", "+=", "-=", "*=", "/="};
        put(render_expr(*s.lhs) + " " + ops[static_cast<int>(s.assign_op)] + " " + render_expr(*s.expr) + ";", indent);
        break;
      }
      case StmtKind::If:
        put("if (" + render_expr(*s.expr) + ") {", indent);
        stmts(s.body, indent + 1);
        put("}", indent);
        if (!s.else_body.empty()) {
          put("else {", indent);
          stmts(s.else_body, indent + 1);
          put("}", indent);
        }
        break;
      case StmtKind::While:
        put("/*@unroll " + std::to_string(s.unroll) + "*/ while (" + render_expr(*s.expr) + ") {", indent);
        stmts(s.body, indent + 1);
        put("}", indent);
        break;
      case StmtKind::Require:
        put("require(" + render_expr(*s.expr) + (s.message.empty() ? "" : ", \"" + s.message + "\"") + ");", indent);
        break;
      case StmtKind::Return:
        put(s.expr ? "return " + render_expr(*s.expr) + ";" : "return;", indent);
        break;
      case StmtKind::ExprStmt:
        put(render_expr(*s.expr) + ";", indent);
        break;
      case StmtKind::Delete:
        put("delete " + render_expr(*s.lhs) + ";", indent);
        break;
      case StmtKind::Placeholder:
        put("_;", indent);
        break;
      case StmtKind::Check:
        put("/*@check " + std::to_string(s.candidate) + ": " + render_expr(*s.expr) + "*/", indent);
        break;
      case StmtKind::LoopExit:
        put("/*@loop-exit " + render_expr(*s.expr) + "*/", indent);
        break;
    }
  }

  void function(const FunctionIr& f) {
    at_line(f.loc.line);
    std::string head = f.is_constructor ? "constructor(" : "function " + f.name + "(";
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      if (i) head += ", ";
      head += std::string(type_name(f.params[i].type)) + " " + f.params[i].name;
    }
    head += ")";
    if (!f.is_constructor) {
      head += f.visibility == Visibility::Public ? " public" : f.visibility == Visibility::External ? " external" : " internal";
    }
    for (const auto& m : f.modifiers) head += " " + m;
    if (f.return_type) head += std::string(" returns (") + type_name(*f.return_type) + ")";
    put(head + " {", 1);
    stmts(f.body, 2);
    at_line(f.end_line);
    put("}", 1);
  }

 private:
  int cur_ = 1;
  bool fresh_ = true;
};

}  // namespace

std::string pretty_print(const ContractIr& ir) {
  Printer p;
  p.at_line(ir.loc.line);
  p.put("contract " + ir.name + " {", 0);
  // members in source order
  struct Item {
    int line;
    int order;
    std::function<void()> emit;
  };
  std::vector<Item> items;
  int order = 0;
  for (const auto& t : ir.tokens) {
    items.push_back({t.loc.line, order++, [&p, &t] {
                       p.at_line(t.loc.line);
                       p.put("IERC20 " + t.name + ";", 1);
                     }});
  }
  for (const auto& v : ir.state_vars) {
    items.push_back({v.loc.line, order++, [&p, &v] {
                       p.at_line(v.loc.line);
                       p.put(std::string(type_name(v.type)) + " " + v.name + (v.init ? " = " + render_expr(*v.init) : "") + ";", 1);
                     }});
  }
  for (const auto& m : ir.modifiers) {
    items.push_back({m.loc.line, order++, [&p, &m] {
                       p.at_line(m.loc.line);
                       p.put("modifier " + m.name + " {", 1);
                       p.stmts(m.body, 2);
                       p.put("}", 1);
                     }});
  }
  if (ir.constructor) {
    items.push_back({ir.constructor->loc.line, order++, [&p, &ir] { p.function(*ir.constructor); }});
  }
  for (const auto& f : ir.functions) {
    items.push_back({f.loc.line, order++, [&p, &f] { p.function(f); }});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    const int la = a.line <= 0 ? 1 << 30 : a.line;
    const int lb = b.line <= 0 ? 1 << 30 : b.line;
    return la < lb;
  });
  for (const auto& it : items) it.emit();
  p.at_line(ir.end_line);
  p.put("}", 0);
  p.finish();
  return p.out;
}

}  // namespace solinv
