#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "solinv/ir.hpp"

namespace solinv {

struct SourceFile {
  std::string path;
  std::vector<std::string> lines;  // lines[0] is line 1

  static SourceFile from_text(std::string text, std::string path = "<memory>");
  static SourceFile load(const std::string& path);
  std::string text() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, Loc loc, std::vector<std::string> expected = {});
  Loc loc;
  std::vector<std::string> expected;
};

class TypeError : public std::runtime_error {
 public:
  TypeError(const std::string& msg, Loc loc);
  Loc loc;
};

class DuplicateDecl : public std::runtime_error {
 public:
  explicit DuplicateDecl(const std::string& name);
};

enum class TokKind { Ident, Number, String, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  std::int64_t number = 0;
  Loc loc;
  int unroll = 0;  // /*@unroll N*/ seen right before this token
};

struct LexResult {
  std::vector<Token> tokens;
  std::vector<Annotation> comments;
};

// Tokenizes MiniSol (also used for candidate text). Comments are collected,
// not emitted as tokens.
LexResult lex(const std::string& text, int first_line = 1);

ContractIr parse(const SourceFile& source);

// Expression parsing against a contract whose declarations are known. `fn`
// supplies parameters (nullptr = contract scope), `locals` the visible locals.
// Candidate-only forms (Old, SumMapping, k) are accepted when `candidate` is
// set; k = k_num / k_den.
struct ExprContext {
  const ContractIr* ir = nullptr;
  const FunctionIr* fn = nullptr;
  std::vector<Param> locals;
  bool candidate = false;
  std::int64_t k_num = 2;
  std::int64_t k_den = 1;
};
ExprPtr parse_expression(const std::vector<Token>& tokens, std::size_t& pos, const ExprContext& ctx);

// Adds an IERC20 stub named `name`.
ContractIr declare_token_stub(ContractIr ir, const std::string& name);

std::string pretty_print(const ContractIr& ir);
std::string render_expr(const Expr& e);

// Locals declared before `line` inside fn (including nested blocks that
// enclose the line), used to type candidate expressions.
std::vector<Param> locals_in_scope(const FunctionIr& fn, int line);

}  // namespace solinv
