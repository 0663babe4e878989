#include "solinv/invariants.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "solinv/frontend.hpp"

namespace solinv {

std::string ProgramPoint::render() const {
  return std::to_string(line) + (placement == Placement::AfterLine ? "+" : "");
}

std::optional<ProgramPoint> ProgramPoint::parse(const std::string& text) {
  static const std::regex re(R"(^\s*([1-9][0-9]{0,8})(\+?)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  ProgramPoint p;
  p.line = std::stoi(m[1].str());
  p.placement = m[2].length() ? Placement::AfterLine : Placement::AtLine;
  return p;
}

const char* kind_name(CandidateKind k) {
  switch (k) {
    case CandidateKind::Assertion: return "Assertion";
    case CandidateKind::Assume: return "Assume";
    case CandidateKind::Ensures: return "Ensures";
    case CandidateKind::Require: return "Require";
    case CandidateKind::ModifierInstrumentation: return "ModifierInstrumentation";
    case CandidateKind::GlobalInvariant: return "GlobalInvariant";
  }
  return "?";
}

Rational Rational::from_double(double v) {
  if (!(v > 0) || !std::isfinite(v) || v > 1e9) throw std::invalid_argument("k must be a positive number");
  Rational r;
  r.den = 1000;
  r.num = static_cast<std::int64_t>(std::llround(v * 1000));
  if (r.num == 0) throw std::invalid_argument("k too small");
  const auto g = std::gcd(r.num, r.den);
  r.num /= g;
  r.den /= g;
  return r;
}

std::string Rational::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

std::string InvariantCandidate::render() const { return anchor.render() + " " + raw_text; }

bool InvariantCandidate::is_state_predicate() const {
  if (!expr) return false;
  if (kind != CandidateKind::Assertion && kind != CandidateKind::GlobalInvariant) return false;
  return solinv::is_state_predicate(*expr);
}

SyntaxReject::SyntaxReject(Reason r, const std::string& detail)
    : std::runtime_error(std::string(reason_name(r)) + ": " + detail), reason(r) {}

const char* reason_name(SyntaxReject::Reason r) {
  switch (r) {
    case SyntaxReject::Reason::Unparseable: return "unparseable";
    case SyntaxReject::Reason::UnknownIdentifier: return "unknown identifier";
    case SyntaxReject::Reason::TypeError: return "type error";
    case SyntaxReject::Reason::AnchorOutOfRange: return "anchor out of range";
  }
  return "?";
}

const FunctionIr* enclosing_function(const ContractIr& ir, const ProgramPoint& p) {
  auto inside = [&](const FunctionIr& f) {
    if (p.placement == ProgramPoint::Placement::AfterLine) return f.loc.line <= p.line && p.line < f.end_line;
    return f.loc.line < p.line && p.line <= f.end_line;
  };
  if (ir.constructor && inside(*ir.constructor)) return &*ir.constructor;
  for (const auto& f : ir.functions) {
    if (inside(f)) return &f;
  }
  return nullptr;
}

namespace {

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

bool mentions(const Expr& e, ExprKind k) {
  if (e.kind == k) return true;
  return std::any_of(e.args.begin(), e.args.end(), [&](const ExprPtr& a) { return mentions(*a, k); });
}

bool mentions_local(const Expr& e) {
  if (e.kind == ExprKind::Var && e.scope == VarScope::Local) return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const ExprPtr& a) { return mentions_local(*a); });
}

void check_old_nesting(const Expr& e, bool inside_old) {
  if (e.kind == ExprKind::Old) {
    if (inside_old) throw TypeError("nested Old() is not supported", e.loc);
    if (mentions_local(*e.args[0])) throw TypeError("Old() cannot refer to locals", e.loc);
    check_old_nesting(*e.args[0], true);
    return;
  }
  for (const auto& a : e.args) check_old_nesting(*a, inside_old);
}

const std::set<std::string> kAttributes = {"public", "external", "internal", "private", "view",
                                           "pure",   "payable",  "virtual",  "override"};

class CandidateParser {
 public:
  CandidateParser(const ProgramPoint& a, const std::string& text, const ContractIr& ir, Rational k)
      : ir_(ir), lr_(lex(text, a.line)) {
    c_.anchor = a;
    c_.raw_text = text;
    c_.k = k;
  }

  InvariantCandidate run() {
    const Token& head = tok();
    if (head.kind != TokKind::Ident) fail_syntax("expected a template keyword");
    const std::string w = head.text;
    const FunctionIr* fn = enclosing_function(ir_, c_.anchor);
    if (w == "assert" || w == "Assume" || w == "assume" || w == "Ensures" || w == "ensures" || w == "require") {
      ++pos_;
      if (w == "assert") {
        c_.kind = fn ? CandidateKind::Assertion : CandidateKind::GlobalInvariant;
      } else if (w == "require") {
        c_.kind = CandidateKind::Require;
      } else if (w == "Assume" || w == "assume") {
        c_.kind = CandidateKind::Assume;
      } else {
        c_.kind = CandidateKind::Ensures;
      }
      if (c_.kind != CandidateKind::Assertion && c_.kind != CandidateKind::GlobalInvariant && !fn) {
        throw SyntaxReject(SyntaxReject::Reason::TypeError, std::string(kind_name(c_.kind)) + " needs an anchor inside a function");
      }
      condition(fn, c_.kind == CandidateKind::Require);
    } else if (w == "Invariant") {
      ++pos_;
      c_.kind = CandidateKind::GlobalInvariant;
      if (fn) {
        c_.loop_head = true;  // validated against the loop at instrument time
      }
      condition(c_.loop_head ? fn : nullptr, false);
    } else if (w == "modifier") {
      ++pos_;
      modifier_definition();
    } else if (w == "function") {
      ++pos_;
      modifier_application();
    } else {
      fail_syntax("unknown template '" + w + "'");
    }
    while (punct(";")) ++pos_;
    if (tok().kind != TokKind::End) fail_syntax("unexpected '" + tok().text + "' after the template");
    return c_;
  }

 private:
  const Token& tok() const { return lr_.tokens[std::min(pos_, lr_.tokens.size() - 1)]; }
  bool punct(const std::string& s) const { return tok().kind == TokKind::Punct && tok().text == s; }
  void expect(const std::string& s) {
    if (!punct(s)) fail_syntax("expected '" + s + "'");
    ++pos_;
  }
  [[noreturn]] void fail_syntax(const std::string& m) const {
    throw SyntaxReject(SyntaxReject::Reason::Unparseable, m);
  }

  ExprPtr expression(const FunctionIr* fn, bool candidate) {
    ExprContext ctx;
    ctx.ir = &ir_;
    ctx.fn = fn;
    ctx.candidate = candidate;
    ctx.k_num = c_.k.num;
    ctx.k_den = c_.k.den;
    if (fn) {
      const int upto = c_.anchor.placement == ProgramPoint::Placement::AfterLine ? c_.anchor.line : c_.anchor.line - 1;
      ctx.locals = locals_in_scope(*fn, upto);
    }
    return parse_expression(lr_.tokens, pos_, ctx);
  }

  void condition(const FunctionIr* fn, bool allow_message) {
    expect("(");
    c_.expr = expression(fn, true);
    if (c_.expr->type != Type::Bool) throw TypeError("candidate condition must be bool", c_.expr->loc);
    check_old_nesting(*c_.expr, false);
    if (allow_message && punct(",")) {
      ++pos_;
      if (tok().kind != TokKind::String) fail_syntax("expected a message string");
      c_.message = tok().text;
      ++pos_;
    }
    expect(")");
    if (fn) c_.function = fn->name;
  }

  void modifier_definition() {
    c_.kind = CandidateKind::ModifierInstrumentation;
    c_.modifier_definition = true;
    if (tok().kind != TokKind::Ident) fail_syntax("expected a modifier name");
    c_.modifier = tok().text;
    ++pos_;
    if (punct("(")) {
      ++pos_;
      expect(")");
    }
    expect("{");
    while (!punct("}")) {
      if (tok().kind == TokKind::End) fail_syntax("unterminated modifier body");
      if (tok().kind == TokKind::Ident && tok().text == "_") {
        ++pos_;
        expect(";");
        continue;
      }
      if (tok().kind != TokKind::Ident || (tok().text != "require" && tok().text != "assert")) {
        fail_syntax("modifier bodies may only hold require(...) guards");
      }
      ++pos_;
      expect("(");
      auto g = expression(nullptr, false);
      if (g->type != Type::Bool) throw TypeError("modifier guard must be bool", g->loc);
      if (punct(",")) {
        ++pos_;
        if (tok().kind != TokKind::String) fail_syntax("expected a message string");
        ++pos_;
      }
      expect(")");
      expect(";");
      c_.guards.push_back(g);
    }
    ++pos_;
  }

  void modifier_application() {
    c_.kind = CandidateKind::ModifierInstrumentation;
    if (tok().kind != TokKind::Ident) fail_syntax("expected a function name");
    c_.target_function = tok().text;
    ++pos_;
    if (!ir_.find_function(c_.target_function)) {
      throw SyntaxReject(SyntaxReject::Reason::UnknownIdentifier, "unknown function " + c_.target_function);
    }
    expect("(");
    int depth = 1;
    while (depth > 0) {
      if (tok().kind == TokKind::End) fail_syntax("unterminated parameter list");
      if (punct("(")) ++depth;
      if (punct(")")) --depth;
      ++pos_;
    }
    std::vector<std::string> mods;
    while (tok().kind == TokKind::Ident) {
      if (tok().text == "returns") {
        ++pos_;
        expect("(");
        while (!punct(")") && tok().kind != TokKind::End) ++pos_;
        expect(")");
        continue;
      }
      if (!kAttributes.count(tok().text)) mods.push_back(tok().text);
      ++pos_;
    }
    if (mods.size() != 1) fail_syntax("expected exactly one modifier on the signature");
    c_.modifier = mods[0];
    if (punct("{")) {
      int d = 0;
      do {
        if (tok().kind == TokKind::End) fail_syntax("unterminated body");
        if (punct("{")) ++d;
        if (punct("}")) --d;
        ++pos_;
      } while (d > 0);
    }
  }

  const ContractIr& ir_;
  LexResult lr_;
  std::size_t pos_ = 0;
  InvariantCandidate c_;
};

std::string normalize(std::string text) {
  text = trim(std::move(text));
  return text;
}

}  // namespace

InvariantCandidate parse_candidate(const ProgramPoint& anchor, const std::string& text, const ContractIr& ir,
                                   Rational k) {
  if (anchor.line < 1 || anchor.line > std::max(ir.num_lines, ir.end_line)) {
    throw SyntaxReject(SyntaxReject::Reason::AnchorOutOfRange, "line " + std::to_string(anchor.line));
  }
  try {
    CandidateParser p(anchor, normalize(text), ir, k);
    return p.run();
  } catch (const ParseError& e) {
    throw SyntaxReject(SyntaxReject::Reason::Unparseable, e.what());
  } catch (const TypeError& e) {
    const std::string msg = e.what();
    if (msg.find("unknown identifier") != std::string::npos) {
      throw SyntaxReject(SyntaxReject::Reason::UnknownIdentifier, msg);
    }
    throw SyntaxReject(SyntaxReject::Reason::TypeError, msg);
  }
}

InvariantCandidate parse_candidate(const std::string& text, const ContractIr& ir, Rational k) {
  static const std::regex re(R"(^\s*(\S+)\s+([\s\S]*)$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw SyntaxReject(SyntaxReject::Reason::Unparseable, "missing anchor");
  auto anchor = ProgramPoint::parse(m[1].str());
  if (!anchor) throw SyntaxReject(SyntaxReject::Reason::Unparseable, "malformed anchor '" + m[1].str() + "'");
  return parse_candidate(*anchor, m[2].str(), ir, k);
}

// ---------------------------------------------------------------- instrumentation

namespace {

struct Site {
  std::vector<StmtPtr>* body;
  std::size_t index;
  int depth;
};

void find_sites(std::vector<StmtPtr>& body, int line, int depth, std::vector<Site>& out) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    auto& s = body[i];
    if (!s->synthetic && s->loc.line == line) out.push_back({&body, i, depth});
    find_sites(s->body, line, depth + 1, out);
    find_sites(s->else_body, line, depth + 1, out);
  }
}

StmtPtr make_check(const InvariantCandidate& c, CheckKind kind, ExprPtr e) {
  auto s = std::make_shared<Stmt>();
  s->kind = StmtKind::Check;
  s->synthetic = true;
  s->loc = {c.anchor.line, 0};
  s->check_kind = kind;
  s->candidate = c.id;
  s->expr = std::move(e);
  s->message = c.message;
  return s;
}

// Replaces Old(e) by snapshot locals declared at function entry.
ExprPtr snapshot_old(const ExprPtr& e, FunctionIr& fn, int cand, std::vector<StmtPtr>& decls) {
  if (e->kind == ExprKind::Old) {
    const std::string name = "__old" + std::to_string(cand < 0 ? 0 : cand) + "_" + std::to_string(fn.snapshots.size());
    fn.snapshots.push_back(name);
    auto d = std::make_shared<Stmt>();
    d->kind = StmtKind::LocalDecl;
    d->synthetic = true;
    d->loc = fn.loc;
    d->name = name;
    d->type = e->type;
    d->expr = e->args[0];
    decls.push_back(d);
    auto v = std::make_shared<Expr>();
    v->kind = ExprKind::Var;
    v->type = e->type;
    v->loc = e->loc;
    v->name = name;
    v->scope = VarScope::Local;
    return v;
  }
  if (e->args.empty()) return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto& a : copy->args) a = snapshot_old(a, fn, cand, decls);
  return copy;
}

FunctionIr* mutable_function(ContractIr& ir, const std::string& name) {
  if (ir.constructor && ir.constructor->name == name) return &*ir.constructor;
  return ir.find_function(name);
}

std::size_t after_snapshots(const FunctionIr& fn) {
  std::size_t i = 0;
  while (i < fn.body.size() && fn.body[i]->synthetic && fn.body[i]->kind == StmtKind::LocalDecl) ++i;
  return i;
}

void insert_before_returns(std::vector<StmtPtr>& body, const StmtPtr& check) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    auto& s = body[i];
    if (s->kind == StmtKind::Return) {
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(i), clone(check));
      ++i;
      continue;
    }
    insert_before_returns(s->body, check);
    insert_before_returns(s->else_body, check);
  }
}

}  // namespace

ContractIr instrument(const ContractIr& src, const InvariantCandidate& c) {
  const std::string key = c.render();
  if (std::find(src.applied_candidates.begin(), src.applied_candidates.end(), key) != src.applied_candidates.end()) {
    throw std::invalid_argument("candidate already instrumented: " + key);
  }
  ContractIr ir = src;
  if (ir.constructor) ir.constructor->body = clone(ir.constructor->body);
  for (auto& f : ir.functions) f.body = clone(f.body);
  for (auto& m : ir.modifiers) m.body = clone(m.body);
  ir.global_checks = clone(ir.global_checks);
  ir.applied_candidates.push_back(key);

  const int line = c.anchor.line;
  const bool after = c.anchor.placement == ProgramPoint::Placement::AfterLine;

  if (c.kind == CandidateKind::ModifierInstrumentation && c.modifier_definition) {
    if (enclosing_function(ir, c.anchor)) throw AnchorMismatch("modifier definition anchored inside a function body");
    if (ir.find_modifier(c.modifier)) throw AnchorMismatch("modifier " + c.modifier + " is already declared");
    ModifierDecl m;
    m.name = c.modifier;
    m.loc = {line, 0};
    m.synthetic = true;
    for (const auto& g : c.guards) {
      auto r = std::make_shared<Stmt>();
      r->kind = StmtKind::Require;
      r->synthetic = true;
      r->loc = {line, 0};
      r->expr = g;
      m.body.push_back(r);
    }
    auto ph = std::make_shared<Stmt>();
    ph->kind = StmtKind::Placeholder;
    ph->synthetic = true;
    ph->loc = {line, 0};
    m.body.push_back(ph);
    ir.modifiers.push_back(std::move(m));
    return ir;
  }

  if (c.kind == CandidateKind::ModifierInstrumentation) {
    FunctionIr* f = ir.find_function(c.target_function);
    if (!f || after || f->loc.line != line) {
      throw AnchorMismatch("modifier application must sit on the signature line of " + c.target_function);
    }
    const ModifierDecl* m = ir.find_modifier(c.modifier);
    if (!m) throw AnchorMismatch("modifier " + c.modifier + " is not declared");
    std::vector<StmtPtr> prologue;
    for (const auto& s : m->body) {
      if (s->kind == StmtKind::Placeholder) break;
      if (s->kind == StmtKind::Require) {
        auto chk = make_check(c, CheckKind::Modifier, s->expr);
        chk->message = s->message;
        prologue.push_back(chk);
      } else {
        prologue.push_back(clone(s));
      }
    }
    f->body.insert(f->body.begin(), prologue.begin(), prologue.end());
    return ir;
  }

  if (c.kind == CandidateKind::GlobalInvariant && !c.loop_head) {
    if (enclosing_function(ir, c.anchor)) throw AnchorMismatch("global invariant anchored inside a function body");
    ir.global_checks.push_back(make_check(c, CheckKind::Global, c.expr));
    return ir;
  }

  FunctionIr* fn = c.function.empty() ? nullptr : mutable_function(ir, c.function);
  const FunctionIr* encl = enclosing_function(ir, c.anchor);
  if (!fn || !encl || encl->name != fn->name) throw AnchorMismatch("anchor " + c.anchor.render() + " is not inside " + c.function);

  std::vector<StmtPtr> decls;
  ExprPtr e = snapshot_old(c.expr, *fn, c.id, decls);

  if (c.loop_head) {
    std::vector<Site> sites;
    find_sites(fn->body, line, 0, sites);
    Site* loop = nullptr;
    for (auto& s : sites) {
      if ((*s.body)[s.index]->kind == StmtKind::While) loop = &s;
    }
    if (!loop) throw AnchorMismatch("Invariant() inside a function must sit on a loop line");
    (*loop->body)[loop->index]->head_checks.push_back(make_check(c, CheckKind::LoopHead, e));
  } else if (c.kind == CandidateKind::Assume) {
    fn->body.insert(fn->body.begin() + static_cast<std::ptrdiff_t>(after_snapshots(*fn)), make_check(c, CheckKind::Assume, e));
  } else if (c.kind == CandidateKind::Ensures) {
    auto chk = make_check(c, CheckKind::Ensures, e);
    insert_before_returns(fn->body, chk);
    if (fn->body.empty() || fn->body.back()->kind != StmtKind::Return) fn->body.push_back(clone(chk));
  } else {
    const CheckKind kind = c.kind == CandidateKind::Require ? CheckKind::Require : CheckKind::Assertion;
    auto chk = make_check(c, kind, e);
    if (after && line == fn->loc.line) {
      fn->body.insert(fn->body.begin() + static_cast<std::ptrdiff_t>(after_snapshots(*fn)), chk);
    } else {
      std::vector<Site> sites;
      find_sites(fn->body, line, 0, sites);
      if (sites.empty()) throw AnchorMismatch("no statement starts at line " + std::to_string(line));
      if (after) {
        const Site* best = &sites[0];
        for (const auto& s : sites) {
          if (s.depth >= best->depth) best = &s;
        }
        best->body->insert(best->body->begin() + static_cast<std::ptrdiff_t>(best->index + 1), chk);
      } else {
        const Site& first = sites[0];
        first.body->insert(first.body->begin() + static_cast<std::ptrdiff_t>(first.index), chk);
      }
    }
  }
  fn->body.insert(fn->body.begin(), decls.begin(), decls.end());
  return ir;
}

// ---------------------------------------------------------------- JSON

std::vector<CandidateSpec> parse_candidates_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_array()) throw std::invalid_argument("candidate file must hold a JSON array");
  std::vector<CandidateSpec> out;
  for (const auto& e : j) {
    CandidateSpec s;
    s.anchor = e.at("anchor").get<std::string>();
    s.text = e.at("text").get<std::string>();
    if (e.contains("k")) s.k = e.at("k").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CandidateSpec> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_candidates_json(ss.str());
}

std::string candidates_to_json(const std::vector<CandidateSpec>& specs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : specs) {
    nlohmann::json e{{"anchor", s.anchor}, {"text", s.text}};
    if (s.k) e["k"] = *s.k;
    j.push_back(e);
  }
  return j.dump(2);
}

}  // namespace solinv
