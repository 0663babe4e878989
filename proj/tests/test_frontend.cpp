#include <doctest.h>

#include "solinv/frontend.hpp"

using namespace solinv;

namespace {
std::string fixture(const std::string& name) { return std::string(SOLINV_FIXTURES) + "/" + name; }
}  // namespace

TEST_CASE("single uint state variable") {
  auto ir = parse(SourceFile::from_text("contract C {\n  uint totalSupply;\n}\n"));
  REQUIRE(ir.state_vars.size() == 1);
  CHECK(ir.state_vars[0].name == "totalSupply");
  CHECK(ir.state_vars[0].type == Type::Uint);
  CHECK(ir.state_vars[0].loc.line == 2);
}

TEST_CASE("training example shape") {
  auto ir = parse(SourceFile::load(fixture("training_example.msol")));
  int maps = 0, uints = 0;
  for (const auto& v : ir.state_vars) {
    maps += v.type == Type::Map1;
    uints += v.type == Type::Uint;
  }
  CHECK(maps == 1);
  CHECK(uints == 2);
  CHECK(ir.functions.size() == 2);
  std::vector<int> lines;
  for (const auto& c : ir.comments) {
    if (c.text.find("@expect") == std::string::npos) lines.push_back(c.line);
  }
  CHECK(lines == std::vector<int>{2, 4, 11});
  const auto* f = ir.find_function("transfer");
  REQUIRE(f);
  REQUIRE(f->body.size() == 2);
  CHECK(f->body[0]->loc.line == 7);
  CHECK(f->body[1]->loc.line == 8);
  CHECK(f->end_line == 9);
}

TEST_CASE("syntax error carries its line") {
  try {
    parse(SourceFile::from_text("contract C {\n  uint x;\n  function f( {\n  }\n}\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.loc.line == 3);
    CHECK(!e.expected.empty());
  }
}

TEST_CASE("type errors") {
  CHECK_THROWS_AS(parse(SourceFile::from_text("contract C { uint x; function f() public { x = y; } }")), TypeError);
  CHECK_THROWS_AS(parse(SourceFile::from_text("contract C { uint x; bool b; function f() public { x = b; } }")),
                  TypeError);
  CHECK_THROWS_AS(parse(SourceFile::from_text(
                      "contract C { mapping(address => uint) m; uint x; function f() public { x = m + 1; } }")),
                  TypeError);
  CHECK_THROWS_AS(parse(SourceFile::from_text("contract C { uint x; uint x; }")), TypeError);
}

TEST_CASE("recursion is rejected") {
  CHECK_THROWS_AS(parse(SourceFile::from_text(
                      "contract C { uint x;\n function f() internal { g(); }\n function g() public { f(); } }")),
                  TypeError);
}

TEST_CASE("token stubs") {
  auto ir = parse(SourceFile::from_text("contract V {\n  uint price;\n}\n"));
  ir = declare_token_stub(ir, "token0");
  ir = declare_token_stub(ir, "token1");
  CHECK(ir.tokens.size() == 2);
  CHECK_THROWS_AS(declare_token_stub(ir, "token0"), DuplicateDecl);
  CHECK_THROWS_AS(declare_token_stub(ir, "price"), DuplicateDecl);
}

TEST_CASE("annotations and unroll hints") {
  auto ir = parse(SourceFile::load(fixture("deposit_queue.msol")));
  REQUIRE(ir.expected_bugs.size() == 1);
  CHECK(ir.expected_bugs[0].text == "14+");
  const auto* f = ir.find_function("processQueuedDeposits");
  REQUIRE(f);
  CHECK(f->body[3]->kind == StmtKind::While);
  CHECK(f->body[3]->unroll == 4);
  auto w = parse(SourceFile::from_text("contract C { uint x;\n function f() public { /*@unroll 2*/ while (x < 3) { x += 1; } } }"));
  CHECK(w.functions[0].body[0]->unroll == 2);
}

TEST_CASE("pretty printing keeps lines and reparses") {
  for (const char* name : {"visor.msol", "timelock.msol", "training_example.msol", "erc20.msol", "bridge.msol",
                           "deposit_queue.msol", "counter.msol"}) {
    CAPTURE(name);
    auto ir = parse(SourceFile::load(fixture(name)));
    const std::string printed = pretty_print(ir);
    auto again = parse(SourceFile::from_text(printed));
    CHECK(pretty_print(again) == printed);
    REQUIRE(again.functions.size() == ir.functions.size());
    for (std::size_t i = 0; i < ir.functions.size(); ++i) {
      CHECK(again.functions[i].loc.line == ir.functions[i].loc.line);
      REQUIRE(again.functions[i].body.size() == ir.functions[i].body.size());
      for (std::size_t j = 0; j < ir.functions[i].body.size(); ++j) {
        CHECK(again.functions[i].body[j]->loc.line == ir.functions[i].body[j]->loc.line);
      }
    }
  }
}

TEST_CASE("parsing is deterministic") {
  auto a = parse(SourceFile::load(fixture("timelock.msol")));
  auto b = parse(SourceFile::load(fixture("timelock.msol")));
  CHECK(pretty_print(a) == pretty_print(b));
}
