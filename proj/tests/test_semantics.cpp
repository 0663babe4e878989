#include <doctest.h>

#include "helpers.hpp"

using namespace solinv;
using testing::load;
using testing::tx;

namespace {
std::int64_t slot(const TransitionSystem& ts, const ContractState& s, const std::string& name) {
  for (std::size_t i = 0; i < ts.layout.slots.size(); ++i) {
    if (ts.layout.slots[i].name == name) return s.values[i];
  }
  FAIL("no slot " << name);
  return -1;
}
}  // namespace

TEST_CASE("state layout") {
  auto ts = lower(load("visor"), Domain{});
  // price, shares[0..2], token0 (3 + supply), token1 (3 + supply), timestamp
  CHECK(ts.layout.slots.size() == 1 + 3 + 4 + 4 + 1);
  CHECK(ts.layout.slots.back().name == "block.timestamp");
  CHECK(ts.find_action("token1.transfer"));
  CHECK(ts.find_action("deposit"));
  CHECK_FALSE(ts.find_action("getRealPrice"));
}

TEST_CASE("empty transaction list runs the constructor only") {
  auto ts = lower(load("visor"), Domain{});
  auto t = run(ts, {}, {});
  CHECK_FALSE(t.init_reverted);
  REQUIRE(t.states.size() == 1);
  CHECK(slot(ts, t.states[0], "price") == 1);
  CHECK(slot(ts, t.states[0], "token0.balance[2]") == 10);
  CHECK(slot(ts, t.states[0], "token1.supply") == 10);
  CHECK_FALSE(t.violation);
}

TEST_CASE("visor price jump violates the deposit assertion") {
  auto ts = lower(testing::with_candidate(load("visor"), "visor", 0), Domain{});
  auto t = run(ts, {}, {tx("token1.transfer", 0, {2, 20}), tx("deposit", 0, {0, 0, 0})});
  REQUIRE(t.violation);
  CHECK(t.violation->line == 15);
  CHECK(t.violation->step == 2);
  CHECK(slot(ts, t.states[1], "token1.balance[2]") == 30);

  // a smaller injection keeps the price within twice its old value
  auto ok = run(ts, {}, {tx("token1.transfer", 0, {2, 10}), tx("deposit", 0, {0, 0, 0})});
  CHECK_FALSE(ok.violation);
}

TEST_CASE("reverts roll back the whole state") {
  auto ts = lower(load("erc20"), Domain{});
  auto t = run(ts, {5}, {tx("transfer", 1, {0, 1}, 7), tx("transfer", 0, {1, 2}, 3)});
  REQUIRE(t.steps.size() == 3);
  CHECK(t.steps[1].status == StepResult::Status::Reverted);
  CHECK(t.steps[1].reason == "insufficient balance");
  CHECK(t.states[1] == t.states[0]);
  CHECK(slot(ts, t.states[1], "block.timestamp") == 0);
  CHECK(t.steps[2].status == StepResult::Status::Ok);
  CHECK(slot(ts, t.states[2], "balances[1]") == 2);
  CHECK(slot(ts, t.states[2], "block.timestamp") == 3);
}

TEST_CASE("wrap and revert arithmetic") {
  auto ir = load("erc20_wrap");
  Domain wrap;
  wrap.width = 4;
  wrap.arith = ArithMode::Wrap;
  auto ts = lower(ir, wrap);
  auto t = run(ts, {0}, {tx("transfer", 0, {1, 1})});
  CHECK(slot(ts, t.states[1], "balances[0]") == 15);
  CHECK(slot(ts, t.states[1], "balances[1]") == 1);

  Domain rev = wrap;
  rev.arith = ArithMode::Revert;
  auto ts2 = lower(ir, rev);
  auto t2 = run(ts2, {0}, {tx("transfer", 0, {1, 1})});
  CHECK(t2.steps[1].status == StepResult::Status::Reverted);
}

TEST_CASE("global invariant checked after every transaction") {
  auto ir = testing::with_candidate(load("erc20_wrap"), "erc20_wrap", 0);
  Domain d;
  d.width = 4;
  d.arith = ArithMode::Wrap;
  auto ts = lower(ir, d);
  auto t = run(ts, {0}, {tx("transfer", 0, {1, 1})});
  REQUIRE(t.violation);
  CHECK(t.violation->step == 1);
  CHECK(t.violation->kind == CheckKind::Global);
}

TEST_CASE("timelock ownership handover") {
  auto ts = lower(load("timelock"), Domain{});
  auto t = run(ts, {},
               {tx("votingToken.transfer", 0, {1, 5}), tx("startExecute", 1, {}, 1), tx("execute", 1, {5}, 1),
                tx("endExecute", 0, {}, 30)});
  for (std::size_t i = 1; i < t.steps.size(); ++i) CHECK(t.steps[i].status == StepResult::Status::Ok);
  CHECK(slot(ts, t.states.back(), "owner") == 1);
  CHECK(slot(ts, t.states.back(), "sTime") == 0);
}

TEST_CASE("literal outside the domain is unsupported") {
  auto ir = parse(SourceFile::from_text("contract C { uint x; function f() public { x = 300; } }"));
  CHECK_THROWS_AS(lower(ir, Domain{}), UnsupportedConstruct);
  Domain wide;
  wide.width = 10;
  CHECK_NOTHROW(lower(ir, wide));
}

TEST_CASE("ill-typed transactions are rejected") {
  auto ts = lower(load("erc20"), Domain{});
  CHECK_THROWS_AS(run(ts, {5}, {tx("transfer", 0, {3, 1})}), std::invalid_argument);
  CHECK_THROWS_AS(run(ts, {5}, {tx("transfer", 2, {1, 1})}), std::invalid_argument);
  CHECK_THROWS_AS(run(ts, {5}, {tx("nope", 0, {})}), std::invalid_argument);
  CHECK_THROWS_AS(run(ts, {}, {}), std::invalid_argument);
}

TEST_CASE("loop bound exceeded reverts") {
  auto ir = parse(SourceFile::from_text(
      "contract C { uint n; function f(uint m) public { /*@unroll 2*/ while (n < m) { n += 1; } } }"));
  auto ts = lower(ir, Domain{});
  auto t = run(ts, {}, {tx("f", 0, {2}), tx("f", 0, {5})});
  CHECK(t.steps[1].status == StepResult::Status::Ok);
  CHECK(t.steps[2].status == StepResult::Status::Reverted);
  CHECK(t.steps[2].reason == "loop bound exceeded");
}
