#include <doctest.h>

#include "helpers.hpp"
#include "solinv/bmc.hpp"
#include "solinv/inductive.hpp"

using namespace solinv;
using testing::load;
using testing::tx;

TEST_CASE("visor counterexample") {
  auto ts = lower(testing::with_candidate(load("visor"), "visor", 0), Domain{});
  auto r = bmc(ts);
  REQUIRE(r.outcome == BmcOutcome::Counterexample);
  CHECK(r.txs == std::vector<Transaction>{tx("token1.transfer", 0, {2, 20}), tx("deposit", 0, {0, 0, 0})});
  REQUIRE(r.trace.violation);
  CHECK(r.trace.violation->line == 15);
}

namespace {
TransitionSystem counter_with(const std::string& text, int width = 8) {
  auto ir = load("counter");
  auto c = parse_candidate(text, ir);
  Domain d;
  d.width = width;
  return lower(instrument(ir, c), d);
}
}  // namespace

TEST_CASE("counter bound sensitivity") {
  auto ts = counter_with("2+ assert(x <= 1);");
  BmcConfig one;
  one.max_txs = 1;
  CHECK(bmc(ts, one).outcome == BmcOutcome::NoCounterexampleWithinBound);
  BmcConfig two;
  two.max_txs = 2;
  auto r = bmc(ts, two);
  REQUIRE(r.outcome == BmcOutcome::Counterexample);
  CHECK(r.txs == std::vector<Transaction>{tx("inc", 0, {}), tx("inc", 0, {})});
}

TEST_CASE("counter inductive outcomes") {
  auto le1 = inductive_check(counter_with("2+ assert(x <= 1);"), nullptr);
  CHECK(le1.outcome == InductiveOutcome::NotProven);
  auto ir = load("counter");
  auto c = parse_candidate("2+ assert(x <= 1);", ir);
  auto with_pred = inductive_check(lower(instrument(ir, c), Domain{}), state_predicate(c));
  CHECK(with_pred.outcome == InductiveOutcome::NotProven);
  REQUIRE(with_pred.witness);
  CHECK(with_pred.witness->obligation == "consecution(inc)");
  CHECK(with_pred.witness->pre->values[0] == 1);

  // a state predicate must already hold after construction, where x is 0
  auto ge1 = parse_candidate("5+ assert(x >= 1);", ir);
  auto ts_ge1 = lower(instrument(ir, ge1), Domain{});
  auto r = inductive_check(ts_ge1, state_predicate(ge1));
  CHECK(r.outcome == InductiveOutcome::NotProven);
  REQUIRE(r.witness);
  CHECK(r.witness->obligation == "init");
  CHECK(bmc(ts_ge1).outcome == BmcOutcome::NoCounterexampleWithinBound);

  auto ge0 = parse_candidate("5+ assert(x >= 0);", ir);
  auto p = inductive_check(lower(instrument(ir, ge0), Domain{}), state_predicate(ge0));
  CHECK(p.outcome == InductiveOutcome::Proven);
  REQUIRE(p.proof);
  CHECK(p.proof->obligations.size() == 2);
  CHECK(p.proof->digest.size() == 16);

  auto t = parse_candidate("5+ assert(true);", ir);
  CHECK(inductive_check(lower(instrument(ir, t), Domain{}), state_predicate(t)).outcome == InductiveOutcome::Proven);
}

TEST_CASE("erc20 supply invariant is inductive") {
  auto ir = load("erc20");
  auto c = parse_candidate("3+ assert(sumMapping(balances)==totalSupply);", ir);
  Domain d;
  d.width = 4;
  auto ts = lower(instrument(ir, c), d);
  auto r = inductive_check(ts, state_predicate(c));
  CHECK(r.outcome == InductiveOutcome::Proven);

  // enumeration: every state satisfying the predicate is preserved by every transfer
  const auto& slots = ts.layout.slots;
  REQUIRE(slots.size() == 5);  // totalSupply, balances[0..2], timestamp
  std::size_t broken = 0;
  for (int b0 = 0; b0 < 16; ++b0) {
    for (int b1 = 0; b1 < 16; ++b1) {
      for (int b2 = 0; b2 < 16; ++b2) {
        if (b0 + b1 + b2 >= 16) continue;
        ContractState s;
        s.values = {b0 + b1 + b2, b0, b1, b2, 0};
        for (std::int64_t sender = 0; sender < 2; ++sender) {
          for (std::int64_t to = 0; to < 3; ++to) {
            for (std::int64_t amount = 0; amount < 16; ++amount) {
              auto t = step(ts, s, tx("transfer", sender, {to, amount}));
              if (t.violation) ++broken;
            }
          }
        }
      }
    }
  }
  CHECK(broken == 0);
}

TEST_CASE("wrap-mode token without guard is not inductive") {
  auto ir = load("erc20_wrap");
  auto c = parse_candidate("3+ assert(sumMapping(balances)==totalSupply);", ir);
  Domain d;
  d.width = 4;
  d.arith = ArithMode::Wrap;
  auto ts = lower(instrument(ir, c), d);
  auto r = inductive_check(ts, state_predicate(c));
  REQUIRE(r.outcome == InductiveOutcome::NotProven);
  REQUIRE(r.witness);
  REQUIRE(r.witness->pre);
  REQUIRE(r.witness->tx);
  const auto& pre = *r.witness->pre;
  const auto& t = *r.witness->tx;
  // the sender cannot cover the amount
  CHECK(pre.values[1 + static_cast<std::size_t>(t.sender)] < t.args[1]);
  CHECK(step(ts, pre, t).violation);
}

TEST_CASE("split on recursive depth") {
  CallSite a{"a", "f", {"main", "f"}, 1};
  CallSite b{"b", "f", {"main", "f", "f"}, 2};
  auto s = split_on_recursive_depth({a, b}, 2);
  REQUIRE(s.within.size() == 1);
  CHECK(s.within[0].id == "a");
  REQUIRE(s.beyond.size() == 1);
  CHECK(s.beyond[0].id == "b");
  auto e = split_on_recursive_depth({}, 3);
  CHECK(e.within.empty());
  CHECK(e.beyond.empty());
}

TEST_CASE("timelock candidates") {
  auto ir = load("timelock");
  auto c19 = testing::with_candidate(ir, "timelock", 0);
  auto ts19 = lower(c19, Domain{});
  CHECK(inductive_check(ts19, nullptr).outcome == InductiveOutcome::Proven);
}

TEST_CASE("bridge zero hash") {
  auto ts = lower(testing::with_candidate(load("bridge"), "bridge", 0), Domain{});
  auto r = bmc(ts);
  REQUIRE(r.outcome == BmcOutcome::Counterexample);
  REQUIRE(r.txs.size() == 1);
  CHECK(r.txs[0] == tx("process", 0, {0}));
}

TEST_CASE("deposit queue gas cap") {
  auto plain = lower(load("deposit_queue"), Domain{});
  CHECK(plain.dom.gas_cap == 12);
  auto one = run(plain, {}, {tx("deposit", 0, {1}), tx("processQueuedDeposits", 0, {})});
  CHECK(one.steps.back().status == StepResult::Status::Ok);
  auto two = run(plain, {}, {tx("deposit", 0, {1}), tx("deposit", 1, {1}), tx("processQueuedDeposits", 0, {})});
  CHECK(two.steps.back().status == StepResult::Status::Reverted);
  CHECK(two.steps.back().reason == "out of gas");

  auto ts = lower(testing::with_candidate(load("deposit_queue"), "deposit_queue", 0), Domain{});
  auto r = bmc(ts);
  REQUIRE(r.outcome == BmcOutcome::Counterexample);
  REQUIRE(r.txs.size() == 3);
  CHECK(r.txs.back().fn == "processQueuedDeposits");
  CHECK(r.trace.violation->line == 14);
}
