#include <doctest.h>

#include "helpers.hpp"

using namespace solinv;
using testing::load;

TEST_CASE("program point parsing") {
  auto p = ProgramPoint::parse("15+");
  REQUIRE(p);
  CHECK(p->line == 15);
  CHECK(p->placement == ProgramPoint::Placement::AfterLine);
  CHECK(ProgramPoint::parse("12")->placement == ProgramPoint::Placement::AtLine);
  CHECK(ProgramPoint::parse("12")->render() == "12");
  CHECK(p->render() == "15+");
  CHECK_FALSE(ProgramPoint::parse("0"));
  CHECK_FALSE(ProgramPoint::parse("+3"));
  CHECK_FALSE(ProgramPoint::parse("x"));
}

TEST_CASE("rational k") {
  auto r = Rational::from_double(1.1);
  CHECK(r.num == 11);
  CHECK(r.den == 10);
  CHECK(Rational::from_double(2).str() == "2");
  CHECK(Rational::from_double(0.5).den == 2);
}

TEST_CASE("candidate kinds of the training example") {
  auto ir = load("training_example");
  const auto specs = load_candidates(testing::fixture("training_example.candidates.json"));
  REQUIRE(specs.size() == 5);
  std::vector<CandidateKind> kinds;
  for (const auto& s : specs) kinds.push_back(parse_candidate(s.line(), ir).kind);
  CHECK(kinds == std::vector<CandidateKind>{CandidateKind::Assertion, CandidateKind::Assertion,
                                            CandidateKind::ModifierInstrumentation,
                                            CandidateKind::ModifierInstrumentation, CandidateKind::GlobalInvariant});
  auto def = parse_candidate(specs[2].line(), ir);
  CHECK(def.modifier_definition);
  CHECK(def.modifier == "onlyOwner");
  auto app = parse_candidate(specs[3].line(), ir);
  CHECK_FALSE(app.modifier_definition);
  CHECK(app.target_function == "tokenIncrease");
}

TEST_CASE("syntax rejects") {
  auto ir = load("erc20");
  auto reason = [&](const std::string& text) {
    try {
      parse_candidate(text, ir);
    } catch (const SyntaxReject& e) {
      return std::string(reason_name(e.reason));
    }
    return std::string("accepted");
  };
  CHECK(reason("13+ assert(balances[nobody] == 0);") == "unknown identifier");
  CHECK(reason("13+ assert(balances[to] == ;") == "unparseable");
  CHECK(reason("13+ assert(balances + 1 == 0);") == "type error");
  CHECK(reason("99+ assert(totalSupply == 0);") == "anchor out of range");
  CHECK(reason("13+ assert(balances[to] == 0);") == "accepted");
  // locals of the enclosing function are visible, other functions' are not
  CHECK(reason("17+ assert(who == who);") == "accepted");
  CHECK(reason("13+ assert(who == who);") == "unknown identifier");
}

TEST_CASE("assertion placement after a line") {
  auto ir = load("training_example");
  auto c = parse_candidate("7+ assert(balances[msg.sender]>=tokens);", ir);
  auto out = instrument(ir, c);
  const auto* f = out.find_function("transfer");
  REQUIRE(f->body.size() == 3);
  CHECK(f->body[1]->kind == StmtKind::Check);
  CHECK(f->body[1]->loc.line == 7);
  CHECK(f->body[2]->loc.line == 8);
  CHECK_THROWS_AS(instrument(out, c), std::invalid_argument);
}

TEST_CASE("assertion placement at a line") {
  auto ir = load("counter");
  auto c = parse_candidate("5 assert(x == 0);", ir);
  auto out = instrument(ir, c);
  const auto* f = out.find_function("inc");
  REQUIRE(f->body.size() == 2);
  CHECK(f->body[0]->kind == StmtKind::Check);
}

TEST_CASE("global invariants and modifier definitions live outside functions") {
  auto ir = load("erc20");
  auto g = parse_candidate("3+ assert(sumMapping(balances)==totalSupply);", ir);
  CHECK(g.kind == CandidateKind::GlobalInvariant);
  CHECK(g.is_state_predicate());
  auto out = instrument(ir, g);
  CHECK(out.global_checks.size() == 1);

  auto t = load("training_example");
  auto def = parse_candidate("10+ modifier onlyOwner{require(msg.sender==owner);};", t);
  auto withdef = instrument(t, def);
  REQUIRE(withdef.find_modifier("onlyOwner"));
  CHECK(withdef.find_modifier("onlyOwner")->synthetic);
  auto inside = parse_candidate("7+ modifier onlyOwner{require(msg.sender==owner);};", t);
  CHECK_THROWS_AS(instrument(t, inside), AnchorMismatch);
}

TEST_CASE("modifier application weaves guard checks") {
  auto t = load("training_example");
  auto def = parse_candidate("10+ modifier onlyOwner{require(msg.sender==owner);};", t);
  auto app = parse_candidate("12 function tokenIncrease() onlyOwner external {...};", t);
  app.id = 1;
  auto out = instrument(instrument(t, def), app);
  const auto* f = out.find_function("tokenIncrease");
  REQUIRE(!f->body.empty());
  CHECK(f->body[0]->kind == StmtKind::Check);
  CHECK(f->body[0]->check_kind == CheckKind::Modifier);
  // the application must sit on the signature line
  auto off = parse_candidate("13 function tokenIncrease() onlyOwner external {...};", t);
  CHECK_THROWS(instrument(instrument(t, def), off));
}

TEST_CASE("Old snapshots are taken at function entry") {
  auto ir = load("visor");
  auto c = parse_candidate("15+ assert(price <= Old(price)*k);", ir, Rational::from_double(2));
  auto out = instrument(ir, c);
  const auto* f = out.find_function("deposit");
  REQUIRE(f->snapshots.size() == 1);
  CHECK(f->body[0]->synthetic);
  CHECK(f->body[0]->kind == StmtKind::LocalDecl);
  CHECK(f->body[2]->kind == StmtKind::Check);
  CHECK_FALSE(c.is_state_predicate());
}

TEST_CASE("candidate json round trip") {
  const auto specs = load_candidates(testing::fixture("visor.candidates.json"));
  REQUIRE(specs.size() == 1);
  CHECK(specs[0].k.value() == doctest::Approx(2.0));
  const auto again = parse_candidates_json(candidates_to_json(specs));
  REQUIRE(again.size() == 1);
  CHECK(again[0].line() == specs[0].line());
  CHECK(*again[0].k == *specs[0].k);
}
