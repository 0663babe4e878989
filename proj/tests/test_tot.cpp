#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

#include "helpers.hpp"
#include "solinv/tot.hpp"

using namespace solinv;
using namespace solinv::tot;
using testing::fixture;
using testing::load;

namespace {

std::vector<InvariantCandidate> training_candidates(const ContractIr& ir) {
  std::vector<InvariantCandidate> out;
  int id = 0;
  for (const auto& s : load_candidates(fixture("training_example.candidates.json"))) {
    auto c = parse_candidate(s.line(), ir);
    c.id = id++;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> anchors_in(const std::vector<InvariantCandidate>& c, const std::vector<std::size_t>& order) {
  std::vector<std::string> out;
  for (auto i : order) out.push_back(c[i].anchor.render());
  return out;
}

}  // namespace

TEST_CASE("prompt wording") {
  std::map<std::string, std::string> none;
  CHECK(render_prompt(1, 'A', none).text == "What's the transactional context of the contract?");
  std::map<std::string, std::string> t1{{"1A", "a"}, {"1B", "b"}};
  CHECK(render_prompt(2, 'A', t1).text.rfind("Given inferred critical program points, what are the invariants?", 0) == 0);
  std::map<std::string, std::string> t2{{"1A", "a"}, {"1B", "b"}, {"2A", "c"}, {"2B", "d"}};
  CHECK(render_prompt(3, 'B', t2).text.rfind("What are the vulnerabilities in the contract?", 0) == 0);
  CHECK(slots() == std::vector<std::string>{"1A", "1B", "2A", "2B", "3A", "3B"});
}

TEST_CASE("carried context is appended in brackets") {
  std::map<std::string, std::string> ctx{{"contract", "contract C {}"}, {"1A", "token transfer"}, {"1B", "3+"}};
  const auto p = render_prompt(2, 'A', ctx);
  CHECK(p.text ==
        "Given inferred critical program points, what are the invariants?\n[contract] contract C {}\n[1A] token "
        "transfer\n[1B] 3+");
  CHECK(p.carried == std::vector<std::string>{"contract", "1A", "1B"});
}

TEST_CASE("later tiers need the previous tier") {
  std::map<std::string, std::string> half{{"1A", "a"}};
  CHECK_THROWS_AS(render_prompt(2, 'B', half), MissingPriorTier);
  CHECK_THROWS_AS(render_prompt(3, 'A', {}), MissingPriorTier);
  CHECK_NOTHROW(render_prompt(1, 'B', {}));
}

TEST_CASE("training answers parse into the listed payloads") {
  const auto ans = load_answers(fixture("training_example.answers.json"));
  CHECK(parse_answer(1, 'A', ans.at("1A")).context_label == "token transfer");

  const auto pts = parse_answer(1, 'B', ans.at("1B")).points;
  std::vector<std::string> rendered;
  for (const auto& p : pts) rendered.push_back(p.render());
  CHECK(rendered == std::vector<std::string>{"7+", "8+", "10+", "12", "17+"});
  CHECK(pts[3].placement == ProgramPoint::Placement::AtLine);

  const auto inv = parse_answer(2, 'A', ans.at("2A")).candidates;
  REQUIRE(inv.size() == 5);
  CHECK(inv[0].line() == "7+ assert(balances[msg.sender]>=tokens);");
  CHECK(inv[1].line() == "8+ assert(sumMapping(balances)==totalSupply);");
  CHECK(inv[2].line() == "10+ modifier onlyOwner{require(msg.sender==owner);};");
  CHECK(inv[3].line() == "12 function tokenIncrease() onlyOwner external {...};");
  CHECK(inv[4].line() == "17+ Invariant(tokenIncrease()>100);");

  CHECK(parse_answer(2, 'B', ans.at("2B")).candidates.size() == 4);

  const auto ranks = parse_answer(3, 'A', ans.at("3A")).ranks;
  std::map<std::string, int> by_anchor;
  for (const auto& r : ranks) by_anchor[r.candidate.anchor] = r.rank;
  CHECK(ranks.size() == 5);
  CHECK(by_anchor == std::map<std::string, int>{{"10+", 1}, {"12", 1}, {"7+", 1}, {"8+", 2}, {"17+", 3}});
  CHECK(covers_exactly(ranks, inv));

  CHECK(parse_answer(3, 'B', ans.at("3B")).bugs == std::vector<std::string>{"IVO", "AF"});
}

TEST_CASE("answer parse errors carry the span") {
  try {
    parse_answer(1, 'B', "none that I can see");
    FAIL("expected a parse error");
  } catch (const AnswerParseError& e) {
    CHECK(e.span == "none that I can see");
  }
  CHECK_THROWS_AS(parse_answer(3, 'A', "Rank one is the modifier"), AnswerParseError);
  CHECK_THROWS_AS(parse_answer(3, 'B', "looks fine"), AnswerParseError);
  CHECK(parse_answer(1, 'A', "something unusual").context_label == "other");
}

TEST_CASE("render then parse reproduces the payload") {
  TotAnswer a1;
  a1.tier = 1;
  a1.slot = 'B';
  a1.points = {*ProgramPoint::parse("3"), *ProgramPoint::parse("14+"), *ProgramPoint::parse("2+")};
  CHECK(parse_answer(1, 'B', render_answer(a1)).points == a1.points);

  for (const auto& label : context_labels()) {
    TotAnswer c;
    c.context_label = label;
    CHECK(parse_answer(1, 'A', render_answer(c)).context_label == label);
  }

  TotAnswer a2;
  a2.tier = 2;
  a2.slot = 'A';
  a2.candidates = {{"4+", "assert(x[a] == (1+2));", std::nullopt}, {"9", "Invariant(y >= 0);", std::nullopt}};
  const auto back = parse_answer(2, 'A', render_answer(a2)).candidates;
  REQUIRE(back.size() == 2);
  CHECK(back[0].line() == a2.candidates[0].line());
  CHECK(back[1].line() == a2.candidates[1].line());

  TotAnswer a3;
  a3.tier = 3;
  a3.slot = 'A';
  a3.ranks = {{{"4+", "assert(x == 1);", std::nullopt}, 2}, {{"9", "assert(y == 0);", std::nullopt}, 1}};
  const auto r = parse_answer(3, 'A', render_answer(a3)).ranks;
  REQUIRE(r.size() == 2);
  CHECK(r[0].candidate.line() == "4+ assert(x == 1);");
  CHECK(r[0].rank == 2);
  CHECK(r[1].rank == 1);

  TotAnswer b;
  b.tier = 3;
  b.slot = 'B';
  for (const auto& t : taxonomy()) b.bugs.push_back(t.code);
  CHECK(parse_answer(3, 'B', render_answer(b)).bugs == b.bugs);
}

TEST_CASE("heuristic ranking groups the training candidates") {
  const auto ir = load("training_example");
  const auto cands = training_candidates(ir);
  // scores: pair 4, 7+ 2, 8+ 1, 17+ -1
  CHECK(heuristic_score(cands[0], false) == 2);
  CHECK(heuristic_score(cands[1], false) == 1);
  CHECK(heuristic_score(cands[2], true) == 4);
  CHECK(heuristic_score(cands[4], false) == -1);
  const auto order = heuristic_rank(cands, ir);
  CHECK(anchors_in(cands, order) == std::vector<std::string>{"10+", "12", "7+", "8+", "17+"});
}

TEST_CASE("heuristic tie and singleton rules") {
  const auto ir = load("counter");
  std::vector<InvariantCandidate> one{parse_candidate("2+ assert(x <= 1);", ir)};
  CHECK(heuristic_rank(one, ir) == std::vector<std::size_t>{0});
  std::vector<InvariantCandidate> two{parse_candidate("5+ assert(x >= 1);", ir), parse_candidate("2+ assert(x <= 1);", ir)};
  CHECK(heuristic_rank(two, ir) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("replay provider follows the 3A ranks") {
  const auto ir = load("training_example");
  const auto cands = training_candidates(ir);
  ReplayProvider p(load_answers(fixture("training_example.answers.json")));
  const auto order = p.rank(cands, ir);
  CHECK(anchors_in(cands, order) == std::vector<std::string>{"10+", "12", "7+", "8+", "17+"});
  CHECK(p.rank(cands, ir) == order);
  CHECK(p.propose(ir, "").size() == 5);
  CHECK(p.notes.empty());

  ReplayProvider empty({});
  CHECK(empty.rank(cands, ir) == heuristic_rank(cands, ir));
  CHECK(empty.notes.size() == 1);
}

TEST_CASE("provider selection") {
  CHECK(make_provider("heuristic")->name() == "heuristic");
  CHECK(make_provider("remote")->name() == "remote");
  CHECK_THROWS_AS(make_provider("oracle"), std::invalid_argument);
  CHECK_THROWS(make_provider("replay:/nonexistent/answers.json"));
}

TEST_CASE("remote provider against a local endpoint") {
  const auto answers = load_answers(fixture("training_example.answers.json"));
  httplib::Server srv;
  int asked = 0;
  bool malformed = false;
  srv.Post("/ask", [&](const httplib::Request& req, httplib::Response& res) {
    const auto prompt = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
    ++asked;
    if (malformed) {
      res.set_content("{\"reply\": 1}", "application/json");
      return;
    }
    std::string key;
    for (const auto& k : slots()) {
      if (prompt.rfind(question(k[0] - '0', k[1]), 0) == 0) key = k;
    }
    res.set_content(nlohmann::json{{"answer", answers.at(key)}}.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  const auto ir = load("training_example");
  const auto cands = training_candidates(ir);
  setenv("TOT_ENDPOINT", ("http://127.0.0.1:" + std::to_string(port) + "/ask").c_str(), 1);
  setenv("TOT_TIMEOUT_SECS", "5", 1);
  {
    RemoteModelProvider p;
    CHECK(p.propose(ir, "contract trainingExample {}").size() == 5);
    CHECK(asked == 6);
    CHECK(anchors_in(cands, p.rank(cands, ir)) == std::vector<std::string>{"10+", "12", "7+", "8+", "17+"});
    CHECK(p.notes.empty());
  }
  malformed = true;
  {
    RemoteModelProvider p;
    CHECK(p.rank(cands, ir) == heuristic_rank(cands, ir));
    REQUIRE(p.notes.size() == 1);
    CHECK(p.notes[0].find("heuristic fallback") != std::string::npos);
  }
  srv.stop();
  th.join();
  unsetenv("TOT_ENDPOINT");
  {
    RemoteModelProvider p;
    CHECK(p.rank(cands, ir) == heuristic_rank(cands, ir));
    CHECK(p.notes.size() == 1);
  }
  unsetenv("TOT_TIMEOUT_SECS");
}
