#include "solinv/tot.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace solinv::tot {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string key(int tier, char slot) { return std::to_string(tier) + slot; }

}  // namespace

const std::vector<std::string>& slots() {
  static const std::vector<std::string> s{"1A", "1B", "2A", "2B", "3A", "3B"};
  return s;
}

const std::string& question(int tier, char slot) {
  static const std::map<std::string, std::string> q{
      {"1A", "What's the transactional context of the contract?"},
      {"1B", "Given transactional context, what are the critical program points?"},
      {"2A", "Given inferred critical program points, what are the invariants?"},
      {"2B", "Given inferred invariants, what are the critical invariants?"},
      // the misspelling is part of the protocol wording
      {"3A", "What are the ranks of inferred critical invaraints?"},
      {"3B", "What are the vulnerabilities in the contract?"},
  };
  auto it = q.find(key(tier, slot));
  if (it == q.end()) throw std::invalid_argument("no prompt for tier " + key(tier, slot));
  return it->second;
}

const std::vector<std::string>& context_labels() {
  static const std::vector<std::string> l{"ERC libraries", "token transfer", "cross bridge", "bidding",
                                          "voting",        "lottery",        "healthcare",   "investing",
                                          "price oracle",  "other"};
  return l;
}

const std::vector<BugClass>& taxonomy() {
  static const std::vector<BugClass> t{
      {"RE", "reentrancy"},
      {"IF", "integer overflow/underflow"},
      {"AF", "arithmetic flaw"},
      {"SC", "suicidal contract"},
      {"EL", "ether leakage"},
      {"IG", "insufficient gas"},
      {"IVO", "incorrect visibility/ownership"},
      {"PM", "price manipulation"},
      {"PE", "privilege escalation"},
      {"AV", "atomicity violation"},
      {"BLF", "business logic flaw"},
      {"IS", "inconsistent state update"},
      {"CB", "cross bridge"},
      {"IDV", "id uniqueness violation"},
  };
  return t;
}

AnswerParseError::AnswerParseError(const std::string& what, std::string s)
    : std::runtime_error(what + ": \"" + s + "\""), span(std::move(s)) {}

TotPrompt render_prompt(int tier, char slot, const std::map<std::string, std::string>& context) {
  TotPrompt p;
  p.tier = tier;
  p.slot = slot;
  p.text = question(tier, slot);
  if (tier > 1) {
    for (char s : {'A', 'B'}) {
      if (!context.count(key(tier - 1, s))) {
        throw MissingPriorTier("tier " + key(tier, slot) + " needs the " + key(tier - 1, s) + " answer");
      }
    }
  }
  std::vector<std::string> carry;
  if (context.count("contract")) carry.push_back("contract");
  for (const auto& k : slots()) {
    if (k == key(tier, slot)) break;
    if (context.count(k)) carry.push_back(k);
  }
  for (const auto& k : carry) p.text += "\n[" + k + "] " + context.at(k);
  p.carried = carry;
  return p;
}

// Candidate lines ------------------------------------------------------------

namespace {

// Anchor at position i: digits, optional '+', whitespace, then a letter.
std::optional<std::size_t> anchor_at(const std::string& t, std::size_t i, std::string& anchor) {
  if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
  if (i > 0 && (std::isalnum(static_cast<unsigned char>(t[i - 1])) || t[i - 1] == '_')) return std::nullopt;
  std::size_t j = i;
  while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) ++j;
  if (j < t.size() && t[j] == '+') ++j;
  std::size_t k = j;
  while (k < t.size() && (t[k] == ' ' || t[k] == '\t')) ++k;
  if (k == j || k >= t.size() || !std::isalpha(static_cast<unsigned char>(t[k]))) return std::nullopt;
  anchor = t.substr(i, j - i);
  return k;
}

}  // namespace

std::vector<CandidateSpec> extract_candidates(const std::string& t) {
  std::vector<CandidateSpec> out;
  std::size_t i = 0;
  while (i < t.size()) {
    std::string anchor;
    auto start = anchor_at(t, i, anchor);
    if (!start) {
      ++i;
      continue;
    }
    int depth = 0;
    std::size_t j = *start;
    for (; j < t.size(); ++j) {
      const char c = t[j];
      if (c == '(' || c == '{' || c == '[') ++depth;
      if (c == ')' || c == '}' || c == ']') --depth;
      if (c == ';' && depth <= 0) break;
    }
    std::string text;
    if (j < t.size()) {
      text = t.substr(*start, j + 1 - *start);
      i = j + 1;
    } else {
      text = trim(t.substr(*start));
      while (!text.empty() && text.back() == '.') text.pop_back();
      i = t.size();
    }
    out.push_back({anchor, trim(text), std::nullopt});
  }
  return out;
}

bool covers_exactly(const std::vector<RankedCandidate>& ranks, const std::vector<CandidateSpec>& critical) {
  std::map<std::string, int> seen;
  for (const auto& r : ranks) ++seen[r.candidate.anchor];
  std::map<std::string, int> want;
  for (const auto& c : critical) ++want[c.anchor];
  return seen == want;
}

TotAnswer parse_answer(int tier, char slot, const std::string& text) {
  TotAnswer a;
  a.tier = tier;
  a.slot = slot;
  const std::string k = key(tier, slot);
  const std::string low = lower(text);
  if (k == "1A") {
    std::size_t best = std::string::npos;
    for (const auto& l : context_labels()) {
      const auto p = low.find(lower(l));
      if (p != std::string::npos && p < best) {
        best = p;
        a.context_label = l;
      }
    }
    if (a.context_label.empty()) a.context_label = "other";
    return a;
  }
  if (k == "1B") {
    std::size_t i = 0;
    while (i < text.size()) {
      if (std::isdigit(static_cast<unsigned char>(text[i])) &&
          (i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1])))) {
        std::size_t j = i;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        if (j < text.size() && text[j] == '+') ++j;
        if (auto p = ProgramPoint::parse(text.substr(i, j - i))) a.points.push_back(*p);
        i = j;
        continue;
      }
      ++i;
    }
    if (a.points.empty()) throw AnswerParseError("no program points in the answer", text);
    return a;
  }
  if (k == "2A" || k == "2B") {
    a.candidates = extract_candidates(text);
    if (a.candidates.empty()) throw AnswerParseError("no anchored invariants in the answer", text);
    return a;
  }
  if (k == "3A") {
    // segments introduced by "Rank N:"
    std::vector<std::pair<std::size_t, int>> marks;
    for (std::size_t p = low.find("rank"); p != std::string::npos; p = low.find("rank", p + 4)) {
      std::size_t q = p + 4;
      while (q < low.size() && low[q] == ' ') ++q;
      std::size_t d = q;
      while (d < low.size() && std::isdigit(static_cast<unsigned char>(low[d]))) ++d;
      if (d == q || d >= low.size() || low[d] != ':') continue;
      marks.emplace_back(p, std::stoi(low.substr(q, d - q)));
      marks.back().first = d + 1;
    }
    for (std::size_t m = 0; m < marks.size(); ++m) {
      const std::size_t from = marks[m].first;
      std::size_t to = m + 1 < marks.size() ? marks[m + 1].first : text.size();
      if (m + 1 < marks.size()) to = low.rfind("rank", to);
      for (auto& c : extract_candidates(text.substr(from, to - from))) a.ranks.push_back({c, marks[m].second});
    }
    if (a.ranks.empty()) throw AnswerParseError("no ranked invariants in the answer", text);
    return a;
  }
  // 3B: phrases or codes, in order of appearance
  std::vector<std::pair<std::size_t, std::string>> found;
  for (const auto& b : taxonomy()) {
    std::vector<std::string> forms{lower(b.phrase)};
    if (b.code == "IVO") forms.insert(forms.end(), {"incorrect visibility/owner", "incorrect visibility and/or ownership"});
    if (b.code == "IF") forms.insert(forms.end(), {"integer overflow", "integer underflow"});
    std::size_t best = std::string::npos;
    for (const auto& f : forms) best = std::min(best, low.find(f));
    const auto code = low.find("(" + lower(b.code) + ")");
    best = std::min(best, code);
    if (best != std::string::npos) found.emplace_back(best, b.code);
  }
  std::sort(found.begin(), found.end());
  for (const auto& [pos, code] : found) a.bugs.push_back(code);
  if (a.bugs.empty()) throw AnswerParseError("no known vulnerability class in the answer", text);
  return a;
}

std::string render_answer(const TotAnswer& a) {
  const std::string k = key(a.tier, a.slot);
  std::string s;
  if (k == "1A") return "The transactional context is " + a.context_label + ".";
  if (k == "1B") {
    s = "Critical program points are ";
    for (std::size_t i = 0; i < a.points.size(); ++i) s += (i ? ", " : "") + a.points[i].render();
    return s + ".";
  }
  if (k == "2A" || k == "2B") {
    s = k == "2A" ? "Invariants are" : "Critical invariants are";
    for (const auto& c : a.candidates) s += " " + c.line();
    return s;
  }
  if (k == "3A") {
    s = "The ranks of inferred critical invariants are";
    for (const auto& r : a.ranks) s += " Rank " + std::to_string(r.rank) + ": " + r.candidate.line();
    return s;
  }
  s = "The vulnerabilities are";
  for (const auto& code : a.bugs) {
    for (const auto& b : taxonomy()) {
      if (b.code == code) s += " " + b.phrase + ";";
    }
  }
  return s;
}

std::map<std::string, std::string> load_answers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read answers file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("answers file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("answers file " + path + " must hold a JSON object");
  std::map<std::string, std::string> out;
  for (const auto& k : slots()) {
    if (j.contains(k)) out[k] = j.at(k).get<std::string>();
  }
  return out;
}

// Ranking --------------------------------------------------------------------

namespace {

void walk(const Expr& e, const std::function<void(const Expr&)>& f) {
  f(e);
  for (const auto& a : e.args) walk(*a, f);
}

bool return_value_only(const Expr& e) {
  bool call = false, state = false;
  std::function<void(const Expr&, bool)> go = [&](const Expr& x, bool under_call) {
    if (x.kind == ExprKind::Call) call = true;
    if (!under_call && (x.kind == ExprKind::Var || x.kind == ExprKind::Index || x.kind == ExprKind::TokenCall ||
                        x.kind == ExprKind::SumMapping)) {
      state = true;
    }
    for (const auto& a : x.args) go(*a, under_call || x.kind == ExprKind::Call);
  };
  go(e, false);
  return call && !state;
}

}  // namespace

int heuristic_score(const InvariantCandidate& c, bool paired) {
  int score = 0;
  bool salient = false;
  auto visit = [&](const Expr& x) {
    if (x.kind == ExprKind::Var && x.scope == VarScope::State && (x.name == "owner" || x.name == "price")) salient = true;
    if (x.kind == ExprKind::Index || x.kind == ExprKind::TokenCall) salient = true;
    if (x.kind == ExprKind::Old || x.kind == ExprKind::SumMapping) ++score;
  };
  if (c.expr) walk(*c.expr, visit);
  for (const auto& g : c.guards) walk(*g, visit);
  if (salient) score += 2;
  if (paired) score += 2;
  if (c.kind == CandidateKind::GlobalInvariant && c.expr && return_value_only(*c.expr)) score -= 1;
  return score;
}

std::vector<std::size_t> heuristic_rank(const std::vector<InvariantCandidate>& cands, const ContractIr&) {
  // group modifier definitions with their applications
  std::vector<int> group(cands.size(), -1);
  std::map<std::string, int> by_modifier;
  int next = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].kind != CandidateKind::ModifierInstrumentation) continue;
    auto [it, fresh] = by_modifier.emplace(cands[i].modifier, next);
    if (fresh) ++next;
    group[i] = it->second;
  }
  std::map<int, int> members;
  std::map<int, bool> has_def, has_app;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (group[i] < 0) continue;
    ++members[group[i]];
    (cands[i].modifier_definition ? has_def : has_app)[group[i]] = true;
  }
  struct Unit {
    int score = 0;
    int line = 0;
    std::size_t first = 0;
    std::vector<std::size_t> items;
  };
  std::vector<Unit> units;
  std::map<int, std::size_t> unit_of;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const bool paired = group[i] >= 0 && has_def[group[i]] && has_app[group[i]];
    const int s = heuristic_score(cands[i], paired);
    if (paired && unit_of.count(group[i])) {
      Unit& u = units[unit_of[group[i]]];
      u.score = std::max(u.score, s);
      u.line = std::min(u.line, cands[i].anchor.line);
      u.items.push_back(i);
      continue;
    }
    if (paired) unit_of[group[i]] = units.size();
    units.push_back({s, cands[i].anchor.line, i, {i}});
  }
  std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.line != b.line) return a.line < b.line;
    return a.first < b.first;
  });
  std::vector<std::size_t> order;
  for (auto& u : units) {
    std::stable_sort(u.items.begin(), u.items.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a].anchor.line < cands[b].anchor.line; });
    order.insert(order.end(), u.items.begin(), u.items.end());
  }
  return order;
}

std::vector<CandidateSpec> HeuristicRanker::propose(const ContractIr& ir, const std::string&) {
  std::vector<CandidateSpec> out;
  for (const auto& a : ir.inline_candidates) {
    auto found = extract_candidates(a.text);
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::vector<std::size_t> HeuristicRanker::rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) {
  return heuristic_rank(cands, ir);
}

ReplayProvider::ReplayProvider(std::map<std::string, std::string> answers, std::string label)
    : answers_(std::move(answers)), label_(std::move(label)) {}

std::vector<CandidateSpec> ReplayProvider::propose(const ContractIr& ir, const std::string& source) {
  auto it = answers_.find("2A");
  if (it != answers_.end()) {
    try {
      return parse_answer(2, 'A', it->second).candidates;
    } catch (const AnswerParseError& e) {
      notes.push_back(std::string("2A answer unusable, using inline candidates: ") + e.what());
    }
  } else {
    notes.push_back("no 2A answer, using inline candidates");
  }
  HeuristicRanker h;
  return h.propose(ir, source);
}

std::vector<std::size_t> ReplayProvider::rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) {
  const auto fallback = heuristic_rank(cands, ir);
  auto it = answers_.find("3A");
  if (it == answers_.end()) {
    notes.push_back("no 3A answer, heuristic ranking");
    return fallback;
  }
  TotAnswer a;
  try {
    a = parse_answer(3, 'A', it->second);
  } catch (const AnswerParseError& e) {
    notes.push_back(std::string("3A answer unusable, heuristic ranking: ") + e.what());
    return fallback;
  }
  // (rank, position in the answer) per anchor; first mention wins
  std::map<std::string, std::pair<int, std::size_t>> by_anchor;
  for (std::size_t i = 0; i < a.ranks.size(); ++i) by_anchor.emplace(a.ranks[i].candidate.anchor, std::make_pair(a.ranks[i].rank, i));
  std::vector<std::size_t> ranked, rest;
  for (auto i : fallback) (by_anchor.count(cands[i].anchor.render()) ? ranked : rest).push_back(i);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t x, std::size_t y) {
    return by_anchor[cands[x].anchor.render()] < by_anchor[cands[y].anchor.render()];
  });
  ranked.insert(ranked.end(), rest.begin(), rest.end());
  return ranked;
}

RemoteModelProvider::RemoteModelProvider() : ReplayProvider({}, "remote") {}

bool RemoteModelProvider::ensure_answers(const std::string& source) {
  if (fetched_) return *fetched_;
  const char* endpoint = std::getenv("TOT_ENDPOINT");
  const char* key_env = std::getenv("TOT_API_KEY");
  const char* timeout_env = std::getenv("TOT_TIMEOUT_SECS");
  if (!endpoint || !*endpoint) {
    notes.push_back("TOT_ENDPOINT is not set, heuristic fallback");
    fetched_ = false;
    return false;
  }
  int timeout = 30;
  if (timeout_env && *timeout_env) timeout = std::max(1, std::atoi(timeout_env));
  std::map<std::string, std::string> ctx{{"contract", source}};
  try {
    for (const auto& k : slots()) {
      const auto p = render_prompt(k[0] - '0', k[1], ctx);
      const std::string answer = remote_ask(endpoint, key_env ? key_env : "", timeout, p.text);
      parse_answer(k[0] - '0', k[1], answer);  // reject malformed answers early
      ctx[k] = answer;
    }
  } catch (const std::exception& e) {
    notes.push_back(std::string("remote model failed, heuristic fallback: ") + e.what());
    fetched_ = false;
    return false;
  }
  ctx.erase("contract");
  answers_ = ctx;
  fetched_ = true;
  return true;
}

std::vector<CandidateSpec> RemoteModelProvider::propose(const ContractIr& ir, const std::string& source) {
  source_ = source;
  if (!ensure_answers(source)) {
    HeuristicRanker h;
    return h.propose(ir, source);
  }
  return ReplayProvider::propose(ir, source);
}

std::vector<std::size_t> RemoteModelProvider::rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) {
  if (!ensure_answers(source_)) return heuristic_rank(cands, ir);
  return ReplayProvider::rank(cands, ir);
}

std::unique_ptr<RankProvider> make_provider(const std::string& spec) {
  if (spec == "heuristic") return std::make_unique<HeuristicRanker>();
  if (spec == "remote") return std::make_unique<RemoteModelProvider>();
  if (spec.rfind("replay:", 0) == 0) {
    const std::string path = spec.substr(7);
    return std::make_unique<ReplayProvider>(load_answers(path), spec);
  }
  throw std::invalid_argument("unknown provider '" + spec + "' (expected heuristic, replay:<file> or remote)");
}

}  // namespace solinv::tot
