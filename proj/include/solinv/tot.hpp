#pragma once

// Tier-of-thought prompts, the answer codec, and candidate rank providers.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "solinv/invariants.hpp"

namespace solinv::tot {

// Keys "1A", "1B", ..., "3B" in protocol order.
const std::vector<std::string>& slots();
const std::string& question(int tier, char slot);

const std::vector<std::string>& context_labels();

struct BugClass {
  std::string code;    // "IVO"
  std::string phrase;  // canonical rendering, "incorrect visibility/ownership"
};
const std::vector<BugClass>& taxonomy();

class MissingPriorTier : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AnswerParseError : public std::runtime_error {
 public:
  AnswerParseError(const std::string& what, std::string span);
  std::string span;
};

struct TotPrompt {
  int tier = 1;
  char slot = 'A';
  std::string text;
  std::vector<std::string> carried;  // keys of the answers spliced in
};

// `context` maps slot keys to earlier answers, plus "contract" for the source.
// Tiers above 1 need both answers of the previous tier. Carried answers follow
// the question, one "[<key>] <answer>" line each.
TotPrompt render_prompt(int tier, char slot, const std::map<std::string, std::string>& context);

struct RankedCandidate {
  CandidateSpec candidate;
  int rank = 0;
};

struct TotAnswer {
  int tier = 1;
  char slot = 'A';
  std::string context_label;                // 1A
  std::vector<ProgramPoint> points;         // 1B
  std::vector<CandidateSpec> candidates;    // 2A, 2B
  std::vector<RankedCandidate> ranks;       // 3A
  std::vector<std::string> bugs;            // 3B, taxonomy codes
};

TotAnswer parse_answer(int tier, char slot, const std::string& text);
std::string render_answer(const TotAnswer& a);

// Candidate lines ("<anchor> <template>;") found in free text.
std::vector<CandidateSpec> extract_candidates(const std::string& text);

// True when every critical candidate's anchor appears in exactly one rank
// entry and no rank entry names an anchor outside the critical set.
bool covers_exactly(const std::vector<RankedCandidate>& ranks, const std::vector<CandidateSpec>& critical);

// Answers file: JSON object keyed by slot ("1A".."3B").
std::map<std::string, std::string> load_answers(const std::string& path);

// Ranking --------------------------------------------------------------------

int heuristic_score(const InvariantCandidate& c, bool paired);
// Indices of `cands` in descending score, ties by ascending anchor line then
// input order. Modifier definition/application pairs share a score.
std::vector<std::size_t> heuristic_rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir);

class RankProvider {
 public:
  virtual ~RankProvider() = default;
  virtual std::string name() const = 0;
  // Candidate lines the provider proposes for a contract (used by --tot).
  virtual std::vector<CandidateSpec> propose(const ContractIr& ir, const std::string& source) = 0;
  // A permutation of the candidate indices.
  virtual std::vector<std::size_t> rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) = 0;
  // Diagnostics such as fallbacks, in the order they happened.
  std::vector<std::string> notes;
};

class HeuristicRanker : public RankProvider {
 public:
  std::string name() const override { return "heuristic"; }
  // Inline //@inv: annotations.
  std::vector<CandidateSpec> propose(const ContractIr& ir, const std::string& source) override;
  std::vector<std::size_t> rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) override;
};

// Canned answers; ranks follow the 3A answer, unranked candidates come after
// in heuristic order.
class ReplayProvider : public RankProvider {
 public:
  explicit ReplayProvider(std::map<std::string, std::string> answers, std::string label = "replay");
  std::string name() const override { return label_; }
  std::vector<CandidateSpec> propose(const ContractIr& ir, const std::string& source) override;
  std::vector<std::size_t> rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) override;

 protected:
  std::map<std::string, std::string> answers_;
  std::string label_;
};

// Queries an HTTP endpoint with {"prompt": ...} and expects {"answer": ...}.
// Endpoint, key and timeout come from TOT_ENDPOINT, TOT_API_KEY and
// TOT_TIMEOUT_SECS. Any failure falls back to the heuristic.
class RemoteModelProvider : public ReplayProvider {
 public:
  RemoteModelProvider();
  std::vector<CandidateSpec> propose(const ContractIr& ir, const std::string& source) override;
  std::vector<std::size_t> rank(const std::vector<InvariantCandidate>& cands, const ContractIr& ir) override;

 private:
  bool ensure_answers(const std::string& source);
  std::optional<bool> fetched_;
  std::string source_;
};

// Posts one prompt and returns the answer text; throws on transport or
// format errors.
std::string remote_ask(const std::string& endpoint, const std::string& api_key, int timeout_secs,
                       const std::string& prompt);

// "heuristic", "replay:<file>" or "remote".
std::unique_ptr<RankProvider> make_provider(const std::string& spec);

}  // namespace solinv::tot
