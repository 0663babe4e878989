#pragma once

// End-to-end verification of a candidate set: syntax check, one ranking pass,
// inductive check, bounded model checking, classification and triage.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "solinv/bmc.hpp"
#include "solinv/inductive.hpp"
#include "solinv/tot.hpp"

namespace solinv {

struct PipelineConfig {
  Domain dom;
  int max_txs = 4;
  double default_k = 2.0;
  bool stop_on_first_violation = false;
  solver::Budget budget;
};

enum class Outcome { Proven, PossibleViolation, Discarded, SyntaxRejected };
const char* outcome_name(Outcome o);

enum class Triage { None, ConfirmedBug, IncorrectInvariant };
const char* triage_name(Triage t);

struct VerificationRecord {
  std::size_t input_index = 0;
  CandidateSpec spec;
  std::string kind;  // candidate kind, empty when rejected
  Outcome outcome = Outcome::Discarded;
  std::string reason;  // rejection or discard reason
  std::optional<Proof> proof;
  std::optional<InductionWitness> witness;
  std::vector<std::int64_t> init_args;
  std::vector<Transaction> txs;
  std::optional<Violation> violation;
  Triage triage = Triage::None;
  std::string paired_with;  // anchor of the modifier partner verified together
  double elapsed_ms = 0;
};

struct Report {
  std::string contract;
  std::string source;
  std::string provider;
  PipelineConfig cfg;
  std::vector<std::string> state_layout;    // slot names, the order of witness pre-states
  std::vector<VerificationRecord> records;  // rank order, rejected candidates last
  std::vector<std::string> provider_notes;
  std::string triage_notes;

  std::size_t count(Outcome o) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

Report verify_all(const ContractIr& ir, const std::vector<CandidateSpec>& candidates, tot::RankProvider& provider,
                  const PipelineConfig& cfg, const std::string& source_path = "");

// Replays a PossibleViolation against the instrumented system. Throws
// ReplayMismatch when the trace no longer violates.
Triage triage(const ContractIr& ir, const TransitionSystem& ts, const VerificationRecord& rec);

// Removes fields that legitimately differ between runs (wall-clock values).
nlohmann::json strip_timing(nlohmann::json j);

// Replayable counterexample files ---------------------------------------------

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceFile {
  std::string contract;
  Domain dom;
  std::vector<CandidateSpec> candidates;  // woven in before replaying
  std::vector<std::int64_t> init_args;
  std::vector<Transaction> txs;
  int violation_line = 0;
};

nlohmann::json trace_file_to_json(const TraceFile& t);
TraceFile trace_file_from_json(const nlohmann::json& j);
TraceFile trace_file_for(const Report& report, const VerificationRecord& rec, const std::vector<CandidateSpec>& all);

struct ReplayResult {
  bool reproduced = false;
  Trace trace;
  std::string detail;
};
// `k` overrides the scaling factor of every candidate when set.
ReplayResult replay(const ContractIr& ir, const TraceFile& t, std::optional<double> k = std::nullopt);

std::string arith_name(ArithMode m);
ArithMode parse_arith(const std::string& s);

}  // namespace solinv
