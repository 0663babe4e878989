#pragma once

// Candidate invariants: anchors, template parsing and instrumentation.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "solinv/ir.hpp"

namespace solinv {

struct ProgramPoint {
  enum class Placement { AtLine, AfterLine };
  int line = 1;
  Placement placement = Placement::AtLine;

  std::string render() const;  // "N" or "N+"
  static std::optional<ProgramPoint> parse(const std::string& text);
  bool operator==(const ProgramPoint&) const = default;
};

enum class CandidateKind { Assertion, Assume, Ensures, Require, ModifierInstrumentation, GlobalInvariant };

const char* kind_name(CandidateKind k);

struct Rational {
  std::int64_t num = 2;
  std::int64_t den = 1;
  static Rational from_double(double v);
  std::string str() const;
};

struct InvariantCandidate {
  int id = -1;
  ProgramPoint anchor;
  CandidateKind kind = CandidateKind::Assertion;
  ExprPtr expr;  // null for modifier definitions and applications
  Rational k;
  std::string raw_text;  // template text without the anchor
  std::string message;   // require(e, "message")

  // enclosing function for in-body checks ("" when global)
  std::string function;
  bool loop_head = false;

  // ModifierInstrumentation
  std::string modifier;          // modifier name
  bool modifier_definition = false;
  std::vector<ExprPtr> guards;   // definition: require conditions
  std::string target_function;   // application: the decorated function

  std::string render() const;  // "<anchor> <raw_text>"
  bool is_state_predicate() const;
};

class SyntaxReject : public std::runtime_error {
 public:
  enum class Reason { Unparseable, UnknownIdentifier, TypeError, AnchorOutOfRange };
  SyntaxReject(Reason r, const std::string& detail);
  Reason reason;
};

const char* reason_name(SyntaxReject::Reason r);

class AnchorMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `text` is "<anchor> <template>". Throws SyntaxReject.
InvariantCandidate parse_candidate(const std::string& text, const ContractIr& ir, Rational k = {});
InvariantCandidate parse_candidate(const ProgramPoint& anchor, const std::string& text, const ContractIr& ir,
                                   Rational k = {});

// Returns a copy of ir with the candidate woven in. Throws AnchorMismatch,
// and std::invalid_argument when the candidate was already instrumented.
ContractIr instrument(const ContractIr& ir, const InvariantCandidate& c);

// Sidecar candidate file entries.
struct CandidateSpec {
  std::string anchor;
  std::string text;
  std::optional<double> k;
  std::string line() const { return anchor + " " + text; }
};
std::vector<CandidateSpec> load_candidates(const std::string& path);
std::vector<CandidateSpec> parse_candidates_json(const std::string& json_text);
std::string candidates_to_json(const std::vector<CandidateSpec>& specs);

// The function whose body contains the anchor, or nullptr.
const FunctionIr* enclosing_function(const ContractIr& ir, const ProgramPoint& p);

}  // namespace solinv
