#include "solinv/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <map>
#include <sstream>

namespace solinv {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Proven: return "Proven";
    case Outcome::PossibleViolation: return "PossibleViolation";
    case Outcome::Discarded: return "Discarded";
    case Outcome::SyntaxRejected: return "SyntaxRejected";
  }
  return "?";
}

const char* triage_name(Triage t) {
  switch (t) {
    case Triage::None: return "";
    case Triage::ConfirmedBug: return "ConfirmedBug";
    case Triage::IncorrectInvariant: return "IncorrectInvariant?";
  }
  return "?";
}

std::string arith_name(ArithMode m) { return m == ArithMode::Wrap ? "wrap" : "revert"; }

ArithMode parse_arith(const std::string& s) {
  if (s == "revert") return ArithMode::Revert;
  if (s == "wrap") return ArithMode::Wrap;
  throw std::invalid_argument("arithmetic mode must be revert or wrap, got '" + s + "'");
}

std::size_t Report::count(Outcome o) const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.outcome == o;
  return n;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

Rational k_of(const CandidateSpec& s, double fallback) { return Rational::from_double(s.k.value_or(fallback)); }

struct Unit {
  std::vector<std::size_t> members;  // indices into the accepted list
  bool done = false;
  VerificationRecord result;         // shared outcome fields
};

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json tx_json(const Transaction& t) {
  return {{"fn", t.fn}, {"sender", t.sender}, {"args", t.args}, {"delta", t.delta}};
}

const char* check_kind_name(CheckKind k) {
  switch (k) {
    case CheckKind::Assertion: return "assertion";
    case CheckKind::Assume: return "assume";
    case CheckKind::Ensures: return "ensures";
    case CheckKind::Require: return "require";
    case CheckKind::Modifier: return "modifier";
    case CheckKind::Global: return "global";
    case CheckKind::LoopHead: return "loop-head";
  }
  return "?";
}

}  // namespace

Triage triage(const ContractIr& ir, const TransitionSystem& ts, const VerificationRecord& rec) {
  const Trace t = run(ts, rec.init_args, rec.txs);
  if (!t.violation) {
    std::string seq;
    for (const auto& x : rec.txs) seq += " " + render_tx(x) + ";";
    throw ReplayMismatch("trace for " + rec.spec.line() + " no longer violates:" + seq);
  }
  // a bug listed for the candidate, or for its modifier partner, confirms it
  std::vector<std::string> anchors{rec.spec.anchor};
  std::stringstream partners(rec.paired_with);
  for (std::string a; std::getline(partners, a, ',');) anchors.push_back(a);
  for (const auto& b : ir.expected_bugs) {
    for (const auto& a : anchors) {
      if (trim(b.text) == a) return Triage::ConfirmedBug;
    }
  }
  return Triage::IncorrectInvariant;
}

Report verify_all(const ContractIr& ir, const std::vector<CandidateSpec>& specs, tot::RankProvider& provider,
                  const PipelineConfig& cfg, const std::string& source_path) {
  Report rep;
  rep.contract = ir.name;
  rep.source = source_path;
  rep.provider = provider.name();
  rep.cfg = cfg;
  for (const auto& sl : lower(ir, cfg.dom).layout.slots) rep.state_layout.push_back(sl.name);

  std::vector<VerificationRecord> rejected;
  std::vector<InvariantCandidate> accepted;
  std::vector<std::size_t> accepted_input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      auto c = parse_candidate(specs[i].line(), ir, k_of(specs[i], cfg.default_k));
      c.id = static_cast<int>(i);
      accepted.push_back(std::move(c));
      accepted_input.push_back(i);
    } catch (const SyntaxReject& e) {
      VerificationRecord r;
      r.input_index = i;
      r.spec = specs[i];
      r.outcome = Outcome::SyntaxRejected;
      r.reason = e.what();
      rejected.push_back(r);
    }
  }

  // modifier definitions travel with their applications
  std::vector<Unit> units;
  std::vector<std::size_t> unit_of(accepted.size());
  std::map<std::string, std::size_t> modifier_unit;
  std::map<std::string, bool> defined;
  for (const auto& c : accepted) {
    if (c.kind == CandidateKind::ModifierInstrumentation && c.modifier_definition) defined[c.modifier] = true;
  }
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const auto& c = accepted[i];
    if (c.kind == CandidateKind::ModifierInstrumentation && defined[c.modifier]) {
      auto [it, fresh] = modifier_unit.emplace(c.modifier, units.size());
      if (fresh) units.push_back({});
      units[it->second].members.push_back(i);
      unit_of[i] = it->second;
      continue;
    }
    unit_of[i] = units.size();
    units.emplace_back();
    units.back().members.push_back(i);
  }

  // weave each unit once up front so anchor problems count as rejections
  std::vector<std::optional<ContractIr>> woven(units.size());
  std::vector<std::string> weave_error(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    auto members = units[u].members;
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return accepted[a].modifier_definition > accepted[b].modifier_definition;
    });
    try {
      ContractIr out = ir;
      for (auto m : members) out = instrument(out, accepted[m]);
      woven[u] = std::move(out);
    } catch (const AnchorMismatch& e) {
      weave_error[u] = std::string("anchor mismatch: ") + e.what();
    } catch (const std::invalid_argument& e) {
      weave_error[u] = e.what();
    }
  }
  std::vector<InvariantCandidate> rankable;
  std::vector<std::size_t> rankable_idx;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    if (woven[unit_of[i]]) {
      rankable.push_back(accepted[i]);
      rankable_idx.push_back(i);
      continue;
    }
    VerificationRecord r;
    r.input_index = accepted_input[i];
    r.spec = specs[r.input_index];
    r.kind = kind_name(accepted[i].kind);
    r.outcome = Outcome::SyntaxRejected;
    r.reason = weave_error[unit_of[i]];
    rejected.push_back(r);
  }
  std::sort(rejected.begin(), rejected.end(),
            [](const VerificationRecord& a, const VerificationRecord& b) { return a.input_index < b.input_index; });

  std::vector<std::size_t> order;
  if (!rankable.empty()) {
    order = provider.rank(rankable, ir);
    // accept only a permutation; anything else falls back to the heuristic
    std::vector<bool> seen(rankable.size(), false);
    bool ok = order.size() == rankable.size();
    for (auto i : order) {
      if (!ok || i >= seen.size() || seen[i]) {
        ok = false;
        break;
      }
      seen[i] = true;
    }
    if (!ok) {
      provider.notes.push_back("provider order is not a permutation, heuristic ranking");
      order = tot::heuristic_rank(rankable, ir);
    }
  }
  rep.provider_notes = provider.notes;

  bool stop = false;
  for (auto oi : order) {
    const std::size_t ai = rankable_idx[oi];
    Unit& unit = units[unit_of[ai]];
    if (!unit.done && !stop) {
      const auto t0 = std::chrono::steady_clock::now();
      const ContractIr& instrumented = *woven[unit_of[ai]];
      const TransitionSystem ts = lower(instrumented, cfg.dom);
      const Expr* pred = unit.members.size() == 1 ? state_predicate(accepted[unit.members[0]]) : nullptr;
      VerificationRecord& res = unit.result;
      const auto ind = inductive_check(ts, pred, cfg.budget);
      if (ind.outcome == InductiveOutcome::Proven) {
        res.outcome = Outcome::Proven;
        res.proof = ind.proof;
      } else {
        res.witness = ind.witness;
        BmcConfig bc;
        bc.max_txs = cfg.max_txs;
        bc.budget = cfg.budget;
        const auto b = bmc(ts, bc);
        if (b.outcome == BmcOutcome::Counterexample) {
          res.outcome = Outcome::PossibleViolation;
          res.init_args = b.init_args;
          res.txs = b.txs;
          res.violation = b.trace.violation;
          // the anchor of whichever member's check fired
          for (auto m : unit.members) {
            if (accepted[m].id == res.violation->candidate) res.spec = specs[accepted_input[m]];
          }
          if (res.spec.anchor.empty()) res.spec = specs[accepted_input[unit.members[0]]];
          for (auto m : unit.members) {
            const auto a = accepted[m].anchor.render();
            if (a == res.spec.anchor) continue;
            if (!res.paired_with.empty()) res.paired_with += ",";
            res.paired_with += a;
          }
          res.triage = triage(instrumented, ts, res);
          res.paired_with.clear();
        } else {
          res.outcome = Outcome::Discarded;
          res.reason = b.outcome == BmcOutcome::Unknown ? "Unknown" : "NoEvidenceWithinBound";
          if (ind.outcome == InductiveOutcome::Unknown && b.outcome == BmcOutcome::Unknown) res.reason = "Unknown";
        }
      }
      res.elapsed_ms = ms_since(t0);
      unit.done = true;
      if (res.outcome == Outcome::PossibleViolation && cfg.stop_on_first_violation) stop = true;
    }
    VerificationRecord r;
    if (unit.done) {
      r = unit.result;
    } else {
      r.outcome = Outcome::Discarded;
      r.reason = "NotVerified";
    }
    r.input_index = accepted_input[ai];
    r.spec = specs[r.input_index];
    r.kind = kind_name(accepted[ai].kind);
    for (auto m : unit.members) {
      if (m == ai) continue;
      if (!r.paired_with.empty()) r.paired_with += ",";
      r.paired_with += accepted[m].anchor.render();
    }
    rep.records.push_back(r);
  }
  rep.records.insert(rep.records.end(), rejected.begin(), rejected.end());
  return rep;
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["schema"] = "solinv-report/1";
  j["contract"] = contract;
  j["source"] = source;
  {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["generated_at"] = buf;
  }
  j["config"] = {{"width", cfg.dom.width},
                 {"addresses", cfg.dom.addresses},
                 {"arith", arith_name(cfg.dom.arith)},
                 {"gas_cap", cfg.dom.gas_cap},
                 {"max_txs", cfg.max_txs},
                 {"k", cfg.default_k},
                 {"provider", provider},
                 {"stop_on_first_violation", cfg.stop_on_first_violation}};
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    nlohmann::json e;
    e["position"] = i + 1;
    e["input_index"] = r.input_index;
    e["anchor"] = r.spec.anchor;
    e["text"] = r.spec.text;
    if (r.spec.k) e["k"] = *r.spec.k;
    if (!r.kind.empty()) e["kind"] = r.kind;
    e["outcome"] = outcome_name(r.outcome);
    if (!r.reason.empty()) e["reason"] = r.reason;
    if (!r.paired_with.empty()) e["paired_with"] = r.paired_with;
    if (r.proof) {
      nlohmann::json obs = nlohmann::json::array();
      for (const auto& o : r.proof->obligations) obs.push_back({{"obligation", o.name}, {"digest", o.digest}});
      e["proof"] = {{"digest", r.proof->digest}, {"obligations", obs}};
    }
    if (r.witness) {
      nlohmann::json w{{"obligation", r.witness->obligation}};
      if (r.witness->tx) w["tx"] = tx_json(*r.witness->tx);
      if (r.witness->pre) w["pre_state"] = r.witness->pre->values;
      if (!r.witness->init_args.empty()) w["init_args"] = r.witness->init_args;
      e["induction_failure"] = w;
    }
    if (r.outcome == Outcome::PossibleViolation) {
      nlohmann::json txs = nlohmann::json::array();
      for (const auto& t : r.txs) txs.push_back(tx_json(t));
      e["counterexample"] = {{"init_args", r.init_args},
                             {"txs", txs},
                             {"violation",
                              {{"line", r.violation->line},
                               {"kind", check_kind_name(r.violation->kind)},
                               {"step", r.violation->step}}}};
      e["triage"] = triage_name(r.triage);
    }
    e["elapsed_ms"] = r.elapsed_ms;
    recs.push_back(e);
  }
  j["state_layout"] = state_layout;
  j["records"] = recs;
  j["summary"] = {{"candidates", records.size()},
                  {"syntax_rejected", count(Outcome::SyntaxRejected)},
                  {"proven", count(Outcome::Proven)},
                  {"possible_violation", count(Outcome::PossibleViolation)},
                  {"discarded", count(Outcome::Discarded)}};
  j["provider_notes"] = provider_notes;
  j["triage_notes"] = triage_notes;
  return j;
}

std::string Report::to_text() const {
  std::ostringstream os;
  os << "contract " << contract;
  if (!source.empty()) os << " (" << source << ")";
  os << "\nW=" << cfg.dom.width << " A=" << cfg.dom.addresses << " arith=" << arith_name(cfg.dom.arith)
     << " m=" << cfg.max_txs << " provider=" << provider;
  if (cfg.dom.gas_cap > 0) os << " gas-cap=" << cfg.dom.gas_cap;
  os << "\n\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    os << i + 1 << ". " << r.spec.line() << "\n   " << outcome_name(r.outcome);
    if (!r.reason.empty()) os << " (" << r.reason << ")";
    if (!r.paired_with.empty()) os << " [with " << r.paired_with << "]";
    os << "\n";
    if (r.proof) os << "   proof " << r.proof->digest << ", " << r.proof->obligations.size() << " obligations\n";
    if (r.outcome == Outcome::PossibleViolation) {
      if (!r.init_args.empty()) {
        os << "   constructor(";
        for (std::size_t a = 0; a < r.init_args.size(); ++a) os << (a ? ", " : "") << r.init_args[a];
        os << ")\n";
      }
      for (const auto& t : r.txs) os << "   -> " << render_tx(t) << "\n";
      os << "   violates line " << r.violation->line << "; " << triage_name(r.triage) << "\n";
    }
  }
  os << "\n" << count(Outcome::Proven) << " proven, " << count(Outcome::PossibleViolation)
     << " possible violations, " << count(Outcome::Discarded) << " discarded, " << count(Outcome::SyntaxRejected)
     << " rejected\n";
  for (const auto& n : provider_notes) os << "note: " << n << "\n";
  return os.str();
}

nlohmann::json strip_timing(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("generated_at");
    j.erase("elapsed_ms");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

// Trace files -------------------------------------------------------------------

nlohmann::json trace_file_to_json(const TraceFile& t) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : t.candidates) {
    nlohmann::json e{{"anchor", c.anchor}, {"text", c.text}};
    if (c.k) e["k"] = *c.k;
    cands.push_back(e);
  }
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& x : t.txs) txs.push_back(tx_json(x));
  return {{"schema", "solinv-trace/1"},
          {"contract", t.contract},
          {"config",
           {{"width", t.dom.width}, {"addresses", t.dom.addresses}, {"arith", arith_name(t.dom.arith)}, {"gas_cap", t.dom.gas_cap}}},
          {"candidates", cands},
          {"init_args", t.init_args},
          {"txs", txs},
          {"violation", {{"line", t.violation_line}}}};
}

TraceFile trace_file_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != "solinv-trace/1") {
      throw TraceFormatError("not a solinv-trace/1 document");
    }
    TraceFile t;
    t.contract = j.at("contract").get<std::string>();
    const auto& c = j.at("config");
    t.dom.width = c.at("width").get<int>();
    t.dom.addresses = c.at("addresses").get<int>();
    t.dom.arith = parse_arith(c.at("arith").get<std::string>());
    t.dom.gas_cap = c.value("gas_cap", std::int64_t{0});
    for (const auto& e : j.at("candidates")) {
      CandidateSpec s{e.at("anchor").get<std::string>(), e.at("text").get<std::string>(), std::nullopt};
      if (e.contains("k")) s.k = e.at("k").get<double>();
      t.candidates.push_back(s);
    }
    t.init_args = j.at("init_args").get<std::vector<std::int64_t>>();
    for (const auto& x : j.at("txs")) {
      Transaction tx;
      tx.fn = x.at("fn").get<std::string>();
      tx.sender = x.at("sender").get<std::int64_t>();
      tx.args = x.at("args").get<std::vector<std::int64_t>>();
      tx.delta = x.value("delta", std::int64_t{0});
      t.txs.push_back(tx);
    }
    t.violation_line = j.at("violation").at("line").get<int>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw TraceFormatError(std::string("malformed trace: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw TraceFormatError(std::string("malformed trace: ") + e.what());
  }
}

TraceFile trace_file_for(const Report& report, const VerificationRecord& rec, const std::vector<CandidateSpec>& all) {
  TraceFile t;
  t.contract = report.contract;
  t.dom = report.cfg.dom;
  auto with_k = [&](CandidateSpec s) {
    if (!s.k) s.k = report.cfg.default_k;
    return s;
  };
  t.candidates.push_back(with_k(rec.spec));
  // a modifier pair is replayed with both halves
  for (const auto& r : report.records) {
    if (r.input_index == rec.input_index || rec.paired_with.empty()) continue;
    if (rec.paired_with.find(r.spec.anchor) != std::string::npos && r.paired_with.find(rec.spec.anchor) != std::string::npos) {
      t.candidates.push_back(with_k(all.at(r.input_index)));
    }
  }
  t.init_args = rec.init_args;
  t.txs = rec.txs;
  t.violation_line = rec.violation ? rec.violation->line : 0;
  return t;
}

ReplayResult replay(const ContractIr& ir, const TraceFile& t, std::optional<double> k) {
  if (t.contract != ir.name) throw TraceFormatError("trace is for contract " + t.contract + ", not " + ir.name);
  std::vector<InvariantCandidate> cands;
  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    const auto& s = t.candidates[i];
    auto c = parse_candidate(s.line(), ir, Rational::from_double(k ? *k : s.k.value_or(2.0)));
    c.id = static_cast<int>(i);
    cands.push_back(c);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const InvariantCandidate& a, const InvariantCandidate& b) {
    return a.modifier_definition > b.modifier_definition;
  });
  ContractIr out = ir;
  for (const auto& c : cands) out = instrument(out, c);
  const auto ts = lower(out, t.dom);
  ReplayResult r;
  r.trace = run(ts, t.init_args, t.txs);
  if (!r.trace.violation) {
    r.detail = "no check fails along the trace";
  } else if (r.trace.violation->line != t.violation_line) {
    r.detail = "a check fails at line " + std::to_string(r.trace.violation->line) + " instead of line " +
               std::to_string(t.violation_line);
  } else {
    r.reproduced = true;
    r.detail = "violation at line " + std::to_string(t.violation_line) + " after step " +
               std::to_string(r.trace.violation->step);
  }
  return r;
}

}  // namespace solinv
