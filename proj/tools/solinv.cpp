// solinv command line: verify, replay, corpus, prompt-gen.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "solinv/frontend.hpp"
#include "solinv/pipeline.hpp"

namespace fs = std::filesystem;
using namespace solinv;

namespace {

constexpr int kUsage = 2;

struct Flags {
  int width = 8;
  int addresses = 3;
  std::string arith = "revert";
  int max_txs = 4;
  double k = 2.0;
  std::string provider = "heuristic";
  bool stop_first = false;
  std::string out = "solinv-out";
  std::int64_t gas_cap = -1;  // -1: take the contract's //@gas-cap

  void add_to(CLI::App* app) {
    app->add_option("--width", width, "bits per uint")->check(CLI::Range(1, 16));
    app->add_option("--addresses", addresses, "size of the address universe, last one is the contract")
        ->check(CLI::Range(2, 16));
    app->add_option("--arith", arith, "overflow behavior")->check(CLI::IsMember({"revert", "wrap"}));
    app->add_option("--max-txs", max_txs, "transaction bound m")->check(CLI::PositiveNumber);
    app->add_option("--k", k, "default scaling factor for k in candidates")->check(CLI::PositiveNumber);
    app->add_option("--provider", provider, "heuristic, replay:<answers.json> or remote");
    app->add_flag("--stop-on-first-violation", stop_first, "stop verifying after the first possible violation");
    app->add_option("--out", out, "output directory");
    app->add_option("--gas-cap", gas_cap, "statements per transaction, 0 for unlimited")->check(CLI::NonNegativeNumber);
  }

  PipelineConfig config(const ContractIr& ir) const {
    PipelineConfig c;
    c.dom.width = width;
    c.dom.addresses = addresses;
    c.dom.arith = parse_arith(arith);
    c.dom.gas_cap = gas_cap >= 0 ? gas_cap : ir.gas_cap;
    c.max_txs = max_txs;
    c.default_k = k;
    c.stop_on_first_violation = stop_first;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string describe(const std::exception& e) {
  if (auto* p = dynamic_cast<const ParseError*>(&e)) {
    std::string s = std::string("parse error: ") + p->what();
    if (!p->expected.empty()) {
      s += " (expected";
      for (const auto& x : p->expected) s += " " + x;
      s += ")";
    }
    return s;
  }
  if (dynamic_cast<const TypeError*>(&e)) return std::string("type error: ") + e.what();
  return e.what();
}

fs::path sibling(const fs::path& contract, const std::string& suffix) {
  return contract.parent_path() / (contract.stem().string() + suffix);
}

// Candidates for one contract: explicit file, provider proposals, or the
// sidecar file next to the contract.
std::vector<CandidateSpec> candidates_for(const fs::path& contract, const ContractIr& ir, const std::string& source,
                                          const std::string& explicit_path, bool use_tot, tot::RankProvider& provider) {
  if (!explicit_path.empty()) return load_candidates(explicit_path);
  if (use_tot) return provider.propose(ir, source);
  const auto side = sibling(contract, ".candidates.json");
  if (fs::exists(side)) return load_candidates(side.string());
  const auto answers = sibling(contract, ".answers.json");
  if (fs::exists(answers)) {
    tot::ReplayProvider r(tot::load_answers(answers.string()));
    return r.propose(ir, source);
  }
  return tot::HeuristicRanker().propose(ir, source);
}

int cmd_verify(const std::string& contract, const std::string& cand_path, bool use_tot, const Flags& f) {
  const auto src = SourceFile::load(contract);
  const auto ir = parse(src);
  auto provider = tot::make_provider(f.provider);
  const auto specs = candidates_for(contract, ir, src.text(), cand_path, use_tot, *provider);
  const auto cfg = f.config(ir);
  const auto report = verify_all(ir, specs, *provider, cfg, contract);

  fs::create_directories(f.out);
  write_file(fs::path(f.out) / "report.json", report.to_json().dump(2) + "\n");
  write_file(fs::path(f.out) / "report.txt", report.to_text());
  int n = 0;
  for (const auto& r : report.records) {
    if (r.outcome != Outcome::PossibleViolation) continue;
    const auto name = "trace-" + std::to_string(++n) + ".json";
    write_file(fs::path(f.out) / name, trace_file_to_json(trace_file_for(report, r, specs)).dump(2) + "\n");
  }
  std::cout << report.to_text();
  return report.count(Outcome::PossibleViolation) > 0 ? 1 : 0;
}

int cmd_replay(const std::string& contract, const std::string& trace_path, std::optional<double> k) {
  const auto ir = parse(SourceFile::load(contract));
  std::ifstream in(trace_path);
  if (!in) throw std::runtime_error("cannot read trace file " + trace_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw TraceFormatError(std::string("trace is not JSON: ") + e.what());
  }
  const auto tf = trace_file_from_json(j);
  const auto r = replay(ir, tf, k);
  for (std::size_t i = 0; i < tf.txs.size(); ++i) {
    const auto& step = r.trace.steps.size() > i + 1 ? r.trace.steps[i + 1].reason : std::string();
    std::cout << i + 1 << ". " << render_tx(tf.txs[i]) << (step.empty() ? "" : "  [" + step + "]") << "\n";
  }
  std::cout << (r.reproduced ? "reproduced: " : "not reproduced: ") << r.detail << "\n";
  return r.reproduced ? 1 : 3;
}

struct Row {
  std::string contract;
  std::string status = "ok";
  std::size_t candidates = 0, rejected = 0, proven = 0, violations = 0, discarded = 0;
  double wall_ms = 0;
  std::string error;
};

int cmd_corpus(const std::string& dir, int jobs, const Flags& f) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".msol") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Row> rows(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      Row& row = rows[i];
      row.contract = files[i].filename().string();
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto src = SourceFile::load(files[i].string());
        const auto ir = parse(src);
        auto provider = tot::make_provider(f.provider);
        const auto specs = candidates_for(files[i], ir, src.text(), "", false, *provider);
        const auto rep = verify_all(ir, specs, *provider, f.config(ir), files[i].string());
        row.candidates = rep.records.size();
        row.rejected = rep.count(Outcome::SyntaxRejected);
        row.proven = rep.count(Outcome::Proven);
        row.violations = rep.count(Outcome::PossibleViolation);
        row.discarded = rep.count(Outcome::Discarded);
      } catch (const std::exception& e) {
        row.status = "Error";
        row.error = describe(e);
      }
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "contract,status,candidates,syntax_rejected,proven,possible_violation,discarded,wall_ms,error\n";
  nlohmann::json js = nlohmann::json::array();
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    csv << r.contract << "," << r.status << "," << r.candidates << "," << r.rejected << "," << r.proven << ","
        << r.violations << "," << r.discarded << "," << static_cast<long long>(r.wall_ms) << ",\"" << err << "\"\n";
    nlohmann::json e{{"contract", r.contract},          {"status", r.status},
                     {"candidates", r.candidates},      {"syntax_rejected", r.rejected},
                     {"proven", r.proven},              {"possible_violation", r.violations},
                     {"discarded", r.discarded},        {"wall_ms", r.wall_ms}};
    if (!r.error.empty()) e["error"] = r.error;
    js.push_back(e);
  }
  fs::create_directories(f.out);
  write_file(fs::path(f.out) / "corpus.csv", csv.str());
  write_file(fs::path(f.out) / "corpus.json", nlohmann::json{{"schema", "solinv-corpus/1"}, {"rows", js}}.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

int cmd_prompt_gen(const std::string& contract, const std::string& answers_path, const std::string& format) {
  const auto src = SourceFile::load(contract);
  parse(src);  // refuse contracts the rest of the tool cannot read
  std::map<std::string, std::string> ctx{{"contract", src.text()}};
  if (!answers_path.empty()) {
    for (const auto& [k, v] : tot::load_answers(answers_path)) ctx[k] = v;
  }
  nlohmann::json out = nlohmann::json::array();
  std::string stopped;
  for (const auto& key : tot::slots()) {
    try {
      const auto p = tot::render_prompt(key[0] - '0', key[1], ctx);
      out.push_back({{"tier", p.tier}, {"slot", std::string(1, p.slot)}, {"text", p.text}, {"carried", p.carried}});
    } catch (const tot::MissingPriorTier& e) {
      stopped = e.what();
      break;
    }
  }
  if (format == "json") {
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& p : out) {
      std::cout << "== " << p["tier"].get<int>() << p["slot"].get<std::string>() << "\n"
                << p["text"].get<std::string>() << "\n\n";
    }
  }
  if (!stopped.empty()) std::cerr << "stopped: " << stopped << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solinv: invariant checking for MiniSol contracts"};
  app.require_subcommand(1);

  Flags vf;
  std::string v_contract, v_candidates;
  bool v_tot = false;
  auto* verify = app.add_subcommand("verify", "verify candidate invariants of one contract");
  verify->add_option("contract", v_contract, "MiniSol source")->required();
  verify->add_option("--candidates", v_candidates, "candidates JSON (default: <contract>.candidates.json)");
  verify->add_flag("--tot", v_tot, "take candidates from the provider instead of a file");
  vf.add_to(verify);

  std::string r_contract, r_trace;
  std::optional<double> r_k;
  auto* rep = app.add_subcommand("replay", "replay a counterexample trace");
  rep->add_option("contract", r_contract, "MiniSol source")->required();
  rep->add_option("trace", r_trace, "trace JSON written by verify")->required();
  rep->add_option("--k", r_k, "override the scaling factor of every candidate");

  Flags cf;
  std::string c_dir;
  int c_jobs = 1;
  auto* corpus = app.add_subcommand("corpus", "verify every contract in a directory");
  corpus->add_option("dir", c_dir, "directory of .msol files with candidate or answer files")->required();
  corpus->add_option("--jobs", c_jobs, "contracts verified in parallel")->check(CLI::PositiveNumber);
  cf.add_to(corpus);

  std::string p_contract, p_answers, p_format = "text";
  auto* pg = app.add_subcommand("prompt-gen", "print the tiered prompts for a contract");
  pg->add_option("contract", p_contract, "MiniSol source")->required();
  pg->add_option("--answers", p_answers, "answers JSON that fills later tiers");
  pg->add_option("--format", p_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*verify) return cmd_verify(v_contract, v_candidates, v_tot, vf);
    if (*rep) return cmd_replay(r_contract, r_trace, r_k);
    if (*corpus) return cmd_corpus(c_dir, c_jobs, cf);
    if (*pg) return cmd_prompt_gen(p_contract, p_answers, p_format);
  } catch (const ReplayMismatch& e) {
    std::cerr << "solinv: internal error, counterexample does not replay: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "solinv: " << describe(e) << "\n";
    return kUsage;
  }
  return kUsage;
}
