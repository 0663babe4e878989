#include "solinv/bmc.hpp"

#include <set>

namespace solinv {

using namespace solver;

const char* outcome_name(BmcOutcome o) {
  switch (o) {
    case BmcOutcome::Counterexample: return "Counterexample";
    case BmcOutcome::NoCounterexampleWithinBound: return "NoCounterexampleWithinBound";
    case BmcOutcome::Unknown: return "Unknown";
  }
  return "?";
}

SiteSplit split_on_recursive_depth(const std::vector<CallSite>& open, int bound) {
  SiteSplit s;
  for (const auto& c : open) (c.depth < bound ? s.within : s.beyond).push_back(c);
  return s;
}

namespace {

struct Harness {
  Store store;
  Term n_txs;
  std::vector<Term> init;
  std::vector<SymTx> txs;
  std::vector<CallSite> open;  // sites not inlined in this encoding
};

CallSite dispatch_site(int k) {
  CallSite s;
  s.id = "dispatch" + std::to_string(k);
  s.callee = "dispatch";
  s.stack = {"main"};
  for (int i = 0; i < k; ++i) s.stack.push_back("dispatch");
  s.depth = k;
  return s;
}

// Encodes the harness. Sites in `inlined` are expanded; every other site gets
// `other(site)`.
void encode(const TransitionSystem& ts, const BmcConfig& cfg, const std::set<std::string>& inlined,
            const std::function<SitePolicy(const CallSite&)>& other, Harness& h) {
  const int m = cfg.max_txs;
  h.n_txs = h.store.declare("n_txs", m + 1);
  for (const auto& p : ts.constructor.params) h.init.push_back(h.store.declare("init." + p.name, ts.dom.domain_of(p.type)));
  for (int k = 1; k <= m; ++k) h.txs.push_back(declare_tx(ts, h.store, "d" + std::to_string(k)));

  auto policy = [&](const CallSite& s) {
    if (inlined.count(s.id)) return SitePolicy::Inline;
    const SitePolicy p = other(s);
    h.open.push_back(s);
    return p;
  };
  Encoder enc(ts, h.store, policy);
  enc.constructor(h.init);
  for (int k = 1; k <= m; ++k) {
    const CallSite site = dispatch_site(k);
    const Term active = le(constant(k), h.n_txs);
    const SitePolicy p = policy(site);
    if (p == SitePolicy::Inline) {
      enc.transaction(h.txs[static_cast<std::size_t>(k - 1)], active, k, "d" + std::to_string(k));
      continue;
    }
    const Term reach = land(enc.live, active);
    if (p == SitePolicy::Block) {
      enc.blocked = lor(enc.blocked, reach);
    } else {
      // the rest of the sequence may violate a check
      enc.viol = lor(enc.viol, land(reach, ne(enc.fresh("dispatch" + std::to_string(k) + ".viol", 2), constant(0))));
    }
    break;
  }
  h.store.assert_term(enc.viol);
}

}  // namespace

BmcResult bmc(const TransitionSystem& ts, const BmcConfig& cfg) {
  BmcResult res;
  std::set<std::string> inlined;
  const int bound = cfg.max_txs + 1;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    res.rounds = round;
    res.inlined_sites = inlined.size();

    // under-approximation: every open site is blocked
    Harness under{Store(cfg.budget), {}, {}, {}, {}};
    encode(ts, cfg, inlined, [](const CallSite&) { return SitePolicy::Block; }, under);
    const auto r1 = under.store.check();
    if (std::holds_alternative<BudgetExceeded>(r1)) {
      res.outcome = BmcOutcome::Unknown;
      return res;
    }
    if (is_sat(r1)) {
      const Model& m = std::get<Sat>(r1).model;
      for (const auto& p : ts.constructor.params) res.init_args.push_back(m.at("init." + p.name));
      const auto n = m.at("n_txs");
      for (std::int64_t k = 1; k <= n; ++k) {
        const std::string prefix = "d" + std::to_string(k);
        const Action& a = ts.actions.at(static_cast<std::size_t>(m.at(prefix + ".fn")));
        Transaction t;
        t.fn = a.name;
        t.sender = m.at(prefix + ".sender");
        t.delta = m.at(prefix + ".delta");
        t.args = action_args(a, m, prefix);
        res.txs.push_back(t);
      }
      res.trace = run(ts, res.init_args, res.txs);
      if (!res.trace.violation) {
        std::string seq;
        for (const auto& t : res.txs) seq += " " + render_tx(t) + ";";
        throw ReplayMismatch("solver counterexample does not replay:" + seq);
      }
      res.outcome = BmcOutcome::Counterexample;
      return res;
    }

    const auto split = split_on_recursive_depth(under.open, bound);
    if (split.within.empty()) {
      res.outcome = BmcOutcome::NoCounterexampleWithinBound;
      return res;
    }

    // over-approximation: open sites within the bound are summarized
    Harness over{Store(cfg.budget), {}, {}, {}, {}};
    encode(ts, cfg, inlined,
           [bound](const CallSite& s) { return s.depth < bound ? SitePolicy::Summarize : SitePolicy::Block; }, over);
    const auto r2 = over.store.check();
    if (std::holds_alternative<BudgetExceeded>(r2)) {
      res.outcome = BmcOutcome::Unknown;
      return res;
    }
    if (is_unsat(r2)) {
      res.outcome = BmcOutcome::NoCounterexampleWithinBound;
      return res;
    }
    for (const auto& s : split.within) inlined.insert(s.id);
  }
  res.outcome = BmcOutcome::Unknown;
  return res;
}

}  // namespace solinv
