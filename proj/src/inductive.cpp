#include "solinv/inductive.hpp"

#include <cstdio>

namespace solinv {

using namespace solver;

const char* outcome_name(InductiveOutcome o) {
  switch (o) {
    case InductiveOutcome::Proven: return "Proven";
    case InductiveOutcome::NotProven: return "NotProven";
    case InductiveOutcome::Unknown: return "Unknown";
  }
  return "?";
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const Expr* state_predicate(const InvariantCandidate& c) {
  return c.is_state_predicate() ? c.expr.get() : nullptr;
}

namespace {

std::vector<Term> declare_ctor_args(const TransitionSystem& ts, Store& store) {
  std::vector<Term> args;
  for (const auto& p : ts.constructor.params) args.push_back(store.declare("init." + p.name, ts.dom.domain_of(p.type)));
  return args;
}

std::vector<std::int64_t> ctor_args(const TransitionSystem& ts, const Model& m) {
  std::vector<std::int64_t> out;
  for (const auto& p : ts.constructor.params) out.push_back(m.has("init." + p.name) ? m.at("init." + p.name) : 0);
  return out;
}

Obligation::Status status_of(const CheckResult& r) {
  if (is_unsat(r)) return Obligation::Status::Holds;
  if (is_sat(r)) return Obligation::Status::Fails;
  return Obligation::Status::Unknown;
}

}  // namespace

InductiveResult inductive_check(const TransitionSystem& ts, const Expr* predicate, Budget budget) {
  InductiveResult res;
  std::string all;
  bool unknown = false;

  auto record = [&](const std::string& name, const Store& store, const CheckResult& r) {
    Obligation ob;
    ob.name = name;
    const std::string dump = store.dump();
    ob.digest = fnv1a(dump);
    ob.status = status_of(r);
    all += name + "\n" + dump;
    res.obligations.push_back(ob);
    if (ob.status == Obligation::Status::Unknown) unknown = true;
    return ob.status;
  };

  {
    Store store(budget);
    const auto args = declare_ctor_args(ts, store);
    Encoder enc(ts, store);
    enc.constructor(args);
    Term bad = enc.viol;
    if (predicate) bad = lor(bad, land(enc.live, lnot(enc.predicate(*predicate, enc.state))));
    store.assert_term(bad);
    const auto r = store.check();
    if (record("init", store, r) == Obligation::Status::Fails) {
      InductionWitness w;
      w.obligation = "init";
      w.init_args = ctor_args(ts, std::get<Sat>(r).model);
      res.witness = w;
      res.outcome = InductiveOutcome::NotProven;
      return res;
    }
  }

  for (std::size_t j = 0; j < ts.actions.size(); ++j) {
    const Action& a = ts.actions[j];
    const std::string name = "consecution(" + a.name + ")";
    Store store(budget);
    const SymState pre_vars = [&] {
      Encoder tmp(ts, store);
      return tmp.fresh_state("pre");
    }();
    const SymTx tx = declare_tx(ts, store, "tx");
    Encoder enc(ts, store);
    enc.state = pre_vars;
    if (predicate) store.assert_term(enc.predicate(*predicate, pre_vars));
    enc.transaction(tx, boolean(true), 1, "d1", j);
    Term bad = enc.viol;
    if (predicate) bad = lor(bad, land(lnot(enc.rev), lnot(enc.predicate(*predicate, enc.state))));
    store.assert_term(bad);
    const auto r = store.check();
    if (record(name, store, r) == Obligation::Status::Fails) {
      const Model& m = std::get<Sat>(r).model;
      InductionWitness w;
      w.obligation = name;
      ContractState pre;
      for (const auto& slot : ts.layout.slots) pre.values.push_back(m.has("pre." + slot.name) ? m.at("pre." + slot.name) : 0);
      w.pre = pre;
      Transaction t;
      t.fn = a.name;
      t.sender = m.has("tx.sender") ? m.at("tx.sender") : 0;
      t.delta = m.has("tx.delta") ? m.at("tx.delta") : 0;
      t.args = action_args(a, m, "tx");
      w.tx = t;
      res.witness = w;
      res.outcome = InductiveOutcome::NotProven;
      return res;
    }
  }

  if (unknown) {
    res.outcome = InductiveOutcome::Unknown;
    return res;
  }
  res.outcome = InductiveOutcome::Proven;
  Proof p;
  p.digest = fnv1a(all);
  p.obligations = res.obligations;
  res.proof = p;
  return res;
}

}  // namespace solinv
