#include "solinv/sat.hpp"

#include <algorithm>

namespace solinv::sat {

namespace {

double luby(double y, int x) {
  int size = 1;
  int seq = 0;
  while (size < x + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != x) {
    size = (size - 1) >> 1;
    --seq;
    x = x % size;
  }
  double r = 1;
  for (int i = 0; i < seq; ++i) r *= y;
  return r;
}

}  // namespace

std::uint32_t Solver::new_var() {
  const auto v = num_vars();
  assigns_.push_back(kUndef);
  phase_.push_back(kFalse);
  levels_.push_back(0);
  reasons_.push_back(-1);
  activity_.push_back(0.0);
  heap_pos_.push_back(-1);
  seen_.push_back(0);
  watches_.emplace_back();
  watches_.emplace_back();
  heap_insert(v);
  return v;
}

void Solver::attach(std::int32_t ci) {
  const auto& c = clauses_[static_cast<std::size_t>(ci)];
  watches_[(~c.lits[0]).code].push_back(ci);
  watches_[(~c.lits[1]).code].push_back(ci);
}

bool Solver::add_clause(std::span<const Lit> input) {
  if (!ok_) return false;
  backtrack(0);
  std::vector<Lit> lits(input.begin(), input.end());
  std::sort(lits.begin(), lits.end(), [](Lit a, Lit b) { return a.code < b.code; });
  std::vector<Lit> out;
  for (std::size_t i = 0; i < lits.size(); ++i) {
    const Lit l = lits[i];
    if (value(l) == kTrue) return true;
    if (i + 1 < lits.size() && lits[i + 1] == ~l) return true;  // tautology
    if (value(l) == kFalse) continue;
    if (!out.empty() && out.back() == l) continue;
    out.push_back(l);
  }
  if (out.empty()) {
    ok_ = false;
    return false;
  }
  if (out.size() == 1) {
    enqueue(out[0], -1);
    if (propagate() >= 0) ok_ = false;
    return ok_;
  }
  clauses_.push_back(Clause{std::move(out), false});
  attach(static_cast<std::int32_t>(clauses_.size() - 1));
  return true;
}

void Solver::enqueue(Lit l, std::int32_t reason) {
  assigns_[l.var()] = l.negated() ? kFalse : kTrue;
  levels_[l.var()] = level();
  reasons_[l.var()] = reason;
  trail_.push_back(l);
}

std::int32_t Solver::propagate() {
  while (qhead_ < trail_.size()) {
    const Lit p = trail_[qhead_++];  // p became true; visit clauses watching ~p
    auto& ws = watches_[p.code];
    std::size_t i = 0, j = 0;
    while (i < ws.size()) {
      const std::int32_t ci = ws[i];
      auto& c = clauses_[static_cast<std::size_t>(ci)].lits;
      const Lit false_lit = ~p;
      if (c[0] == false_lit) std::swap(c[0], c[1]);
      if (value(c[0]) == kTrue) {
        ws[j++] = ws[i++];
        continue;
      }
      bool moved = false;
      for (std::size_t k = 2; k < c.size(); ++k) {
        if (value(c[k]) != kFalse) {
          std::swap(c[1], c[k]);
          watches_[(~c[1]).code].push_back(ci);
          moved = true;
          break;
        }
      }
      if (moved) {
        ++i;
        continue;
      }
      ws[j++] = ws[i++];
      if (value(c[0]) == kFalse) {
        while (i < ws.size()) ws[j++] = ws[i++];
        ws.resize(j);
        qhead_ = trail_.size();
        return ci;
      }
      enqueue(c[0], ci);
    }
    ws.resize(j);
  }
  return -1;
}

void Solver::analyze(std::int32_t conflict, std::vector<Lit>& learnt, std::uint32_t& backjump) {
  learnt.clear();
  learnt.push_back(Lit{});  // placeholder for the asserting literal
  int pending = 0;
  Lit p{};
  bool have_p = false;
  std::size_t index = trail_.size();
  std::int32_t ci = conflict;
  do {
    const auto& c = clauses_[static_cast<std::size_t>(ci)].lits;
    for (std::size_t k = have_p ? 1 : 0; k < c.size(); ++k) {
      const Lit q = c[k];
      const auto v = q.var();
      if (seen_[v] || levels_[v] == 0) continue;
      seen_[v] = 1;
      bump(v);
      if (levels_[v] >= level()) ++pending;
      else learnt.push_back(q);
    }
    do {
      --index;
    } while (!seen_[trail_[index].var()]);
    p = trail_[index];
    have_p = true;
    ci = reasons_[p.var()];
    seen_[p.var()] = 0;
    --pending;
    if (pending > 0 && ci >= 0) {
      // the reason clause stores the implied literal first
      auto& rc = clauses_[static_cast<std::size_t>(ci)].lits;
      if (rc[0].var() != p.var()) {
        for (std::size_t k = 1; k < rc.size(); ++k) {
          if (rc[k].var() == p.var()) {
            std::swap(rc[0], rc[k]);
            break;
          }
        }
      }
    }
  } while (pending > 0);
  learnt[0] = ~p;

  backjump = 0;
  if (learnt.size() > 1) {
    std::size_t max_i = 1;
    for (std::size_t k = 2; k < learnt.size(); ++k) {
      if (levels_[learnt[k].var()] > levels_[learnt[max_i].var()]) max_i = k;
    }
    std::swap(learnt[1], learnt[max_i]);
    backjump = levels_[learnt[1].var()];
  }
  for (const Lit l : learnt) seen_[l.var()] = 0;
}

void Solver::backtrack(std::uint32_t lvl) {
  if (level() <= lvl) return;
  for (std::size_t i = trail_.size(); i > trail_lim_[lvl]; --i) {
    const auto v = trail_[i - 1].var();
    phase_[v] = assigns_[v];
    assigns_[v] = kUndef;
    reasons_[v] = -1;
    if (heap_pos_[v] < 0) heap_insert(v);
  }
  trail_.resize(trail_lim_[lvl]);
  trail_lim_.resize(lvl);
  qhead_ = trail_.size();
}

void Solver::bump(std::uint32_t v) {
  activity_[v] += var_inc_;
  if (activity_[v] > 1e100) {
    for (auto& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_pos_[v] >= 0) heap_up(static_cast<std::size_t>(heap_pos_[v]));
}

void Solver::decay() { var_inc_ *= 1.0 / 0.95; }

void Solver::heap_insert(std::uint32_t v) {
  heap_pos_[v] = static_cast<std::int32_t>(heap_.size());
  heap_.push_back(v);
  heap_up(heap_.size() - 1);
}

void Solver::heap_up(std::size_t i) {
  const auto v = heap_[i];
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (activity_[heap_[parent]] >= activity_[v]) break;
    heap_[i] = heap_[parent];
    heap_pos_[heap_[i]] = static_cast<std::int32_t>(i);
    i = parent;
  }
  heap_[i] = v;
  heap_pos_[v] = static_cast<std::int32_t>(i);
}

void Solver::heap_down(std::size_t i) {
  const auto v = heap_[i];
  for (;;) {
    std::size_t child = 2 * i + 1;
    if (child >= heap_.size()) break;
    if (child + 1 < heap_.size() && activity_[heap_[child + 1]] > activity_[heap_[child]]) ++child;
    if (activity_[heap_[child]] <= activity_[v]) break;
    heap_[i] = heap_[child];
    heap_pos_[heap_[i]] = static_cast<std::int32_t>(i);
    i = child;
  }
  heap_[i] = v;
  heap_pos_[v] = static_cast<std::int32_t>(i);
}

std::uint32_t Solver::heap_pop() {
  const auto top = heap_[0];
  heap_[0] = heap_.back();
  heap_pos_[heap_[0]] = 0;
  heap_.pop_back();
  heap_pos_[top] = -1;
  if (!heap_.empty()) heap_down(0);
  return top;
}

std::optional<Lit> Solver::pick_branch() {
  while (!heap_.empty()) {
    const auto v = heap_pop();
    if (assigns_[v] == kUndef) return Lit::make(v, phase_[v] != kTrue);
  }
  return std::nullopt;
}

Result Solver::solve(std::span<const Lit> assumptions, std::int64_t conflict_budget) {
  if (!ok_) return Result::Unsat;
  backtrack(0);
  if (propagate() >= 0) {
    ok_ = false;
    return Result::Unsat;
  }
  std::int64_t budget_left = conflict_budget;
  int restart_index = 0;
  std::vector<Lit> learnt;
  for (;;) {
    const auto restart_limit = static_cast<std::int64_t>(luby(2.0, restart_index++) * 100);
    std::int64_t conflicts_this_run = 0;
    for (;;) {
      const std::int32_t conflict = propagate();
      if (conflict >= 0) {
        ++total_conflicts_;
        ++conflicts_this_run;
        if (budget_left >= 0 && --budget_left < 0) {
          backtrack(0);
          return Result::Unknown;
        }
        if (level() == 0) {
          ok_ = false;
          return Result::Unsat;
        }
        std::uint32_t backjump = 0;
        analyze(conflict, learnt, backjump);
        backtrack(backjump);
        if (learnt.size() == 1) {
          enqueue(learnt[0], -1);
        } else {
          clauses_.push_back(Clause{learnt, true});
          const auto ci = static_cast<std::int32_t>(clauses_.size() - 1);
          attach(ci);
          enqueue(learnt[0], ci);
        }
        decay();
        continue;
      }
      if (conflicts_this_run >= restart_limit) {
        backtrack(0);
        break;
      }
      std::optional<Lit> next;
      while (level() < assumptions.size()) {
        const Lit a = assumptions[level()];
        if (value(a) == kTrue) {
          trail_lim_.push_back(trail_.size());  // dummy level
        } else if (value(a) == kFalse) {
          backtrack(0);
          return Result::Unsat;
        } else {
          next = a;
          break;
        }
      }
      if (!next) {
        next = pick_branch();
        if (!next) {
          model_.assign(num_vars(), false);
          for (std::uint32_t v = 0; v < num_vars(); ++v) model_[v] = assigns_[v] == kTrue;
          backtrack(0);
          return Result::Sat;
        }
      }
      trail_lim_.push_back(trail_.size());
      enqueue(*next, -1);
    }
  }
}

}  // namespace solinv::sat
