#pragma once

#include <string>

#include "solinv/frontend.hpp"
#include "solinv/invariants.hpp"
#include "solinv/semantics.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(SOLINV_FIXTURES) + "/" + name; }

inline solinv::ContractIr load(const std::string& name) {
  return solinv::parse(solinv::SourceFile::load(fixture(name + ".msol")));
}

// Candidate `index` of the fixture's sidecar file, parsed and woven in.
inline solinv::ContractIr with_candidate(const solinv::ContractIr& ir, const std::string& name, std::size_t index,
                                         int id = 0) {
  const auto specs = solinv::load_candidates(fixture(name + ".candidates.json"));
  const auto& s = specs.at(index);
  solinv::Rational k;
  if (s.k) k = solinv::Rational::from_double(*s.k);
  auto c = solinv::parse_candidate(s.line(), ir, k);
  c.id = id;
  return solinv::instrument(ir, c);
}

inline solinv::Transaction tx(std::string fn, std::int64_t sender, std::vector<std::int64_t> args,
                              std::int64_t delta = 0) {
  return solinv::Transaction{std::move(fn), sender, std::move(args), delta};
}

}  // namespace testing
