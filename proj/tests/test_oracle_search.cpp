#include "doctest.h"
#include "refl/errors.hpp"
#include "refl/machine.hpp"
#include "refl/oracle_search.hpp"
#include "refl/partial_oracle.hpp"

using namespace refl;

namespace {

const char* kDiagonalizer =
    "ORACLE SELF, eps, 1/2\n"
    "JZ say1\n"
    "OUT0\n"
    "say1: OUT1\n";

MachineRegistry diag_registry() {
  MachineRegistry reg;
  reg.register_program(assemble(kDiagonalizer));
  return reg;
}

}  // namespace

TEST_CASE("root_candidates come in documented order 1/2, 0, 1") {
  MachineRegistry reg = diag_registry();
  auto roots = root_candidates(reg);
  REQUIRE(roots.size() == 3);
  CHECK(roots[0].value(1) == Rat(1, 2));
  CHECK(roots[1].value(1) == Rat(0));
  CHECK(roots[2].value(1) == Rat(1));
  auto again = root_candidates(reg);
  for (int i = 0; i < 3; ++i)
    CHECK(roots[static_cast<std::size_t>(i)].numerators() ==
          again[static_cast<std::size_t>(i)].numerators());
}

TEST_CASE("extension candidate counts match the grid geometry") {
  MachineRegistry reg = diag_registry();

  PartialOracle half(1, {1}, reg.fingerprint());
  ExtensionCandidates mid(half);
  int count = 0;
  while (auto cand = mid.next()) {
    CHECK(extends(*cand, half));
    ++count;
  }
  CHECK(count == 15);  // 3 moves for the old query x 5 grid values for the new

  PartialOracle zero(1, {0}, reg.fingerprint());
  ExtensionCandidates low(zero);
  count = 0;
  while (auto cand = low.next()) {
    CHECK(extends(*cand, zero));
    ++count;
  }
  CHECK(count == 10);  // downward move clipped at the boundary
}

TEST_CASE("search: diagonalizer pins its self-query to 1/2") {
  MachineRegistry reg = diag_registry();
  const Query self{1, "", Rat(1, 2)};
  REQUIRE(query_index(reg, self) == 4);

  OracleTrace trace = search(reg, 6, 1u << 20);
  CHECK(trace.reached_max_level);
  CHECK(!trace.budget_exhausted);

  // Every emitted oracle deep enough to cover q4 assigns exactly 1/2.
  int deep = 0;
  for (const TraceEntry& e : trace.emissions) {
    if (e.level >= 4) {
      CHECK(e.numerators[3] == (std::int64_t{1} << (e.level - 1)));
      ++deep;
    }
  }
  CHECK(deep > 0);
  for (int k = 4; k <= 6; ++k)
    CHECK(answer_at_level(trace, reg, self, k) == Rat(1, 2));
}

TEST_CASE("search: final chain is an extends-chain of reflective oracles") {
  MachineRegistry reg = diag_registry();
  OracleTrace trace = search(reg, 6, 1u << 20);
  auto chain = trace.final_chain();
  REQUIRE(chain.size() == 6);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    CHECK(is_partially_reflective(chain[i], reg).reflective);
    if (i + 1 < chain.size()) CHECK(extends(chain[i + 1], chain[i]));
  }
  // Cauchy property restated: consecutive answers move by at most 2^-(k+1).
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    int k = chain[i].level();
    for (std::uint64_t q = 1; q <= static_cast<std::uint64_t>(k); ++q) {
      Rat diff = chain[i].value(q) - chain[i + 1].value(q);
      CHECK(diff <= pow2(-(k + 1)));
      CHECK(-diff <= pow2(-(k + 1)));
    }
  }
}

TEST_CASE("search: constant machine forces answer 1 below the crossover") {
  MachineRegistry reg;
  reg.register_program(assemble("OUT1"));
  OracleTrace trace = search(reg, 8, 1u << 20);
  REQUIRE(trace.reached_max_level);
  auto chain = trace.final_chain();
  auto queries = enumerate_queries(reg, 8);
  const PartialOracle& last = chain.back();
  for (std::uint64_t i = 1; i <= 8; ++i) {
    if (queries[i - 1].threshold < 1)
      CHECK(last.value(i) == Rat(1));
  }
  CHECK(answer_at_level(trace, reg, Query{1, "", Rat(1, 2)}, 8) == Rat(1));
}

TEST_CASE("search is deterministic") {
  MachineRegistry reg = diag_registry();
  OracleTrace a = search(reg, 5, 1u << 20);
  OracleTrace b = search(reg, 5, 1u << 20);
  REQUIRE(a.emissions.size() == b.emissions.size());
  for (std::size_t i = 0; i < a.emissions.size(); ++i) {
    CHECK(a.emissions[i].level == b.emissions[i].level);
    CHECK(a.emissions[i].numerators == b.emissions[i].numerators);
  }
  CHECK(a.expansions == b.expansions);
}

TEST_CASE("pruning does not change the emitted chain") {
  SearchOptions pruned{true};
  SearchOptions exhaustive{false};

  MachineRegistry constant;
  constant.register_program(assemble("OUT1"));
  MachineRegistry diag = diag_registry();

  for (const MachineRegistry* reg : {&constant, &diag}) {
    OracleTrace a = search(*reg, 3, 1u << 20, pruned);
    OracleTrace b = search(*reg, 3, 1u << 20, exhaustive);
    REQUIRE(a.emissions.size() == b.emissions.size());
    for (std::size_t i = 0; i < a.emissions.size(); ++i) {
      CHECK(a.emissions[i].level == b.emissions[i].level);
      CHECK(a.emissions[i].numerators == b.emissions[i].numerators);
    }
  }
}

TEST_CASE("search: empty registry yields a vacuous chain") {
  MachineRegistry reg;
  OracleTrace trace = search(reg, 4, 1000);
  CHECK(trace.reached_max_level);
  auto chain = trace.final_chain();
  REQUIRE(chain.size() == 4);
  for (const auto& po : chain)
    CHECK(is_partially_reflective(po, reg).reflective);
}

TEST_CASE("search: budget exhaustion is flagged") {
  MachineRegistry reg = diag_registry();
  OracleTrace none = search(reg, 6, 0);
  CHECK(none.budget_exhausted);
  CHECK(none.emissions.empty());

  OracleTrace some = search(reg, 6, 3);
  CHECK(some.budget_exhausted);
  CHECK(!some.reached_max_level);
}

TEST_CASE("stabilization markers hold for the final chain") {
  MachineRegistry reg = diag_registry();
  OracleTrace trace = search(reg, 5, 1u << 20);
  // The last emission per level is never revisited.
  auto chain = trace.final_chain();
  std::vector<const TraceEntry*> last_at(6, nullptr);
  for (const TraceEntry& e : trace.emissions)
    last_at[static_cast<std::size_t>(e.level)] = &e;
  for (int level = 1; level <= 5; ++level) {
    REQUIRE(last_at[static_cast<std::size_t>(level)] != nullptr);
    CHECK(last_at[static_cast<std::size_t>(level)]->stabilized);
  }
}

TEST_CASE("answer_at_level rejects queries beyond the level") {
  MachineRegistry reg = diag_registry();
  OracleTrace trace = search(reg, 3, 1u << 20);
  CHECK_THROWS_AS(answer_at_level(trace, reg, Query{1, "", Rat(1, 2)}, 3),
                  Error);  // q4 not enumerated at level 3
  CHECK_THROWS_AS(answer_at_level(trace, reg, Query{1, "", Rat(0)}, 4), Error);
}
