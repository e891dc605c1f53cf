#include <fstream>
#include <sstream>

#include "doctest.h"
#include "refl/errors.hpp"
#include "refl/machine.hpp"
#include "refl/partial_oracle.hpp"

using namespace refl;

namespace {

const char* kDiagonalizer =
    "; emit the opposite of the oracle's guess about this machine\n"
    "ORACLE SELF, eps, 1/2\n"
    "JZ say1\n"
    "OUT0\n"
    "say1: OUT1\n";

PartialOracle uniform_oracle(const MachineRegistry& reg, int level,
                             std::int64_t numerator) {
  std::vector<std::int64_t> values(static_cast<std::size_t>(level), numerator);
  return PartialOracle(level, std::move(values), reg.fingerprint());
}

}  // namespace

TEST_CASE("assemble: smallest program and operand forms") {
  Program p = assemble("OUT1");
  REQUIRE(p.code.size() == 1);
  CHECK(p.code[0].op == Opcode::kOut1);

  Program d = assemble(kDiagonalizer);
  REQUIRE(d.code.size() == 4);
  CHECK(d.code[0].op == Opcode::kOracle);
  CHECK(d.code[0].machine_ref == kSelfRef);  // symbolic until registration
  CHECK(d.code[0].threshold == Rat(1, 2));
  CHECK(d.code[1].a == 3);  // label resolved
}

TEST_CASE("assemble: errors carry position") {
  CHECK_THROWS_AS(assemble("OUT2"), ParseError);
  CHECK_THROWS_AS(assemble("ORACLE SELF, eps, 1/3"), ParseError);  // non-dyadic
  CHECK_THROWS_AS(assemble("ORACLE SELF, eps, 5/4"), ParseError);  // outside [0,1]
  CHECK_THROWS_AS(assemble("JMP nowhere"), ParseError);
  CHECK_THROWS_AS(assemble("ORACLE SELF eps"), ParseError);
  try {
    assemble("OUT1\n  BADOP\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 3);
  }
}

TEST_CASE("register: indices are 1-based, append-only, SELF resolves") {
  MachineRegistry reg;
  CHECK(reg.register_program(assemble("OUT1")) == 1);
  int idx = reg.register_program(assemble(kDiagonalizer));
  CHECK(idx == 2);
  const Program& diag = *reg.entry(2).program;
  CHECK(diag.code[0].machine_ref == 2);  // quined to its own index
  CHECK(reg.size() == 2);
  CHECK_THROWS_AS(reg.entry(3), Error);
  CHECK_THROWS_AS(reg.entry(0), Error);
}

TEST_CASE("enumerate_queries matches the hand-unrolled golden file") {
  auto queries = enumerate_queries(1, 15);
  REQUIRE(queries.size() == 15);

  std::ifstream golden("golden/queries_one_machine.txt");
  REQUIRE(golden.good());
  std::string line;
  std::size_t i = 0;
  while (std::getline(golden, line)) {
    REQUIRE(i < queries.size());
    std::istringstream ls(line);
    std::uint64_t qnum;
    int machine;
    std::string input, threshold;
    ls >> qnum >> machine >> input >> threshold;
    CHECK(qnum == i + 1);
    CHECK(queries[i].machine == machine);
    CHECK(queries[i].input == (input == "eps" ? "" : input));
    auto parts = as_dyadic(queries[i].threshold);
    REQUIRE(parts.has_value());
    std::string repr = std::to_string(parts->numerator) + "/2^" +
                       std::to_string(parts->level);
    CHECK(repr == threshold);
    ++i;
  }
  CHECK(i == 15);
}

TEST_CASE("enumerate_queries: determinism and empty registry") {
  CHECK(enumerate_queries(0, 10).empty());
  CHECK(enumerate_queries(3, 0).empty());
  auto a = enumerate_queries(3, 50);
  auto b = enumerate_queries(3, 50);
  CHECK(a == b);
}

TEST_CASE("query_index inverts the enumeration") {
  for (int n_machines : {1, 2, 5}) {
    auto queries = enumerate_queries(n_machines, 200);
    for (std::size_t i = 0; i < queries.size(); ++i)
      CHECK(query_index(n_machines, queries[i]) == i + 1);
  }
  CHECK_THROWS_AS(query_index(2, Query{3, "", Rat(0)}), Error);
  CHECK_THROWS_AS(query_index(2, Query{1, "", Rat(1, 3)}), Error);
}

TEST_CASE("threshold ranks enumerate dyadics by level then numerator") {
  CHECK(threshold_from_rank(0) == Rat(0));
  CHECK(threshold_from_rank(1) == Rat(1));
  CHECK(threshold_from_rank(2) == Rat(1, 2));
  CHECK(threshold_from_rank(3) == Rat(1, 4));
  CHECK(threshold_from_rank(4) == Rat(3, 4));
  CHECK(threshold_from_rank(8) == Rat(7, 8));
  for (std::uint64_t r = 0; r < 300; ++r)
    CHECK(threshold_rank(threshold_from_rank(r)) == r);
}

TEST_CASE("eval_truncated: constant machine emits 1 at any level") {
  MachineRegistry reg;
  reg.register_program(assemble("OUT1"));
  for (int level : {1, 2, 5}) {
    PartialOracle po = uniform_oracle(reg, level, 0);
    OutputDist d = eval_truncated(reg, 1, "", po);
    CHECK(d.p1 == Rat(1));
    CHECK(d.p0 == Rat(0));
  }
}

TEST_CASE("eval_truncated: diagonalizer splits the oracle's halting margin") {
  MachineRegistry reg;
  reg.register_program(assemble(kDiagonalizer));
  // Self-query (1, eps, 1/2) sits at enumeration index 4.
  CHECK(query_index(reg, Query{1, "", Rat(1, 2)}) == 4);

  for (int k : {4, 6, 8}) {
    std::vector<std::int64_t> values(static_cast<std::size_t>(k), 0);
    values[3] = std::int64_t{1} << (k - 1);  // q4 = 1/2
    PartialOracle po(k, std::move(values), reg.fingerprint());
    OutputDist d = eval_truncated(reg, 1, "", po);
    // Runs three instructions; outputs 1 exactly when the oracle says 0.
    Rat expected = Rat(1, 2) - pow2(-(k + 1));
    CHECK(d.p1 == expected);
    CHECK(d.p0 == expected);
    CHECK(d.deficit() == pow2(-k));
  }
}

TEST_CASE("eval_truncated: oracle call beyond the level halts the branch") {
  MachineRegistry reg;
  reg.register_program(assemble(kDiagonalizer));
  PartialOracle po = uniform_oracle(reg, 3, 4);  // level 3 < index 4
  OutputDist d = eval_truncated(reg, 1, "", po);
  CHECK(d.p1 == Rat(0));
  CHECK(d.p0 == Rat(0));
}

TEST_CASE("eval_truncated: infinite loop loses all mass") {
  MachineRegistry reg;
  reg.register_program(assemble("loop: JMP loop"));
  PartialOracle po = uniform_oracle(reg, 6, 0);
  OutputDist d = eval_truncated(reg, 1, "", po);
  CHECK(d.p1 == Rat(0));
  CHECK(d.p0 == Rat(0));
  CHECK(d.deficit() == Rat(1));
}

TEST_CASE("eval_truncated: coin fans out with exact halves") {
  MachineRegistry reg;
  // Output the coin's value.
  reg.register_program(assemble("COIN\nJZ zero\nOUT1\nzero: OUT0\n"));
  PartialOracle po = uniform_oracle(reg, 4, 0);
  OutputDist d = eval_truncated(reg, 1, "", po);
  CHECK(d.p1 == Rat(1, 2));
  CHECK(d.p0 == Rat(1, 2));
}

TEST_CASE("eval_truncated: input exhaustion halts without output") {
  MachineRegistry reg;
  // Copy first input bit to output.
  reg.register_program(assemble("INPUT\nJZ zero\nOUT1\nzero: OUT0\n"));
  PartialOracle po = uniform_oracle(reg, 5, 0);
  CHECK(eval_truncated(reg, 1, "", po).deficit() == Rat(1));
  OutputDist d1 = eval_truncated(reg, 1, "1", po);
  CHECK(d1.p1 == Rat(1));
  OutputDist d0 = eval_truncated(reg, 1, "011", po);
  CHECK(d0.p0 == Rat(1));
}

TEST_CASE("eval_truncated: purity and read recording") {
  MachineRegistry reg;
  reg.register_program(assemble(kDiagonalizer));
  std::vector<std::int64_t> values(6, 0);
  values[3] = 32;  // q4 = 1/2 at level 6
  PartialOracle po(6, std::move(values), reg.fingerprint());

  std::map<std::uint64_t, Rat> reads;
  OutputDist a = eval_truncated(reg, 1, "", po, &reads);
  OutputDist b = eval_truncated(reg, 1, "", po);
  CHECK(a.p1 == b.p1);
  CHECK(a.p0 == b.p0);
  REQUIRE(reads.size() == 1);
  CHECK(reads.count(4) == 1);
  CHECK(reads[4] == Rat(1, 2));

  auto reachable = reachable_query_indices(reg, 1, "", 6);
  CHECK(reachable == std::vector<std::uint64_t>{4});
}

TEST_CASE("branch weights at an oracle call sum to one before clamping") {
  // With v in [2^-(k+1), 1 - 2^-(k+1)] no clamping happens and the halt
  // margin is exactly 2^-k.
  MachineRegistry reg;
  reg.register_program(assemble("ORACLE SELF, eps, 1/2\nJZ z\nOUT1\nz: OUT0\n"));
  const int k = 5;
  for (std::int64_t n = 1; n < 32; ++n) {
    std::vector<std::int64_t> values(k, 0);
    values[3] = n;
    PartialOracle po(k, std::move(values), reg.fingerprint());
    OutputDist d = eval_truncated(reg, 1, "", po);
    Rat v = dyadic(n, k);
    CHECK(d.p1 == v - pow2(-(k + 1)));          // echoes answer 1
    CHECK(d.p0 == Rat(1) - v - pow2(-(k + 1)));  // echoes answer 0
    CHECK(d.deficit() == pow2(-k));
  }
}

TEST_CASE("string builder feeds oracle queries") {
  MachineRegistry reg;
  reg.register_program(assemble("OUT1"));
  // Query about machine 1 on the built string "10".
  MachineRegistry reg2;
  reg2.register_program(assemble("OUT1"));
  int idx = reg2.register_program(
      assemble("S1\nS0\nORACLE 1, buf, 0\nJZ z\nOUT1\nz: OUT0\n"));
  auto queries = enumerate_queries(reg2, 40);
  std::uint64_t want = query_index(reg2, Query{1, "10", Rat(0)});
  REQUIRE(want <= 40);

  std::vector<std::int64_t> values(static_cast<std::size_t>(want), 0);
  const int k = static_cast<int>(want);
  values[static_cast<std::size_t>(want - 1)] = std::int64_t{1} << k;  // answer 1
  PartialOracle po(k, std::move(values), reg2.fingerprint());
  OutputDist d = eval_truncated(reg2, idx, "", po);
  CHECK(d.p1 == Rat(1) - pow2(-(k + 1)));
  CHECK(d.p0 == Rat(0));
}

TEST_CASE("registry fingerprints differ by content") {
  MachineRegistry a, b, c;
  a.register_program(assemble("OUT1"));
  b.register_program(assemble("OUT1"));
  c.register_program(assemble("OUT0"));
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
}
