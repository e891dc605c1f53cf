#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "refl/machine.hpp"
#include "refl/partial_oracle.hpp"

namespace refl {

// One accepted node of the backtracking search, in emission order.
struct TraceEntry {
  int level = 0;
  std::vector<std::int64_t> numerators;
  // Total backtracks recorded at this level when the node was emitted.
  std::uint64_t backtracks = 0;
  // True once no later emission revisits this level or any level above it.
  bool stabilized = false;
};

// Anytime output of the search: an extends-chain of partially reflective
// oracles plus backtracking statistics.
struct OracleTrace {
  std::uint64_t registry_fingerprint = 0;
  std::vector<TraceEntry> emissions;
  std::vector<std::uint64_t> backtracks_per_level;  // [0] -> level 1
  std::uint64_t expansions = 0;
  std::uint64_t budget = 0;
  bool budget_exhausted = false;
  bool reached_max_level = false;
  int deepest_level = 0;

  // The last emission at each level 1..deepest_level; consecutive entries
  // satisfy extends().
  std::vector<PartialOracle> final_chain() const;
};

// The three level-1 oracles in candidate order: value 1/2, then 0, then 1.
std::vector<PartialOracle> root_candidates(const MachineRegistry& reg);

// Lazy enumeration of every level-(k+1) oracle extending po, in documented
// order: per old query the options are unchanged, one grid step down, one
// grid step up (clipped); the new query runs midpoint-outward. The odometer
// spins the newest query fastest.
class ExtensionCandidates {
 public:
  explicit ExtensionCandidates(const PartialOracle& po);
  // Restricted domains (used by the search after constraint pruning).
  ExtensionCandidates(int child_level, std::uint64_t fingerprint,
                      std::vector<std::vector<std::int64_t>> domains);

  std::optional<PartialOracle> next();

  // Documented per-query option lists for extending po.
  static std::vector<std::vector<std::int64_t>> full_domains(
      const PartialOracle& po);
  static std::vector<std::int64_t> new_query_options(int child_level);

 private:
  int level_;
  std::uint64_t fingerprint_;
  std::vector<std::vector<std::int64_t>> domains_;
  std::vector<std::size_t> odometer_;
  bool done_ = false;
};

struct SearchOptions {
  // Constraint-first pruning of candidate domains. Affects speed only; the
  // accepted chain is identical either way.
  bool prune = true;
};

// Depth-first search over partial oracles, emitting every accepted node.
// Each materialized candidate check costs one unit of budget. Terminates on
// reaching max_level, exhausting the budget, or (never observed for
// registries that admit a reflective oracle) exhausting the tree.
OracleTrace search(const MachineRegistry& reg, int max_level,
                   std::uint64_t budget, const SearchOptions& options = {});

// Chain value of `query` at level k: the anytime answer that converges as k
// grows. Throws if the query is not among the first k or the trace never
// reached level k.
Rat answer_at_level(const OracleTrace& trace, const MachineRegistry& reg,
                    const Query& query, int k);

}  // namespace refl
