#include "refl/oracle_search.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <unordered_map>

#include "refl/errors.hpp"

namespace refl {

std::vector<PartialOracle> OracleTrace::final_chain() const {
  std::vector<PartialOracle> chain;
  for (int level = 1; level <= deepest_level; ++level) {
    const TraceEntry* last = nullptr;
    for (const TraceEntry& e : emissions)
      if (e.level == level) last = &e;
    if (!last) break;
    chain.emplace_back(level, last->numerators, registry_fingerprint);
  }
  return chain;
}

std::vector<PartialOracle> root_candidates(const MachineRegistry& reg) {
  std::vector<PartialOracle> roots;
  for (std::int64_t n : ExtensionCandidates::new_query_options(1))
    roots.emplace_back(1, std::vector<std::int64_t>{n}, reg.fingerprint());
  return roots;
}

std::vector<std::int64_t> ExtensionCandidates::new_query_options(int child_level) {
  const std::int64_t mid = std::int64_t{1} << (child_level - 1);
  std::vector<std::int64_t> options;
  options.reserve(static_cast<std::size_t>(2 * mid + 1));
  options.push_back(mid);
  for (std::int64_t step = 1; step <= mid; ++step) {
    options.push_back(mid - step);
    options.push_back(mid + step);
  }
  return options;
}

std::vector<std::vector<std::int64_t>> ExtensionCandidates::full_domains(
    const PartialOracle& po) {
  const int child_level = po.level() + 1;
  const std::int64_t grid = std::int64_t{1} << child_level;
  std::vector<std::vector<std::int64_t>> domains;
  domains.reserve(static_cast<std::size_t>(child_level));
  for (const mpz_class& nz : po.numerators()) {
    // The search only visits small levels; the grid fits easily.
    std::int64_t n = nz.get_si();
    std::vector<std::int64_t> options{2 * n};
    if (2 * n - 1 >= 0) options.push_back(2 * n - 1);
    if (2 * n + 1 <= grid) options.push_back(2 * n + 1);
    domains.push_back(std::move(options));
  }
  domains.push_back(new_query_options(child_level));
  return domains;
}

ExtensionCandidates::ExtensionCandidates(const PartialOracle& po)
    : ExtensionCandidates(po.level() + 1, po.registry_fingerprint(),
                          full_domains(po)) {}

ExtensionCandidates::ExtensionCandidates(
    int child_level, std::uint64_t fingerprint,
    std::vector<std::vector<std::int64_t>> domains)
    : level_(child_level), fingerprint_(fingerprint), domains_(std::move(domains)) {
  odometer_.assign(domains_.size(), 0);
  for (const auto& d : domains_)
    if (d.empty()) done_ = true;
}

std::optional<PartialOracle> ExtensionCandidates::next() {
  if (done_) return std::nullopt;
  std::vector<std::int64_t> numerators(domains_.size());
  for (std::size_t i = 0; i < domains_.size(); ++i)
    numerators[i] = domains_[i][odometer_[i]];
  // Advance, newest query fastest.
  std::size_t i = domains_.size();
  for (;;) {
    if (i == 0) {
      done_ = true;
      break;
    }
    --i;
    if (++odometer_[i] < domains_[i].size()) break;
    odometer_[i] = 0;
  }
  return PartialOracle(level_, std::move(numerators), fingerprint_);
}

namespace {

std::vector<std::int64_t> small_numerators(const PartialOracle& po) {
  std::vector<std::int64_t> out;
  out.reserve(po.numerators().size());
  for (const mpz_class& n : po.numerators()) out.push_back(n.get_si());
  return out;
}

// Valuation backed by an explicit index -> numerator map; reads outside the
// map indicate a broken read-set computation.
class MapValuation final : public OracleValuation {
 public:
  MapValuation(int level, const std::map<std::uint64_t, std::int64_t>* values)
      : level_(level), values_(values) {}
  int level() const override { return level_; }
  Rat value(std::uint64_t query_index) const override {
    auto it = values_->find(query_index);
    if (it == values_->end())
      throw Error("oracle read outside the computed read-set (query " +
                  std::to_string(query_index) + ")");
    return dyadic(it->second, level_);
  }

 private:
  int level_;
  const std::map<std::uint64_t, std::int64_t>* values_;
};

// Per-level data shared by every node whose children live at this level:
// the enumerated queries, which query indices each machine can read, and a
// cache of truncated evaluations keyed by the values actually readable.
struct LevelContext {
  explicit LevelContext(const MachineRegistry& reg, int level)
      : queries(enumerate_queries(reg, static_cast<std::uint64_t>(level))) {
    readsets.reserve(queries.size());
    for (const Query& q : queries)
      readsets.push_back(reachable_query_indices(reg, q.machine, q.input, level));
  }
  std::vector<Query> queries;
  std::vector<std::vector<std::uint64_t>> readsets;
  std::unordered_map<std::string, OutputDist> eval_cache;
};

// Constraint engine for one level: evaluates each query's machine against
// assignments of the oracle values it can actually read.
class LevelChecker {
 public:
  LevelChecker(const MachineRegistry& reg, int level, LevelContext* ctx)
      : reg_(reg), level_(level), ctx_(ctx) {}

  const OutputDist& dist(std::size_t i,
                         const std::map<std::uint64_t, std::int64_t>& assignment) {
    std::string key = std::to_string(i);
    for (std::uint64_t r : ctx_->readsets[i]) {
      key += ':';
      key += std::to_string(assignment.at(r));
    }
    auto it = ctx_->eval_cache.find(key);
    if (it != ctx_->eval_cache.end()) return it->second;
    MapValuation val(level_, &assignment);
    OutputDist d =
        eval_truncated(reg_, ctx_->queries[i].machine, ctx_->queries[i].input, val);
    return ctx_->eval_cache.emplace(std::move(key), std::move(d)).first->second;
  }

  // Do the reflectivity implications for query i allow grid value v under
  // the assignment? (lambda(1|x) > p forces the top grid value,
  // lambda(0|x) > 1-p forces zero.)
  bool allows(std::size_t i, std::int64_t v,
              const std::map<std::uint64_t, std::int64_t>& assignment) {
    const OutputDist& d = dist(i, assignment);
    const Query& q = ctx_->queries[i];
    const std::int64_t grid = std::int64_t{1} << level_;
    if (d.p1 > q.threshold && v != grid) return false;
    if (d.p0 > Rat(1) - q.threshold && v != 0) return false;
    return true;
  }

  bool check_candidate(const std::vector<std::int64_t>& numerators) {
    std::map<std::uint64_t, std::int64_t> assignment;
    for (std::size_t i = 0; i < numerators.size(); ++i)
      assignment[static_cast<std::uint64_t>(i + 1)] = numerators[i];
    for (std::size_t i = 0; i < ctx_->queries.size(); ++i)
      if (!allows(i, numerators[i], assignment)) return false;
    return true;
  }

  // Arc-consistency pass over the option domains: a value survives iff some
  // assignment of the query's read-set (drawn from current domains) permits
  // it. Returns false when a domain empties, i.e. no candidate can pass.
  bool reduce_domains(std::vector<std::vector<std::int64_t>>& domains) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < domains.size() && i < ctx_->queries.size(); ++i) {
        std::vector<std::int64_t> kept;
        for (std::int64_t v : domains[i])
          if (value_feasible(i, v, domains)) kept.push_back(v);
        if (kept.size() != domains[i].size()) {
          changed = true;
          domains[i] = std::move(kept);
          if (domains[i].empty()) return false;
        }
      }
    }
    return true;
  }

 private:
  bool value_feasible(std::size_t i, std::int64_t v,
                      const std::vector<std::vector<std::int64_t>>& domains) {
    const auto& reads = ctx_->readsets[i];
    std::map<std::uint64_t, std::int64_t> assignment;
    std::vector<std::uint64_t> free;
    for (std::uint64_t r : reads) {
      if (r == i + 1)
        assignment[r] = v;  // the query's own slot is pinned
      else
        free.push_back(r);
    }
    return try_free(i, v, free, 0, assignment, domains);
  }

  bool try_free(std::size_t i, std::int64_t v, const std::vector<std::uint64_t>& free,
                std::size_t at, std::map<std::uint64_t, std::int64_t>& assignment,
                const std::vector<std::vector<std::int64_t>>& domains) {
    if (at == free.size()) return allows(i, v, assignment);
    std::uint64_t r = free[at];
    for (std::int64_t option : domains[static_cast<std::size_t>(r - 1)]) {
      assignment[r] = option;
      if (try_free(i, v, free, at + 1, assignment, domains)) return true;
    }
    assignment.erase(r);
    return false;
  }

  const MachineRegistry& reg_;
  const int level_;
  LevelContext* ctx_;
};

}  // namespace

OracleTrace search(const MachineRegistry& reg, int max_level,
                   std::uint64_t budget, const SearchOptions& options) {
  if (max_level < 1) throw Error("max_level must be >= 1");
  if (max_level > 40) throw Error("search levels beyond 40 are not supported");
  OracleTrace trace;
  trace.registry_fingerprint = reg.fingerprint();
  trace.budget = budget;
  trace.backtracks_per_level.assign(static_cast<std::size_t>(max_level) + 1, 0);

  std::vector<std::unique_ptr<LevelContext>> contexts;  // [level - 1]
  auto context_for = [&](int level) -> LevelContext* {
    while (contexts.size() < static_cast<std::size_t>(level))
      contexts.push_back(std::make_unique<LevelContext>(
          reg, static_cast<int>(contexts.size()) + 1));
    return contexts[static_cast<std::size_t>(level - 1)].get();
  };

  std::vector<ExtensionCandidates> stack;
  std::vector<PartialOracle> chain;

  auto push_node = [&](int child_level, const PartialOracle* parent) -> bool {
    std::vector<std::vector<std::int64_t>> domains =
        parent ? ExtensionCandidates::full_domains(*parent)
               : std::vector<std::vector<std::int64_t>>{
                     ExtensionCandidates::new_query_options(1)};
    if (options.prune) {
      LevelChecker checker(reg, child_level, context_for(child_level));
      if (!checker.reduce_domains(domains)) return false;
    }
    stack.emplace_back(child_level, reg.fingerprint(), std::move(domains));
    return true;
  };

  push_node(1, nullptr);

  while (!stack.empty()) {
    const int child_level = static_cast<int>(stack.size());
    if (trace.expansions >= budget) {
      trace.budget_exhausted = true;
      break;
    }
    std::optional<PartialOracle> cand = stack.back().next();
    if (!cand) {
      // Node exhausted: abandon the value one level up.
      trace.backtracks_per_level[static_cast<std::size_t>(child_level - 1)]++;
      stack.pop_back();
      if (!chain.empty()) chain.pop_back();
      continue;
    }
    trace.expansions++;
    std::vector<std::int64_t> numerators = small_numerators(*cand);
    LevelChecker checker(reg, child_level, context_for(child_level));
    if (!checker.check_candidate(numerators)) continue;

    trace.emissions.push_back(TraceEntry{
        child_level, numerators,
        trace.backtracks_per_level[static_cast<std::size_t>(child_level)], false});
    trace.deepest_level = std::max(trace.deepest_level, child_level);
    if (child_level == max_level) {
      trace.reached_max_level = true;
      break;
    }
    chain.push_back(*cand);
    if (!push_node(child_level + 1, &*cand)) {
      // Pruning already proved no extension exists.
      trace.backtracks_per_level[static_cast<std::size_t>(child_level)]++;
      chain.pop_back();
    }
  }

  // Mark entries that were never revisited afterwards.
  int min_later = max_level + 1;
  for (auto it = trace.emissions.rbegin(); it != trace.emissions.rend(); ++it) {
    it->stabilized = it->level < min_later;
    min_later = std::min(min_later, it->level);
  }
  return trace;
}

Rat answer_at_level(const OracleTrace& trace, const MachineRegistry& reg,
                    const Query& query, int k) {
  if (trace.registry_fingerprint != reg.fingerprint())
    throw FingerprintMismatch("trace was produced against a different registry");
  if (trace.deepest_level < k)
    throw Error("trace never reached level " + std::to_string(k));
  std::uint64_t idx = query_index(reg, query);
  if (idx > static_cast<std::uint64_t>(k))
    throw Error("query " + query_str(query) + " is not enumerated at level " +
                std::to_string(k));
  const TraceEntry* last = nullptr;
  for (const TraceEntry& e : trace.emissions)
    if (e.level == k) last = &e;
  return dyadic(last->numerators[static_cast<std::size_t>(idx - 1)], k);
}

}  // namespace refl
