#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "refl/bitstring.hpp"
#include "refl/rational.hpp"

namespace refl {

// ---------------------------------------------------------------------------
// Probabilistic oracle machines.
//
// A machine is either a small stack program over bits or a native builtin.
// Programs read an input bit string, flip fair coins, build query strings,
// and may ask the oracle threshold questions about any registered machine
// (including themselves, via SELF). A run ends by emitting a single output
// bit or by halting without output; the probability deficit of runs that
// never emit is the semimeasure's missing mass.
// ---------------------------------------------------------------------------

enum class Opcode : std::uint8_t {
  kCoin,    // push a fair random bit
  kInput,   // push the next input bit; halt without output when exhausted
  kPush0,   // push constant 0
  kPush1,   // push constant 1
  kJmp,     // jump to instruction operand a
  kJz,      // pop a bit, jump to operand a when it is 0
  kOut0,    // emit 0 and halt
  kOut1,    // emit 1 and halt
  kSClear,  // reset the query-string builder
  kS0,      // append literal 0 to the builder
  kS1,      // append literal 1 to the builder
  kSInput,  // append the first a input bits; halt without output if too short
  kOracle,  // push the oracle's answer bit for (machine, string, threshold)
};

const char* opcode_name(Opcode op);

// Operand of kOracle naming which string the query is about.
enum class QueryStringKind : std::uint8_t {
  kLiteral,  // a fixed bit string (possibly empty)
  kBuilder,  // current contents of the string builder
  kInput,    // the machine's whole input string
};

inline constexpr int kSelfRef = 0;  // placeholder resolved at registration

struct Instruction {
  Opcode op = Opcode::kOut0;
  std::int64_t a = 0;               // jump target or SINPUT count
  int machine_ref = kSelfRef;       // kOracle: registry index, 0 = SELF
  QueryStringKind str_kind = QueryStringKind::kLiteral;
  BitString str_literal;
  Rat threshold;                    // kOracle: dyadic in [0, 1]
};

struct Program {
  std::vector<Instruction> code;
  std::string source;  // original assembly text, kept for fingerprints
  // Index assigned at registration; SELF references resolve to it.
  int self_index = 0;
};

// Parses assembly text (one instruction per line, ';' comments, labels as
// "name:"). SELF stays symbolic until the program is registered.
Program assemble(const std::string& source);

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

struct Query {
  int machine = 0;      // 1-based registry index
  BitString input;
  Rat threshold;        // dyadic rational in [0, 1]

  bool operator==(const Query& other) const {
    return machine == other.machine && input == other.input &&
           threshold == other.threshold;
  }
};

std::string query_str(const Query& q);

// ---------------------------------------------------------------------------
// Builtin machines
// ---------------------------------------------------------------------------

// Events observed so far along one run of a builtin: for every choice the
// selected branch index, for every oracle request the answer bit.
using BuiltinTrace = std::vector<std::uint8_t>;

struct BuiltinAction {
  enum class Kind : std::uint8_t { kChoose, kAsk, kEmit, kHalt };
  Kind kind = Kind::kHalt;
  std::vector<Rat> weights;  // kChoose: branch weights, nonnegative, sum 1
  Query query;               // kAsk
  int bit = 0;               // kEmit

  static BuiltinAction choose(std::vector<Rat> w);
  static BuiltinAction ask(Query q);
  static BuiltinAction emit(int bit);
  static BuiltinAction halt();
};

// A natively implemented conditional semimeasure. next() must be a pure
// function of (input, trace): the evaluator replays runs branch by branch.
class BuiltinMachine {
 public:
  virtual ~BuiltinMachine() = default;
  virtual std::string name() const = 0;
  // Stable description string; feeds the registry fingerprint.
  virtual std::string spec_string() const = 0;
  // Step costs charged by the truncated evaluator; both must be >= 1.
  virtual int oracle_step_cost() const { return 1; }
  virtual int decision_step_cost() const { return 1; }
  // Code length in bytes for code-length priors.
  virtual int code_length() const { return 16; }
  virtual BuiltinAction next(const BitString& input,
                             const BuiltinTrace& trace) const = 0;
};

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct RegistryEntry {
  // Exactly one of the two is set.
  std::shared_ptr<const Program> program;
  std::shared_ptr<const BuiltinMachine> builtin;
  bool is_program() const { return program != nullptr; }
};

// Append-only, 1-based list of machines. Frozen registries hand out a
// fingerprint that partial oracles carry to detect cross-registry misuse.
class MachineRegistry {
 public:
  int register_program(Program program);
  int register_builtin(std::shared_ptr<const BuiltinMachine> builtin);

  int size() const { return static_cast<int>(entries_.size()); }
  const RegistryEntry& entry(int index) const;  // 1-based
  std::uint64_t fingerprint() const;

 private:
  std::vector<RegistryEntry> entries_;
  mutable std::uint64_t fingerprint_ = 0;
  mutable bool fingerprint_valid_ = false;
};

// ---------------------------------------------------------------------------
// Query enumeration
// ---------------------------------------------------------------------------

// Deterministic enumeration q_1, q_2, ... of all (machine, input, threshold)
// triples for a registry of the given size: Cantor diagonals over the triple
// (machine index - 1, length-lex input rank, threshold rank), ordered by
// coordinate sum and lexicographically inside a diagonal. Thresholds are the
// dyadics ordered by level then numerator: 0, 1, 1/2, 1/4, 3/4, 1/8, ...
std::vector<Query> enumerate_queries(int registry_size, std::uint64_t n);
std::vector<Query> enumerate_queries(const MachineRegistry& reg, std::uint64_t n);

// 1-based position of q in the enumeration; throws if the machine index is
// out of range or the threshold is not dyadic in [0, 1].
std::uint64_t query_index(int registry_size, const Query& q);
std::uint64_t query_index(const MachineRegistry& reg, const Query& q);

// Threshold rank helpers (exposed for tests and golden files).
Rat threshold_from_rank(std::uint64_t rank);
std::uint64_t threshold_rank(const Rat& threshold);

// ---------------------------------------------------------------------------
// Truncated evaluation
// ---------------------------------------------------------------------------

// Probabilities of emitting 1 and 0 within the truncation budget. The
// deficit 1 - p1 - p0 is the mass of runs that halted without output.
struct OutputDist {
  Rat p1;
  Rat p0;
  Rat deficit() const { return Rat(1) - p1 - p0; }
};

// Grid values for the first level() queries, as seen by the evaluator.
// PartialOracle implements this; the oracle search also plugs in
// hypothetical valuations while pruning extension candidates.
class OracleValuation {
 public:
  virtual ~OracleValuation() = default;
  virtual int level() const = 0;
  // Value for query index 1 <= i <= level().
  virtual Rat value(std::uint64_t query_index) const = 0;
};

// Exact distribution of machine `index` run on `input` for at most
// valuation.level() steps: coins branch 1/2 each; an oracle call on q_i with
// i <= k answers 1 with max(0, v_i - 2^-(k+1)), 0 with
// max(0, 1 - v_i - 2^-(k+1)), and halts otherwise; calls beyond q_k halt.
// `reads`, when given, collects the (query index -> value) pairs consumed.
OutputDist eval_truncated(const MachineRegistry& reg, int index,
                          const BitString& input,
                          const OracleValuation& valuation,
                          std::map<std::uint64_t, Rat>* reads = nullptr);

// Query indices an evaluation could touch along any branch, treating every
// oracle answer as possible. Used for constraint propagation in the search.
std::vector<std::uint64_t> reachable_query_indices(const MachineRegistry& reg,
                                                   int index,
                                                   const BitString& input,
                                                   int level);

}  // namespace refl
