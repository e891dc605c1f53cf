#include <set>
#include <unordered_map>

#include "refl/errors.hpp"
#include "refl/machine.hpp"

namespace refl {
namespace {

struct ProgramState {
  std::int64_t pc = 0;
  std::string stack;    // '0'/'1', top at the back
  std::size_t cursor = 0;
  std::string builder;

  std::string key(int budget) const {
    std::string k = std::to_string(pc);
    k += '|';
    k += std::to_string(cursor);
    k += '|';
    k += stack;
    k += '|';
    k += builder;
    k += '|';
    k += std::to_string(budget);
    return k;
  }
};

std::string trace_key(const BuiltinTrace& trace, int budget) {
  std::string k(trace.begin(), trace.end());
  k += '|';
  k += std::to_string(budget);
  return k;
}

// Shared mechanics of exact branch enumeration over one machine run.
class Evaluator {
 public:
  Evaluator(const MachineRegistry& reg, const OracleValuation& valuation,
            std::map<std::uint64_t, Rat>* reads)
      : reg_(reg),
        valuation_(valuation),
        reads_(reads),
        level_(valuation.level()),
        half_grid_(pow2(-(valuation.level() + 1))) {}

  OutputDist run(int index, const BitString& input) {
    input_ = &input;
    const RegistryEntry& entry = reg_.entry(index);
    if (entry.is_program()) {
      program_ = entry.program.get();
      return run_program(ProgramState{}, level_);
    }
    builtin_ = entry.builtin.get();
    return run_builtin({}, level_);
  }

 private:
  static const OutputDist& halted() {
    static const OutputDist h{Rat(0), Rat(0)};
    return h;
  }

  // Branch weights for an oracle call on query index i at level k. Calls
  // beyond the level halt; otherwise the answer is 1 with v - 2^-(k+1) and
  // 0 with 1 - v - 2^-(k+1), both clamped at zero, remainder halts.
  bool oracle_weights(const Query& q, Rat* w1, Rat* w0) {
    std::uint64_t idx = query_index(reg_.size(), q);
    if (idx > static_cast<std::uint64_t>(level_)) return false;
    Rat v = valuation_.value(idx);
    if (reads_) reads_->emplace(idx, v);
    *w1 = rat_max(Rat(0), v - half_grid_);
    *w0 = rat_max(Rat(0), Rat(1) - v - half_grid_);
    return true;
  }

  OutputDist run_program(ProgramState state, int budget) {
    const auto& code = program_->code;
    // Deterministic instructions advance in place; only coins and oracle
    // calls fork, and only then do we recurse.
    for (;;) {
      if (state.pc < 0 || state.pc >= static_cast<std::int64_t>(code.size()))
        return halted();
      if (budget < 1) return halted();
      std::string key = state.key(budget);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;

      const Instruction& ins = code[static_cast<std::size_t>(state.pc)];
      --budget;
      switch (ins.op) {
        case Opcode::kCoin: {
          ProgramState s1 = state;
          s1.pc++;
          s1.stack.push_back('1');
          ProgramState s0 = std::move(state);
          s0.pc++;
          s0.stack.push_back('0');
          OutputDist r1 = run_program(std::move(s1), budget);
          OutputDist r0 = run_program(std::move(s0), budget);
          OutputDist out{(r1.p1 + r0.p1) / 2, (r1.p0 + r0.p0) / 2};
          memo_.emplace(std::move(key), out);
          return out;
        }
        case Opcode::kInput:
          if (state.cursor >= input_->size()) return halted();
          state.stack.push_back((*input_)[state.cursor]);
          state.cursor++;
          state.pc++;
          break;
        case Opcode::kPush0:
          state.stack.push_back('0');
          state.pc++;
          break;
        case Opcode::kPush1:
          state.stack.push_back('1');
          state.pc++;
          break;
        case Opcode::kJmp:
          state.pc = ins.a;
          break;
        case Opcode::kJz: {
          if (state.stack.empty()) return halted();
          char bit = state.stack.back();
          state.stack.pop_back();
          state.pc = (bit == '0') ? ins.a : state.pc + 1;
          break;
        }
        case Opcode::kOut0: {
          OutputDist out{Rat(0), Rat(1)};
          memo_.emplace(std::move(key), out);
          return out;
        }
        case Opcode::kOut1: {
          OutputDist out{Rat(1), Rat(0)};
          memo_.emplace(std::move(key), out);
          return out;
        }
        case Opcode::kSClear:
          state.builder.clear();
          state.pc++;
          break;
        case Opcode::kS0:
          state.builder.push_back('0');
          state.pc++;
          break;
        case Opcode::kS1:
          state.builder.push_back('1');
          state.pc++;
          break;
        case Opcode::kSInput: {
          std::size_t n = static_cast<std::size_t>(ins.a);
          if (input_->size() < n) return halted();
          state.builder.append(input_->substr(0, n));
          state.pc++;
          break;
        }
        case Opcode::kOracle: {
          Query q = make_query(ins, state);
          Rat w1, w0;
          if (!oracle_weights(q, &w1, &w0)) return halted();
          OutputDist out{Rat(0), Rat(0)};
          if (w1 > 0) {
            ProgramState s1 = state;
            s1.pc++;
            s1.stack.push_back('1');
            OutputDist r1 = run_program(std::move(s1), budget);
            out.p1 += w1 * r1.p1;
            out.p0 += w1 * r1.p0;
          }
          if (w0 > 0) {
            ProgramState s0 = std::move(state);
            s0.pc++;
            s0.stack.push_back('0');
            OutputDist r0 = run_program(std::move(s0), budget);
            out.p1 += w0 * r0.p1;
            out.p0 += w0 * r0.p0;
          }
          memo_.emplace(std::move(key), out);
          return out;
        }
      }
    }
  }

  Query make_query(const Instruction& ins, const ProgramState& state) const {
    Query q;
    q.machine = ins.machine_ref;
    if (q.machine == kSelfRef)
      throw Error("unresolved SELF reference; register the program first");
    switch (ins.str_kind) {
      case QueryStringKind::kLiteral: q.input = ins.str_literal; break;
      case QueryStringKind::kBuilder: q.input = state.builder; break;
      case QueryStringKind::kInput: q.input = *input_; break;
    }
    q.threshold = ins.threshold;
    return q;
  }

  OutputDist run_builtin(BuiltinTrace trace, int budget) {
    std::string key = trace_key(trace, budget);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    BuiltinAction action = builtin_->next(*input_, trace);
    OutputDist out{Rat(0), Rat(0)};
    switch (action.kind) {
      case BuiltinAction::Kind::kHalt:
        break;
      case BuiltinAction::Kind::kEmit: {
        int cost = builtin_->decision_step_cost();
        if (budget < cost) break;
        if (action.bit == 1)
          out.p1 = 1;
        else
          out.p0 = 1;
        break;
      }
      case BuiltinAction::Kind::kChoose: {
        int cost = builtin_->decision_step_cost();
        if (budget < cost) break;
        validate_choice(action);
        for (std::size_t i = 0; i < action.weights.size(); ++i) {
          if (action.weights[i] == 0) continue;
          BuiltinTrace next = trace;
          next.push_back(static_cast<std::uint8_t>(i));
          OutputDist r = run_builtin(std::move(next), budget - cost);
          out.p1 += action.weights[i] * r.p1;
          out.p0 += action.weights[i] * r.p0;
        }
        break;
      }
      case BuiltinAction::Kind::kAsk: {
        int cost = builtin_->oracle_step_cost();
        if (budget < cost) break;
        Rat w1, w0;
        if (!oracle_weights(action.query, &w1, &w0)) break;
        if (w1 > 0) {
          BuiltinTrace next = trace;
          next.push_back(1);
          OutputDist r = run_builtin(std::move(next), budget - cost);
          out.p1 += w1 * r.p1;
          out.p0 += w1 * r.p0;
        }
        if (w0 > 0) {
          BuiltinTrace next = trace;
          next.push_back(0);
          OutputDist r = run_builtin(std::move(next), budget - cost);
          out.p1 += w0 * r.p1;
          out.p0 += w0 * r.p0;
        }
        break;
      }
    }
    memo_.emplace(std::move(key), out);
    return out;
  }

  void validate_choice(const BuiltinAction& action) const {
    if (action.weights.empty() || action.weights.size() > 255)
      throw Error("builtin '" + builtin_->name() + "' made a malformed choice");
    Rat sum(0);
    for (const Rat& w : action.weights) {
      if (w < 0)
        throw Error("builtin '" + builtin_->name() + "' used a negative weight");
      sum += w;
    }
    if (sum != 1)
      throw Error("builtin '" + builtin_->name() +
                  "' choice weights must sum to 1");
  }

  const MachineRegistry& reg_;
  const OracleValuation& valuation_;
  std::map<std::uint64_t, Rat>* reads_;
  const int level_;
  const Rat half_grid_;
  const BitString* input_ = nullptr;
  const Program* program_ = nullptr;
  const BuiltinMachine* builtin_ = nullptr;
  std::unordered_map<std::string, OutputDist> memo_;
};

// Walks every branch regardless of oracle values to find which query
// indices an evaluation might consume.
class ReachableQueryWalker {
 public:
  ReachableQueryWalker(const MachineRegistry& reg, int level)
      : reg_(reg), level_(level) {}

  std::vector<std::uint64_t> walk(int index, const BitString& input) {
    input_ = &input;
    const RegistryEntry& entry = reg_.entry(index);
    if (entry.is_program()) {
      program_ = entry.program.get();
      walk_program(ProgramState{}, level_);
    } else {
      builtin_ = entry.builtin.get();
      walk_builtin({}, level_);
    }
    return {found_.begin(), found_.end()};
  }

 private:
  void note_query(const Query& q, bool* continues) {
    std::uint64_t idx = query_index(reg_.size(), q);
    if (idx > static_cast<std::uint64_t>(level_)) {
      *continues = false;
      return;
    }
    found_.insert(idx);
    *continues = true;
  }

  void walk_program(ProgramState state, int budget) {
    const auto& code = program_->code;
    for (;;) {
      if (state.pc < 0 || state.pc >= static_cast<std::int64_t>(code.size()))
        return;
      if (budget < 1) return;
      std::string key = state.key(budget);
      if (!seen_.insert(std::move(key)).second) return;

      const Instruction& ins = code[static_cast<std::size_t>(state.pc)];
      --budget;
      switch (ins.op) {
        case Opcode::kCoin: {
          ProgramState s1 = state;
          s1.pc++;
          s1.stack.push_back('1');
          walk_program(std::move(s1), budget);
          state.pc++;
          state.stack.push_back('0');
          break;
        }
        case Opcode::kInput:
          if (state.cursor >= input_->size()) return;
          state.stack.push_back((*input_)[state.cursor]);
          state.cursor++;
          state.pc++;
          break;
        case Opcode::kPush0:
          state.stack.push_back('0');
          state.pc++;
          break;
        case Opcode::kPush1:
          state.stack.push_back('1');
          state.pc++;
          break;
        case Opcode::kJmp:
          state.pc = ins.a;
          break;
        case Opcode::kJz: {
          if (state.stack.empty()) return;
          char bit = state.stack.back();
          state.stack.pop_back();
          state.pc = (bit == '0') ? ins.a : state.pc + 1;
          break;
        }
        case Opcode::kOut0:
        case Opcode::kOut1:
          return;
        case Opcode::kSClear:
          state.builder.clear();
          state.pc++;
          break;
        case Opcode::kS0:
          state.builder.push_back('0');
          state.pc++;
          break;
        case Opcode::kS1:
          state.builder.push_back('1');
          state.pc++;
          break;
        case Opcode::kSInput: {
          std::size_t n = static_cast<std::size_t>(ins.a);
          if (input_->size() < n) return;
          state.builder.append(input_->substr(0, n));
          state.pc++;
          break;
        }
        case Opcode::kOracle: {
          Query q;
          q.machine = ins.machine_ref;
          switch (ins.str_kind) {
            case QueryStringKind::kLiteral: q.input = ins.str_literal; break;
            case QueryStringKind::kBuilder: q.input = state.builder; break;
            case QueryStringKind::kInput: q.input = *input_; break;
          }
          q.threshold = ins.threshold;
          bool continues = false;
          note_query(q, &continues);
          if (!continues) return;
          ProgramState s1 = state;
          s1.pc++;
          s1.stack.push_back('1');
          walk_program(std::move(s1), budget);
          state.pc++;
          state.stack.push_back('0');
          break;
        }
      }
    }
  }

  void walk_builtin(BuiltinTrace trace, int budget) {
    std::string key = trace_key(trace, budget);
    if (!seen_.insert(std::move(key)).second) return;
    BuiltinAction action = builtin_->next(*input_, trace);
    switch (action.kind) {
      case BuiltinAction::Kind::kHalt:
      case BuiltinAction::Kind::kEmit:
        return;
      case BuiltinAction::Kind::kChoose: {
        int cost = builtin_->decision_step_cost();
        if (budget < cost) return;
        for (std::size_t i = 0; i < action.weights.size(); ++i) {
          if (action.weights[i] == 0) continue;
          BuiltinTrace next = trace;
          next.push_back(static_cast<std::uint8_t>(i));
          walk_builtin(std::move(next), budget - cost);
        }
        return;
      }
      case BuiltinAction::Kind::kAsk: {
        int cost = builtin_->oracle_step_cost();
        if (budget < cost) return;
        bool continues = false;
        note_query(action.query, &continues);
        if (!continues) return;
        for (std::uint8_t answer : {std::uint8_t{1}, std::uint8_t{0}}) {
          BuiltinTrace next = trace;
          next.push_back(answer);
          walk_builtin(std::move(next), budget - cost);
        }
        return;
      }
    }
  }

  const MachineRegistry& reg_;
  const int level_;
  const BitString* input_ = nullptr;
  const Program* program_ = nullptr;
  const BuiltinMachine* builtin_ = nullptr;
  std::set<std::uint64_t> found_;
  std::set<std::string> seen_;
};

}  // namespace

OutputDist eval_truncated(const MachineRegistry& reg, int index,
                          const BitString& input,
                          const OracleValuation& valuation,
                          std::map<std::uint64_t, Rat>* reads) {
  if (valuation.level() < 1) throw Error("oracle level must be >= 1");
  Evaluator ev(reg, valuation, reads);
  return ev.run(index, input);
}

std::vector<std::uint64_t> reachable_query_indices(const MachineRegistry& reg,
                                                   int index,
                                                   const BitString& input,
                                                   int level) {
  ReachableQueryWalker walker(reg, level);
  return walker.walk(index, input);
}

}  // namespace refl
