#include "refl/machine.hpp"

#include <array>

#include "refl/errors.hpp"

namespace refl {

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::kCoin: return "COIN";
    case Opcode::kInput: return "INPUT";
    case Opcode::kPush0: return "PUSH0";
    case Opcode::kPush1: return "PUSH1";
    case Opcode::kJmp: return "JMP";
    case Opcode::kJz: return "JZ";
    case Opcode::kOut0: return "OUT0";
    case Opcode::kOut1: return "OUT1";
    case Opcode::kSClear: return "SCLR";
    case Opcode::kS0: return "S0";
    case Opcode::kS1: return "S1";
    case Opcode::kSInput: return "SINPUT";
    case Opcode::kOracle: return "ORACLE";
  }
  return "?";
}

std::string query_str(const Query& q) {
  return "(" + std::to_string(q.machine) + ", \"" + q.input + "\", " +
         rat_str(q.threshold) + ")";
}

BuiltinAction BuiltinAction::choose(std::vector<Rat> w) {
  BuiltinAction a;
  a.kind = Kind::kChoose;
  a.weights = std::move(w);
  return a;
}
BuiltinAction BuiltinAction::ask(Query q) {
  BuiltinAction a;
  a.kind = Kind::kAsk;
  a.query = std::move(q);
  return a;
}
BuiltinAction BuiltinAction::emit(int bit) {
  BuiltinAction a;
  a.kind = Kind::kEmit;
  a.bit = bit;
  return a;
}
BuiltinAction BuiltinAction::halt() { return BuiltinAction{}; }

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  return fnv1a(h, s.data(), s.size());
}

std::string instruction_repr(const Instruction& ins) {
  std::string s = opcode_name(ins.op);
  s += '|';
  s += std::to_string(ins.a);
  s += '|';
  s += std::to_string(ins.machine_ref);
  s += '|';
  s += std::to_string(static_cast<int>(ins.str_kind));
  s += '|';
  s += ins.str_literal;
  s += '|';
  if (ins.op == Opcode::kOracle) s += rat_str(ins.threshold);
  return s;
}

}  // namespace

int MachineRegistry::register_program(Program program) {
  const int index = size() + 1;
  program.self_index = index;
  for (Instruction& ins : program.code)
    if (ins.op == Opcode::kOracle && ins.machine_ref == kSelfRef)
      ins.machine_ref = index;
  entries_.push_back(
      RegistryEntry{std::make_shared<const Program>(std::move(program)), nullptr});
  fingerprint_valid_ = false;
  return index;
}

int MachineRegistry::register_builtin(std::shared_ptr<const BuiltinMachine> builtin) {
  if (!builtin) throw Error("null builtin machine");
  if (builtin->oracle_step_cost() < 1 || builtin->decision_step_cost() < 1)
    throw Error("builtin '" + builtin->name() +
                "' violates its cost contract: step costs must be >= 1");
  entries_.push_back(RegistryEntry{nullptr, std::move(builtin)});
  fingerprint_valid_ = false;
  return size();
}

const RegistryEntry& MachineRegistry::entry(int index) const {
  if (index < 1 || index > size())
    throw Error("invalid machine index " + std::to_string(index) +
                " (registry holds " + std::to_string(size()) + ")");
  return entries_[static_cast<std::size_t>(index - 1)];
}

std::uint64_t MachineRegistry::fingerprint() const {
  if (!fingerprint_valid_) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, "registry");
    for (const RegistryEntry& e : entries_) {
      if (e.is_program()) {
        h = fnv1a(h, "program");
        for (const Instruction& ins : e.program->code)
          h = fnv1a(h, instruction_repr(ins));
      } else {
        h = fnv1a(h, "builtin");
        h = fnv1a(h, e.builtin->spec_string());
      }
    }
    fingerprint_ = h;
    fingerprint_valid_ = true;
  }
  return fingerprint_;
}

}  // namespace refl
