#include "refl/rl.hpp"

#include <set>

#include "refl/errors.hpp"

namespace refl {

PerceptSpace::PerceptSpace(std::vector<Percept> percepts)
    : percepts_(std::move(percepts)) {
  if (percepts_.empty()) throw Error("percept space must be nonempty");
  if (percepts_.size() > 32) throw Error("percept space too large (max 32)");
  code_bits_ = static_cast<int>(percepts_[0].code.size());
  std::set<BitString> seen;
  for (const Percept& p : percepts_) {
    if (p.reward < 0 || p.reward > 1)
      throw Error("percept reward outside [0,1]: " + rat_str(p.reward));
    if (static_cast<int>(p.code.size()) != code_bits_ || code_bits_ == 0 ||
        !is_bitstring(p.code))
      throw Error("percept codes must be fixed-length nonempty bit strings");
    if (!seen.insert(p.code).second)
      throw Error("percept code collision on '" + p.code + "'");
  }
}

PerceptSpace PerceptSpace::with_default_codes(
    std::vector<std::pair<std::string, Rat>> tagged_rewards) {
  int bits = 1;
  while ((1u << bits) < tagged_rewards.size()) ++bits;
  std::vector<Percept> percepts;
  for (std::size_t i = 0; i < tagged_rewards.size(); ++i) {
    BitString code(static_cast<std::size_t>(bits), '0');
    for (int b = 0; b < bits; ++b)
      if (i & (1u << (bits - 1 - b))) code[static_cast<std::size_t>(b)] = '1';
    percepts.push_back(Percept{std::move(tagged_rewards[i].first),
                               std::move(tagged_rewards[i].second), code});
  }
  return PerceptSpace(std::move(percepts));
}

std::optional<int> PerceptSpace::index_by_code(const BitString& code) const {
  for (int i = 0; i < size(); ++i)
    if (percepts_[static_cast<std::size_t>(i)].code == code) return i;
  return std::nullopt;
}

History History::extended(Action a, int percept) const {
  if (percept < 0 || percept >= 32) throw Error("percept index out of range");
  History next = *this;
  next.cycles_.push_back(Cycle{a, percept});
  next.key_.push_back(static_cast<char>(0x40 | (static_cast<int>(a) << 5) |
                                        percept));
  return next;
}

BitString HistoryCodec::encode(const History& h) const {
  BitString x;
  for (const Cycle& c : h.cycles()) {
    x.push_back(c.action == Action::kAlpha ? '0' : '1');
    x += space_->at(c.percept).code;
  }
  return x;
}

BitString HistoryCodec::encode_with_action(const History& h, Action a) const {
  BitString x = encode(h);
  x.push_back(a == Action::kAlpha ? '0' : '1');
  return x;
}

std::optional<HistoryCodec::Decoded> HistoryCodec::decode(
    const BitString& input) const {
  const std::size_t cycle_bits = 1 + static_cast<std::size_t>(space_->code_bits());
  Decoded out;
  std::size_t pos = 0;
  while (input.size() - pos >= cycle_bits) {
    Action a = input[pos] == '0' ? Action::kAlpha : Action::kBeta;
    BitString code = input.substr(pos + 1, static_cast<std::size_t>(space_->code_bits()));
    auto e = space_->index_by_code(code);
    if (!e) return std::nullopt;
    out.history = out.history.extended(a, *e);
    pos += cycle_bits;
  }
  if (pos < input.size()) {
    out.pending_action = input[pos] == '0' ? Action::kAlpha : Action::kBeta;
    out.percept_prefix = input.substr(pos + 1);
  }
  return out;
}

Rat Environment::prob(const History& h, Action a, int percept) const {
  ProbabilityInterval iv = conditional(h, a, percept);
  if (iv.lo != iv.hi)
    throw Error("exact conditional requested from an interval environment");
  return iv.lo;
}

MachineEnvironment::MachineEnvironment(const MachineRegistry* reg, int machine,
                                       std::shared_ptr<const PartialOracle> po,
                                       PerceptSpace space)
    : reg_(reg), machine_(machine), po_(std::move(po)), space_(std::move(space)),
      codec_(&space_) {
  po_->check_registry(*reg_);
  reg_->entry(machine);  // validates the index
}

ProbabilityInterval MachineEnvironment::conditional(const History& h, Action a,
                                                    int percept) const {
  // Chain rule over the percept's code bits; each bit contributes its
  // completed-bounds interval given everything before it.
  const BitString& code = space_.at(percept).code;
  BitString x = codec_.encode_with_action(h, a);
  ProbabilityInterval out(Rat(1), Rat(1));
  for (char bit : code) {
    ProbabilityInterval one = completed_bounds(*po_, *reg_, machine_, x);
    if (bit == '1')
      out = out * one;
    else
      out = out * ProbabilityInterval(Rat(1) - one.hi, Rat(1) - one.lo);
    x.push_back(bit);
  }
  return out;
}

std::shared_ptr<Environment> env_from_machine(
    const MachineRegistry& reg, int machine,
    std::shared_ptr<const PartialOracle> po, PerceptSpace space) {
  return std::make_shared<MachineEnvironment>(&reg, machine, std::move(po),
                                              std::move(space));
}

PatternPolicy::PatternPolicy(std::string pattern) : pattern_(std::move(pattern)) {
  if (pattern_.empty()) throw Error("empty policy pattern");
  for (char c : pattern_)
    if (c != 'a' && c != 'b')
      throw Error("policy pattern must use only 'a' and 'b'");
}

Rat PatternPolicy::prob_alpha(const History& h) const {
  std::size_t phase = static_cast<std::size_t>(h.length()) % pattern_.size();
  return pattern_[phase] == 'a' ? Rat(1) : Rat(0);
}

std::string PatternPolicy::state_key(const History& h) const {
  return std::to_string(static_cast<std::size_t>(h.length()) % pattern_.size());
}

Rat OptimalPolicy::prob_alpha(const History& h) const {
  Action a = optimal_action(*env_, h, params_, tie_);
  return a == Action::kAlpha ? Rat(1) : Rat(0);
}

namespace {

// Builtin emitting 1 with probability (V*(h alpha) - V*(h beta) + 1) / 2 at
// a fixed expectimax depth, so oracle queries at threshold 1/2 reveal the
// optimal action.
class ValueGapMachine final : public BuiltinMachine {
 public:
  ValueGapMachine(std::shared_ptr<const Environment> env,
                  std::shared_ptr<const Discount> disc, int depth,
                  std::string name)
      : env_(std::move(env)), disc_(std::move(disc)), depth_(depth),
        name_(std::move(name)), codec_(&env_->percepts()) {}

  std::string name() const override { return name_; }
  std::string spec_string() const override {
    return "value_gap:" + name_ + ":" + std::to_string(depth_);
  }
  int code_length() const override { return 32; }

  BuiltinAction next(const BitString& input, const BuiltinTrace& trace) const override {
    if (trace.empty()) {
      auto decoded = codec_.decode(input);
      if (!decoded || decoded->pending_action || !decoded->percept_prefix.empty())
        return BuiltinAction::halt();
      ValueParams params{disc_.get(), Rat(1), depth_, depth_};
      ValueInterval va =
          action_value(*env_, Action::kAlpha, decoded->history, params).value;
      ValueInterval vb =
          action_value(*env_, Action::kBeta, decoded->history, params).value;
      Rat p = (va.lo - vb.lo + 1) / 2;
      return BuiltinAction::choose({p, Rat(1) - p});
    }
    return BuiltinAction::emit(trace[0] == 0 ? 1 : 0);
  }

 private:
  std::shared_ptr<const Environment> env_;
  std::shared_ptr<const Discount> disc_;
  int depth_;
  std::string name_;
  HistoryCodec codec_;
};

}  // namespace

std::shared_ptr<const BuiltinMachine> make_value_gap_machine(
    std::shared_ptr<const Environment> env, std::shared_ptr<const Discount> disc,
    int depth, std::string name) {
  return std::make_shared<ValueGapMachine>(std::move(env), std::move(disc), depth,
                                           std::move(name));
}

}  // namespace refl
