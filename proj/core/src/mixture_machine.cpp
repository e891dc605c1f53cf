#include "refl/bayes.hpp"
#include "refl/errors.hpp"

namespace refl {
namespace {

// Conditional-semimeasure machine for a prior-weighted mixture of registry
// machines.
//
// One run: draw a member from the prior; walk the input's percept bits in
// order, sampling each bit from the member's completed conditional, and
// restart from the draw whenever a sampled bit contradicts the input;
// after reproducing every observed bit, sample one more and emit it. The
// accepted member is therefore distributed per the posterior, and the
// emitted bit per the posterior mixture.
//
// Bits are sampled from the completed measure by racing a uniform draw
// against a bisection for the oracle's crossover point: refine r one coin
// at a time and the crossover interval one threshold query at a time until
// they separate; r below the crossover means bit 1.
class MixtureMachine final : public BuiltinMachine {
 public:
  MixtureMachine(std::vector<int> members, std::vector<Rat> weights, int code_bits)
      : members_(std::move(members)), weights_(std::move(weights)),
        code_bits_(code_bits) {
    std::string spec = "mixture:";
    for (std::size_t i = 0; i < members_.size(); ++i) {
      spec += std::to_string(members_[i]);
      spec += '*';
      spec += rat_str(weights_[i]);
      spec += ';';
    }
    spec += "bits=" + std::to_string(code_bits_);
    spec_ = std::move(spec);
    Rat total(0);
    for (const Rat& w : weights_) total += w;
    norm_.reserve(weights_.size());
    for (const Rat& w : weights_) norm_.push_back(w / total);
  }

  std::string name() const override { return "mixture"; }
  std::string spec_string() const override { return spec_; }
  int code_length() const override {
    return 8 + 2 * static_cast<int>(members_.size());
  }

  BuiltinAction next(const BitString& input, const BuiltinTrace& trace) const override {
    // Positions of the percept bits to reproduce, then the one to emit.
    std::vector<std::size_t> targets;
    std::size_t pos = 0;
    const std::size_t cycle = 1 + static_cast<std::size_t>(code_bits_);
    while (pos + cycle <= input.size()) {
      for (std::size_t b = 1; b <= static_cast<std::size_t>(code_bits_); ++b)
        targets.push_back(pos + b);
      pos += cycle;
    }
    if (pos >= input.size()) return BuiltinAction::halt();  // no pending action
    for (std::size_t b = pos + 1; b < input.size(); ++b) targets.push_back(b);
    // The bit to predict sits at index input.size().

    std::size_t ptr = 0;  // trace cursor
    for (;;) {
      if (ptr == trace.size()) return BuiltinAction::choose(norm_);
      int member = members_[trace[ptr++]];

      bool mismatch = false;
      for (std::size_t ti = 0; ti <= targets.size(); ++ti) {
        const bool emitting = ti == targets.size();
        BitString z = input.substr(0, emitting ? input.size() : targets[ti]);

        // Race: uniform r in [rlo, rlo + rw) vs crossover in [clo, chi].
        Rat rlo(0), rw(1);
        Rat clo(0), chi(1);
        int decided = -1;
        while (decided < 0) {
          if (ptr == trace.size())
            return BuiltinAction::choose({Rat(1, 2), Rat(1, 2)});
          rw /= 2;
          if (trace[ptr++]) rlo += rw;
          if (rlo + rw <= clo) decided = 1;
          if (rlo >= chi) decided = 0;
          if (decided >= 0) break;

          Rat mid = (clo + chi) / 2;
          if (ptr == trace.size())
            return BuiltinAction::ask(Query{member, z, mid});
          if (trace[ptr++])
            clo = mid;
          else
            chi = mid;
          if (rlo + rw <= clo) decided = 1;
          if (rlo >= chi) decided = 0;
        }

        if (emitting) return BuiltinAction::emit(decided);
        int observed = input[targets[ti]] - '0';
        if (decided != observed) {
          mismatch = true;
          break;
        }
      }
      if (!mismatch)
        throw Error("mixture machine replay overran the trace");
    }
  }

 private:
  std::vector<int> members_;
  std::vector<Rat> weights_;
  std::vector<Rat> norm_;
  int code_bits_;
  std::string spec_;
};

}  // namespace

int register_mixture_as_machine(MachineRegistry& reg, const EnvironmentClass& cls,
                                const std::vector<Rat>& prior) {
  if (static_cast<int>(prior.size()) != cls.size())
    throw Error("prior size does not match the class");
  std::vector<int> members;
  for (int i = 0; i < cls.size(); ++i) {
    if (cls.at(i).machine < 1 || cls.at(i).machine > reg.size())
      throw Error("class member '" + cls.at(i).name +
                  "' is not registry-backed; cannot register the mixture");
    members.push_back(cls.at(i).machine);
  }
  return reg.register_builtin(std::make_shared<MixtureMachine>(
      std::move(members), prior, cls.percepts().code_bits()));
}

}  // namespace refl
