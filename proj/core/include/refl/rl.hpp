#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refl/discount.hpp"
#include "refl/machine.hpp"
#include "refl/partial_oracle.hpp"
#include "refl/random.hpp"

namespace refl {

// ---------------------------------------------------------------------------
// Actions, percepts, histories
// ---------------------------------------------------------------------------

enum class Action : int { kAlpha = 0, kBeta = 1 };

inline Action other(Action a) {
  return a == Action::kAlpha ? Action::kBeta : Action::kAlpha;
}
inline char action_char(Action a) { return a == Action::kAlpha ? 'a' : 'b'; }

struct Percept {
  std::string tag;
  Rat reward;       // in [0, 1]
  BitString code;   // fixed-length binary encoding
};

class PerceptSpace {
 public:
  explicit PerceptSpace(std::vector<Percept> percepts);
  // Tags paired with rewards; codes assigned as fixed-length binary indices.
  static PerceptSpace with_default_codes(
      std::vector<std::pair<std::string, Rat>> tagged_rewards);

  int size() const { return static_cast<int>(percepts_.size()); }
  const Percept& at(int i) const { return percepts_[static_cast<std::size_t>(i)]; }
  int code_bits() const { return code_bits_; }
  std::optional<int> index_by_code(const BitString& code) const;

 private:
  std::vector<Percept> percepts_;
  int code_bits_;
};

struct Cycle {
  Action action;
  int percept;
};

// Agent-view history a_1 e_1 ... a_{t-1} e_{t-1}. Carries an incrementally
// built byte key so maps on histories stay cheap.
class History {
 public:
  History() = default;

  History extended(Action a, int percept) const;
  int length() const { return static_cast<int>(cycles_.size()); }
  int time_step() const { return length() + 1; }
  const std::vector<Cycle>& cycles() const { return cycles_; }
  const std::string& key() const { return key_; }
  bool empty() const { return cycles_.empty(); }

 private:
  std::vector<Cycle> cycles_;
  std::string key_;
};

// Binary encoding of histories for machine-backed environments: each cycle
// contributes one action bit followed by the percept's code bits.
class HistoryCodec {
 public:
  explicit HistoryCodec(const PerceptSpace* space) : space_(space) {}

  BitString encode(const History& h) const;
  BitString encode_with_action(const History& h, Action a) const;

  struct Decoded {
    History history;
    std::optional<Action> pending_action;
    BitString percept_prefix;  // bits of the percept being predicted
  };
  // Parses an input string back into (history, action, partial percept).
  // nullopt when the string does not decode (unknown percept code).
  std::optional<Decoded> decode(const BitString& input) const;

  const PerceptSpace& space() const { return *space_; }

 private:
  const PerceptSpace* space_;
};

// ---------------------------------------------------------------------------
// Environments and policies
// ---------------------------------------------------------------------------

// Conditional distribution over percepts given history and action. Exact
// environments return point intervals; machine-backed ones return the
// truncation bounds.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const PerceptSpace& percepts() const = 0;
  virtual ProbabilityInterval conditional(const History& h, Action a,
                                          int percept) const = 0;
  virtual bool exact() const { return true; }
  // Key identifying everything about the environment's future behaviour
  // after h. Environments with small sufficient state override this so the
  // value recursion can merge histories; the default never merges.
  virtual std::string state_key(const History& h) const { return h.key(); }

  // Point conditional for exact environments.
  Rat prob(const History& h, Action a, int percept) const;
};

// Tabular environment defined by a conditional function; the optional state
// function feeds state_key.
class FunctionalEnvironment final : public Environment {
 public:
  using Conditional = std::function<Rat(const History&, Action, int)>;
  using StateFn = std::function<std::string(const History&)>;

  FunctionalEnvironment(PerceptSpace space, Conditional conditional,
                        StateFn state = nullptr)
      : space_(std::move(space)),
        conditional_(std::move(conditional)),
        state_(std::move(state)) {}

  const PerceptSpace& percepts() const override { return space_; }
  ProbabilityInterval conditional(const History& h, Action a,
                                  int percept) const override {
    Rat p = conditional_(h, a, percept);
    return ProbabilityInterval(p, p);
  }
  std::string state_key(const History& h) const override {
    return state_ ? state_(h) : h.key();
  }

 private:
  PerceptSpace space_;
  Conditional conditional_;
  StateFn state_;
};

// Environment nu(e | h a) := product over the percept code's bits of the
// completed-bounds interval of the backing machine, per the chain rule.
class MachineEnvironment final : public Environment {
 public:
  MachineEnvironment(const MachineRegistry* reg, int machine,
                     std::shared_ptr<const PartialOracle> po, PerceptSpace space);

  const PerceptSpace& percepts() const override { return space_; }
  ProbabilityInterval conditional(const History& h, Action a,
                                  int percept) const override;
  bool exact() const override { return false; }

 private:
  const MachineRegistry* reg_;
  int machine_;
  std::shared_ptr<const PartialOracle> po_;
  PerceptSpace space_;
  HistoryCodec codec_;
};

// Factory named after its role: the spec's percept encoding plus machine
// index yield an environment over the encoded percept space.
std::shared_ptr<Environment> env_from_machine(
    const MachineRegistry& reg, int machine,
    std::shared_ptr<const PartialOracle> po, PerceptSpace space);

class Policy {
 public:
  virtual ~Policy() = default;
  // Exact probability of taking alpha after h.
  virtual Rat prob_alpha(const History& h) const = 0;
  // Sufficient state for value memoization; see Environment::state_key.
  virtual std::string state_key(const History& h) const { return h.key(); }

  Rat prob(const History& h, Action a) const {
    Rat pa = prob_alpha(h);
    return a == Action::kAlpha ? pa : Rat(1) - pa;
  }
  Action act(const History& h, BitSource& bits) const {
    return sample_bernoulli(prob_alpha(h), bits) ? Action::kAlpha : Action::kBeta;
  }
};

class FunctionalPolicy final : public Policy {
 public:
  using ProbFn = std::function<Rat(const History&)>;
  using StateFn = std::function<std::string(const History&)>;
  explicit FunctionalPolicy(ProbFn prob, StateFn state = nullptr)
      : prob_(std::move(prob)), state_(std::move(state)) {}
  Rat prob_alpha(const History& h) const override { return prob_(h); }
  std::string state_key(const History& h) const override {
    return state_ ? state_(h) : h.key();
  }

 private:
  ProbFn prob_;
  StateFn state_;
};

// Deterministic cyclic pattern like "aab" -> alpha alpha beta alpha ...
class PatternPolicy final : public Policy {
 public:
  explicit PatternPolicy(std::string pattern);
  Rat prob_alpha(const History& h) const override;
  std::string state_key(const History& h) const override;

 private:
  std::string pattern_;
};

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

using ValueInterval = ProbabilityInterval;  // normalized values live in [0,1]

struct ValueReport {
  ValueInterval value;
  // Width attributable to cutting the recursion at finite depth.
  Rat truncation_width;
  // Remaining width, inherited from interval-valued conditionals.
  Rat env_width;
  int depth = 0;
  // Set when the requested precision was unreachable (depth cap or
  // machine-backed interval floor).
  bool precision_capped = false;
};

struct ValueParams {
  const Discount* discount = nullptr;
  Rat precision;                        // target interval width
  std::optional<int> fixed_depth;      // bypass depth selection when set
  int max_depth = 40;
};

// Value of a policy (Bellman recursion over histories, exact interval
// arithmetic). The recursion is cut at depth m with
// Gamma_{t+m}/Gamma_t <= precision/2 unless fixed_depth overrides it.
ValueReport value(const Environment& env, const Policy& policy,
                  const History& h, const ValueParams& params);

// Expectimax: max over actions, expectation over percepts.
ValueReport optimal_value(const Environment& env, const History& h,
                          const ValueParams& params);

ValueReport action_value(const Environment& env, Action a, const History& h,
                         const ValueParams& params);

// Tie handling for optimal_action when the action-value intervals refuse to
// separate at the requested precision.
struct TieBreak {
  enum class Kind { kAlpha, kOracleMediated };
  Kind kind = Kind::kAlpha;
  // kOracleMediated: ask the partial oracle about a registered machine
  // whose output probability is (V*(h alpha) - V*(h beta) + 1) / 2.
  const PartialOracle* po = nullptr;
  const MachineRegistry* reg = nullptr;
  int value_machine = 0;
  const HistoryCodec* codec = nullptr;
  BitSource* bits = nullptr;
};

Action optimal_action(const Environment& env, const History& h,
                      const ValueParams& params, const TieBreak& tie = {});

// Policy that plays optimal_action everywhere (deterministic for the
// fixed-alpha tie rule).
class OptimalPolicy final : public Policy {
 public:
  OptimalPolicy(const Environment* env, ValueParams params, TieBreak tie = {})
      : env_(env), params_(std::move(params)), tie_(std::move(tie)) {}
  Rat prob_alpha(const History& h) const override;
  std::string state_key(const History& h) const override {
    return env_->state_key(h);
  }

 private:
  const Environment* env_;
  ValueParams params_;
  TieBreak tie_;
};

// Theorem-12-style machine: emits 1 with probability
// (V*(h alpha) - V*(h beta) + 1) / 2 computed at a fixed depth from the
// decoded input history. Registering it makes optimal behaviour reachable
// through oracle queries.
std::shared_ptr<const BuiltinMachine> make_value_gap_machine(
    std::shared_ptr<const Environment> env, std::shared_ptr<const Discount> disc,
    int depth, std::string name);

}  // namespace refl
