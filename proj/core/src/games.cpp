#include "refl/errors.hpp"
#include "refl/multiagent.hpp"

namespace refl {
namespace {

// Two-player game with percepts fully determined by the joint action; both
// built-in games fit this shape.
class DeterministicTwoPlayerGame final : public MultiAgentEnv {
 public:
  using PerceptFn = int (*)(int agent, Action own, Action other);

  DeterministicTwoPlayerGame(PerceptSpace space0, PerceptSpace space1,
                             PerceptFn percept, bool invertible)
      : spaces_{std::move(space0), std::move(space1)}, percept_(percept),
        invertible_(invertible) {}

  int agents() const override { return 2; }
  const PerceptSpace& percepts(int agent) const override {
    return spaces_[static_cast<std::size_t>(agent)];
  }

  Rat joint_prob(const JointHistory&, const std::vector<Action>& actions,
                 const std::vector<int>& percepts) const override {
    for (int i = 0; i < 2; ++i) {
      if (percepts[static_cast<std::size_t>(i)] !=
          percept_(i, actions[static_cast<std::size_t>(i)],
                   actions[static_cast<std::size_t>(1 - i)]))
        return Rat(0);
    }
    return Rat(1);
  }

  std::string state_key(const JointHistory&) const override { return ""; }

  std::optional<JointHistory> reconstruct(int agent,
                                          const History& view) const override {
    if (!invertible_) return std::nullopt;
    JointHistory joint;
    for (const Cycle& c : view.cycles()) {
      Action own = c.action;
      // Invert the percept map to recover the opponent's action.
      std::optional<Action> opp;
      for (Action cand : {Action::kAlpha, Action::kBeta})
        if (percept_(agent, own, cand) == c.percept) {
          if (opp && *opp != cand) return std::nullopt;  // not invertible here
          opp = cand;
        }
      if (!opp) return std::nullopt;
      std::vector<Action> actions(2);
      actions[static_cast<std::size_t>(agent)] = own;
      actions[static_cast<std::size_t>(1 - agent)] = *opp;
      std::vector<int> percepts(2);
      for (int i = 0; i < 2; ++i)
        percepts[static_cast<std::size_t>(i)] =
            percept_(i, actions[static_cast<std::size_t>(i)],
                     actions[static_cast<std::size_t>(1 - i)]);
      joint = joint.extended(actions, percepts);
    }
    return joint;
  }

 private:
  PerceptSpace spaces_[2];
  PerceptFn percept_;
  bool invertible_;
};

int mp_percept(int agent, Action own, Action other) {
  bool match = own == other;
  bool win = agent == 0 ? match : !match;
  return win ? 1 : 0;  // percept index == reward
}

int pd_percept_fn(int agent, Action own, Action other) {
  (void)agent;
  return pd_percept(own, other);
}

}  // namespace

std::shared_ptr<MultiAgentEnv> make_matching_pennies() {
  PerceptSpace space =
      PerceptSpace::with_default_codes({{"lose", Rat(0)}, {"win", Rat(1)}});
  return std::make_shared<DeterministicTwoPlayerGame>(space, space, mp_percept,
                                                      true);
}

// Percept order: (opponent C, r), (opponent D, r) for own C, then own D.
int pd_percept(Action own, Action opponent) {
  bool own_c = own == Action::kAlpha;
  bool opp_c = opponent == Action::kAlpha;
  if (own_c) return opp_c ? 0 : 1;
  return opp_c ? 2 : 3;
}

bool pd_opponent_defected(int percept) { return percept == 1 || percept == 3; }

std::shared_ptr<MultiAgentEnv> make_iterated_pd() {
  PerceptSpace space = PerceptSpace::with_default_codes({
      {"oppC", Rat(3, 4)},  // both cooperate
      {"oppD", Rat(0)},     // we cooperate, they defect
      {"oppC_we_defect", Rat(1)},
      {"oppD_we_defect", Rat(1, 4)},
  });
  return std::make_shared<DeterministicTwoPlayerGame>(space, space, pd_percept_fn,
                                                      true);
}

namespace {

class GrimPolicy final : public Policy {
 public:
  explicit GrimPolicy(std::optional<int> t) : t_(t) {}

  Rat prob_alpha(const History& h) const override {
    return cooperate(h) ? Rat(1) : Rat(0);
  }

  std::string state_key(const History& h) const override {
    if (!cooperate(h)) return "D";
    // Still cooperating; remaining patience determines the future.
    if (!t_) return "C";
    return "C" + std::to_string(*t_ - h.time_step());
  }

 private:
  bool cooperate(const History& h) const {
    if (t_ && h.time_step() > *t_) return false;
    for (const Cycle& c : h.cycles())
      if (pd_opponent_defected(c.percept)) return false;
    return true;
  }

  std::optional<int> t_;
};

}  // namespace

std::shared_ptr<Policy> pd_grim_policy(std::optional<int> t) {
  if (t && *t < 0) throw Error("grim trigger time must be nonnegative");
  return std::make_shared<GrimPolicy>(t);
}

}  // namespace refl
