#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refl/bayes.hpp"
#include "refl/rl.hpp"

namespace refl {

// ---------------------------------------------------------------------------
// Joint histories and multi-agent environments
// ---------------------------------------------------------------------------

struct JointStep {
  std::vector<Action> actions;   // one per agent
  std::vector<int> percepts;     // one per agent
};

class JointHistory {
 public:
  JointHistory() = default;

  JointHistory extended(const std::vector<Action>& actions,
                        const std::vector<int>& percepts) const;
  int length() const { return static_cast<int>(steps_.size()); }
  int time_step() const { return length() + 1; }
  const std::vector<JointStep>& steps() const { return steps_; }
  const std::string& key() const { return key_; }

  // Agent i's private view: only its own actions and percepts.
  History view(int agent) const;

 private:
  std::vector<JointStep> steps_;
  std::string key_;
};

// Exact (tabular) n-agent environment: a joint conditional over percept
// tuples given the joint history and joint action.
class MultiAgentEnv {
 public:
  virtual ~MultiAgentEnv() = default;
  virtual int agents() const = 0;
  virtual const PerceptSpace& percepts(int agent) const = 0;
  virtual Rat joint_prob(const JointHistory& h, const std::vector<Action>& actions,
                         const std::vector<int>& percepts) const = 0;
  // Sufficient state for value/equilibrium memoization (see Environment).
  virtual std::string state_key(const JointHistory& h) const { return h.key(); }
  // Perfect-monitoring games can rebuild the joint history from one agent's
  // view; required by the informed-equilibrium policies.
  virtual std::optional<JointHistory> reconstruct(int agent,
                                                  const History& view) const {
    (void)agent;
    (void)view;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Play and subjective environments
// ---------------------------------------------------------------------------

// Support of the joint percept distribution at (h, actions).
std::vector<std::pair<std::vector<int>, Rat>> joint_percept_dist(
    const MultiAgentEnv& env, const JointHistory& h,
    const std::vector<Action>& actions);

// Samples T cycles of the history distribution: every agent draws from its
// policy, the environment draws the joint percept. Each agent and the
// environment consume their own seeded bit streams derived from `seed`.
JointHistory play(const MultiAgentEnv& env,
                  const std::vector<const Policy*>& policies, int steps,
                  std::uint64_t seed);

// Agent i's subjective environment: marginalizes the other agents'
// histories out of the joint distribution by exact belief filtering over
// joint histories compatible with agent i's view.
class SubjectiveEnvironment final : public Environment {
 public:
  SubjectiveEnvironment(const MultiAgentEnv* env,
                        std::vector<const Policy*> policies, int agent,
                        std::size_t support_bound = 65536);

  const PerceptSpace& percepts() const override;
  ProbabilityInterval conditional(const History& h, Action a,
                                  int percept) const override;
  std::string state_key(const History& h) const override;

 private:
  struct Belief {
    std::vector<JointHistory> support;
    std::vector<Rat> weights;  // sum to 1
  };
  const Belief& belief_at(const History& h) const;

  const MultiAgentEnv* env_;
  std::vector<const Policy*> policies_;
  int agent_;
  std::size_t support_bound_;
  mutable std::unordered_map<std::string, Belief> beliefs_;
};

std::shared_ptr<Environment> subjective_env(const MultiAgentEnv& env,
                                            std::vector<const Policy*> policies,
                                            int agent);

// Interval enclosing V*_{sigma_i} - V^{pi_i}_{sigma_i} after history. The
// profile is an eps-best response for agent i when hi < eps.
struct GapReport {
  ValueInterval gap;
  ValueReport optimal;
  ValueReport actual;
  bool is_eps_best_response(const Rat& eps) const { return gap.hi < eps; }
};
GapReport best_response_gap(const MultiAgentEnv& env,
                            const std::vector<const Policy*>& policies, int agent,
                            const History& view, const ValueParams& params);

// ---------------------------------------------------------------------------
// Informed equilibria by backward induction
// ---------------------------------------------------------------------------

struct EquilibriumResult {
  // Per-agent mixed strategy at the root (probability of alpha).
  std::vector<Rat> root_strategy;
  // Per-agent values of the horizon-truncated game (normalized by the
  // truncated discount mass, so a one-shot game reports plain expected
  // reward).
  std::vector<Rat> values;
  std::vector<std::shared_ptr<Policy>> policies;
};

// Solves the m-step truncation of the game by backward induction, solving
// each stage's simultaneous-move game exactly (2x2 support enumeration with
// lexicographic selection; pure profiles only for n > 2). The returned
// policies replay the solved strategies by reconstructing the joint history
// from each agent's view; beyond the horizon they fall back to alpha.
EquilibriumResult informed_equilibrium(const MultiAgentEnv& env,
                                       const Discount& discount, int horizon);

// Exact mixed equilibrium of one 2x2 stage game (first in the documented
// order: pure profiles lexicographically, then mixed supports).
struct StageEquilibrium {
  Rat p_alpha_1;
  Rat p_alpha_2;
  Rat value_1;
  Rat value_2;
};
StageEquilibrium solve_2x2(const Rat q1[2][2], const Rat q2[2][2]);

// ---------------------------------------------------------------------------
// Built-in games
// ---------------------------------------------------------------------------

// Matching pennies: observations are vacuous, reward 1 to agent 1 iff the
// actions match, reward 1 to agent 2 iff they differ.
std::shared_ptr<MultiAgentEnv> make_matching_pennies();

// Iterated prisoner's dilemma with payoffs CC (3/4, 3/4), CD (0, 1),
// DC (1, 0), DD (1/4, 1/4); alpha = cooperate. Percepts reveal the
// opponent's action.
std::shared_ptr<MultiAgentEnv> make_iterated_pd();

// PD percept indices: (opponent action, own reward) pairs.
int pd_percept(Action own, Action opponent);
bool pd_opponent_defected(int percept);

// Grim-trigger family: cooperate until time step t or the first observed
// defection, defect afterwards; nullopt = cooperate forever unless provoked.
std::shared_ptr<Policy> pd_grim_policy(std::optional<int> t);

}  // namespace refl
