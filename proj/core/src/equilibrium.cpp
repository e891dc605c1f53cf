#include <unordered_map>

#include "refl/errors.hpp"
#include "refl/multiagent.hpp"

namespace refl {

// Exact 2x2 simultaneous-move solver. Candidates in documented order: the
// four pure profiles lexicographically, then the interior mixed profile
// from the indifference conditions. A 2x2 game without a pure equilibrium
// has strictly cyclic best responses, so the interior profile exists there.
StageEquilibrium solve_2x2(const Rat q1[2][2], const Rat q2[2][2]) {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      bool p1_ok = q1[i][j] >= q1[1 - i][j];
      bool p2_ok = q2[i][j] >= q2[i][1 - j];
      if (p1_ok && p2_ok) {
        StageEquilibrium eq;
        eq.p_alpha_1 = Rat(i == 0 ? 1 : 0);
        eq.p_alpha_2 = Rat(j == 0 ? 1 : 0);
        eq.value_1 = q1[i][j];
        eq.value_2 = q2[i][j];
        return eq;
      }
    }
  }
  // Interior: player 2's indifference pins p = P(player 1 plays alpha),
  // player 1's pins q = P(player 2 plays alpha).
  Rat d2 = q2[0][0] - q2[0][1] - q2[1][0] + q2[1][1];
  Rat d1 = q1[0][0] - q1[0][1] - q1[1][0] + q1[1][1];
  if (d1 == 0 || d2 == 0)
    throw Error("degenerate stage game without pure or interior equilibrium");
  Rat p = (q2[1][1] - q2[1][0]) / d2;
  Rat q = (q1[1][1] - q1[0][1]) / d1;
  if (p < 0 || p > 1 || q < 0 || q > 1)
    throw Error("stage game solver found no equilibrium");
  StageEquilibrium eq;
  eq.p_alpha_1 = p;
  eq.p_alpha_2 = q;
  eq.value_1 = q * (p * q1[0][0] + (Rat(1) - p) * q1[1][0]) +
               (Rat(1) - q) * (p * q1[0][1] + (Rat(1) - p) * q1[1][1]);
  eq.value_2 = p * (q * q2[0][0] + (Rat(1) - q) * q2[0][1]) +
               (Rat(1) - p) * (q * q2[1][0] + (Rat(1) - q) * q2[1][1]);
  return eq;
}

namespace {

struct StageSolution {
  std::vector<Rat> p_alpha;  // per agent
  std::vector<Rat> values;   // per agent, normalized over the truncated mass
};

// Backward induction over the joint game tree, memoized on the
// environment's joint state abstraction.
class Inductor {
 public:
  Inductor(const MultiAgentEnv& env, const Discount& disc)
      : env_(env), disc_(disc) {}

  // Sum gamma_t .. gamma_{t+d-1}.
  Rat truncated_mass(int t, int d) {
    Rat total(0);
    for (int k = 0; k < d; ++k) total += disc_.gamma(t + k);
    return total;
  }

  std::string key(const JointHistory& h, int t, int depth) const {
    std::string k = env_.state_key(h);
    k += '|';
    k += std::to_string(depth);
    if (!disc_.geometric()) {
      k += '@';
      k += std::to_string(t);
    }
    return k;
  }

  const StageSolution& solve(const JointHistory& h, int t, int depth) {
    std::string k = key(h, t, depth);
    if (auto it = solved_.find(k); it != solved_.end()) return it->second;

    const int n = env_.agents();
    if (n != 2)
      throw Error("informed_equilibrium supports two-player games");

    Rat mass = truncated_mass(t, depth);
    Rat tail_mass = truncated_mass(t + 1, depth - 1);
    Rat q1[2][2], q2[2][2];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        std::vector<Action> actions{i == 0 ? Action::kAlpha : Action::kBeta,
                                    j == 0 ? Action::kAlpha : Action::kBeta};
        Rat v1(0), v2(0);
        for (const auto& [tuple, p] : joint_percept_dist(env_, h, actions)) {
          Rat r1 = env_.percepts(0).at(tuple[0]).reward;
          Rat r2 = env_.percepts(1).at(tuple[1]).reward;
          Rat c1 = disc_.gamma(t) * r1;
          Rat c2 = disc_.gamma(t) * r2;
          if (depth > 1) {
            const StageSolution& sub = solve(h.extended(actions, tuple), t + 1,
                                             depth - 1);
            c1 += tail_mass * sub.values[0];
            c2 += tail_mass * sub.values[1];
          }
          v1 += p * c1;
          v2 += p * c2;
        }
        q1[i][j] = v1 / mass;
        q2[i][j] = v2 / mass;
      }
    }

    StageEquilibrium eq = solve_2x2(q1, q2);
    StageSolution sol;
    sol.p_alpha = {eq.p_alpha_1, eq.p_alpha_2};
    sol.values = {eq.value_1, eq.value_2};
    return solved_.emplace(std::move(k), std::move(sol)).first->second;
  }

  std::unordered_map<std::string, StageSolution> take() { return std::move(solved_); }

 private:
  const MultiAgentEnv& env_;
  const Discount& disc_;
  std::unordered_map<std::string, StageSolution> solved_;
};

// Replays the solved strategies; joint histories are rebuilt from the
// agent's own view (perfect monitoring required).
class SolvedPolicy final : public Policy {
 public:
  SolvedPolicy(const MultiAgentEnv* env, const Discount* disc, int agent,
               int horizon,
               std::shared_ptr<const std::unordered_map<std::string, StageSolution>> solved)
      : env_(env), disc_(disc), agent_(agent), horizon_(horizon),
        solved_(std::move(solved)) {}

  Rat prob_alpha(const History& view) const override {
    if (view.length() >= horizon_) return Rat(1);  // beyond the solved tree
    auto joint = env_->reconstruct(agent_, view);
    if (!joint)
      throw Error("equilibrium policy needs a perfect-monitoring game");
    std::string k = env_->state_key(*joint);
    k += '|';
    k += std::to_string(horizon_ - joint->length());
    if (!disc_->geometric()) {
      k += '@';
      k += std::to_string(joint->time_step());
    }
    auto it = solved_->find(k);
    if (it == solved_->end())
      throw Error("history outside the solved equilibrium tree");
    return it->second.p_alpha[static_cast<std::size_t>(agent_)];
  }

  std::string state_key(const History& view) const override {
    auto joint = env_->reconstruct(agent_, view);
    if (!joint) return view.key();
    return env_->state_key(*joint) + "|" +
           std::to_string(std::max(0, horizon_ - joint->length()));
  }

 private:
  const MultiAgentEnv* env_;
  const Discount* disc_;
  int agent_;
  int horizon_;
  std::shared_ptr<const std::unordered_map<std::string, StageSolution>> solved_;
};

}  // namespace

EquilibriumResult informed_equilibrium(const MultiAgentEnv& env,
                                       const Discount& discount, int horizon) {
  if (horizon < 1) throw Error("equilibrium horizon must be >= 1");
  Inductor inductor(env, discount);
  StageSolution root = inductor.solve(JointHistory{}, 1, horizon);

  EquilibriumResult result;
  result.root_strategy = root.p_alpha;
  result.values = root.values;
  auto solved = std::make_shared<const std::unordered_map<std::string, StageSolution>>(
      inductor.take());
  for (int i = 0; i < env.agents(); ++i)
    result.policies.push_back(std::make_shared<SolvedPolicy>(
        &env, &discount, i, horizon, solved));
  return result;
}

}  // namespace refl
