#include "refl/multiagent.hpp"

#include <algorithm>
#include <functional>

#include "refl/errors.hpp"

namespace refl {

JointHistory JointHistory::extended(const std::vector<Action>& actions,
                                    const std::vector<int>& percepts) const {
  JointHistory next = *this;
  next.steps_.push_back(JointStep{actions, percepts});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    next.key_.push_back(static_cast<char>(
        0x40 | (static_cast<int>(actions[i]) << 5) | percepts[i]));
  }
  next.key_.push_back('/');
  return next;
}

History JointHistory::view(int agent) const {
  History h;
  for (const JointStep& s : steps_)
    h = h.extended(s.actions[static_cast<std::size_t>(agent)],
                   s.percepts[static_cast<std::size_t>(agent)]);
  return h;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::vector<std::pair<std::vector<int>, Rat>> joint_percept_dist(
    const MultiAgentEnv& env, const JointHistory& h,
    const std::vector<Action>& actions) {
  std::vector<std::pair<std::vector<int>, Rat>> out;
  int n = env.agents();
  std::vector<int> current(static_cast<std::size_t>(n), 0);
  std::function<void(int)> rec = [&](int agent) {
    if (agent == n) {
      Rat p = env.joint_prob(h, actions, current);
      if (p > 0) out.emplace_back(current, std::move(p));
      return;
    }
    for (int e = 0; e < env.percepts(agent).size(); ++e) {
      current[static_cast<std::size_t>(agent)] = e;
      rec(agent + 1);
    }
  };
  rec(0);
  return out;
}

JointHistory play(const MultiAgentEnv& env,
                  const std::vector<const Policy*>& policies, int steps,
                  std::uint64_t seed) {
  const int n = env.agents();
  if (static_cast<int>(policies.size()) != n)
    throw Error("play() needs one policy per agent");

  std::vector<BitSource> agent_bits;
  for (int i = 0; i < n; ++i)
    agent_bits.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(i)));
  BitSource env_bits(mix_seed(seed, 0xE17ULL));

  JointHistory h;
  for (int t = 0; t < steps; ++t) {
    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      History view = h.view(i);
      actions.push_back(policies[static_cast<std::size_t>(i)]->act(
          view, agent_bits[static_cast<std::size_t>(i)]));
    }
    auto dist = joint_percept_dist(env, h, actions);
    if (dist.empty()) throw Error("environment assigned no percept mass");
    std::vector<Rat> probs;
    probs.reserve(dist.size());
    for (const auto& [tuple, p] : dist) probs.push_back(p);
    std::size_t pick = sample_index(probs, env_bits);
    h = h.extended(actions, dist[pick].first);
  }
  return h;
}

// ---------------------------------------------------------------------------
// SubjectiveEnvironment
// ---------------------------------------------------------------------------

SubjectiveEnvironment::SubjectiveEnvironment(const MultiAgentEnv* env,
                                             std::vector<const Policy*> policies,
                                             int agent, std::size_t support_bound)
    : env_(env), policies_(std::move(policies)), agent_(agent),
      support_bound_(support_bound) {
  if (static_cast<int>(policies_.size()) != env_->agents())
    throw Error("subjective environment needs every agent's policy");
}

const PerceptSpace& SubjectiveEnvironment::percepts() const {
  return env_->percepts(agent_);
}

const SubjectiveEnvironment::Belief& SubjectiveEnvironment::belief_at(
    const History& h) const {
  auto it = beliefs_.find(h.key());
  if (it != beliefs_.end()) return it->second;

  Belief b;
  if (h.length() == 0) {
    b.support.push_back(JointHistory{});
    b.weights.push_back(Rat(1));
  } else {
    History parent;
    for (int i = 0; i + 1 < h.length(); ++i)
      parent = parent.extended(h.cycles()[static_cast<std::size_t>(i)].action,
                               h.cycles()[static_cast<std::size_t>(i)].percept);
    const Cycle& last = h.cycles().back();
    const Belief& prev = belief_at(parent);

    const int n = env_->agents();
    std::vector<JointHistory> support;
    std::vector<Rat> weights;
    for (std::size_t s = 0; s < prev.support.size(); ++s) {
      const JointHistory& joint = prev.support[s];
      // Enumerate the other agents' actions.
      std::vector<Action> actions(static_cast<std::size_t>(n), Action::kAlpha);
      actions[static_cast<std::size_t>(agent_)] = last.action;
      std::vector<int> others;
      for (int j = 0; j < n; ++j)
        if (j != agent_) others.push_back(j);
      std::function<void(std::size_t, Rat)> rec = [&](std::size_t oi, Rat w) {
        if (w == 0) return;
        if (oi == others.size()) {
          for (const auto& [tuple, p] : joint_percept_dist(*env_, joint, actions)) {
            if (tuple[static_cast<std::size_t>(agent_)] != last.percept) continue;
            support.push_back(joint.extended(actions, tuple));
            weights.push_back(w * p);
          }
          return;
        }
        int j = others[oi];
        History vj = joint.view(j);
        const Policy* pj = policies_[static_cast<std::size_t>(j)];
        Rat pa = pj->prob_alpha(vj);
        if (pa > 0) {
          actions[static_cast<std::size_t>(j)] = Action::kAlpha;
          rec(oi + 1, w * pa);
        }
        if (pa < 1) {
          actions[static_cast<std::size_t>(j)] = Action::kBeta;
          rec(oi + 1, w * (Rat(1) - pa));
        }
      };
      rec(0, prev.weights[s]);
    }

    // Merge duplicate joint histories and renormalize.
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < support.size(); ++k) {
      auto [pos, fresh] = index.emplace(support[k].key(), b.support.size());
      if (fresh) {
        b.support.push_back(support[k]);
        b.weights.push_back(weights[k]);
      } else {
        b.weights[pos->second] += weights[k];
      }
    }
    Rat total(0);
    for (const Rat& w : b.weights) total += w;
    if (total == 0) {
      // The view itself has probability zero (reachable only through
      // counterfactual branches); conditionals below it carry no weight.
      b.support.clear();
      b.weights.clear();
    } else {
      for (Rat& w : b.weights) w /= total;
    }
    if (b.support.size() > support_bound_)
      throw Error("belief support exceeds the configured bound");
  }
  return beliefs_.emplace(h.key(), std::move(b)).first->second;
}

ProbabilityInterval SubjectiveEnvironment::conditional(const History& h, Action a,
                                                       int percept) const {
  const Belief& b = belief_at(h);
  const int n = env_->agents();
  Rat total(0);
  for (std::size_t s = 0; s < b.support.size(); ++s) {
    const JointHistory& joint = b.support[s];
    std::vector<Action> actions(static_cast<std::size_t>(n), Action::kAlpha);
    actions[static_cast<std::size_t>(agent_)] = a;
    std::vector<int> others;
    for (int j = 0; j < n; ++j)
      if (j != agent_) others.push_back(j);
    std::function<void(std::size_t, Rat)> rec = [&](std::size_t oi, Rat w) {
      if (w == 0) return;
      if (oi == others.size()) {
        for (const auto& [tuple, p] : joint_percept_dist(*env_, joint, actions))
          if (tuple[static_cast<std::size_t>(agent_)] == percept) total += w * p;
        return;
      }
      int j = others[oi];
      const Policy* pj = policies_[static_cast<std::size_t>(j)];
      Rat pa = pj->prob_alpha(joint.view(j));
      if (pa > 0) {
        actions[static_cast<std::size_t>(j)] = Action::kAlpha;
        rec(oi + 1, w * pa);
      }
      if (pa < 1) {
        actions[static_cast<std::size_t>(j)] = Action::kBeta;
        rec(oi + 1, w * (Rat(1) - pa));
      }
    };
    rec(0, b.weights[s]);
  }
  return ProbabilityInterval(total, total);
}

std::string SubjectiveEnvironment::state_key(const History& h) const {
  const Belief& b = belief_at(h);
  if (b.support.empty()) return "dead";
  std::string key;
  for (std::size_t s = 0; s < b.support.size(); ++s) {
    key += env_->state_key(b.support[s]);
    key += '\x1d';
    for (int j = 0; j < env_->agents(); ++j) {
      if (j == agent_) continue;
      key += policies_[static_cast<std::size_t>(j)]->state_key(b.support[s].view(j));
      key += '\x1c';
    }
    key += rat_str(b.weights[s]);
    key += '\x1d';
  }
  return key;
}

std::shared_ptr<Environment> subjective_env(const MultiAgentEnv& env,
                                            std::vector<const Policy*> policies,
                                            int agent) {
  return std::make_shared<SubjectiveEnvironment>(&env, std::move(policies), agent);
}

GapReport best_response_gap(const MultiAgentEnv& env,
                            const std::vector<const Policy*>& policies, int agent,
                            const History& view, const ValueParams& params) {
  SubjectiveEnvironment sigma_i(&env, policies, agent);
  GapReport report;
  report.optimal = optimal_value(sigma_i, view, params);
  report.actual = value(sigma_i, *policies[static_cast<std::size_t>(agent)], view,
                        params);
  Rat lo = rat_max(Rat(0), report.optimal.value.lo - report.actual.value.hi);
  Rat hi = rat_max(lo, report.optimal.value.hi - report.actual.value.lo);
  report.gap = ValueInterval(lo, rat_min(Rat(1), hi));
  return report;
}

}  // namespace refl
