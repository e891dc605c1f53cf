#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refl/rl.hpp"

namespace refl {

// ---------------------------------------------------------------------------
// Environment classes and Bayesian state
// ---------------------------------------------------------------------------

struct ClassMember {
  std::string name;
  std::shared_ptr<const Environment> env;
  // Code length in bytes, feeding the 2^-(8 * length) prior.
  int code_length = 1;
  // Registry index when the member is machine-backed (0 otherwise); needed
  // to register the mixture itself as a machine.
  int machine = 0;
};

class EnvironmentClass {
 public:
  explicit EnvironmentClass(std::vector<ClassMember> members);
  int size() const { return static_cast<int>(members_.size()); }
  const ClassMember& at(int i) const { return members_[static_cast<std::size_t>(i)]; }
  const PerceptSpace& percepts() const;

 private:
  std::vector<ClassMember> members_;
};

// w(nu_i) = 2^-(8 * code_length_i); a semidistribution (sums to < 1).
std::vector<Rat> prior_from_code_length(const EnvironmentClass& cls);
std::vector<Rat> uniform_prior(const EnvironmentClass& cls);

// Prior, running posterior, and the observed history. Interval-backed
// likelihoods enter through their midpoints; the accumulated interval width
// is logged so runs exceeding a width budget can be flagged.
class BayesState {
 public:
  BayesState(std::shared_ptr<const EnvironmentClass> cls, std::vector<Rat> prior);

  // Multiplies weights by nu(e | h a), renormalizes. Throws
  // PosteriorUndefined when every member assigns zero likelihood.
  void update(Action a, int percept);

  const EnvironmentClass& cls() const { return *cls_; }
  std::shared_ptr<const EnvironmentClass> cls_ptr() const { return cls_; }
  const std::vector<Rat>& prior() const { return prior_; }
  const std::vector<Rat>& posterior() const { return posterior_; }
  const History& history() const { return history_; }
  // Total midpoint-rule slack accumulated across updates.
  const Rat& likelihood_width() const { return likelihood_width_; }

 private:
  std::shared_ptr<const EnvironmentClass> cls_;
  std::vector<Rat> prior_;
  std::vector<Rat> posterior_;
  History history_;
  Rat likelihood_width_;
};

// Posterior-weighted mixture conditional at the state's current history.
ProbabilityInterval mixture_conditional(const BayesState& state, Action a,
                                        int percept);

// ---------------------------------------------------------------------------
// The mixture as an environment
// ---------------------------------------------------------------------------

// xi(e | h a) = sum_i w(i | h) nu_i(e | h a), defined over every history by
// recomputing the posterior along it (midpoint rule for interval members).
// Posteriors per history prefix are cached.
class MixtureEnvironment final : public Environment {
 public:
  MixtureEnvironment(std::shared_ptr<const EnvironmentClass> cls,
                     std::vector<Rat> prior);

  const PerceptSpace& percepts() const override;
  ProbabilityInterval conditional(const History& h, Action a,
                                  int percept) const override;
  bool exact() const override;
  std::string state_key(const History& h) const override;

  // Normalized posterior along h; [0] weights when every member dies.
  std::vector<Rat> posterior_at(const History& h) const;

 private:
  std::shared_ptr<const EnvironmentClass> cls_;
  std::vector<Rat> prior_;
  bool exact_;
  mutable std::unordered_map<std::string, std::vector<Rat>> posterior_cache_;
};

// Bayes-optimal policy: optimal_action against the mixture environment.
std::shared_ptr<Policy> bayes_optimal_policy(
    std::shared_ptr<const EnvironmentClass> cls, std::vector<Rat> prior,
    ValueParams params, TieBreak tie = {});

// ---------------------------------------------------------------------------
// Dogmatic priors
// ---------------------------------------------------------------------------

// Hell environment: mirrors the base environment while the history follows
// the reference policy, and pins every percept to `zero_percept` (reward 0)
// from the first deviating action onward.
std::shared_ptr<const Environment> make_hell_environment(
    std::shared_ptr<const Environment> base, std::shared_ptr<const Policy> reference,
    int zero_percept);

struct DogmaticMixture {
  std::shared_ptr<const EnvironmentClass> cls;  // {base, hell}
  std::vector<Rat> prior;                       // {1 - hell_weight, hell_weight}
  std::shared_ptr<const Environment> mixture;
};

// Mixture under which deviating from the reference policy looks
// catastrophic; with hell_weight close to 1 the Bayes-optimal agent follows
// the reference policy on-policy.
DogmaticMixture make_dogmatic_mixture(std::shared_ptr<const Environment> base,
                                      std::shared_ptr<const Policy> reference,
                                      const Rat& hell_weight, int zero_percept);

// ---------------------------------------------------------------------------
// Thompson sampling
// ---------------------------------------------------------------------------

// Thompson sampling as an explicit action conditional: at each resample
// time (spaced by the effective horizon H_t(eps_t)) a model is drawn from
// the posterior and followed optimally until the next resample. The
// action distribution marginalizes the latent draw by filtering it against
// the actions recorded since the resample, so play() sampling and belief
// filtering see one consistent policy.
class ThompsonPolicy final : public Policy {
 public:
  ThompsonPolicy(std::shared_ptr<const EnvironmentClass> cls,
                 std::vector<Rat> prior, std::shared_ptr<const Discount> discount,
                 Rat eps_horizon, ValueParams member_params);

  Rat prob_alpha(const History& h) const override;
  std::string state_key(const History& h) const override;

  // Resample times are 1 = tau_1 < tau_2 < ...; the last one <= t.
  int last_resample(int t) const;

 private:
  // Posterior over members along h (prior x percept likelihoods).
  const std::vector<Rat>& posterior_weights(const History& h) const;
  // Distribution of the live draw: posterior at the last resample time,
  // filtered by the actions recorded since.
  const std::vector<Rat>& filtered_weights(const History& h) const;
  Action member_action(int member, const History& h) const;

  std::shared_ptr<const EnvironmentClass> cls_;
  std::vector<Rat> prior_;
  std::shared_ptr<const Discount> discount_;
  Rat eps_horizon_;
  ValueParams member_params_;
  mutable std::unordered_map<std::string, std::vector<Rat>> posterior_cache_;
  mutable std::unordered_map<std::string, std::vector<Rat>> weight_cache_;
  mutable std::unordered_map<std::string, Action> action_cache_;
  mutable std::vector<int> resample_times_;  // grown on demand
};

std::shared_ptr<Policy> thompson_policy(std::shared_ptr<const EnvironmentClass> cls,
                                        std::vector<Rat> prior,
                                        std::shared_ptr<const Discount> discount,
                                        Rat eps_horizon, ValueParams member_params);

// ---------------------------------------------------------------------------
// The mixture as a machine (grain of truth at desk scale)
// ---------------------------------------------------------------------------

// Registers a builtin computing the mixture's conditionals over registry
// machines: it draws a member from the prior, replays the observed percept
// bits through the member's completed conditional (sampling each bit by
// racing a uniform draw against a crossover bisection of oracle queries),
// restarts on mismatch, and emits the next bit once the history is
// reproduced. Its truncated conditionals converge to the posterior mixture.
// Every member must be machine-backed. Returns the new registry index.
int register_mixture_as_machine(MachineRegistry& reg, const EnvironmentClass& cls,
                                const std::vector<Rat>& prior);

}  // namespace refl
