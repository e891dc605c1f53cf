#include "refl/bayes.hpp"

#include "refl/errors.hpp"

namespace refl {

EnvironmentClass::EnvironmentClass(std::vector<ClassMember> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw Error("environment class must be nonempty");
  const PerceptSpace& space = members_[0].env->percepts();
  for (const ClassMember& m : members_) {
    if (!m.env) throw Error("null environment in class");
    if (m.env->percepts().size() != space.size())
      throw Error("class members must share one percept space");
    if (m.code_length < 1)
      throw Error("member '" + m.name + "' is missing a code length");
  }
}

const PerceptSpace& EnvironmentClass::percepts() const {
  return members_[0].env->percepts();
}

std::vector<Rat> prior_from_code_length(const EnvironmentClass& cls) {
  std::vector<Rat> w;
  w.reserve(static_cast<std::size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i)
    w.push_back(pow2(-8 * cls.at(i).code_length));
  return w;
}

std::vector<Rat> uniform_prior(const EnvironmentClass& cls) {
  return std::vector<Rat>(static_cast<std::size_t>(cls.size()),
                          Rat(1, cls.size()));
}

namespace {

std::vector<Rat> normalized(std::vector<Rat> w) {
  Rat total(0);
  for (const Rat& x : w) total += x;
  if (total == 0) throw PosteriorUndefined("all weights are zero");
  for (Rat& x : w) x /= total;
  return w;
}

}  // namespace

BayesState::BayesState(std::shared_ptr<const EnvironmentClass> cls,
                       std::vector<Rat> prior)
    : cls_(std::move(cls)), prior_(std::move(prior)), likelihood_width_(0) {
  if (static_cast<int>(prior_.size()) != cls_->size())
    throw Error("prior size does not match the class");
  for (const Rat& w : prior_)
    if (w < 0) throw Error("negative prior weight");
  posterior_ = normalized(prior_);
}

void BayesState::update(Action a, int percept) {
  Rat total(0);
  for (int i = 0; i < cls_->size(); ++i) {
    Rat& w = posterior_[static_cast<std::size_t>(i)];
    if (w == 0) continue;
    ProbabilityInterval like = cls_->at(i).env->conditional(history_, a, percept);
    likelihood_width_ += w * like.width();
    w *= like.midpoint();
    total += w;
  }
  if (total == 0)
    throw PosteriorUndefined("every environment assigns zero likelihood");
  for (Rat& w : posterior_) w /= total;
  history_ = history_.extended(a, percept);
}

ProbabilityInterval mixture_conditional(const BayesState& state, Action a,
                                        int percept) {
  Rat lo(0), hi(0);
  for (int i = 0; i < state.cls().size(); ++i) {
    const Rat& w = state.posterior()[static_cast<std::size_t>(i)];
    if (w == 0) continue;
    ProbabilityInterval iv =
        state.cls().at(i).env->conditional(state.history(), a, percept);
    lo += w * iv.lo;
    hi += w * iv.hi;
  }
  return ProbabilityInterval(lo, rat_min(Rat(1), hi));
}

// ---------------------------------------------------------------------------
// MixtureEnvironment
// ---------------------------------------------------------------------------

MixtureEnvironment::MixtureEnvironment(std::shared_ptr<const EnvironmentClass> cls,
                                       std::vector<Rat> prior)
    : cls_(std::move(cls)), prior_(std::move(prior)) {
  if (static_cast<int>(prior_.size()) != cls_->size())
    throw Error("prior size does not match the class");
  exact_ = true;
  for (int i = 0; i < cls_->size(); ++i)
    if (!cls_->at(i).env->exact()) exact_ = false;
}

const PerceptSpace& MixtureEnvironment::percepts() const {
  return cls_->percepts();
}

bool MixtureEnvironment::exact() const { return exact_; }

std::vector<Rat> MixtureEnvironment::posterior_at(const History& h) const {
  auto it = posterior_cache_.find(h.key());
  if (it != posterior_cache_.end()) return it->second;

  // Rebuild along the prefix chain; each missing prefix costs one update.
  std::vector<Rat> weights;
  if (h.length() == 0) {
    weights = normalized(prior_);
  } else {
    History parent;
    for (int i = 0; i + 1 < h.length(); ++i)
      parent = parent.extended(h.cycles()[static_cast<std::size_t>(i)].action,
                               h.cycles()[static_cast<std::size_t>(i)].percept);
    const Cycle& last = h.cycles().back();
    weights = posterior_at(parent);
    Rat total(0);
    for (int i = 0; i < cls_->size(); ++i) {
      Rat& w = weights[static_cast<std::size_t>(i)];
      if (w == 0) continue;
      w *= cls_->at(i).env->conditional(parent, last.action, last.percept).midpoint();
      total += w;
    }
    if (total == 0) {
      // Dead branch: conditionals below it are never weighted in, but the
      // recursion may still ask. Keep zeros.
    } else {
      for (Rat& w : weights) w /= total;
    }
  }
  return posterior_cache_.emplace(h.key(), std::move(weights)).first->second;
}

ProbabilityInterval MixtureEnvironment::conditional(const History& h, Action a,
                                                    int percept) const {
  std::vector<Rat> weights = posterior_at(h);
  Rat lo(0), hi(0);
  for (int i = 0; i < cls_->size(); ++i) {
    const Rat& w = weights[static_cast<std::size_t>(i)];
    if (w == 0) continue;
    ProbabilityInterval iv = cls_->at(i).env->conditional(h, a, percept);
    lo += w * iv.lo;
    hi += w * iv.hi;
  }
  return ProbabilityInterval(lo, rat_min(Rat(1), hi));
}

std::string MixtureEnvironment::state_key(const History& h) const {
  // The mixture's future is determined by the posterior plus the surviving
  // members' futures; dead members cannot influence anything downstream.
  std::vector<Rat> weights = posterior_at(h);
  std::string key;
  for (int i = 0; i < cls_->size(); ++i) {
    if (weights[static_cast<std::size_t>(i)] == 0) continue;
    key += std::to_string(i);
    key += ':';
    key += cls_->at(i).env->state_key(h);
    key += '\x1e';
    key += rat_str(weights[static_cast<std::size_t>(i)]);
    key += '\x1e';
  }
  return key;
}

std::shared_ptr<Policy> bayes_optimal_policy(
    std::shared_ptr<const EnvironmentClass> cls, std::vector<Rat> prior,
    ValueParams params, TieBreak tie) {
  auto mixture = std::make_shared<MixtureEnvironment>(std::move(cls), std::move(prior));
  struct Holder final : Policy {
    std::shared_ptr<MixtureEnvironment> env;
    OptimalPolicy inner;
    Holder(std::shared_ptr<MixtureEnvironment> e, ValueParams p, TieBreak t)
        : env(std::move(e)), inner(env.get(), std::move(p), std::move(t)) {}
    Rat prob_alpha(const History& h) const override { return inner.prob_alpha(h); }
    std::string state_key(const History& h) const override {
      return inner.state_key(h);
    }
  };
  return std::make_shared<Holder>(std::move(mixture), std::move(params),
                                  std::move(tie));
}

// ---------------------------------------------------------------------------
// Dogmatic priors
// ---------------------------------------------------------------------------

namespace {

class HellEnvironment final : public Environment {
 public:
  HellEnvironment(std::shared_ptr<const Environment> base,
                  std::shared_ptr<const Policy> reference, int zero_percept)
      : base_(std::move(base)), reference_(std::move(reference)),
        zero_(zero_percept) {
    if (base_->percepts().at(zero_).reward != 0)
      throw Error("hell percept must carry reward 0");
  }

  const PerceptSpace& percepts() const override { return base_->percepts(); }

  ProbabilityInterval conditional(const History& h, Action a,
                                  int percept) const override {
    if (!deviated(h) && reference_->prob(h, a) == 1)
      return base_->conditional(h, a, percept);
    Rat p(percept == zero_ ? 1 : 0);
    return ProbabilityInterval(p, p);
  }

  bool exact() const override { return base_->exact(); }

  std::string state_key(const History& h) const override {
    if (deviated(h)) return "hell";
    return "H|" + base_->state_key(h) + "|" + reference_->state_key(h);
  }

 private:
  bool deviated(const History& h) const {
    auto it = deviated_cache_.find(h.key());
    if (it != deviated_cache_.end()) return it->second;
    bool dev = false;
    History prefix;
    for (const Cycle& c : h.cycles()) {
      if (reference_->prob(prefix, c.action) != 1) {
        dev = true;
        break;
      }
      prefix = prefix.extended(c.action, c.percept);
    }
    deviated_cache_.emplace(h.key(), dev);
    return dev;
  }

  std::shared_ptr<const Environment> base_;
  std::shared_ptr<const Policy> reference_;
  int zero_;
  mutable std::unordered_map<std::string, bool> deviated_cache_;
};

}  // namespace

std::shared_ptr<const Environment> make_hell_environment(
    std::shared_ptr<const Environment> base, std::shared_ptr<const Policy> reference,
    int zero_percept) {
  return std::make_shared<HellEnvironment>(std::move(base), std::move(reference),
                                           zero_percept);
}

DogmaticMixture make_dogmatic_mixture(std::shared_ptr<const Environment> base,
                                      std::shared_ptr<const Policy> reference,
                                      const Rat& hell_weight, int zero_percept) {
  if (hell_weight <= 0 || hell_weight >= 1)
    throw Error("hell weight must lie in (0, 1)");
  auto hell = make_hell_environment(base, reference, zero_percept);
  auto cls = std::make_shared<EnvironmentClass>(std::vector<ClassMember>{
      ClassMember{"base", base, 1, 0}, ClassMember{"hell", hell, 1, 0}});
  DogmaticMixture out;
  out.cls = cls;
  out.prior = {Rat(1) - hell_weight, hell_weight};
  out.mixture = std::make_shared<MixtureEnvironment>(cls, out.prior);
  return out;
}

// ---------------------------------------------------------------------------
// Thompson sampling
// ---------------------------------------------------------------------------

ThompsonPolicy::ThompsonPolicy(std::shared_ptr<const EnvironmentClass> cls,
                               std::vector<Rat> prior,
                               std::shared_ptr<const Discount> discount,
                               Rat eps_horizon, ValueParams member_params)
    : cls_(std::move(cls)), prior_(std::move(prior)), discount_(std::move(discount)),
      eps_horizon_(std::move(eps_horizon)), member_params_(std::move(member_params)) {
  if (static_cast<int>(prior_.size()) != cls_->size())
    throw Error("prior size does not match the class");
  if (eps_horizon_ <= 0) throw Error("Thompson eps must be positive");
  resample_times_.push_back(1);
}

int ThompsonPolicy::last_resample(int t) const {
  while (resample_times_.back() <= t) {
    int tau = resample_times_.back();
    resample_times_.push_back(tau + std::max(1, effective_horizon(*discount_, tau,
                                                                  eps_horizon_)));
  }
  int best = 1;
  for (int tau : resample_times_)
    if (tau <= t) best = tau;
  return best;
}

Action ThompsonPolicy::member_action(int member, const History& h) const {
  std::string key = std::to_string(member) + '|' +
                    cls_->at(member).env->state_key(h);
  auto it = action_cache_.find(key);
  if (it != action_cache_.end()) return it->second;
  Action a = optimal_action(*cls_->at(member).env, h, member_params_);
  action_cache_.emplace(std::move(key), a);
  return a;
}

const std::vector<Rat>& ThompsonPolicy::posterior_weights(const History& h) const {
  auto it = posterior_cache_.find(h.key());
  if (it != posterior_cache_.end()) return it->second;
  std::vector<Rat> weights;
  if (h.length() == 0) {
    weights = normalized(prior_);
  } else {
    History parent;
    for (int i = 0; i + 1 < h.length(); ++i)
      parent = parent.extended(h.cycles()[static_cast<std::size_t>(i)].action,
                               h.cycles()[static_cast<std::size_t>(i)].percept);
    const Cycle& last = h.cycles().back();
    weights = posterior_weights(parent);
    Rat total(0);
    for (int i = 0; i < cls_->size(); ++i) {
      Rat& w = weights[static_cast<std::size_t>(i)];
      if (w == 0) continue;
      w *= cls_->at(i).env->conditional(parent, last.action, last.percept).midpoint();
      total += w;
    }
    if (total > 0)
      for (Rat& w : weights) w /= total;
  }
  return posterior_cache_.emplace(h.key(), std::move(weights)).first->second;
}

const std::vector<Rat>& ThompsonPolicy::filtered_weights(const History& h) const {
  auto it = weight_cache_.find(h.key());
  if (it != weight_cache_.end()) return it->second;

  const int t = h.time_step();
  std::vector<Rat> weights;
  if (last_resample(t) == t) {
    // Fresh draw distribution: the posterior itself. Percepts observed
    // after a draw never reweight it, so the filter only applies between
    // resamples.
    weights = posterior_weights(h);
  } else {
    History parent;
    for (int i = 0; i + 1 < h.length(); ++i)
      parent = parent.extended(h.cycles()[static_cast<std::size_t>(i)].action,
                               h.cycles()[static_cast<std::size_t>(i)].percept);
    const Cycle& last = h.cycles().back();
    weights = filtered_weights(parent);
    for (int i = 0; i < cls_->size(); ++i) {
      Rat& w = weights[static_cast<std::size_t>(i)];
      if (w == 0) continue;
      if (member_action(i, parent) != last.action) w = 0;
    }
  }
  return weight_cache_.emplace(h.key(), std::move(weights)).first->second;
}

Rat ThompsonPolicy::prob_alpha(const History& h) const {
  const std::vector<Rat>& weights = filtered_weights(h);
  Rat total(0), alpha(0);
  for (int i = 0; i < cls_->size(); ++i) {
    const Rat& w = weights[static_cast<std::size_t>(i)];
    if (w == 0) continue;
    total += w;
    if (member_action(i, h) == Action::kAlpha) alpha += w;
  }
  if (total == 0)
    throw PosteriorUndefined("Thompson filter has empty support");
  return alpha / total;
}

std::string ThompsonPolicy::state_key(const History& h) const {
  std::string key = std::to_string(h.time_step());
  key += '|';
  for (const Rat& w : filtered_weights(h)) {
    key += rat_str(w);
    key += ',';
  }
  return key;
}

std::shared_ptr<Policy> thompson_policy(std::shared_ptr<const EnvironmentClass> cls,
                                        std::vector<Rat> prior,
                                        std::shared_ptr<const Discount> discount,
                                        Rat eps_horizon, ValueParams member_params) {
  return std::make_shared<ThompsonPolicy>(std::move(cls), std::move(prior),
                                          std::move(discount), std::move(eps_horizon),
                                          std::move(member_params));
}

}  // namespace refl
