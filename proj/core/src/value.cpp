#include <unordered_map>

#include "refl/errors.hpp"
#include "refl/rl.hpp"

namespace refl {
namespace {

// Shared state of one value computation. Normalized values stay in [0, 1];
// a depth-0 node contributes the trivial bound [0, 1], which the discount
// coefficients shrink to exactly Gamma_{t+m}/Gamma_t at the root.
struct ValueCtx {
  const Environment* env;
  const Policy* policy;  // null: expectimax over actions
  const Discount* disc;
  bool time_invariant;
  std::unordered_map<std::string, ValueInterval> memo;

  std::string key(const History& h, int t, int depth) const {
    std::string k = env->state_key(h);
    k += '\x1f';
    if (policy) k += policy->state_key(h);
    k += '\x1f';
    k += std::to_string(depth);
    if (!time_invariant) {
      k += '@';
      k += std::to_string(t);
    }
    return k;
  }
};

ValueInterval eval_history(ValueCtx& ctx, const History& h, int t, int depth);

ValueInterval eval_action(ValueCtx& ctx, const History& h, Action a, int t,
                          int depth) {
  const Rat gamma_t = ctx.disc->gamma(t);
  const Rat Gamma_t = ctx.disc->normalizer(t);
  if (Gamma_t == 0) return ValueInterval(Rat(0), Rat(0));
  const Rat reward_coef = gamma_t / Gamma_t;
  const Rat tail_coef = ctx.disc->normalizer(t + 1) / Gamma_t;

  const PerceptSpace& space = ctx.env->percepts();
  Rat lo(0), hi(0);
  for (int e = 0; e < space.size(); ++e) {
    ProbabilityInterval pe = ctx.env->conditional(h, a, e);
    if (pe.hi == 0) continue;
    ValueInterval tail = (depth <= 1 || tail_coef == 0)
                             ? ValueInterval(Rat(0), Rat(1))
                             : eval_history(ctx, h.extended(a, e), t + 1, depth - 1);
    Rat inner_lo = reward_coef * space.at(e).reward + tail_coef * tail.lo;
    Rat inner_hi = reward_coef * space.at(e).reward + tail_coef * tail.hi;
    lo += pe.lo * inner_lo;
    hi += pe.hi * inner_hi;
  }
  return ValueInterval(lo, rat_min(Rat(1), hi));
}

ValueInterval eval_history(ValueCtx& ctx, const History& h, int t, int depth) {
  if (depth <= 0) return ValueInterval(Rat(0), Rat(1));
  std::string key = ctx.key(h, t, depth);
  if (auto it = ctx.memo.find(key); it != ctx.memo.end()) return it->second;

  ValueInterval out(Rat(0), Rat(0));
  if (ctx.policy) {
    Rat pa = ctx.policy->prob_alpha(h);
    Rat lo(0), hi(0);
    if (pa > 0) {
      ValueInterval qa = eval_action(ctx, h, Action::kAlpha, t, depth);
      lo += pa * qa.lo;
      hi += pa * qa.hi;
    }
    if (pa < 1) {
      ValueInterval qb = eval_action(ctx, h, Action::kBeta, t, depth);
      lo += (Rat(1) - pa) * qb.lo;
      hi += (Rat(1) - pa) * qb.hi;
    }
    out = ValueInterval(lo, rat_min(Rat(1), hi));
  } else {
    ValueInterval qa = eval_action(ctx, h, Action::kAlpha, t, depth);
    ValueInterval qb = eval_action(ctx, h, Action::kBeta, t, depth);
    out = ValueInterval(rat_max(qa.lo, qb.lo), rat_max(qa.hi, qb.hi));
  }
  ctx.memo.emplace(std::move(key), out);
  return out;
}

// Depth m: smallest with Gamma_{t+m}/Gamma_t <= precision/2, so truncation
// uses at most half the width budget (the rest absorbs environment
// intervals).
int select_depth(const Discount& disc, int t, const ValueParams& params,
                 bool* capped) {
  if (params.fixed_depth) return *params.fixed_depth;
  if (params.precision <= 0) throw Error("value precision must be positive");
  Rat base = disc.normalizer(t);
  if (base == 0) return 0;
  Rat target = params.precision / 2 * base;
  for (int m = 0; m <= params.max_depth; ++m) {
    if (disc.normalizer(t + m) <= target) return m;
  }
  *capped = true;
  return params.max_depth;
}

ValueReport run(const Environment& env, const Policy* policy, const History& h,
                std::optional<Action> first_action, const ValueParams& params) {
  if (!params.discount) throw Error("ValueParams.discount is required");
  const int t = h.time_step();
  ValueReport report;
  if (params.discount->normalizer(t) == 0) {
    report.value = ValueInterval(Rat(0), Rat(0));
    report.truncation_width = 0;
    report.env_width = 0;
    return report;
  }
  bool capped = false;
  const int depth = select_depth(*params.discount, t, params, &capped);
  ValueCtx ctx{&env, policy, params.discount,
               params.discount->geometric(), {}};
  ValueInterval v = [&] {
    if (depth == 0) return ValueInterval(Rat(0), Rat(1));
    if (first_action) return eval_action(ctx, h, *first_action, t, depth);
    return eval_history(ctx, h, t, depth);
  }();
  report.value = v;
  report.depth = depth;
  report.truncation_width =
      params.discount->normalizer(t + depth) / params.discount->normalizer(t);
  report.env_width = rat_max(Rat(0), v.width() - report.truncation_width);
  report.precision_capped =
      capped || (!params.fixed_depth && v.width() > params.precision);
  return report;
}

}  // namespace

ValueReport value(const Environment& env, const Policy& policy, const History& h,
                  const ValueParams& params) {
  return run(env, &policy, h, std::nullopt, params);
}

ValueReport optimal_value(const Environment& env, const History& h,
                          const ValueParams& params) {
  return run(env, nullptr, h, std::nullopt, params);
}

ValueReport action_value(const Environment& env, Action a, const History& h,
                         const ValueParams& params) {
  return run(env, nullptr, h, a, params);
}

Action optimal_action(const Environment& env, const History& h,
                      const ValueParams& params, const TieBreak& tie) {
  if (!params.discount) throw Error("ValueParams.discount is required");
  bool capped = false;
  const int t = h.time_step();
  const int target_depth = select_depth(*params.discount, t, params, &capped);

  // Iterative deepening: cheap shallow sweeps often separate the actions
  // long before the precision depth.
  int depth = 1;
  for (;;) {
    depth = std::min(depth, target_depth);
    ValueParams at_depth = params;
    at_depth.fixed_depth = depth;
    ValueInterval qa = action_value(env, Action::kAlpha, h, at_depth).value;
    ValueInterval qb = action_value(env, Action::kBeta, h, at_depth).value;
    if (qa.lo > qb.hi) return Action::kAlpha;
    if (qb.lo > qa.hi) return Action::kBeta;
    if (depth >= target_depth) break;
    depth *= 2;
  }

  // Unseparated at the requested precision: apply the tie rule.
  if (tie.kind == TieBreak::Kind::kAlpha) return Action::kAlpha;
  if (!tie.po || !tie.reg || !tie.codec || !tie.bits || tie.value_machine < 1)
    throw Error("oracle-mediated tie rule is missing its context");
  Query q{tie.value_machine, tie.codec->encode(h), Rat(1, 2)};
  switch (answer(*tie.po, query_index(*tie.reg, q), *tie.bits)) {
    case OracleAnswer::kOne: return Action::kAlpha;
    case OracleAnswer::kZero: return Action::kBeta;
    case OracleAnswer::kHalt: return Action::kAlpha;  // documented fallback
  }
  return Action::kAlpha;
}

}  // namespace refl
