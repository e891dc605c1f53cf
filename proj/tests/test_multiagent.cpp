#include <functional>

#include "doctest.h"
#include "refl/errors.hpp"
#include "refl/multiagent.hpp"

using namespace refl;

namespace {

Rat average_reward(const MultiAgentEnv& env, const JointHistory& h, int agent) {
  Rat total(0);
  for (const JointStep& s : h.steps())
    total += env.percepts(agent)
                 .at(s.percepts[static_cast<std::size_t>(agent)])
                 .reward;
  return total / static_cast<int>(h.steps().size());
}

}  // namespace

TEST_CASE("matching pennies: zero-sum complementarity on every step") {
  auto mp = make_matching_pennies();
  PatternPolicy p1("ab");
  PatternPolicy p2("aabb");
  JointHistory h = play(*mp, {&p1, &p2}, 40, 7);
  for (const JointStep& s : h.steps()) {
    Rat r1 = mp->percepts(0).at(s.percepts[0]).reward;
    Rat r2 = mp->percepts(1).at(s.percepts[1]).reward;
    CHECK(r1 + r2 == Rat(1));
  }
}

TEST_CASE("matching pennies: the fixed-policy averages from the setup") {
  auto mp = make_matching_pennies();
  PatternPolicy p1("aab");
  PatternPolicy p2("a");
  JointHistory h = play(*mp, {&p1, &p2}, 300, 1);
  CHECK(average_reward(*mp, h, 0) == Rat(2, 3));
  CHECK(average_reward(*mp, h, 1) == Rat(1, 3));
}

TEST_CASE("play: identical seeds give identical trajectories") {
  auto mp = make_matching_pennies();
  FunctionalPolicy noisy1([](const History&) { return Rat(1, 3); });
  FunctionalPolicy noisy2([](const History&) { return Rat(2, 5); });
  JointHistory a = play(*mp, {&noisy1, &noisy2}, 60, 99);
  JointHistory b = play(*mp, {&noisy1, &noisy2}, 60, 99);
  CHECK(a.key() == b.key());
  JointHistory c = play(*mp, {&noisy1, &noisy2}, 60, 100);
  CHECK(a.key() != c.key());
}

TEST_CASE("projection consistency: replaying a view reproduces its actions") {
  auto pd = make_iterated_pd();
  auto grim = pd_grim_policy(std::nullopt);
  auto limited = pd_grim_policy(2);
  JointHistory h = play(*pd, {grim.get(), limited.get()}, 12, 5);
  for (int agent = 0; agent < 2; ++agent) {
    const Policy& pi = agent == 0 ? *grim : *limited;
    History view = h.view(agent);
    History prefix;
    for (const Cycle& c : view.cycles()) {
      // Both policies are deterministic, so the recorded action must be the
      // policy's choice at the prefix.
      CHECK(pi.prob(prefix, c.action) == Rat(1));
      prefix = prefix.extended(c.action, c.percept);
    }
  }
}

TEST_CASE("prisoner's dilemma payoffs and grim triggers") {
  auto pd = make_iterated_pd();
  // Both cooperate forever.
  auto g1 = pd_grim_policy(std::nullopt);
  auto g2 = pd_grim_policy(std::nullopt);
  JointHistory h = play(*pd, {g1.get(), g2.get()}, 10, 3);
  for (const JointStep& s : h.steps()) {
    CHECK(s.actions[0] == Action::kAlpha);
    CHECK(s.actions[1] == Action::kAlpha);
    CHECK(pd->percepts(0).at(s.percepts[0]).reward == Rat(3, 4));
  }

  // pi_2 betrays at step 3; grim retaliates from step 4 on.
  auto betrayer = pd_grim_policy(2);
  JointHistory h2 = play(*pd, {g1.get(), betrayer.get()}, 6, 3);
  CHECK(h2.steps()[2].actions[1] == Action::kBeta);
  CHECK(h2.steps()[2].actions[0] == Action::kAlpha);
  for (int t = 3; t < 6; ++t) {
    CHECK(h2.steps()[static_cast<std::size_t>(t)].actions[0] == Action::kBeta);
    CHECK(h2.steps()[static_cast<std::size_t>(t)].actions[1] == Action::kBeta);
    CHECK(pd->percepts(0)
              .at(h2.steps()[static_cast<std::size_t>(t)].percepts[0])
              .reward == Rat(1, 4));
  }
}

TEST_CASE("subjective environment: point-mass opponent is marginalized out") {
  auto mp = make_matching_pennies();
  PatternPolicy self("ab");  // irrelevant: conditionals don't depend on pi_i
  PatternPolicy opponent("a");
  SubjectiveEnvironment sigma(mp.get(), {&self, &opponent}, 0);

  History h;
  // Against alpha-forever: percept 1 (win) iff we play alpha.
  CHECK(sigma.prob(h, Action::kAlpha, 1) == Rat(1));
  CHECK(sigma.prob(h, Action::kBeta, 1) == Rat(0));
  History h2 = h.extended(Action::kBeta, 0);
  CHECK(sigma.prob(h2, Action::kAlpha, 1) == Rat(1));

  // Conditionals sum to one over percepts at every reachable history.
  Rat sum = sigma.prob(h2, Action::kAlpha, 0) + sigma.prob(h2, Action::kAlpha, 1);
  CHECK(sum == Rat(1));
}

TEST_CASE("subjective environment matches brute-force marginalization") {
  // Stochastic opponent: belief support grows, marginalization must match a
  // direct sum over joint histories.
  auto mp = make_matching_pennies();
  FunctionalPolicy self([](const History&) { return Rat(1, 2); });
  FunctionalPolicy opp([](const History& h) {
    return h.length() % 2 == 0 ? Rat(1, 3) : Rat(3, 4);
  });
  SubjectiveEnvironment sigma(mp.get(), {&self, &opp}, 0);

  // Direct sum over all joint histories consistent with the view (our own
  // action probabilities cancel in the conditional). The trailing return
  // type forces gmp expression templates to collapse inside the frame.
  std::function<Rat(const History&, Action, int)> brute =
      [&](const History& view, Action a, int e) -> Rat {
    struct Node {
      JointHistory joint;
      Rat weight;
    };
    std::vector<Node> beliefs{{JointHistory{}, Rat(1)}};
    for (const Cycle& c : view.cycles()) {
      std::vector<Node> next;
      for (const Node& node : beliefs) {
        for (Action oa : {Action::kAlpha, Action::kBeta}) {
          Rat pw = opp.prob(node.joint.view(1), oa);
          if (pw == 0) continue;
          for (const auto& [tuple, p] :
               joint_percept_dist(*mp, node.joint, {c.action, oa})) {
            if (tuple[0] != c.percept) continue;
            next.push_back(Node{node.joint.extended({c.action, oa}, tuple),
                                node.weight * pw * p});
          }
        }
      }
      beliefs = std::move(next);
    }
    Rat total(0), hit(0);
    for (const Node& node : beliefs) {
      total += node.weight;
      for (Action oa : {Action::kAlpha, Action::kBeta}) {
        Rat pw = opp.prob(node.joint.view(1), oa);
        if (pw == 0) continue;
        for (const auto& [tuple, p] :
             joint_percept_dist(*mp, node.joint, {a, oa}))
          if (tuple[0] == e) hit += node.weight * pw * p;
      }
    }
    return Rat(hit / total);
  };

  std::function<void(const History&, int)> walk = [&](const History& view,
                                                      int depth) {
    for (Action a : {Action::kAlpha, Action::kBeta})
      for (int e = 0; e < 2; ++e)
        CHECK(sigma.prob(view, a, e) == brute(view, a, e));
    if (depth == 0) return;
    for (Action a : {Action::kAlpha, Action::kBeta})
      for (int e = 0; e < 2; ++e)
        walk(view.extended(a, e), depth - 1);
  };
  walk(History{}, 3);
}

TEST_CASE("best_response_gap: optimal policies have gap zero") {
  auto mp = make_matching_pennies();
  PatternPolicy matcher("a");  // best response to alpha-forever
  PatternPolicy opponent("a");
  GeometricDiscount half(Rat(1, 2));
  ValueParams params{&half, Rat(1, 32)};
  GapReport report = best_response_gap(*mp, {&matcher, &opponent}, 0, History{},
                                       params);
  CHECK(report.gap.lo == Rat(0));
  CHECK(report.gap.hi <= Rat(1, 16));
  CHECK(report.is_eps_best_response(Rat(1, 10)));
}

TEST_CASE("best_response_gap matches brute force on matching pennies") {
  // pi_2 = alpha-forever against the known pi_1 = (a a b)^infty at t = 1:
  // agent 2's subjective environment is deterministic and open-loop, so at
  // matched depth H the expectimax bound must equal the best of the 2^H
  // action sequences, enumerated directly.
  auto mp = make_matching_pennies();
  PatternPolicy p1("aab");
  PatternPolicy p2("a");
  GeometricDiscount half(Rat(1, 2));
  const int H = 9;

  Rat best(0);
  for (int mask = 0; mask < (1 << H); ++mask) {
    Rat sum(0);
    for (int t = 0; t < H; ++t) {
      Action mine = (mask >> t) & 1 ? Action::kBeta : Action::kAlpha;
      Action theirs = (t % 3) < 2 ? Action::kAlpha : Action::kBeta;
      if (mine != theirs) sum += half.gamma(t + 1);  // agent 2 wins mismatches
    }
    best = rat_max(best, sum);
  }
  Rat vstar_brute = best / half.normalizer(1);

  Rat vpi_brute(0);
  for (int t = 0; t < H; ++t) {
    Action theirs = (t % 3) < 2 ? Action::kAlpha : Action::kBeta;
    if (theirs != Action::kAlpha) vpi_brute += half.gamma(t + 1);
  }
  vpi_brute /= half.normalizer(1);

  ValueParams params{&half, Rat(1), H};
  GapReport report = best_response_gap(*mp, {&p1, &p2}, 1, History{}, params);
  CHECK(report.optimal.value.lo == vstar_brute);
  CHECK(report.actual.value.lo == vpi_brute);
  CHECK(report.actual.value.contains(Rat(1, 7)));  // limit value of (0,0,1)^inf
  CHECK(report.gap.contains(Rat(6, 7)));           // limit gap
  CHECK(!report.is_eps_best_response(Rat(1, 2)));
}

TEST_CASE("solve_2x2: matching pennies mixes half-half") {
  Rat q1[2][2] = {{Rat(1), Rat(0)}, {Rat(0), Rat(1)}};
  Rat q2[2][2] = {{Rat(0), Rat(1)}, {Rat(1), Rat(0)}};
  StageEquilibrium eq = solve_2x2(q1, q2);
  CHECK(eq.p_alpha_1 == Rat(1, 2));
  CHECK(eq.p_alpha_2 == Rat(1, 2));
  CHECK(eq.value_1 == Rat(1, 2));
  CHECK(eq.value_2 == Rat(1, 2));
}

TEST_CASE("solve_2x2: prisoner's dilemma defects") {
  Rat q1[2][2] = {{Rat(3, 4), Rat(0)}, {Rat(1), Rat(1, 4)}};
  Rat q2[2][2] = {{Rat(3, 4), Rat(1)}, {Rat(0), Rat(1, 4)}};
  StageEquilibrium eq = solve_2x2(q1, q2);
  CHECK(eq.p_alpha_1 == Rat(0));
  CHECK(eq.p_alpha_2 == Rat(0));
  CHECK(eq.value_1 == Rat(1, 4));
  CHECK(eq.value_2 == Rat(1, 4));
}

TEST_CASE("solve_2x2: action relabeling moves the equilibrium with it") {
  // Coordination game and its label-swapped twin.
  Rat q1[2][2] = {{Rat(1), Rat(0)}, {Rat(0), Rat(1, 2)}};
  Rat q2[2][2] = {{Rat(1), Rat(0)}, {Rat(0), Rat(1, 2)}};
  StageEquilibrium eq = solve_2x2(q1, q2);
  CHECK(eq.p_alpha_1 == Rat(1));
  CHECK(eq.value_1 == Rat(1));

  // Swapping labels moves the payoff-1 profile to (beta, beta); the first
  // pure equilibrium in lexicographic order is now (alpha, alpha) at 1/2.
  Rat p1[2][2] = {{Rat(1, 2), Rat(0)}, {Rat(0), Rat(1)}};
  Rat p2[2][2] = {{Rat(1, 2), Rat(0)}, {Rat(0), Rat(1)}};
  StageEquilibrium eq2 = solve_2x2(p1, p2);
  CHECK(eq2.p_alpha_1 == Rat(1));
  CHECK(eq2.value_1 == Rat(1, 2));
}

TEST_CASE("informed_equilibrium: one-shot games") {
  GeometricDiscount half(Rat(1, 2));

  auto mp = make_matching_pennies();
  EquilibriumResult mp_eq = informed_equilibrium(*mp, half, 1);
  CHECK(mp_eq.root_strategy[0] == Rat(1, 2));
  CHECK(mp_eq.root_strategy[1] == Rat(1, 2));
  CHECK(mp_eq.values[0] == Rat(1, 2));
  CHECK(mp_eq.values[1] == Rat(1, 2));

  auto pd = make_iterated_pd();
  EquilibriumResult pd_eq = informed_equilibrium(*pd, half, 1);
  CHECK(pd_eq.root_strategy[0] == Rat(0));  // defect
  CHECK(pd_eq.root_strategy[1] == Rat(0));
  CHECK(pd_eq.values[0] == Rat(1, 4));
}

TEST_CASE("informed_equilibrium: 3-round PD policies and gap bound") {
  GeometricDiscount half(Rat(1, 2));
  auto pd = make_iterated_pd();
  EquilibriumResult eq = informed_equilibrium(*pd, half, 3);
  // Finite-horizon PD unravels to mutual defection everywhere on-path.
  CHECK(eq.root_strategy[0] == Rat(0));
  CHECK(eq.root_strategy[1] == Rat(0));

  std::vector<const Policy*> profile{eq.policies[0].get(), eq.policies[1].get()};
  ValueParams params{&half, Rat(1, 32)};
  for (int agent = 0; agent < 2; ++agent) {
    GapReport report = best_response_gap(*pd, profile, agent, History{}, params);
    // Tail bound Gamma_4 / Gamma_1 = 1/8 plus solver tolerance.
    CHECK(report.gap.hi <= Rat(1, 8) + Rat(1, 1000000));
  }
}

TEST_CASE("informed_equilibrium: policies replay off the solved tree") {
  GeometricDiscount half(Rat(1, 2));
  auto pd = make_iterated_pd();
  EquilibriumResult eq = informed_equilibrium(*pd, half, 2);
  // After a cooperative first round (off-equilibrium), both still defect.
  History view0;
  view0 = view0.extended(Action::kAlpha, pd_percept(Action::kAlpha, Action::kAlpha));
  CHECK(eq.policies[0]->prob_alpha(view0) == Rat(0));
}
