#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfdl/linalg.hpp"
#include "mfdl/rng.hpp"

namespace mfdl::rl {

// Finite MDP: transition tensor P (S x A x S), reward table r (S x A),
// discount gamma in (0,1). Every P[s][a][.] sums to 1.
struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    Vec p; // s*A*S + a*S + s'
    Vec r; // s*A + a
    double gamma = 0.9;

    double prob(int s, int a, int s2) const {
        return p[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double reward(int s, int a) const { return r[static_cast<std::size_t>(s) * n_actions + a]; }
    void validate() const;
};

// Row-stochastic policy pi(a|s).
struct Policy {
    int n_states = 0;
    int n_actions = 0;
    Vec pi; // s*A + a

    double prob(int s, int a) const { return pi[static_cast<std::size_t>(s) * n_actions + a]; }
    void validate() const;

    static Policy uniform(int s, int a);
    static Policy deterministic(int s, int a, const std::vector<int>& actions);
    std::vector<int> greedy_actions() const; // argmax per row (lowest index)
};

using ValueTable = Vec;          // length S
using QTable = Vec;              // S x A

struct Episode {
    std::vector<int> states;
    std::vector<int> actions;
    Vec rewards; // rewards[t] received after (states[t], actions[t])
};

// (T^pi v)(s) = sum_a pi(a|s) [ r(s,a) + gamma sum_s' P(s'|s,a) v(s') ]
ValueTable bellman_backup_pi(const Mdp& mdp, const Policy& pi, const ValueTable& v);

// (T* v)(s) = max_a [ r(s,a) + gamma sum_s' P(s'|s,a) v(s') ];
// argmax ties broken by lowest action index when requested.
ValueTable bellman_backup_opt(const Mdp& mdp, const ValueTable& v,
                              std::vector<int>* argmax = nullptr);

// exact policy evaluation: v = (I - gamma P^pi)^{-1} r^pi
ValueTable policy_evaluate_exact(const Mdp& mdp, const Policy& pi);

// q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) v(s')
QTable q_from_v(const Mdp& mdp, const ValueTable& v);

Policy greedy_policy(const Mdp& mdp, const ValueTable& v);

struct PlanResult {
    Policy policy;
    ValueTable v;
    int iterations = 0;
    Vec residuals; // per-sweep sup-norm change (value iteration)
};

PlanResult policy_iteration(const Mdp& mdp);
PlanResult value_iteration(const Mdp& mdp, double tol, int max_iter = 100000);

// Offline forward-view TD(lambda): lambda = 0 is TD(0), lambda = 1 the
// per-visit Monte Carlo return (rewards zero past termination).
using AlphaSchedule = std::function<double(int visit_count)>;
AlphaSchedule visit_count_alpha(); // 1 / (count + 1)
AlphaSchedule constant_alpha(double a);

ValueTable td_lambda_evaluate(const std::vector<Episode>& episodes, double lambda, double gamma,
                              const AlphaSchedule& alpha, ValueTable v0);

// Environment simulation and the tabular model-free learners. Episodes cap
// at max_steps; start states drawn uniformly unless start_state >= 0.
struct LearnerConfig {
    double epsilon = 0.1;
    AlphaSchedule alpha = visit_count_alpha();
    int episodes = 1000;
    int max_steps = 200;
    int start_state = -1;
    std::uint64_t seed = 0;
    std::vector<int> terminal_states; // absorbing; episode ends on entry
};

Episode sample_episode(const Mdp& mdp, const Policy& pi, int start_state, int max_steps,
                       SplitRng& rng);

QTable sarsa(const Mdp& mdp, const LearnerConfig& cfg);
QTable q_learning(const Mdp& mdp, const LearnerConfig& cfg);

// 4x4 gridworld: deterministic moves (up/down/left/right), -1 per step,
// absorbing goal at the last cell with zero reward.
Mdp gridworld4(double gamma = 0.95);

// JSON schema {"n_states":S,"n_actions":A,"gamma":g,"P":[[[...]]],"r":[[...]]}
std::string mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const std::string& text);

Mdp random_mdp(int n_states, int n_actions, SplitRng& rng, double gamma = 0.9);

} // namespace mfdl::rl
