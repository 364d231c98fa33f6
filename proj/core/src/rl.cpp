#include "mfdl/rl.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace mfdl::rl {

using json = nlohmann::json;

void Mdp::validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("mdp: empty state/action space");
    if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("mdp: gamma must be in (0,1)");
    if (p.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
        r.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("mdp: table shapes do not match sizes");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                const double q = prob(s, a, s2);
                if (q < 0.0) throw std::invalid_argument("mdp: negative transition probability");
                sum += q;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("mdp: transition row does not sum to 1");
        }
    if (!all_finite(r)) throw std::invalid_argument("mdp: non-finite reward");
}

void Policy::validate() const {
    if (pi.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("policy: shape mismatch");
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            if (prob(s, a) < 0.0) throw std::invalid_argument("policy: negative probability");
            sum += prob(s, a);
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("policy: row does not sum to 1");
    }
}

Policy Policy::uniform(int s, int a) {
    Policy p;
    p.n_states = s;
    p.n_actions = a;
    p.pi.assign(static_cast<std::size_t>(s) * a, 1.0 / a);
    return p;
}

Policy Policy::deterministic(int s, int a, const std::vector<int>& actions) {
    Policy p;
    p.n_states = s;
    p.n_actions = a;
    p.pi.assign(static_cast<std::size_t>(s) * a, 0.0);
    for (int i = 0; i < s; ++i) p.pi[static_cast<std::size_t>(i) * a + actions.at(i)] = 1.0;
    return p;
}

std::vector<int> Policy::greedy_actions() const {
    std::vector<int> out(n_states, 0);
    for (int s = 0; s < n_states; ++s) {
        int best = 0;
        for (int a = 1; a < n_actions; ++a)
            if (prob(s, a) > prob(s, best)) best = a;
        out[s] = best;
    }
    return out;
}

ValueTable bellman_backup_pi(const Mdp& mdp, const Policy& pi, const ValueTable& v) {
    if (static_cast<int>(v.size()) != mdp.n_states)
        throw std::invalid_argument("bellman_backup_pi: value table size mismatch");
    ValueTable out(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = pi.prob(s, a);
            if (w == 0.0) continue;
            double ev = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) ev += mdp.prob(s, a, s2) * v[s2];
            acc += w * (mdp.reward(s, a) + mdp.gamma * ev);
        }
        out[s] = acc;
    }
    return out;
}

ValueTable bellman_backup_opt(const Mdp& mdp, const ValueTable& v, std::vector<int>* argmax) {
    if (static_cast<int>(v.size()) != mdp.n_states)
        throw std::invalid_argument("bellman_backup_opt: value table size mismatch");
    ValueTable out(mdp.n_states, 0.0);
    if (argmax) argmax->assign(mdp.n_states, 0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            double ev = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) ev += mdp.prob(s, a, s2) * v[s2];
            const double q = mdp.reward(s, a) + mdp.gamma * ev;
            if (q > best) { // strict: ties keep the lowest action index
                best = q;
                best_a = a;
            }
        }
        out[s] = best;
        if (argmax) (*argmax)[s] = best_a;
    }
    return out;
}

ValueTable policy_evaluate_exact(const Mdp& mdp, const Policy& pi) {
    pi.validate();
    const int n = mdp.n_states;
    Mat a(n, n);
    Vec rpi(n, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int act = 0; act < mdp.n_actions; ++act) {
            const double w = pi.prob(s, act);
            if (w == 0.0) continue;
            rpi[s] += w * mdp.reward(s, act);
            for (int s2 = 0; s2 < n; ++s2) a(s, s2) -= mdp.gamma * w * mdp.prob(s, act, s2);
        }
        a(s, s) += 1.0;
    }
    return solve_lu(std::move(a), std::move(rpi));
}

QTable q_from_v(const Mdp& mdp, const ValueTable& v) {
    QTable q(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double ev = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) ev += mdp.prob(s, a, s2) * v[s2];
            q[static_cast<std::size_t>(s) * mdp.n_actions + a] = mdp.reward(s, a) + mdp.gamma * ev;
        }
    return q;
}

Policy greedy_policy(const Mdp& mdp, const ValueTable& v) {
    std::vector<int> argmax;
    bellman_backup_opt(mdp, v, &argmax);
    return Policy::deterministic(mdp.n_states, mdp.n_actions, argmax);
}

PlanResult policy_iteration(const Mdp& mdp) {
    mdp.validate();
    PlanResult res;
    ValueTable v0(mdp.n_states, 0.0);
    res.policy = greedy_policy(mdp, v0);
    for (int k = 0;; ++k) {
        res.v = policy_evaluate_exact(mdp, res.policy);
        Policy next = greedy_policy(mdp, res.v);
        ++res.iterations;
        if (next.pi == res.policy.pi) break;
        res.policy = std::move(next);
        if (k > 1000000) throw std::runtime_error("policy_iteration: failed to terminate");
    }
    return res;
}

PlanResult value_iteration(const Mdp& mdp, double tol, int max_iter) {
    mdp.validate();
    if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");
    PlanResult res;
    res.v.assign(mdp.n_states, 0.0);
    for (int k = 0; k < max_iter; ++k) {
        ValueTable next = bellman_backup_opt(mdp, res.v);
        const double delta = nrm_inf(vdiff(next, res.v));
        res.v = std::move(next);
        res.residuals.push_back(delta);
        ++res.iterations;
        if (delta < tol) break;
    }
    res.policy = greedy_policy(mdp, res.v);
    return res;
}

AlphaSchedule visit_count_alpha() {
    return [](int count) { return 1.0 / (count + 1); };
}

AlphaSchedule constant_alpha(double a) {
    return [a](int) { return a; };
}

ValueTable td_lambda_evaluate(const std::vector<Episode>& episodes, double lambda, double gamma,
                              const AlphaSchedule& alpha, ValueTable v0) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("td_lambda: lambda must be in [0,1]");
    ValueTable v = std::move(v0);
    std::vector<int> visits(v.size(), 0);

    for (const auto& ep : episodes) {
        const int steps = static_cast<int>(ep.rewards.size());
        // offline: all targets computed from the value table frozen at the
        // start of the episode, then applied in order
        Vec targets(steps, 0.0);
        for (int t = 0; t < steps; ++t) {
            const int remaining = steps - t; // L
            // n-step returns G_{t,n} for n = 1..L-1 (bootstrapped), plus the
            // full Monte Carlo tail with weight lambda^{L-1}
            double g_full = 0.0;
            double disc = 1.0;
            for (int j = t; j < steps; ++j) {
                g_full += disc * ep.rewards[j];
                disc *= gamma;
            }
            if (lambda == 1.0) {
                targets[t] = g_full;
                continue;
            }
            double target = 0.0;
            double weight = 1.0 - lambda;
            double gn = 0.0;
            disc = 1.0;
            for (int nstep = 1; nstep <= remaining - 1; ++nstep) {
                gn += disc * ep.rewards[t + nstep - 1];
                disc *= gamma;
                const double bootstrapped = gn + disc * v[ep.states[t + nstep]];
                target += weight * bootstrapped;
                weight *= lambda;
            }
            // tail: n >= remaining all equal the full return
            target += std::pow(lambda, remaining - 1) * g_full;
            targets[t] = target;
        }
        for (int t = 0; t < steps; ++t) {
            const int s = ep.states[t];
            const double a = alpha(visits[s]++);
            v[s] += a * (targets[t] - v[s]);
        }
    }
    return v;
}

Episode sample_episode(const Mdp& mdp, const Policy& pi, int start_state, int max_steps,
                       SplitRng& rng) {
    Episode ep;
    int s = start_state >= 0 ? start_state : static_cast<int>(rng.next_below(mdp.n_states));
    for (int t = 0; t < max_steps; ++t) {
        // sample action from pi(.|s)
        double u = rng.next_double();
        int a = mdp.n_actions - 1;
        double acc = 0.0;
        for (int c = 0; c < mdp.n_actions; ++c) {
            acc += pi.prob(s, c);
            if (u < acc) {
                a = c;
                break;
            }
        }
        ep.states.push_back(s);
        ep.actions.push_back(a);
        ep.rewards.push_back(mdp.reward(s, a));
        // sample next state
        u = rng.next_double();
        int s2 = mdp.n_states - 1;
        acc = 0.0;
        for (int c = 0; c < mdp.n_states; ++c) {
            acc += mdp.prob(s, a, c);
            if (u < acc) {
                s2 = c;
                break;
            }
        }
        s = s2;
    }
    return ep;
}

namespace {

int epsilon_greedy_action(const QTable& q, int s, int n_actions, double epsilon, SplitRng& rng) {
    if (rng.next_double() < epsilon) return static_cast<int>(rng.next_below(n_actions));
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (q[static_cast<std::size_t>(s) * n_actions + a] >
            q[static_cast<std::size_t>(s) * n_actions + best])
            best = a;
    return best;
}

int sample_next_state(const Mdp& mdp, int s, int a, SplitRng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (int c = 0; c < mdp.n_states; ++c) {
        acc += mdp.prob(s, a, c);
        if (u < acc) return c;
    }
    return mdp.n_states - 1;
}

bool is_terminal(const std::vector<int>& terminals, int s) {
    for (int t : terminals)
        if (t == s) return true;
    return false;
}

} // namespace

QTable sarsa(const Mdp& mdp, const LearnerConfig& cfg) {
    mdp.validate();
    if (cfg.epsilon <= 0.0 || cfg.epsilon > 1.0)
        throw std::invalid_argument("sarsa: epsilon must be in (0,1]");
    SplitRng rng(cfg.seed);
    QTable q(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    std::vector<int> visits(q.size(), 0);

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        int s = cfg.start_state >= 0 ? cfg.start_state
                                     : static_cast<int>(rng.next_below(mdp.n_states));
        int a = epsilon_greedy_action(q, s, mdp.n_actions, cfg.epsilon, rng);
        for (int t = 0; t < cfg.max_steps; ++t) {
            const double reward = mdp.reward(s, a);
            const int s2 = sample_next_state(mdp, s, a, rng);
            const int a2 = epsilon_greedy_action(q, s2, mdp.n_actions, cfg.epsilon, rng);
            const std::size_t idx = static_cast<std::size_t>(s) * mdp.n_actions + a;
            const double alpha = cfg.alpha(visits[idx]++);
            const double target =
                reward + mdp.gamma * q[static_cast<std::size_t>(s2) * mdp.n_actions + a2];
            q[idx] += alpha * (target - q[idx]);
            if (is_terminal(cfg.terminal_states, s2)) break;
            s = s2;
            a = a2;
        }
    }
    return q;
}

QTable q_learning(const Mdp& mdp, const LearnerConfig& cfg) {
    mdp.validate();
    if (cfg.epsilon <= 0.0 || cfg.epsilon > 1.0)
        throw std::invalid_argument("q_learning: epsilon must be in (0,1]");
    SplitRng rng(cfg.seed);
    QTable q(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    std::vector<int> visits(q.size(), 0);

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        int s = cfg.start_state >= 0 ? cfg.start_state
                                     : static_cast<int>(rng.next_below(mdp.n_states));
        for (int t = 0; t < cfg.max_steps; ++t) {
            const int a = epsilon_greedy_action(q, s, mdp.n_actions, cfg.epsilon, rng);
            const double reward = mdp.reward(s, a);
            const int s2 = sample_next_state(mdp, s, a, rng);
            double best = q[static_cast<std::size_t>(s2) * mdp.n_actions];
            for (int c = 1; c < mdp.n_actions; ++c)
                best = std::max(best, q[static_cast<std::size_t>(s2) * mdp.n_actions + c]);
            const std::size_t idx = static_cast<std::size_t>(s) * mdp.n_actions + a;
            const double alpha = cfg.alpha(visits[idx]++);
            q[idx] += alpha * (reward + mdp.gamma * best - q[idx]);
            if (is_terminal(cfg.terminal_states, s2)) break;
            s = s2;
        }
    }
    return q;
}

Mdp gridworld4(double gamma) {
    constexpr int side = 4;
    const int n = side * side;
    constexpr int n_actions = 4; // up, down, left, right
    const int goal = n - 1;

    Mdp mdp;
    mdp.n_states = n;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.p.assign(static_cast<std::size_t>(n) * n_actions * n, 0.0);
    mdp.r.assign(static_cast<std::size_t>(n) * n_actions, 0.0);

    auto at = [&](int s, int a, int s2) -> double& {
        return mdp.p[(static_cast<std::size_t>(s) * n_actions + a) * n + s2];
    };
    const int drow[4] = {-1, 1, 0, 0};
    const int dcol[4] = {0, 0, -1, 1};
    for (int s = 0; s < n; ++s) {
        const int row = s / side;
        const int col = s % side;
        for (int a = 0; a < n_actions; ++a) {
            if (s == goal) {
                at(s, a, s) = 1.0; // absorbing, zero reward
                continue;
            }
            int r2 = row + drow[a];
            int c2 = col + dcol[a];
            if (r2 < 0 || r2 >= side || c2 < 0 || c2 >= side) {
                r2 = row;
                c2 = col;
            }
            at(s, a, r2 * side + c2) = 1.0;
            mdp.r[static_cast<std::size_t>(s) * n_actions + a] = -1.0;
        }
    }
    return mdp;
}

std::string mdp_to_json(const Mdp& mdp) {
    json p = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            json inner = json::array();
            for (int s2 = 0; s2 < mdp.n_states; ++s2) inner.push_back(mdp.prob(s, a, s2));
            row.push_back(inner);
        }
        p.push_back(row);
    }
    json r = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.reward(s, a));
        r.push_back(row);
    }
    json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    j["P"] = p;
    j["r"] = r;
    return j.dump();
}

Mdp mdp_from_json(const std::string& text) {
    const json j = json::parse(text);
    Mdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto& p = j.at("P");
    const auto& r = j.at("r");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                mdp.p.push_back(p.at(s).at(a).at(s2).get<double>());
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) mdp.r.push_back(r.at(s).at(a).get<double>());
    mdp.validate();
    return mdp;
}

Mdp random_mdp(int n_states, int n_actions, SplitRng& rng, double gamma) {
    Mdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.p.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    mdp.r.resize(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            Vec row(n_states);
            for (int s2 = 0; s2 < n_states; ++s2) {
                row[s2] = -std::log(1.0 - rng.next_double() + 1e-300);
                sum += row[s2];
            }
            for (int s2 = 0; s2 < n_states; ++s2)
                mdp.p[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2] =
                    row[s2] / sum;
            mdp.r[static_cast<std::size_t>(s) * n_actions + a] = rng.uniform(-1.0, 1.0);
        }
    return mdp;
}

} // namespace mfdl::rl
