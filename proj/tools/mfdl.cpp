// mfdl: command-line front end for the numerical deep-learning toolkit.
// Every stochastic subcommand takes --seed; all randomness flows from that
// one value through splittable counter-based streams, so reruns with the
// same flags produce byte-identical output files.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfdl/autodiff.hpp"
#include "mfdl/errors.hpp"
#include "mfdl/genmod.hpp"
#include "mfdl/nn.hpp"
#include "mfdl/objectives.hpp"
#include "mfdl/odeflow.hpp"
#include "mfdl/opt_det.hpp"
#include "mfdl/opt_stoch.hpp"
#include "mfdl/rl.hpp"
#include "mfdl/statutil.hpp"
#include "mfdl/trace.hpp"
#include "mfdl/uat.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mfdl;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string config_path;
    json config;
};

void load_config(GlobalOpts& g) {
    if (g.config_path.empty()) return;
    std::ifstream f(g.config_path);
    if (!f) throw CLI::ValidationError("--config", "cannot open '" + g.config_path + "'");
    f >> g.config;
}

// config values fill in options the user did not pass on the command line
template <typename T>
void merge_config(const GlobalOpts& g, const CLI::Option* opt, const char* key, T& value) {
    if (opt->count() == 0 && g.config.contains(key)) value = g.config.at(key).get<T>();
}

std::ofstream open_out(const GlobalOpts& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    const fs::path p = fs::path(g.out_dir) / name;
    std::ofstream f(p, std::ios::binary); // '\n' endings on every platform
    if (!f) throw std::runtime_error("cannot open output file " + p.string());
    return f;
}

std::string g17(double x) { return format_g17(x); }

Vec parse_number_list(const std::string& text) {
    Vec out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

// point-cloud CSV: header row, every column a coordinate
std::pair<int, Vec> load_points_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty data file");
    int dim = 0;
    Vec data;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const Vec row = parse_number_list(line);
        if (dim == 0)
            dim = static_cast<int>(row.size());
        else if (static_cast<int>(row.size()) != dim)
            throw std::runtime_error("ragged data row");
        data.insert(data.end(), row.begin(), row.end());
    }
    if (dim == 0) throw std::runtime_error("no data rows");
    return {dim, data};
}

void write_samples_csv(std::ofstream& f, const Vec& samples, int dim) {
    for (int j = 0; j < dim; ++j) f << (j ? "," : "") << "x" << j + 1;
    f << "\n";
    const int n = static_cast<int>(samples.size()) / dim;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j)
            f << (j ? "," : "") << g17(samples[static_cast<std::size_t>(i) * dim + j]);
        f << "\n";
    }
}

// ---------------------------------------------------------------------------

int run_autodiff_demo() {
    const auto g = autodiff::worked_example_graph();
    const Vec x{0.0, 1.0, 3.14159265358979323846};
    const auto grad = autodiff::reverse_grad(g, x);
    const auto jvp = autodiff::forward_jvp(g, x, Vec{2.0, 1.0, 0.0});
    std::cout << "f = " << g17(grad.value) << "\n";
    std::cout << "grad = (" << g17(grad.grad[0]) << ", " << g17(grad.grad[1]) << ", "
              << g17(grad.grad[2]) << ")\n";
    std::cout << "D_v f (v = (2,1,0)) = " << g17(jvp.directional) << "\n";
    return 0;
}

int run_uat(const GlobalOpts& g, int m, int grid) {
    auto csv = open_out(g, "uat_m" + std::to_string(m) + ".csv");
    csv << "x,f_m,x_squared,error\n";
    double max_err = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double x = static_cast<double>(i) / grid;
        const double fm = uat::square_approx(m, x);
        const double err = std::abs(fm - x * x);
        max_err = std::max(max_err, err);
        csv << g17(x) << ',' << g17(fm) << ',' << g17(x * x) << ',' << g17(err) << "\n";
    }
    std::cout << "square approximation m=" << m << " max error " << g17(max_err)
              << " (exact bound " << g17(std::pow(2.0, -(2 * m + 2))) << ")\n";
    return 0;
}

int run_optimize(const GlobalOpts& g, const std::string& obj_name, const std::string& algo,
                 const std::string& x0_text, optdet::LineSearchConfig cfg) {
    objectives::ObjectiveHandle obj;
    Vec x0;
    if (obj_name == "rosenbrock") {
        obj = objectives::rosenbrock();
        x0 = {-1.2, 1.0};
    } else if (obj_name == "quadratic") {
        obj.dimension = 2;
        obj.value = [](const Vec& x) { return 2.0 * x[0] * x[0] + 0.5 * x[1] * x[1]; };
        obj.grad = [](const Vec& x) { return Vec{4.0 * x[0], x[1]}; };
        obj.hvp = [](const Vec&, const Vec& v) { return Vec{4.0 * v[0], v[1]}; };
        x0 = {1.5, -2.0};
    } else if (obj_name.rfind("least-squares:", 0) == 0) {
        obj = objectives::least_squares(
            objectives::load_dataset_csv_file(obj_name.substr(14)));
        x0.assign(obj.dimension, 0.0);
    } else if (obj_name.rfind("logistic:", 0) == 0) {
        obj = objectives::logistic_nll(objectives::load_dataset_csv_file(obj_name.substr(9)));
        x0.assign(obj.dimension, 0.0);
    } else {
        throw CLI::ValidationError("--obj", "unknown objective '" + obj_name + "'");
    }
    if (!x0_text.empty()) x0 = parse_number_list(x0_text);

    optdet::OptResult res;
    if (algo == "gd")
        res = optdet::gd_backtracking(obj, x0, cfg);
    else if (algo == "newton-cg")
        res = optdet::newton_cg(obj, x0, cfg);
    else if (algo == "bfgs")
        res = optdet::bfgs(obj, x0, cfg);
    else
        throw CLI::ValidationError("--algo", "unknown algorithm '" + algo + "'");

    auto csv = open_out(g, "optimize_trace.csv");
    res.trace.write_csv(csv, true);
    std::cout << algo << " on " << obj_name << ": f = " << g17(res.f)
              << ", |grad| = " << g17(res.grad_norm) << ", iterations = " << res.iterations
              << (res.converged ? " (converged)" : " (max iterations)") << "\n";
    return 0;
}

int run_sgd_bench(const GlobalOpts& g, int n, int steps, const std::string& schedule,
                  double alpha) {
    const auto fam = objectives::sg_family(n);
    SplitRng rng(g.seed);
    double x = 2.0;
    Trace trace;
    for (int k = 1; k <= steps; ++k) {
        const int i = static_cast<int>(rng.next_below(fam.n));
        const double step = schedule == "rm" ? 1.0 / (k + 10.0) : alpha;
        x -= step * fam.component_grad(i, x);
        if (k % 10 == 0 || k == steps)
            trace.add(k, fam.average.value(Vec{x}), std::abs(fam.average.grad(Vec{x})[0]), step,
                      0, 0.0);
    }
    auto csv = open_out(g, "sgd_trace.csv");
    trace.write_csv(csv, true);
    std::cout << "basic SG (" << schedule << ") after " << steps << " steps: x = " << g17(x)
              << ", F_N(x) = " << g17(fam.average.value(Vec{x})) << "\n";
    return 0;
}

int run_rl(const GlobalOpts& g, const std::string& solver, const std::string& mdp_arg,
           double tol, int episodes, double epsilon) {
    rl::Mdp mdp;
    if (mdp_arg == "gridworld4") {
        mdp = rl::gridworld4();
    } else {
        std::ifstream f(mdp_arg);
        if (!f) throw CLI::ValidationError("--mdp", "cannot open '" + mdp_arg + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        mdp = rl::mdp_from_json(ss.str());
    }

    std::vector<int> actions;
    Vec v;
    if (solver == "vi") {
        const auto res = rl::value_iteration(mdp, tol);
        actions = res.policy.greedy_actions();
        v = res.v;
        std::cout << "value iteration: " << res.iterations << " sweeps\n";
    } else if (solver == "pi") {
        const auto res = rl::policy_iteration(mdp);
        actions = res.policy.greedy_actions();
        v = res.v;
        std::cout << "policy iteration: " << res.iterations << " sweeps\n";
    } else if (solver == "q") {
        rl::LearnerConfig cfg;
        cfg.epsilon = epsilon;
        cfg.episodes = episodes;
        cfg.max_steps = 50;
        cfg.seed = g.seed;
        if (mdp_arg == "gridworld4") cfg.terminal_states = {mdp.n_states - 1};
        const auto q = rl::q_learning(mdp, cfg);
        actions.assign(mdp.n_states, 0);
        v.assign(mdp.n_states, 0.0);
        for (int s = 0; s < mdp.n_states; ++s) {
            int best = 0;
            for (int a = 1; a < mdp.n_actions; ++a)
                if (q[static_cast<std::size_t>(s) * mdp.n_actions + a] >
                    q[static_cast<std::size_t>(s) * mdp.n_actions + best])
                    best = a;
            actions[s] = best;
            v[s] = q[static_cast<std::size_t>(s) * mdp.n_actions + best];
        }
        std::cout << "q-learning: " << episodes << " episodes\n";
    } else {
        throw CLI::ValidationError("--solver", "unknown solver '" + solver + "'");
    }

    json pol;
    pol["actions"] = actions;
    auto pf = open_out(g, "policy.json");
    pf << pol.dump(2) << "\n";
    auto vf = open_out(g, "values.csv");
    vf << "state,value\n";
    for (std::size_t s = 0; s < v.size(); ++s) vf << s << ',' << g17(v[s]) << "\n";
    std::cout << "policy written; v[0] = " << g17(v[0]) << "\n";
    return 0;
}

int run_node(const std::string& demo, double theta, double horizon) {
    if (demo == "constant-drift") {
        odeflow::OdeSystem sys;
        sys.dim = 1;
        sys.n_params = 1;
        sys.drift = [theta](double, const Vec&) { return Vec{theta}; };
        sys.vjp_state = [](double, const Vec&, const Vec&) { return Vec{0.0}; };
        sys.vjp_params = [](double, const Vec&, const Vec& p) { return Vec{p[0]}; };
        odeflow::TerminalReward gterm;
        gterm.value = [](const Vec& x) { return x[0]; };
        gterm.grad = [](const Vec&) { return Vec{1.0}; };
        odeflow::SolverConfig cfg;
        cfg.horizon = horizon;
        cfg.step = 0.01;
        const auto res = odeflow::node_grad(sys, Vec{0.5}, gterm, cfg);
        std::cout << "constant drift theta = " << g17(theta) << ": J = " << g17(res.objective)
                  << ", adjoint dJ/dtheta = " << g17(res.grad_theta[0]) << " (exact "
                  << g17(horizon) << ")\n";
        return 0;
    }
    if (demo == "mlp-fd") {
        nn::MlpSpec spec;
        spec.widths = {1, 8, 1};
        spec.hidden_activation = nn::ActivationKind::tanh();
        const auto th = nn::mlp_init(spec, 0);
        const auto sys = odeflow::mlp_ode_system(spec, th, false);
        odeflow::TerminalReward gterm;
        gterm.value = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
        gterm.grad = [](const Vec& x) { return Vec{x[0]}; };
        odeflow::SolverConfig cfg;
        cfg.horizon = 1.0;
        cfg.step = 0.01;
        const auto res = odeflow::node_grad(sys, Vec{0.3}, gterm, cfg);
        // central differences on the objective
        double max_rel = 0.0;
        for (std::size_t i = 0; i < th.size(); ++i) {
            auto j_of = [&](double d) {
                auto tp = th;
                tp[i] += d;
                const auto s2 = odeflow::mlp_ode_system(spec, tp, false);
                return gterm.value(odeflow::ode_solve(s2, Vec{0.3}, cfg).terminal());
            };
            const double fd = (j_of(1e-5) - j_of(-1e-5)) / 2e-5;
            max_rel = std::max(max_rel, std::abs(fd - res.grad_theta[i]) /
                                            (1.0 + std::abs(fd)));
        }
        std::cout << "mlp drift adjoint vs finite differences: max rel err = " << g17(max_rel)
                  << "\n";
        return 0;
    }
    throw CLI::ValidationError("--demo", "unknown demo '" + demo + "'");
}

int run_densctl(const GlobalOpts& g, const std::string& data_path, int steps, double horizon,
                double step_h, int hidden) {
    const auto [dim, data] = load_points_csv(data_path);
    const int rows = static_cast<int>(data.size()) / dim;

    nn::MlpSpec spec;
    spec.widths = {dim + 1, hidden, dim};
    spec.hidden_activation = nn::ActivationKind::tanh();
    const auto drift = odeflow::make_mlp_graph_drift(spec, dim, true);

    std::vector<Vec> samples;
    for (int i = 0; i < rows; ++i)
        samples.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(i) * dim,
                             data.begin() + static_cast<std::ptrdiff_t>(i + 1) * dim);

    odeflow::SolverConfig cfg;
    cfg.horizon = horizon;
    cfg.step = step_h;

    auto theta = nn::mlp_init(spec, g.seed);
    auto method = optstoch::Method::adam;
    optstoch::Hyper hyper;
    hyper.alpha = 1e-2;
    if (g.config.contains("optimizer"))
        std::tie(method, hyper) = optstoch::hyper_from_json(g.config["optimizer"].dump());
    auto state = optstoch::make_state(method, static_cast<int>(theta.size()), hyper);
    Trace trace;
    odeflow::DensityControlGrad last;
    for (int k = 0; k < steps; ++k) {
        last = odeflow::density_control_grad(drift, theta, samples, cfg);
        auto upd = optstoch::stochastic_step(state, theta, last.grad_theta);
        theta = std::move(upd.theta);
        state = std::move(upd.state);
        trace.add(k, last.result.loss, nrm2(last.grad_theta), state.hyper.alpha, 0, 0.0);
    }
    auto tf = open_out(g, "densctl_trace.csv");
    trace.write_csv(tf, true);
    Vec terminal;
    for (const auto& s : last.result.terminal_samples)
        terminal.insert(terminal.end(), s.begin(), s.end());
    auto sf = open_out(g, "densctl_terminal.csv");
    write_samples_csv(sf, terminal, dim);
    std::cout << "density control: final loss = " << g17(last.result.loss) << " (entropy "
              << g17(last.result.entropy_term) << ", quadratic "
              << g17(last.result.quadratic_term) << ")\n";
    return 0;
}

int run_gen(const GlobalOpts& g, const std::string& model, const std::string& data_path,
            int steps, int n_samples, int sample_steps) {
    const auto [dim, data] = load_points_csv(data_path);

    genmod::TrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = 64;
    cfg.hyper.alpha = 1e-2;
    cfg.seed = g.seed;
    if (g.config.contains("optimizer"))
        std::tie(cfg.method, cfg.hyper) = optstoch::hyper_from_json(g.config["optimizer"].dump());

    Vec samples;
    Trace trace;
    if (model == "diffusion") {
        genmod::Schedule sched;
        sched.kind = genmod::Schedule::Kind::ou;
        sched.a = 1.0;
        sched.horizon = 3.0;
        nn::MlpSpec net;
        net.widths = {dim + 1, 32, 32, dim};
        net.hidden_activation = nn::ActivationKind::tanh();
        const auto trained = genmod::train_denoiser(data, dim, sched, net, cfg);
        trace = trained.trace;
        const auto score = genmod::score_from_eps_net(net, trained.theta, sched);
        samples = genmod::diffusion_sample(score, sched, dim, genmod::SampleMode::pf_ode,
                                           n_samples, sample_steps, g.seed + 1);
    } else if (model == "fm") {
        nn::MlpSpec net;
        net.widths = {dim + 1, 32, 32, dim};
        net.hidden_activation = nn::ActivationKind::tanh();
        const auto trained = genmod::train_fm(data, dim, net, cfg);
        trace = trained.trace;
        samples = genmod::fm_sample(net, trained.theta, dim, n_samples, sample_steps, g.seed + 1);
    } else if (model == "vae") {
        genmod::VaeNets nets;
        nets.data_dim = dim;
        nets.latent_dim = std::max(1, dim / 2 + 1);
        nets.encoder.widths = {dim, 32, nets.latent_dim + 1};
        nets.encoder.hidden_activation = nn::ActivationKind::tanh();
        nets.decoder.widths = {nets.latent_dim, 32, dim + 1};
        nets.decoder.hidden_activation = nn::ActivationKind::tanh();
        const auto trained = genmod::train_vae(data, nets, cfg);
        trace = trained.trace;
        // decode z ~ N(0, I) draws
        SplitRng rng(g.seed + 1);
        for (int i = 0; i < n_samples; ++i) {
            SplitRng sr = rng.split(i);
            const Vec z = sr.gaussian_vector(nets.latent_dim);
            const Vec out = nn::mlp_forward(nets.decoder, trained.theta_dec, z);
            const double sigma = genmod::kSigmaFloor +
                                 std::log1p(std::exp(std::min(out[dim], 30.0)));
            for (int j = 0; j < dim; ++j) samples.push_back(out[j] + sigma * sr.next_gaussian());
        }
    } else {
        throw CLI::ValidationError("--model", "unknown model '" + model + "'");
    }

    auto sf = open_out(g, "gen_samples.csv");
    write_samples_csv(sf, samples, dim);
    auto tf = open_out(g, "gen_trace.csv");
    trace.write_csv(tf, true);

    Vec mean(dim, 0.0);
    const int n = static_cast<int>(samples.size()) / dim;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) mean[j] += samples[static_cast<std::size_t>(i) * dim + j];
    std::cout << model << ": " << n << " samples, mean = (";
    for (int j = 0; j < dim; ++j) std::cout << (j ? ", " : "") << g17(mean[j] / n);
    std::cout << ")\n";
    return 0;
}

int run_stat(const GlobalOpts& g, const std::string& demo, int paths, double step_h) {
    if (demo == "ito") {
        auto mad_at = [&](double h) {
            const auto res = statutil::euler_maruyama(
                [](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 0.0,
                1.0, h, g.seed, paths, true);
            double mad = 0.0;
            for (int p = 0; p < paths; ++p) {
                const double target = 0.5 * res.brownian[p] * res.brownian[p] - 0.5;
                mad += std::abs(res.ito_integral[p] - target);
            }
            return mad / paths;
        };
        const double coarse = mad_at(step_h);
        const double fine = mad_at(step_h / 2.0);
        std::cout << "ito check int W dW vs W(T)^2/2 - T/2: mean abs deviation " << g17(coarse)
                  << " at h = " << g17(step_h) << ", " << g17(fine) << " at h/2\n";
        return 0;
    }
    if (demo == "importance") {
        statutil::ImportanceSpec spec;
        spec.sampler = [](SplitRng& rng) { return Vec{rng.next_double()}; };
        spec.density = [](const Vec&) { return 1.0; };
        spec.integrand = [](const Vec& x) { return x[0] <= 0.5 ? 1.0 : 0.0; };
        spec.n_samples = paths;
        spec.seed = g.seed;
        const auto res = statutil::importance_estimate(spec);
        std::cout << "importance estimate of the half-interval integral: "
                  << g17(res.estimate) << " +- " << g17(res.standard_error) << "\n";
        return 0;
    }
    throw CLI::ValidationError("--demo", "unknown demo '" + demo + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mfdl: numerical deep-learning toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "base seed for all randomness");
    app.add_option("--out", g.out_dir, "output directory for CSV/JSON artifacts");
    app.add_option("--config", g.config_path, "JSON config file; flags override its values");

    // autodiff-demo
    app.add_subcommand("autodiff-demo", "worked three-variable example: value and gradients");

    // uat
    auto* uat_cmd = app.add_subcommand("uat", "square-approximation error sweep");
    int uat_m = 3, uat_grid = 1024;
    auto* uat_m_opt = uat_cmd->add_option("--m", uat_m, "telescoping depth");
    auto* uat_grid_opt = uat_cmd->add_option("--grid", uat_grid, "evaluation grid size");

    // optimize
    auto* opt_cmd = app.add_subcommand("optimize", "deterministic optimizers on benchmarks");
    std::string opt_obj = "rosenbrock", opt_algo = "bfgs", opt_x0;
    optdet::LineSearchConfig ls_cfg;
    ls_cfg.c = 1e-4;
    ls_cfg.eps_tol = 1e-6;
    ls_cfg.max_iter = 1000;
    opt_cmd->add_option("--obj", opt_obj,
                        "rosenbrock | quadratic | least-squares:FILE | logistic:FILE");
    opt_cmd->add_option("--algo", opt_algo, "gd | newton-cg | bfgs");
    opt_cmd->add_option("--x0", opt_x0, "comma-separated start point");
    opt_cmd->add_option("--alpha-bar", ls_cfg.alpha_bar, "line-search initial step");
    opt_cmd->add_option("--rho", ls_cfg.rho, "backtracking rate");
    opt_cmd->add_option("--c", ls_cfg.c, "Armijo constant");
    opt_cmd->add_option("--eps-tol", ls_cfg.eps_tol, "gradient-norm stopping tolerance");
    opt_cmd->add_option("--max-iter", ls_cfg.max_iter, "iteration cap");

    // sgd-bench
    auto* sgd_cmd = app.add_subcommand("sgd-bench", "basic stochastic gradient on the grid family");
    int sgd_n = 101, sgd_steps = 5000;
    std::string sgd_schedule = "rm";
    double sgd_alpha = 0.1;
    sgd_cmd->add_option("--n", sgd_n, "family size (odd)");
    sgd_cmd->add_option("--steps", sgd_steps, "iterations");
    sgd_cmd->add_option("--schedule", sgd_schedule, "rm | const");
    sgd_cmd->add_option("--alpha", sgd_alpha, "constant step size");

    // rl
    auto* rl_cmd = app.add_subcommand("rl", "tabular planners and q-learning");
    std::string rl_solver = "vi", rl_mdp = "gridworld4";
    double rl_tol = 1e-10, rl_eps = 0.1;
    int rl_episodes = 1000;
    rl_cmd->add_option("--solver", rl_solver, "vi | pi | q");
    rl_cmd->add_option("--mdp", rl_mdp, "MDP json file or 'gridworld4'");
    rl_cmd->add_option("--tol", rl_tol, "value-iteration tolerance");
    rl_cmd->add_option("--episodes", rl_episodes, "q-learning episodes");
    rl_cmd->add_option("--epsilon", rl_eps, "epsilon-greedy exploration");

    // node
    auto* node_cmd = app.add_subcommand("node", "adjoint gradient demos");
    std::string node_demo = "constant-drift";
    double node_theta = 0.8, node_t = 2.0;
    node_cmd->add_option("--demo", node_demo, "constant-drift | mlp-fd");
    node_cmd->add_option("--theta", node_theta, "constant drift value");
    node_cmd->add_option("--T", node_t, "horizon");

    // densctl
    auto* dc_cmd = app.add_subcommand("densctl", "probability density control training");
    std::string dc_data;
    int dc_steps = 100, dc_hidden = 16;
    double dc_t = 1.0, dc_h = 0.05;
    dc_cmd->add_option("--data", dc_data, "point-cloud CSV (header row)")->required();
    dc_cmd->add_option("--steps", dc_steps, "training steps");
    dc_cmd->add_option("--T", dc_t, "horizon");
    dc_cmd->add_option("--step", dc_h, "solver step");
    dc_cmd->add_option("--hidden", dc_hidden, "drift network width");

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generative model training and sampling");
    std::string gen_model = "fm", gen_data;
    int gen_steps = 500, gen_samples = 1000, gen_sample_steps = 50;
    gen_cmd->add_option("--model", gen_model, "diffusion | fm | vae");
    gen_cmd->add_option("--data", gen_data, "point-cloud CSV (header row)")->required();
    gen_cmd->add_option("--steps", gen_steps, "training steps");
    gen_cmd->add_option("--samples", gen_samples, "samples to draw");
    gen_cmd->add_option("--sample-steps", gen_sample_steps, "integration steps per sample");

    // stat
    auto* stat_cmd = app.add_subcommand("stat", "appendix demos");
    std::string stat_demo = "ito";
    int stat_paths = 2000;
    double stat_h = 0.01;
    stat_cmd->add_option("--demo", stat_demo, "ito | importance");
    stat_cmd->add_option("--paths", stat_paths, "path or sample count");
    stat_cmd->add_option("--step", stat_h, "step size");

    // global flags (--seed/--out/--config) may follow the subcommand
    for (auto* sub : app.get_subcommands(
             [](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        load_config(g);
        merge_config(g, uat_m_opt, "m", uat_m);
        merge_config(g, uat_grid_opt, "grid", uat_grid);
        if (g.config.contains("seed") && app.count("--seed") == 0)
            g.seed = g.config["seed"].get<std::uint64_t>();

        if (app.got_subcommand("autodiff-demo")) return run_autodiff_demo();
        if (app.got_subcommand(uat_cmd)) return run_uat(g, uat_m, uat_grid);
        if (app.got_subcommand(opt_cmd)) return run_optimize(g, opt_obj, opt_algo, opt_x0, ls_cfg);
        if (app.got_subcommand(sgd_cmd))
            return run_sgd_bench(g, sgd_n, sgd_steps, sgd_schedule, sgd_alpha);
        if (app.got_subcommand(rl_cmd))
            return run_rl(g, rl_solver, rl_mdp, rl_tol, rl_episodes, rl_eps);
        if (app.got_subcommand(node_cmd)) return run_node(node_demo, node_theta, node_t);
        if (app.got_subcommand(dc_cmd))
            return run_densctl(g, dc_data, dc_steps, dc_t, dc_h, dc_hidden);
        if (app.got_subcommand(gen_cmd))
            return run_gen(g, gen_model, gen_data, gen_steps, gen_samples, gen_sample_steps);
        if (app.got_subcommand(stat_cmd)) return run_stat(g, stat_demo, stat_paths, stat_h);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 1;
    }
}
