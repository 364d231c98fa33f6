#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mfdl/errors.hpp"
#include "mfdl/odeflow.hpp"
#include "mfdl/opt_stoch.hpp"

using namespace mfdl;
using namespace mfdl::odeflow;

namespace {

OdeSystem scalar_system(std::function<double(double, double)> f,
                        std::function<double(double, double)> dfdx) {
    OdeSystem sys;
    sys.dim = 1;
    sys.n_params = 0;
    sys.drift = [f](double t, const Vec& x) { return Vec{f(t, x[0])}; };
    sys.vjp_state = [dfdx](double t, const Vec& x, const Vec& p) {
        return Vec{p[0] * dfdx(t, x[0])};
    };
    sys.vjp_time = nullptr;
    sys.vjp_params = [](double, const Vec&, const Vec&) { return Vec{}; };
    sys.jvp_state = [dfdx](double t, const Vec& x, const Vec& v) {
        return Vec{dfdx(t, x[0]) * v[0]};
    };
    return sys;
}

} // namespace

TEST_CASE("ode_solve: constants, exponentials, convergence order") {
    SolverConfig cfg;
    cfg.horizon = 1.0;
    cfg.step = 0.01;

    SUBCASE("zero drift keeps the state") {
        auto sys = scalar_system([](double, double) { return 0.0; },
                                 [](double, double) { return 0.0; });
        const auto traj = ode_solve(sys, Vec{2.5}, cfg);
        CHECK(traj.terminal()[0] == 2.5);
    }

    SUBCASE("dx = x reaches e within 1e-8 with rk4") {
        auto sys = scalar_system([](double, double x) { return x; },
                                 [](double, double) { return 1.0; });
        const auto traj = ode_solve(sys, Vec{1.0}, cfg);
        CHECK(traj.terminal()[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
    }

    SUBCASE("empirical orders: euler 1, midpoint 2, rk4 4") {
        auto sys = scalar_system([](double, double x) { return -x; },
                                 [](double, double) { return -1.0; });
        const double exact = std::exp(-1.0);
        for (auto [method, order] : {std::pair{SolverMethod::euler, 1.0},
                                     std::pair{SolverMethod::midpoint, 2.0},
                                     std::pair{SolverMethod::rk4, 4.0}}) {
            SolverConfig c;
            c.method = method;
            c.horizon = 1.0;
            c.step = 0.02;
            const double e1 = std::abs(ode_solve(sys, Vec{1.0}, c).terminal()[0] - exact);
            c.step = 0.01;
            const double e2 = std::abs(ode_solve(sys, Vec{1.0}, c).terminal()[0] - exact);
            const double slope = std::log2(e1 / e2);
            CHECK(slope == doctest::Approx(order).epsilon(0.2 / order));
        }
    }

    SUBCASE("blow-up raises NumericError with partial state") {
        auto sys = scalar_system([](double, double x) { return x * x * x; },
                                 [](double, double x) { return 3.0 * x * x; });
        SolverConfig c;
        c.horizon = 5.0;
        c.step = 0.1;
        CHECK_THROWS_AS(ode_solve(sys, Vec{3.0}, c), NumericError);
    }
}

TEST_CASE("node_grad: constant drift has gradient exactly T") {
    // f_theta(t, x) = theta (d = 1, one parameter), g(x) = x
    OdeSystem sys;
    sys.dim = 1;
    sys.n_params = 1;
    const double theta = 0.8;
    sys.drift = [theta](double, const Vec&) { return Vec{theta}; };
    sys.vjp_state = [](double, const Vec&, const Vec&) { return Vec{0.0}; };
    sys.vjp_time = [](double, const Vec&, const Vec&) { return 0.0; };
    sys.vjp_params = [](double, const Vec&, const Vec& p) { return Vec{p[0]}; };

    TerminalReward g;
    g.value = [](const Vec& x) { return x[0]; };
    g.grad = [](const Vec&) { return Vec{1.0}; };

    SolverConfig cfg;
    cfg.horizon = 2.0;
    cfg.step = 0.01;
    const auto res = node_grad(sys, Vec{0.5}, g, cfg);
    CHECK(res.objective == doctest::Approx(0.5 + theta * 2.0).epsilon(1e-12));
    CHECK(res.grad_theta[0] == doctest::Approx(2.0).epsilon(1e-12));

    SUBCASE("constant terminal reward has zero gradient") {
        TerminalReward c;
        c.value = [](const Vec&) { return 7.0; };
        c.grad = [](const Vec&) { return Vec{0.0}; };
        const auto rz = node_grad(sys, Vec{0.5}, c, cfg);
        CHECK(rz.grad_theta[0] == 0.0);
    }
}

TEST_CASE("node_grad on MLP drifts matches finite differences") {
    SplitRng rng(2);
    for (int trial = 0; trial < 6; ++trial) {
        SplitRng tr = rng.split(trial);
        nn::MlpSpec spec;
        spec.widths = {1, 8, 1};
        spec.hidden_activation = nn::ActivationKind::tanh();
        const auto theta = nn::mlp_init(spec, trial + 100);
        const auto sys = mlp_ode_system(spec, theta, false);

        TerminalReward g;
        g.value = [](const Vec& x) { return 0.5 * x[0] * x[0]; };
        g.grad = [](const Vec& x) { return Vec{x[0]}; };

        SolverConfig cfg;
        cfg.horizon = 1.0;
        cfg.step = 0.01;
        const Vec x0{tr.uniform(-1.0, 1.0)};
        const auto res = node_grad(sys, x0, g, cfg);

        auto j_of = [&](const nn::ParamVector& th) {
            const auto s2 = mlp_ode_system(spec, th, false);
            const auto traj = ode_solve(s2, x0, cfg);
            return g.value(traj.terminal());
        };
        const Vec fd = testing::fd_gradient(j_of, theta);
        double rel = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i)
            rel = std::max(rel, std::abs(fd[i] - res.grad_theta[i]));
        CHECK(rel / (1.0 + nrm_inf(res.grad_theta)) < 1e-4);
    }
}

TEST_CASE("node_grad: p_tau(0) equals the start-time sensitivity") {
    // time-dependent drift through an MLP taking (t, x)
    nn::MlpSpec spec;
    spec.widths = {2, 6, 1};
    spec.hidden_activation = nn::ActivationKind::tanh();
    const auto theta = nn::mlp_init(spec, 3);
    const auto sys = mlp_ode_system(spec, theta, true);

    TerminalReward g;
    g.value = [](const Vec& x) { return x[0]; };
    g.grad = [](const Vec&) { return Vec{1.0}; };

    SolverConfig cfg;
    cfg.horizon = 1.0;
    cfg.step = 0.005;
    const Vec x0{0.3};
    const auto res = node_grad(sys, x0, g, cfg);

    // shift the start time: the clock begins at s with the duration fixed,
    // i.e. integrate f(t + s, x) over the same horizon. In the augmented
    // formalism t0 is the tau-component of z(0), so dJ/dt0 = p_tau(0).
    auto j_shift = [&](double s) {
        OdeSystem shifted = sys;
        shifted.drift = [&sys, s](double t, const Vec& x) { return sys.drift(t + s, x); };
        return g.value(ode_solve(shifted, x0, cfg).terminal());
    };
    const double h = 1e-5;
    const double fd = (j_shift(h) - j_shift(-h)) / (2.0 * h);
    CHECK(res.p_tau0 == doctest::Approx(fd).epsilon(1e-3));
}

TEST_CASE("logdensity_trace: contraction, rotation, 3-d contraction") {
    SolverConfig cfg;
    cfg.horizon = 1.0;
    cfg.step = 0.01;

    SUBCASE("f = -x in 1d accumulates +t") {
        auto sys = scalar_system([](double, double x) { return -x; },
                                 [](double, double) { return -1.0; });
        const auto res = logdensity_trace(sys, Vec{0.7}, 0.25, cfg);
        CHECK(res.log_density == doctest::Approx(0.25 + 1.0).epsilon(1e-10));
    }

    SUBCASE("divergence-free rotation keeps log density") {
        OdeSystem sys;
        sys.dim = 2;
        sys.drift = [](double, const Vec& x) { return Vec{-x[1], x[0]}; };
        sys.jvp_state = [](double, const Vec&, const Vec& v) { return Vec{-v[1], v[0]}; };
        const auto res = logdensity_trace(sys, Vec{1.0, 0.0}, -0.3, cfg);
        CHECK(res.log_density == doctest::Approx(-0.3).epsilon(1e-10));
        // linear drift f = Ax: change is exactly -tr(A) T = 0
    }

    SUBCASE("f = -x in 3d over unit time adds 3") {
        OdeSystem sys;
        sys.dim = 3;
        sys.drift = [](double, const Vec& x) { return scaled(x, -1.0); };
        sys.jvp_state = [](double, const Vec&, const Vec& v) { return scaled(v, -1.0); };
        const auto res = logdensity_trace(sys, Vec{1.0, -2.0, 0.5}, 0.0, cfg);
        CHECK(res.log_density == doctest::Approx(3.0).epsilon(1e-8));
    }
}

TEST_CASE("density control: zero drift loss, linear contraction closed form") {
    nn::MlpSpec spec;
    spec.widths = {3, 6, 2};
    spec.hidden_activation = nn::ActivationKind::tanh();
    const auto drift = make_mlp_graph_drift(spec, 2, true);

    SolverConfig cfg;
    cfg.horizon = 0.5;
    cfg.step = 0.02;

    SUBCASE("zero parameters give zero drift: loss is the data energy") {
        const Vec theta(spec.param_count(), 0.0);
        std::vector<Vec> samples = {{1.0, 0.0}, {0.0, -2.0}, {0.5, 0.5}};
        const auto res = density_control_loss(drift, theta, samples, cfg);
        CHECK(res.entropy_term == doctest::Approx(0.0));
        double expect = 0.0;
        for (const auto& s : samples) expect += dot(s, s);
        expect /= 2.0 * samples.size();
        CHECK(res.quadratic_term == doctest::Approx(expect).epsilon(1e-12));
        CHECK(res.loss == doctest::Approx(expect).epsilon(1e-12));
        // single sample at the origin with zero drift: loss 0
        const auto res0 = density_control_loss(drift, theta, {{0.0, 0.0}}, cfg);
        CHECK(res0.loss == doctest::Approx(0.0));
    }

    SUBCASE("gradient matches finite differences") {
        const auto theta = nn::mlp_init(spec, 21);
        std::vector<Vec> samples = {{0.8, -0.3}, {-0.5, 0.4}};
        const auto res = density_control_grad(drift, theta, samples, cfg);

        auto loss_of = [&](const nn::ParamVector& th) {
            return density_control_loss(drift, th, samples, cfg).loss;
        };
        const Vec fd = testing::fd_gradient(loss_of, theta);
        double rel = 0.0;
        for (std::size_t i = 0; i < fd.size(); ++i)
            rel = std::max(rel, std::abs(fd[i] - res.grad_theta[i]));
        CHECK(rel / (1.0 + nrm_inf(res.grad_theta)) < 1e-4);
        CHECK(res.result.loss == doctest::Approx(loss_of(theta)).epsilon(1e-12));
    }
}

TEST_CASE("density control: contraction field shrinks samples and grows entropy") {
    // hand-built graph drift f(x) = -x via an identity-activation linear net
    nn::MlpSpec spec;
    spec.widths = {2, 2};
    spec.hidden_activation = nn::ActivationKind::identity();
    const auto drift = make_mlp_graph_drift(spec, 2, false);
    // theta = [-I, 0 bias]
    Vec theta(spec.param_count(), 0.0);
    theta[0] = -1.0; // W(0,0)
    theta[3] = -1.0; // W(1,1)

    SolverConfig cfg;
    cfg.horizon = 1.0;
    cfg.step = 0.01;
    std::vector<Vec> samples = {{2.0, 0.0}, {0.0, -3.0}};
    const auto res = density_control_loss(drift, theta, samples, cfg);
    // x_T = e^{-T} x_0, h_T = -int (1/M) sum div = +2T (div = -2 per particle)
    CHECK(res.entropy_term == doctest::Approx(2.0).epsilon(1e-8));
    const double shrink = std::exp(-2.0);
    double expect = 0.0;
    for (const auto& s : samples) expect += dot(s, s) * shrink;
    expect /= 2.0 * samples.size();
    CHECK(res.quadratic_term == doctest::Approx(expect).epsilon(1e-7));

    // generation integrates the reversed field back out
    const Vec z = density_control_generate(drift, theta, Vec{0.5, -0.25}, cfg);
    CHECK(z[0] == doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-7));
    CHECK(z[1] == doctest::Approx(-0.25 * std::exp(1.0)).epsilon(1e-7));
}

TEST_CASE("density control training smoke: loss falls over 200 adam steps") {
    // 2-d shifted-Gaussian dataset, seed-fixed
    SplitRng dr(99);
    std::vector<Vec> samples;
    for (int i = 0; i < 16; ++i)
        samples.push_back(Vec{1.5 + 0.4 * dr.next_gaussian(), -1.0 + 0.4 * dr.next_gaussian()});

    nn::MlpSpec spec;
    spec.widths = {3, 12, 2};
    spec.hidden_activation = nn::ActivationKind::tanh();
    const auto drift = make_mlp_graph_drift(spec, 2, true);

    SolverConfig cfg;
    cfg.horizon = 0.5;
    cfg.step = 0.05;

    auto theta = nn::mlp_init(spec, 4);
    auto state = optstoch::make_state(optstoch::Method::adam, static_cast<int>(theta.size()));
    state.hyper.alpha = 1e-2;

    Vec losses;
    for (int k = 0; k < 200; ++k) {
        const auto dg = density_control_grad(drift, theta, samples, cfg);
        losses.push_back(dg.result.loss);
        auto upd = optstoch::stochastic_step(state, theta, dg.grad_theta);
        theta = std::move(upd.theta);
        state = std::move(upd.state);
    }
    // monotone decrease checked over 25-step block averages (adam steps are
    // not individually monotone on a nonconvex objective)
    for (int blk = 1; blk < 8; ++blk) {
        double prev = 0.0, cur = 0.0;
        for (int i = 0; i < 25; ++i) {
            prev += losses[(blk - 1) * 25 + i];
            cur += losses[blk * 25 + i];
        }
        CHECK(cur < prev);
    }
    CHECK(losses.back() < 0.25 * losses.front());
}
