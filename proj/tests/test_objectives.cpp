#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "mfdl/objectives.hpp"

using namespace mfdl;
using namespace mfdl::objectives;

TEST_CASE("csv loader: header, features, target") {
    std::stringstream ss("a,b,target\n1.0,2.0,3.0\n4.0,5.0,6.0\n");
    const Dataset ds = load_dataset_csv(ss);
    CHECK(ds.m == 2);
    CHECK(ds.d == 2);
    CHECK(ds.feature(1, 0) == 4.0);
    CHECK(ds.y == Vec{3.0, 6.0});

    std::stringstream bad("h\n");
    CHECK_THROWS(load_dataset_csv(bad));
}

TEST_CASE("least_squares: exact interpolation and first-order condition") {
    Dataset ds;
    ds.m = 2;
    ds.d = 1;
    ds.x = {1.0, 2.0};
    ds.y = {1.0, 2.0};
    const auto h = least_squares(ds);
    REQUIRE(h.known_minimizer.has_value());
    CHECK((*h.known_minimizer)[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((*h.known_minimizer)[1] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(*h.known_minimum == doctest::Approx(0.0).epsilon(1e-12));

    const Vec g = h.grad(*h.known_minimizer);
    for (double gi : g) CHECK(std::abs(gi) < 1e-10);

    SUBCASE("zero targets give zero minimizer") {
        ds.y = {0.0, 0.0};
        const auto hz = least_squares(ds);
        CHECK(nrm2(*hz.known_minimizer) < 1e-12);
    }
    SUBCASE("rank-deficient design throws") {
        Dataset dup;
        dup.m = 2;
        dup.d = 1;
        dup.x = {1.0, 1.0}; // feature column constant = bias column
        dup.y = {1.0, 2.0};
        CHECK_THROWS_AS(least_squares(dup), std::runtime_error);
    }
}

TEST_CASE("logistic_nll: balanced value at zero, convexity, finite differences") {
    SplitRng rng(17);
    Dataset ds;
    ds.m = 12;
    ds.d = 2;
    for (int i = 0; i < ds.m; ++i) {
        ds.x.push_back(rng.next_gaussian());
        ds.x.push_back(rng.next_gaussian());
        ds.y.push_back(i % 2 == 0 ? 1.0 : 0.0);
    }
    const auto h = logistic_nll(ds);

    CHECK(h.value(Vec(3, 0.0)) == doctest::Approx(ds.m * std::log(2.0)).epsilon(1e-12));

    // Hessian product is PSD: z^T H z >= 0 on random probes
    for (int t = 0; t < 100; ++t) {
        const Vec theta = rng.gaussian_vector(3);
        const Vec z = rng.gaussian_vector(3);
        CHECK(dot(z, h.hvp(theta, z)) >= -1e-12);
    }

    const Vec theta = rng.gaussian_vector(3);
    const Vec fd = testing::fd_gradient(h.value, theta);
    const Vec g = h.grad(theta);
    for (int i = 0; i < 3; ++i)
        CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6));

    Dataset bad = ds;
    bad.y[0] = 0.5;
    CHECK_THROWS_AS(logistic_nll(bad), std::invalid_argument);
}

TEST_CASE("sg_family: grid, average, component consistency") {
    CHECK_THROWS_AS(sg_family(4), std::invalid_argument);
    CHECK_THROWS_AS(sg_family(1), std::invalid_argument);

    const auto fam = sg_family(5);
    CHECK(fam.z == Vec{-1.0, -0.5, 0.0, 0.5, 1.0});
    CHECK((*fam.average.known_minimizer)[0] == 0.0);
    // F_5(x) = x^2 + 0.5
    CHECK(fam.average.value(Vec{0.0}) == doctest::Approx(0.5));
    CHECK(fam.average.value(Vec{2.0}) == doctest::Approx(4.5));

    // (1/N) sum grad f_i = grad F_N exactly
    SplitRng rng(3);
    for (int t = 0; t < 20; ++t) {
        const double x = rng.uniform(-2.0, 2.0);
        double avg = 0.0;
        for (int i = 0; i < fam.n; ++i) avg += fam.component_grad(i, x);
        avg /= fam.n;
        CHECK(avg == doctest::Approx(fam.average.grad(Vec{x})[0]).epsilon(1e-15));
    }
}

TEST_CASE("pde_loss: zero net, analytic solution, determinism, fd gradient") {
    SUBCASE("u == 0 and f == 0 gives zero pinn and ritz losses") {
        nn::MlpSpec spec;
        spec.widths = {1, 4, 1};
        const auto field = mlp_field(spec, false);
        auto zero_src = [](const Vec&) { return 0.0; };
        const auto pinn = pde_loss(PdeKind::pinn_poisson, field, zero_src, 16, 0);
        const auto ritz = pde_loss(PdeKind::deep_ritz, field, zero_src, 16, 0);
        const Vec theta(spec.param_count(), 0.0);
        CHECK(pinn.value(theta) == doctest::Approx(0.0));
        CHECK(ritz.value(theta) == doctest::Approx(0.0));
    }

    SUBCASE("hard-wired sin(pi x) field solves the poisson fixture exactly") {
        // u(x) = theta_1 sin(pi x); at theta_1 = 1, -u'' = pi^2 sin(pi x)
        const double pi = 3.14159265358979323846;
        FieldGraphs field;
        field.dim = 1;
        field.n_params = 1;
        field.at = [pi](const Vec& x) {
            autodiff::GraphBuilder b(1);
            const double s = std::sin(pi * x[0]);
            const int u = b.scale(s, 0);
            const int du = b.scale(pi * std::cos(pi * x[0]), 0);
            const int ddu = b.scale(-pi * pi * s, 0);
            return b.finish(std::vector<int>{u, du, ddu});
        };
        auto src = [pi](const Vec& x) { return pi * pi * std::sin(pi * x[0]); };
        const auto pinn = pde_loss(PdeKind::pinn_poisson, field, src, 64, 1);
        CHECK(pinn.value(Vec{1.0}) == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(pinn.value(Vec{0.9}) > 1e-3); // off the solution the residual shows
    }

    SUBCASE("deterministic given seed; relu rejected") {
        nn::MlpSpec spec;
        spec.widths = {2, 5, 1};
        const auto field = mlp_field(spec, true);
        auto src = [](const Vec& x) { return x[0] + x[1]; };
        const auto l1 = pde_loss(PdeKind::pinn_poisson, field, src, 8, 42);
        const auto l2 = pde_loss(PdeKind::pinn_poisson, field, src, 8, 42);
        const auto theta = nn::mlp_init(spec, 5);
        CHECK(l1.value(theta) == l2.value(theta));

        nn::MlpSpec relu_spec;
        relu_spec.widths = {2, 5, 1};
        relu_spec.hidden_activation = nn::ActivationKind::relu();
        CHECK_THROWS_AS(mlp_field(relu_spec, true), std::invalid_argument);
    }

    SUBCASE("gradients match finite differences") {
        nn::MlpSpec spec;
        spec.widths = {1, 4, 1};
        const auto field = mlp_field(spec, true);
        auto src = [](const Vec& x) { return std::sin(3.0 * x[0]); };
        const auto theta = nn::mlp_init(spec, 9);
        for (PdeKind kind : {PdeKind::pinn_poisson, PdeKind::deep_ritz}) {
            const auto h = pde_loss(kind, field, src, 12, 3);
            const Vec g = h.grad(theta);
            const Vec fd = testing::fd_gradient(h.value, theta);
            double rel = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                rel = std::max(rel, std::abs(g[i] - fd[i]));
            CHECK(rel / (1.0 + nrm_inf(g)) < 1e-4);
        }
    }
}

TEST_CASE("rosenbrock sanity") {
    const auto h = rosenbrock();
    CHECK(h.value(*h.known_minimizer) == 0.0);
    CHECK(nrm2(h.grad(*h.known_minimizer)) == 0.0);
    const Vec x{-1.2, 1.0};
    const Vec fd = testing::fd_gradient(h.value, x);
    const Vec g = h.grad(x);
    CHECK(g[0] == doctest::Approx(fd[0]).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(fd[1]).epsilon(1e-6));
}

#ifdef MFDL_HAVE_EIGEN
#include <Eigen/Eigenvalues>

TEST_CASE("logistic Hessian PSD via an independent dense eigensolver oracle") {
    SplitRng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        SplitRng tr = rng.split(trial);
        Dataset ds;
        ds.m = 5 + static_cast<int>(tr.next_below(46)); // up to 50
        ds.d = 1 + static_cast<int>(tr.next_below(5));
        for (int i = 0; i < ds.m; ++i) {
            for (int j = 0; j < ds.d; ++j) ds.x.push_back(tr.next_gaussian());
            ds.y.push_back(tr.next_below(2) == 0 ? 0.0 : 1.0);
        }
        const auto h = logistic_nll(ds);
        const int n = ds.d + 1;
        const Vec theta = tr.gaussian_vector(n);

        // assemble the dense Hessian from products and hand it to Eigen
        Eigen::MatrixXd hess(n, n);
        for (int j = 0; j < n; ++j) {
            Vec e(n, 0.0);
            e[j] = 1.0;
            const Vec col = h.hvp(theta, e);
            for (int i = 0; i < n; ++i) hess(i, j) = col[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}
#endif
