#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mfdl/autodiff.hpp"

using namespace mfdl;
using namespace mfdl::autodiff;

namespace {
const double kE2 = std::exp(2.0);
const double kPi = 3.14159265358979323846;
}

TEST_CASE("worked example: value, gradient, directional derivative") {
    const Graph g = worked_example_graph();
    const Vec x{0.0, 1.0, kPi};

    CHECK(evaluate(g, x) == doctest::Approx(-kE2).epsilon(1e-14));

    const auto gr = reverse_grad(g, x);
    CHECK(gr.value == doctest::Approx(-kE2).epsilon(1e-14));
    CHECK(gr.grad[0] == doctest::Approx(kE2).epsilon(1e-13));
    CHECK(gr.grad[1] == doctest::Approx(-kE2).epsilon(1e-13));
    CHECK(std::abs(gr.grad[2]) < 1e-12);

    const Vec v{2.0, 1.0, 0.0};
    const auto jvp = forward_jvp(g, x, v);
    CHECK(jvp.directional == doctest::Approx(kE2).epsilon(1e-13));
}

TEST_CASE("evaluate: identity and single product") {
    GraphBuilder b1(1);
    const Graph ident = b1.finish(b1.scale(1.0, 0));
    CHECK(evaluate(ident, Vec{5.0}) == 5.0);

    GraphBuilder b2(2);
    const Graph prod = b2.finish(b2.mul(0, 1));
    CHECK(evaluate(prod, Vec{3.0, 4.0}) == 12.0);
    const auto gr = reverse_grad(prod, Vec{3.0, 4.0});
    CHECK(gr.grad == Vec{4.0, 3.0});
}

TEST_CASE("evaluate: domain errors") {
    GraphBuilder b(2);
    const Graph g = b.finish(b.div(0, 1));
    CHECK_THROWS_AS(evaluate(g, Vec{1.0, 0.0}), std::domain_error);

    GraphBuilder b2(1);
    const Graph lg = b2.finish(b2.log(0));
    CHECK_THROWS_AS(evaluate(lg, Vec{-1.0}), std::domain_error);
    CHECK_THROWS_AS(evaluate(lg, Vec{0.0}), std::domain_error);

    CHECK_THROWS_AS(evaluate(lg, Vec{std::nan("")}), std::invalid_argument);
}

TEST_CASE("forward_jvp: zero tangent and hand derivative") {
    const Graph g = worked_example_graph();
    const Vec x{0.0, 1.0, kPi};
    CHECK(forward_jvp(g, x, Vec{0.0, 0.0, 0.0}).directional == 0.0);

    GraphBuilder b(1);
    const Graph sq = b.finish(b.powi(2, 0));
    CHECK(forward_jvp(sq, Vec{3.0}, Vec{1.0}).directional == doctest::Approx(6.0));
}

TEST_CASE("constant graph has zero gradient") {
    GraphBuilder b(1);
    const Graph g = b.finish(b.constant(7.5));
    CHECK(evaluate(g, Vec{123.0}) == 7.5);
    const auto gr = reverse_grad(g, Vec{123.0});
    CHECK(gr.grad[0] == 0.0);
}

TEST_CASE("reverse_vjp: unit seeds give Jacobian rows; linear in u") {
    // f = (x1 + x2, x1 x2)
    GraphBuilder b(2);
    const int s = b.add(0, 1);
    const int p = b.mul(0, 1);
    const Graph g = b.finish(std::vector<int>{s, p});

    const Vec x{1.0, 2.0};
    const auto row0 = reverse_vjp(g, x, Vec{1.0, 0.0});
    CHECK(row0.grad == Vec{1.0, 1.0});
    const auto row1 = reverse_vjp(g, x, Vec{0.0, 1.0});
    CHECK(row1.grad == Vec{2.0, 1.0});

    const auto both = reverse_vjp(g, x, Vec{1.0, 1.0});
    CHECK(both.grad[0] == doctest::Approx(3.0));
    CHECK(both.grad[1] == doctest::Approx(2.0));
    CHECK(both.outputs == Vec{3.0, 2.0});

    const auto zero = reverse_vjp(g, x, Vec{0.0, 0.0});
    CHECK(zero.grad == Vec{0.0, 0.0});

    // linearity against a random combination
    SplitRng rng(11);
    const double a = rng.uniform(-2.0, 2.0);
    const double c = rng.uniform(-2.0, 2.0);
    const auto comb = reverse_vjp(g, x, Vec{a, c});
    for (int i = 0; i < 2; ++i)
        CHECK(comb.grad[i] ==
              doctest::Approx(a * row0.grad[i] + c * row1.grad[i]).epsilon(1e-12));
}

TEST_CASE("forward_bilinear_hess: constant Hessian and zero direction") {
    GraphBuilder b(1);
    const Graph sq = b.finish(b.powi(2, 0));
    CHECK(forward_bilinear_hess(sq, Vec{3.0}, Vec{1.0}, Vec{1.0}) == doctest::Approx(2.0));
    CHECK(forward_bilinear_hess(sq, Vec{3.0}, Vec{0.0}, Vec{1.0}) == 0.0);
}

TEST_CASE("forward_bilinear_hess matches finite differences on the worked example") {
    const Graph g = worked_example_graph();
    const Vec x{0.0, 1.0, kPi};
    const Vec e3{0.0, 0.0, 1.0};
    const double h = 1e-5;
    Vec xp = x, xm = x;
    xp[2] += h;
    xm[2] -= h;
    const double fd =
        (reverse_grad(g, xp).grad[2] - reverse_grad(g, xm).grad[2]) / (2.0 * h);
    const double exact = forward_bilinear_hess(g, x, e3, e3);
    CHECK(exact == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("reverse_hvp: identity Hessian and hand Hessian") {
    // f = 1/2 |x|^2 in 3 variables
    GraphBuilder b(3);
    int acc = b.scale(0.5, b.powi(2, 0));
    acc = b.add(acc, b.scale(0.5, b.powi(2, 1)));
    acc = b.add(acc, b.scale(0.5, b.powi(2, 2)));
    const Graph g = b.finish(acc);
    SplitRng rng(5);
    const Vec x = rng.gaussian_vector(3);
    const Vec v = rng.gaussian_vector(3);
    const auto r = reverse_hvp(g, x, v);
    for (int i = 0; i < 3; ++i) CHECK(r.hvp[i] == doctest::Approx(v[i]).epsilon(1e-14));

    // f = x1^2 x2 at (1,1): H = [[2x2, 2x1],[2x1, 0]] -> Hv with v=(1,0) is (2,2)
    GraphBuilder b2(2);
    const Graph g2 = b2.finish(b2.mul(b2.powi(2, 0), 1));
    const auto r2 = reverse_hvp(g2, Vec{1.0, 1.0}, Vec{1.0, 0.0});
    CHECK(r2.hvp[0] == doctest::Approx(2.0));
    CHECK(r2.hvp[1] == doctest::Approx(2.0));
}

TEST_CASE("invariants on random smooth graphs") {
    SplitRng rng(2024);
    int graphs = 0;
    double worst_grad = 0.0, worst_pair = 0.0, worst_hvp = 0.0, worst_bilinear = 0.0;

    for (int trial = 0; trial < 200; ++trial) {
        SplitRng gr = rng.split(trial);
        const int n = 2 + static_cast<int>(gr.next_below(9)); // up to 10 inputs
        const int extra = 4 + static_cast<int>(gr.next_below(17));
        const autodiff::Graph g = testing::random_smooth_graph(gr, n, extra);
        Vec x(n);
        for (auto& xi : x) xi = gr.uniform(-1.5, 1.5);

        const auto grad = reverse_grad(g, x);

        // gradient vs central differences
        const Vec fd = testing::fd_gradient([&](const Vec& p) { return evaluate(g, p); }, x);
        double err = 0.0;
        for (int i = 0; i < n; ++i) err = std::max(err, std::abs(grad.grad[i] - fd[i]));
        worst_grad = std::max(worst_grad, err / (1.0 + nrm_inf(grad.grad)));

        // forward_jvp equals <grad, v>
        Vec v(n), u(n);
        for (auto& vi : v) vi = gr.uniform(-1.0, 1.0);
        for (auto& ui : u) ui = gr.uniform(-1.0, 1.0);
        const auto jvp = forward_jvp(g, x, v);
        worst_pair = std::max(worst_pair, std::abs(jvp.directional - dot(grad.grad, v)));

        // reverse_hvp vs gradient differencing
        const auto hv = reverse_hvp(g, x, v);
        const double h = 1e-5;
        Vec xp = x, xm = x;
        axpy(h, v, xp);
        axpy(-h, v, xm);
        const auto gp = reverse_grad(g, xp);
        const auto gm = reverse_grad(g, xm);
        double hvp_err = 0.0, hvp_scale = 1.0;
        for (int i = 0; i < n; ++i) {
            const double fd_i = (gp.grad[i] - gm.grad[i]) / (2.0 * h);
            hvp_err = std::max(hvp_err, std::abs(hv.hvp[i] - fd_i));
            hvp_scale = std::max(hvp_scale, std::abs(fd_i));
        }
        worst_hvp = std::max(worst_hvp, hvp_err / hvp_scale);

        // u^T H v from the forward sweep equals <u, Hv> from the reverse sweep
        const double bil = forward_bilinear_hess(g, x, u, v);
        worst_bilinear =
            std::max(worst_bilinear, std::abs(bil - dot(u, hv.hvp)) / (1.0 + std::abs(bil)));

        // symmetry of the bilinear form
        CHECK(forward_bilinear_hess(g, x, v, u) == doctest::Approx(bil).epsilon(1e-9));

        // jvp linear in v
        const double a = gr.uniform(-2.0, 2.0);
        Vec av = scaled(v, a);
        CHECK(forward_jvp(g, x, av).directional ==
              doctest::Approx(a * jvp.directional).epsilon(1e-10));
        ++graphs;
    }
    CHECK(graphs == 200);
    CHECK(worst_grad < 1e-6);
    CHECK(worst_pair < 1e-12);
    CHECK(worst_hvp < 1e-5);
    CHECK(worst_bilinear < 1e-10);
}

TEST_CASE("expression parser reproduces the worked example") {
    const Graph g = parse_expression(
        "(div (mul (exp (scale 2 x2)) (cos (mul x2 x3))) (add x1 x2))", 3);
    const Vec x{0.0, 1.0, kPi};
    CHECK(evaluate(g, x) == doctest::Approx(-kE2).epsilon(1e-14));
    const auto gr = reverse_grad(g, x);
    CHECK(gr.grad[0] == doctest::Approx(kE2));
    CHECK(gr.grad[1] == doctest::Approx(-kE2));
}

TEST_CASE("expression parser rejects malformed input") {
    CHECK_THROWS_AS(parse_expression("(add x1)", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("(bogus x1 x2)", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("(add x1 x5)", 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("(add x1 x2) trailing", 2), std::invalid_argument);
}

TEST_CASE("graph validation rejects broken graphs") {
    Graph g;
    g.input_count = 1;
    g.nodes.resize(1);
    g.nodes.push_back({Op::add, 1, 2, 0.0}); // parent out of order
    g.outputs = {1};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("sweep buffers expose per-node values, adjoints, and hvp adjoints") {
    const Graph g = worked_example_graph();
    const Vec x{0.0, 1.0, kPi};

    SweepBuffers buf;
    const auto gr = reverse_grad(g, x, buf);
    REQUIRE(buf.values_valid);
    REQUIRE(buf.adjoints_valid);
    CHECK(buf.values.size() == g.nodes.size());
    CHECK(buf.adjoints.size() == g.nodes.size());
    CHECK(buf.adjoints[g.output_index()] == 1.0); // y_N = 1 seed
    CHECK(buf.adjoints[0] == doctest::Approx(gr.grad[0]));

    SweepBuffers hb;
    const auto hv = reverse_hvp(g, x, Vec{2.0, 1.0, 0.0}, hb);
    REQUIRE(hb.hvp_valid);
    REQUIRE(hb.tangents_valid);
    CHECK(hb.hvp_adjoints[g.output_index()] == 0.0); // z_N = 0 seed
    CHECK(hb.tangents[g.output_index()] == doctest::Approx(kE2)); // D_v f
    CHECK(hb.hvp_adjoints[0] == doctest::Approx(hv.hvp[0]));
}
