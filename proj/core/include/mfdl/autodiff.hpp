#pragma once

#include <span>
#include <string>
#include <vector>

#include "mfdl/linalg.hpp"

namespace mfdl::autodiff {

// Elementary scalar operations. Each non-input node applies one of these to
// one or two parent values; scale/shift/hinge/powi carry a constant.
enum class Op {
    input,
    add,
    sub,
    mul,
    div,
    neg,
    scale,   // c * x
    shift,   // x + c
    sin_,
    cos_,
    exp_,
    log_,
    erf_,
    relu,    // max(0, x)
    hinge,   // max(0, x - c)
    sigmoid,
    tanh_,
    powi,    // x^k, integer k in constant
};

struct Node {
    Op op = Op::input;
    int a = -1;          // first parent index
    int b = -1;          // second parent index
    double constant = 0; // for scale / shift / hinge / powi
};

// Computational graph of scalar elementary operations. Nodes are
// topologically ordered: inputs occupy [0, input_count) and every parent
// index is smaller than the node's own index. Immutable once built.
struct Graph {
    std::vector<Node> nodes;
    int input_count = 0;
    std::vector<int> outputs; // result node indices; scalar graphs have one

    int output_index() const { return outputs.at(0); }
    int size() const { return static_cast<int>(nodes.size()); }

    // append a node, returning its index
    int push(Op op, int a = -1, int b = -1, double constant = 0.0);

    void validate() const; // topological order, arity, finite constants
};

// Builder shorthands; all return the new node index.
struct GraphBuilder {
    Graph g;

    explicit GraphBuilder(int n_inputs) {
        g.input_count = n_inputs;
        g.nodes.resize(n_inputs);
    }

    int input(int i) const { return i; }
    int add(int a, int b) { return g.push(Op::add, a, b); }
    int sub(int a, int b) { return g.push(Op::sub, a, b); }
    int mul(int a, int b) { return g.push(Op::mul, a, b); }
    int div(int a, int b) { return g.push(Op::div, a, b); }
    int neg(int a) { return g.push(Op::neg, a); }
    int scale(double c, int a) { return g.push(Op::scale, a, -1, c); }
    int shift(double c, int a) { return g.push(Op::shift, a, -1, c); }
    int sin(int a) { return g.push(Op::sin_, a); }
    int cos(int a) { return g.push(Op::cos_, a); }
    int exp(int a) { return g.push(Op::exp_, a); }
    int log(int a) { return g.push(Op::log_, a); }
    int erf(int a) { return g.push(Op::erf_, a); }
    int relu(int a) { return g.push(Op::relu, a); }
    int hinge(double c, int a) { return g.push(Op::hinge, a, -1, c); }
    int sigmoid(int a) { return g.push(Op::sigmoid, a); }
    int tanh(int a) { return g.push(Op::tanh_, a); }
    int powi(int k, int a) { return g.push(Op::powi, a, -1, static_cast<double>(k)); }
    int constant(double c) { return g.push(Op::shift, g.push(Op::scale, 0, -1, 0.0), -1, c); }

    Graph finish(int output) {
        g.outputs = {output};
        g.validate();
        return g;
    }
    Graph finish(std::vector<int> outs) {
        g.outputs = std::move(outs);
        g.validate();
        return g;
    }
};

// Per-call scratch for the sweeps. values/tangents fill front-to-back,
// adjoints/hvp_adjoints back-to-front.
struct SweepBuffers {
    Vec values;
    Vec tangents;     // D_v x_j
    Vec adjoints;     // y_j = df/dx_j
    Vec hvp_adjoints; // z_j = d(D_v f)/dx_j
    bool values_valid = false;
    bool tangents_valid = false;
    bool adjoints_valid = false;
    bool hvp_valid = false;
};

// Forward sweep; returns f(x) for scalar graphs (first output otherwise).
double evaluate(const Graph& g, std::span<const double> x, SweepBuffers& buf);
double evaluate(const Graph& g, std::span<const double> x);

// Forward sweep returning every declared output.
Vec evaluate_all(const Graph& g, std::span<const double> x);

// Forward-mode directional derivative: returns (f(x), D_v f(x)).
struct JvpResult {
    double value;
    double directional;
};
JvpResult forward_jvp(const Graph& g, std::span<const double> x, std::span<const double> v);

// Reverse sweep gradient of a scalar graph: (f(x), grad f(x)).
struct GradResult {
    double value;
    Vec grad;
};
GradResult reverse_grad(const Graph& g, std::span<const double> x);
// variant exposing the per-node values and adjoints
GradResult reverse_grad(const Graph& g, std::span<const double> x, SweepBuffers& buf);

// Vector-Jacobian product u . J for a graph with m outputs; also returns the
// output values.
struct VjpResult {
    Vec outputs;
    Vec grad; // length input_count
};
VjpResult reverse_vjp(const Graph& g, std::span<const double> x, std::span<const double> u);

// Forward second-order sweep: u^T H v via per-node first/second quantities.
double forward_bilinear_hess(const Graph& g, std::span<const double> x,
                             std::span<const double> u, std::span<const double> v);

// Reverse Hessian-vector product: (f(x), H(x) v).
struct HvpResult {
    double value;
    Vec hvp;
};
HvpResult reverse_hvp(const Graph& g, std::span<const double> x, std::span<const double> v);
// variant exposing values, tangents, adjoints y_j and hvp adjoints z_j
HvpResult reverse_hvp(const Graph& g, std::span<const double> x, std::span<const double> v,
                      SweepBuffers& buf);

// Parse the prefix expression test format, e.g.
//   (div (mul (exp (scale 2 x2)) (cos (mul x2 x3))) (add x1 x2))
// Variables are x1..xn (1-based); n_inputs fixes the input arity.
Graph parse_expression(const std::string& text, int n_inputs);

// The worked three-variable example graph f(x) = e^{2 x2} cos(x2 x3) / (x1 + x2).
Graph worked_example_graph();

} // namespace mfdl::autodiff
