#include "mfdl/autodiff.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace mfdl::autodiff {

namespace {

bool is_unary(Op op) {
    switch (op) {
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div:
            return false;
        default:
            return true;
    }
}

double ipow(double x, int k) {
    if (k < 0) return 1.0 / ipow(x, -k);
    double r = 1.0;
    while (k) {
        if (k & 1) r *= x;
        x *= x;
        k >>= 1;
    }
    return r;
}

// Value and partial derivatives of one elementary op at parent values (a, b).
// d1/d2 are first partials wrt a/b; daa/dab/dbb the second partials.
struct OpDerivs {
    double v = 0, d1 = 0, d2 = 0, daa = 0, dab = 0, dbb = 0;
};

OpDerivs eval_op(const Node& n, double a, double b) {
    OpDerivs o;
    switch (n.op) {
        case Op::input:
            throw std::logic_error("eval_op on input node");
        case Op::add:
            o.v = a + b;
            o.d1 = 1;
            o.d2 = 1;
            break;
        case Op::sub:
            o.v = a - b;
            o.d1 = 1;
            o.d2 = -1;
            break;
        case Op::mul:
            o.v = a * b;
            o.d1 = b;
            o.d2 = a;
            o.dab = 1;
            break;
        case Op::div:
            if (b == 0.0) throw std::domain_error("autodiff: division by zero");
            o.v = a / b;
            o.d1 = 1.0 / b;
            o.d2 = -a / (b * b);
            o.dab = -1.0 / (b * b);
            o.dbb = 2.0 * a / (b * b * b);
            break;
        case Op::neg:
            o.v = -a;
            o.d1 = -1;
            break;
        case Op::scale:
            o.v = n.constant * a;
            o.d1 = n.constant;
            break;
        case Op::shift:
            o.v = a + n.constant;
            o.d1 = 1;
            break;
        case Op::sin_:
            o.v = std::sin(a);
            o.d1 = std::cos(a);
            o.daa = -o.v;
            break;
        case Op::cos_:
            o.v = std::cos(a);
            o.d1 = -std::sin(a);
            o.daa = -o.v;
            break;
        case Op::exp_:
            o.v = std::exp(a);
            o.d1 = o.v;
            o.daa = o.v;
            break;
        case Op::log_:
            if (a <= 0.0) throw std::domain_error("autodiff: log of non-positive value");
            o.v = std::log(a);
            o.d1 = 1.0 / a;
            o.daa = -1.0 / (a * a);
            break;
        case Op::erf_:
            o.v = std::erf(a);
            o.d1 = 1.1283791670955125738961589031215 * std::exp(-a * a); // 2/sqrt(pi)
            o.daa = -2.0 * a * o.d1;
            break;
        case Op::relu:
            o.v = a > 0.0 ? a : 0.0;
            o.d1 = a > 0.0 ? 1.0 : 0.0;
            break;
        case Op::hinge:
            o.v = a > n.constant ? a - n.constant : 0.0;
            o.d1 = a > n.constant ? 1.0 : 0.0;
            break;
        case Op::sigmoid: {
            const double s = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a))
                                      : std::exp(a) / (1.0 + std::exp(a));
            o.v = s;
            o.d1 = s * (1.0 - s);
            o.daa = o.d1 * (1.0 - 2.0 * s);
            break;
        }
        case Op::tanh_: {
            const double t = std::tanh(a);
            o.v = t;
            o.d1 = 1.0 - t * t;
            o.daa = -2.0 * t * o.d1;
            break;
        }
        case Op::powi: {
            const int k = static_cast<int>(n.constant);
            if (k < 0 && a == 0.0) throw std::domain_error("autodiff: negative power of zero");
            o.v = ipow(a, k);
            o.d1 = k == 0 ? 0.0 : k * ipow(a, k - 1);
            o.daa = (k == 0 || k == 1) ? 0.0 : static_cast<double>(k) * (k - 1) * ipow(a, k - 2);
            break;
        }
    }
    return o;
}

void check_inputs(const Graph& g, std::span<const double> x) {
    if (static_cast<int>(x.size()) != g.input_count)
        throw std::invalid_argument("autodiff: input size does not match graph arity");
    for (double xi : x)
        if (!std::isfinite(xi)) throw std::invalid_argument("autodiff: non-finite input");
}

void forward_values(const Graph& g, std::span<const double> x, Vec& vals) {
    vals.resize(g.nodes.size());
    for (int i = 0; i < g.input_count; ++i) vals[i] = x[i];
    for (int i = g.input_count; i < g.size(); ++i) {
        const Node& n = g.nodes[i];
        const double a = vals[n.a];
        const double b = n.b >= 0 ? vals[n.b] : 0.0;
        vals[i] = eval_op(n, a, b).v;
    }
}

} // namespace

int Graph::push(Op op, int a, int b, double constant) {
    nodes.push_back({op, a, b, constant});
    return static_cast<int>(nodes.size()) - 1;
}

void Graph::validate() const {
    if (input_count < 0 || input_count > size())
        throw std::invalid_argument("graph: bad input count");
    for (int i = 0; i < size(); ++i) {
        const Node& n = nodes[i];
        if (i < input_count) {
            if (n.op != Op::input)
                throw std::invalid_argument("graph: non-input node in input slot");
            continue;
        }
        if (n.op == Op::input) throw std::invalid_argument("graph: input node after inputs");
        if (n.a < 0 || n.a >= i) throw std::invalid_argument("graph: parent out of order");
        if (is_unary(n.op)) {
            if (n.b >= 0) throw std::invalid_argument("graph: unary op with two parents");
        } else {
            if (n.b < 0 || n.b >= i) throw std::invalid_argument("graph: parent out of order");
        }
        if (!std::isfinite(n.constant)) throw std::invalid_argument("graph: non-finite constant");
    }
    if (outputs.empty()) throw std::invalid_argument("graph: no outputs");
    for (int o : outputs)
        if (o < 0 || o >= size()) throw std::invalid_argument("graph: output index out of range");
}

double evaluate(const Graph& g, std::span<const double> x, SweepBuffers& buf) {
    check_inputs(g, x);
    forward_values(g, x, buf.values);
    buf.values_valid = true;
    buf.tangents_valid = buf.adjoints_valid = buf.hvp_valid = false;
    return buf.values[g.output_index()];
}

double evaluate(const Graph& g, std::span<const double> x) {
    SweepBuffers buf;
    return evaluate(g, x, buf);
}

Vec evaluate_all(const Graph& g, std::span<const double> x) {
    check_inputs(g, x);
    Vec vals;
    forward_values(g, x, vals);
    Vec out(g.outputs.size());
    for (std::size_t k = 0; k < g.outputs.size(); ++k) out[k] = vals[g.outputs[k]];
    return out;
}

JvpResult forward_jvp(const Graph& g, std::span<const double> x, std::span<const double> v) {
    check_inputs(g, x);
    if (v.size() != x.size()) throw std::invalid_argument("forward_jvp: tangent size mismatch");
    Vec vals(g.nodes.size()), tans(g.nodes.size());
    for (int i = 0; i < g.input_count; ++i) {
        vals[i] = x[i];
        tans[i] = v[i];
    }
    for (int i = g.input_count; i < g.size(); ++i) {
        const Node& n = g.nodes[i];
        const double a = vals[n.a];
        const double b = n.b >= 0 ? vals[n.b] : 0.0;
        const OpDerivs o = eval_op(n, a, b);
        vals[i] = o.v;
        tans[i] = o.d1 * tans[n.a] + (n.b >= 0 ? o.d2 * tans[n.b] : 0.0);
    }
    const int out = g.output_index();
    return {vals[out], tans[out]};
}

GradResult reverse_grad(const Graph& g, std::span<const double> x) {
    if (g.outputs.size() != 1)
        throw std::invalid_argument("reverse_grad: graph must have a single output");
    Vec u{1.0};
    VjpResult r = reverse_vjp(g, x, u);
    return {r.outputs[0], std::move(r.grad)};
}

GradResult reverse_grad(const Graph& g, std::span<const double> x, SweepBuffers& buf) {
    if (g.outputs.size() != 1)
        throw std::invalid_argument("reverse_grad: graph must have a single output");
    forward_values(g, x, buf.values);
    buf.values_valid = true;

    buf.adjoints.assign(g.nodes.size(), 0.0);
    buf.adjoints[g.output_index()] = 1.0;
    for (int i = g.size() - 1; i >= g.input_count; --i) {
        const double yi = buf.adjoints[i];
        if (yi == 0.0) continue;
        const Node& n = g.nodes[i];
        const OpDerivs o = eval_op(n, buf.values[n.a], n.b >= 0 ? buf.values[n.b] : 0.0);
        buf.adjoints[n.a] += yi * o.d1;
        if (n.b >= 0) buf.adjoints[n.b] += yi * o.d2;
    }
    buf.adjoints_valid = true;
    buf.tangents_valid = buf.hvp_valid = false;

    GradResult r;
    r.value = buf.values[g.output_index()];
    r.grad.assign(buf.adjoints.begin(), buf.adjoints.begin() + g.input_count);
    return r;
}

VjpResult reverse_vjp(const Graph& g, std::span<const double> x, std::span<const double> u) {
    check_inputs(g, x);
    if (u.size() != g.outputs.size())
        throw std::invalid_argument("reverse_vjp: seed size does not match output count");
    for (double ui : u)
        if (!std::isfinite(ui)) throw std::invalid_argument("reverse_vjp: non-finite seed");

    Vec vals;
    forward_values(g, x, vals);

    Vec adj(g.nodes.size(), 0.0);
    for (std::size_t k = 0; k < g.outputs.size(); ++k) adj[g.outputs[k]] += u[k];
    for (int i = g.size() - 1; i >= g.input_count; --i) {
        const double yi = adj[i];
        if (yi == 0.0) continue;
        const Node& n = g.nodes[i];
        const double a = vals[n.a];
        const double b = n.b >= 0 ? vals[n.b] : 0.0;
        const OpDerivs o = eval_op(n, a, b);
        adj[n.a] += yi * o.d1;
        if (n.b >= 0) adj[n.b] += yi * o.d2;
    }

    VjpResult r;
    r.outputs.resize(g.outputs.size());
    for (std::size_t k = 0; k < g.outputs.size(); ++k) r.outputs[k] = vals[g.outputs[k]];
    r.grad.assign(adj.begin(), adj.begin() + g.input_count);
    return r;
}

double forward_bilinear_hess(const Graph& g, std::span<const double> x,
                             std::span<const double> u, std::span<const double> v) {
    check_inputs(g, x);
    if (u.size() != x.size() || v.size() != x.size())
        throw std::invalid_argument("forward_bilinear_hess: direction size mismatch");
    if (g.outputs.size() != 1)
        throw std::invalid_argument("forward_bilinear_hess: graph must have a single output");

    const std::size_t n = g.nodes.size();
    Vec vals(n), du(n), dv(n), duv(n);
    for (int i = 0; i < g.input_count; ++i) {
        vals[i] = x[i];
        du[i] = u[i];
        dv[i] = v[i];
        duv[i] = 0.0;
    }
    for (int i = g.input_count; i < g.size(); ++i) {
        const Node& nd = g.nodes[i];
        const double a = vals[nd.a];
        const double b = nd.b >= 0 ? vals[nd.b] : 0.0;
        const OpDerivs o = eval_op(nd, a, b);
        vals[i] = o.v;
        if (nd.b < 0) {
            du[i] = o.d1 * du[nd.a];
            dv[i] = o.d1 * dv[nd.a];
            duv[i] = o.d1 * duv[nd.a] + o.daa * du[nd.a] * dv[nd.a];
        } else {
            du[i] = o.d1 * du[nd.a] + o.d2 * du[nd.b];
            dv[i] = o.d1 * dv[nd.a] + o.d2 * dv[nd.b];
            duv[i] = o.d1 * duv[nd.a] + o.d2 * duv[nd.b] + o.daa * du[nd.a] * dv[nd.a] +
                     o.dab * (du[nd.a] * dv[nd.b] + du[nd.b] * dv[nd.a]) +
                     o.dbb * du[nd.b] * dv[nd.b];
        }
    }
    return duv[g.output_index()];
}

HvpResult reverse_hvp(const Graph& g, std::span<const double> x, std::span<const double> v) {
    SweepBuffers buf;
    return reverse_hvp(g, x, v, buf);
}

HvpResult reverse_hvp(const Graph& g, std::span<const double> x, std::span<const double> v,
                      SweepBuffers& buf) {
    check_inputs(g, x);
    if (v.size() != x.size()) throw std::invalid_argument("reverse_hvp: direction size mismatch");
    if (g.outputs.size() != 1)
        throw std::invalid_argument("reverse_hvp: graph must have a single output");

    const std::size_t n = g.nodes.size();
    Vec& vals = buf.values;
    Vec& tans = buf.tangents;
    vals.resize(n);
    tans.resize(n);
    for (int i = 0; i < g.input_count; ++i) {
        vals[i] = x[i];
        tans[i] = v[i];
    }
    for (int i = g.input_count; i < g.size(); ++i) {
        const Node& nd = g.nodes[i];
        const double a = vals[nd.a];
        const double b = nd.b >= 0 ? vals[nd.b] : 0.0;
        const OpDerivs o = eval_op(nd, a, b);
        vals[i] = o.v;
        tans[i] = o.d1 * tans[nd.a] + (nd.b >= 0 ? o.d2 * tans[nd.b] : 0.0);
    }

    // Reverse sweep over the (value, tangent) augmented computation.
    // y_j are the usual adjoints; z_j = d(D_v f)/dx_j picks up corrections
    // from the second derivatives of each elementary op (z_N = 0 seed).
    Vec& y = buf.adjoints;
    Vec& z = buf.hvp_adjoints;
    y.assign(n, 0.0);
    z.assign(n, 0.0);
    y[g.output_index()] = 1.0;
    for (int i = g.size() - 1; i >= g.input_count; --i) {
        const double yi = y[i];
        const double zi = z[i];
        if (yi == 0.0 && zi == 0.0) continue;
        const Node& nd = g.nodes[i];
        const double a = vals[nd.a];
        const double b = nd.b >= 0 ? vals[nd.b] : 0.0;
        const OpDerivs o = eval_op(nd, a, b);
        if (nd.b < 0) {
            y[nd.a] += yi * o.d1;
            z[nd.a] += zi * o.d1 + yi * o.daa * tans[nd.a];
        } else {
            y[nd.a] += yi * o.d1;
            y[nd.b] += yi * o.d2;
            z[nd.a] += zi * o.d1 + yi * (o.daa * tans[nd.a] + o.dab * tans[nd.b]);
            z[nd.b] += zi * o.d2 + yi * (o.dab * tans[nd.a] + o.dbb * tans[nd.b]);
        }
    }
    buf.values_valid = buf.tangents_valid = buf.adjoints_valid = buf.hvp_valid = true;

    HvpResult r;
    r.value = vals[g.output_index()];
    r.hvp.assign(z.begin(), z.begin() + g.input_count);
    return r;
}

// ---------------------------------------------------------------------------
// prefix-expression parser for test fixtures

namespace {

struct Parser {
    const std::string& s;
    std::size_t pos = 0;
    GraphBuilder& b;
    int n_inputs;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    std::string token() {
        skip_ws();
        if (pos >= s.size()) throw std::invalid_argument("expression: unexpected end");
        if (s[pos] == '(' || s[pos] == ')') return std::string(1, s[pos++]);
        std::size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
               s[pos] != '(' && s[pos] != ')')
            ++pos;
        return s.substr(start, pos - start);
    }

    double number() {
        const std::string t = token();
        std::size_t used = 0;
        double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("expression: bad number '" + t + "'");
        return v;
    }

    int variable(const std::string& t) {
        int idx = std::stoi(t.substr(1)) - 1;
        if (idx < 0 || idx >= n_inputs)
            throw std::invalid_argument("expression: variable out of range '" + t + "'");
        return idx;
    }

    int expr() {
        skip_ws();
        if (pos < s.size() && s[pos] != '(') {
            const std::string t = token();
            if (t.size() >= 2 && t[0] == 'x') return variable(t);
            throw std::invalid_argument("expression: expected variable or '(', got '" + t + "'");
        }
        if (token() != "(") throw std::invalid_argument("expression: expected '('");
        const std::string op = token();
        int result = -1;
        if (op == "add" || op == "sub" || op == "mul" || op == "div") {
            int a = expr();
            int c = expr();
            result = op == "add" ? b.add(a, c)
                   : op == "sub" ? b.sub(a, c)
                   : op == "mul" ? b.mul(a, c)
                                 : b.div(a, c);
        } else if (op == "scale" || op == "shift" || op == "hinge" || op == "powi") {
            double c = number();
            int a = expr();
            result = op == "scale" ? b.scale(c, a)
                   : op == "shift" ? b.shift(c, a)
                   : op == "hinge" ? b.hinge(c, a)
                                   : b.powi(static_cast<int>(c), a);
        } else if (op == "neg") {
            result = b.neg(expr());
        } else if (op == "sin") {
            result = b.sin(expr());
        } else if (op == "cos") {
            result = b.cos(expr());
        } else if (op == "exp") {
            result = b.exp(expr());
        } else if (op == "log") {
            result = b.log(expr());
        } else if (op == "erf") {
            result = b.erf(expr());
        } else if (op == "relu") {
            result = b.relu(expr());
        } else if (op == "sigmoid") {
            result = b.sigmoid(expr());
        } else if (op == "tanh") {
            result = b.tanh(expr());
        } else {
            throw std::invalid_argument("expression: unknown op '" + op + "'");
        }
        if (token() != ")") throw std::invalid_argument("expression: expected ')'");
        return result;
    }
};

} // namespace

Graph parse_expression(const std::string& text, int n_inputs) {
    GraphBuilder b(n_inputs);
    Parser p{text, 0, b, n_inputs};
    int out = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) throw std::invalid_argument("expression: trailing characters");
    if (out < n_inputs) {
        // bare variable; wrap so the output is a computed node
        out = b.scale(1.0, out);
    }
    return b.finish(out);
}

Graph worked_example_graph() {
    GraphBuilder b(3);
    const int x4 = b.add(0, 1);
    const int x5 = b.scale(2.0, 1);
    const int x6 = b.mul(1, 2);
    const int x7 = b.exp(x5);
    const int x8 = b.cos(x6);
    const int x9 = b.mul(x7, x8);
    const int x10 = b.div(x9, x4);
    return b.finish(x10);
}

} // namespace mfdl::autodiff
