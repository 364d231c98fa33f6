#include "mfdl/nn_graph.hpp"

#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::nn {

namespace {

using autodiff::GraphBuilder;

// In-graph sigma, sigma', sigma'' for the C^2 catalog entries.
struct ActNodes {
    int val, d1, d2;
};

ActNodes emit_activation(GraphBuilder& b, const ActivationKind& act, int z, bool need_second) {
    using K = ActivationKind::Kind;
    switch (act.kind) {
        case K::tanh_: {
            const int t = b.tanh(z);
            const int d1 = b.shift(1.0, b.neg(b.powi(2, t)));       // 1 - t^2
            const int d2 = need_second ? b.scale(-2.0, b.mul(t, d1)) : -1;
            return {t, d1, d2};
        }
        case K::sigmoid: {
            const int s = b.sigmoid(z);
            const int d1 = b.mul(s, b.shift(1.0, b.neg(s)));        // s(1-s)
            const int d2 = need_second ? b.mul(d1, b.shift(1.0, b.scale(-2.0, s))) : -1;
            return {s, d1, d2};
        }
        case K::identity: {
            const int one = b.shift(1.0, b.scale(0.0, z));
            const int zero = b.scale(0.0, z);
            return {b.scale(1.0, z), one, need_second ? zero : -1};
        }
        default:
            break;
    }
    throw CapabilityError("nn_graph: in-graph derivative unrolling supports tanh/sigmoid/identity");
}

struct LayerOffsets {
    std::vector<std::size_t> off; // start of layer l's block in theta
};

LayerOffsets layer_offsets(const MlpSpec& spec) {
    LayerOffsets lo;
    lo.off.resize(spec.widths.size(), 0);
    for (std::size_t l = 1; l < spec.widths.size(); ++l)
        lo.off[l] = lo.off[l - 1] + static_cast<std::size_t>(spec.widths[l]) * (spec.widths[l - 1] + 1);
    return lo;
}

} // namespace

autodiff::Graph mlp_laplacian_graph(const MlpSpec& spec, const Vec& x, bool boundary_factor) {
    spec.validate();
    if (spec.output_dim() != 1)
        throw std::invalid_argument("mlp_laplacian_graph: scalar-output network required");
    if (spec.wrapper != OutputWrapper::none)
        throw std::invalid_argument("mlp_laplacian_graph: output wrapper not supported");
    if (spec.hidden_activation.kind == ActivationKind::Kind::relu)
        throw std::invalid_argument("mlp_laplacian_graph: Laplacian undefined for ReLU activation");
    const int d = spec.input_dim();
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("mlp_laplacian_graph: point dimension mismatch");

    const int n_params = spec.param_count();
    GraphBuilder b(n_params);
    const int zero = b.scale(0.0, 0);

    // running per-unit value / tangent / second-tangent node ids
    const int L = spec.layer_count();
    const LayerOffsets lo = layer_offsets(spec);

    std::vector<int> val;                    // current layer activations
    std::vector<std::vector<int>> tan(d);    // tan[k][unit]
    std::vector<std::vector<int>> sec(d);

    for (int l = 1; l <= L; ++l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        const std::size_t off = lo.off[l - 1];
        auto w_idx = [&](int i, int j) { return static_cast<int>(off + static_cast<std::size_t>(i) * din + j); };
        auto b_idx = [&](int i) { return static_cast<int>(off + static_cast<std::size_t>(dout) * din + i); };

        std::vector<int> zval(dout);
        std::vector<std::vector<int>> ztan(d, std::vector<int>(dout));
        std::vector<std::vector<int>> zsec(d, std::vector<int>(dout));

        for (int i = 0; i < dout; ++i) {
            if (l == 1) {
                // z_i = sum_j W_ij x_j + b_i with x constants
                int acc = b_idx(i);
                for (int j = 0; j < din; ++j)
                    if (x[j] != 0.0) acc = b.add(acc, b.scale(x[j], w_idx(i, j)));
                zval[i] = acc;
                for (int k = 0; k < d; ++k) {
                    ztan[k][i] = b.scale(1.0, w_idx(i, k)); // dz/dx_k = W_ik
                    zsec[k][i] = zero;
                }
            } else {
                int acc = b_idx(i);
                for (int j = 0; j < din; ++j) acc = b.add(acc, b.mul(w_idx(i, j), val[j]));
                zval[i] = acc;
                for (int k = 0; k < d; ++k) {
                    int tacc = zero;
                    int sacc = zero;
                    for (int j = 0; j < din; ++j) {
                        tacc = b.add(tacc, b.mul(w_idx(i, j), tan[k][j]));
                        sacc = b.add(sacc, b.mul(w_idx(i, j), sec[k][j]));
                    }
                    ztan[k][i] = tacc;
                    zsec[k][i] = sacc;
                }
            }
        }

        if (l < L) {
            val.assign(dout, -1);
            for (int k = 0; k < d; ++k) {
                tan[k].assign(dout, -1);
                sec[k].assign(dout, -1);
            }
            for (int i = 0; i < dout; ++i) {
                const ActNodes a = emit_activation(b, spec.hidden_activation, zval[i], true);
                val[i] = a.val;
                for (int k = 0; k < d; ++k) {
                    // a' = s'(z) z';  a'' = s''(z) z'^2 + s'(z) z''
                    tan[k][i] = b.mul(a.d1, ztan[k][i]);
                    sec[k][i] = b.add(b.mul(a.d2, b.powi(2, ztan[k][i])), b.mul(a.d1, zsec[k][i]));
                }
            }
        } else {
            val = zval;
            for (int k = 0; k < d; ++k) {
                tan[k] = ztan[k];
                sec[k] = zsec[k];
            }
        }
    }

    int u = val[0];
    std::vector<int> du(d), ddu(d);
    for (int k = 0; k < d; ++k) {
        du[k] = tan[k][0];
        ddu[k] = sec[k][0];
    }

    if (boundary_factor) {
        // u <- u * B(x), B = prod_i x_i (1 - x_i); B and its derivatives at
        // the baked point are plain constants
        double B = 1.0;
        for (int i = 0; i < d; ++i) B *= x[i] * (1.0 - x[i]);
        Vec dB(d), ddB(d);
        for (int k = 0; k < d; ++k) {
            double rest = 1.0;
            for (int i = 0; i < d; ++i)
                if (i != k) rest *= x[i] * (1.0 - x[i]);
            dB[k] = (1.0 - 2.0 * x[k]) * rest;
            ddB[k] = -2.0 * rest;
        }
        std::vector<int> du2(d), ddu2(d);
        for (int k = 0; k < d; ++k) {
            du2[k] = b.add(b.scale(B, du[k]), b.scale(dB[k], u));
            ddu2[k] = b.add(b.add(b.scale(B, ddu[k]), b.scale(2.0 * dB[k], du[k])),
                            b.scale(ddB[k], u));
        }
        u = b.scale(B, u);
        du = du2;
        ddu = ddu2;
    }

    std::vector<int> outs;
    outs.push_back(u);
    for (int k = 0; k < d; ++k) outs.push_back(du[k]);
    for (int k = 0; k < d; ++k) outs.push_back(ddu[k]);
    return b.finish(std::move(outs));
}

autodiff::Graph mlp_drift_divergence_graph(const MlpSpec& spec, int dim, bool time_input) {
    spec.validate();
    const int expect_in = dim + (time_input ? 1 : 0);
    if (spec.input_dim() != expect_in)
        throw std::invalid_argument("mlp_drift_divergence_graph: input width mismatch");
    if (spec.output_dim() != dim)
        throw std::invalid_argument("mlp_drift_divergence_graph: output width must equal dim");
    if (spec.wrapper != OutputWrapper::none)
        throw std::invalid_argument("mlp_drift_divergence_graph: wrapper not supported");

    const int n_params = spec.param_count();
    const int n_in = 1 + dim + n_params; // t slot always present for a fixed layout
    GraphBuilder b(n_in);
    const int zero = b.scale(0.0, 0);
    auto theta_node = [&](int p) { return 1 + dim + p; };
    auto x_node = [&](int k) { return 1 + k; };

    const int L = spec.layer_count();
    const LayerOffsets lo = layer_offsets(spec);

    std::vector<int> val;
    std::vector<std::vector<int>> tan(dim); // d/dx_k

    for (int l = 1; l <= L; ++l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        const std::size_t off = lo.off[l - 1];
        auto w_idx = [&](int i, int j) {
            return theta_node(static_cast<int>(off + static_cast<std::size_t>(i) * din + j));
        };
        auto b_idx = [&](int i) {
            return theta_node(static_cast<int>(off + static_cast<std::size_t>(dout) * din + i));
        };

        std::vector<int> zval(dout);
        std::vector<std::vector<int>> ztan(dim, std::vector<int>(dout));

        for (int i = 0; i < dout; ++i) {
            if (l == 1) {
                int acc = b_idx(i);
                for (int j = 0; j < din; ++j) {
                    const int in_node = time_input ? (j == 0 ? 0 : x_node(j - 1)) : x_node(j);
                    acc = b.add(acc, b.mul(w_idx(i, j), in_node));
                }
                zval[i] = acc;
                for (int k = 0; k < dim; ++k) {
                    const int jx = time_input ? k + 1 : k; // column of x_k in layer-1 weights
                    ztan[k][i] = b.scale(1.0, w_idx(i, jx));
                }
            } else {
                int acc = b_idx(i);
                for (int j = 0; j < din; ++j) acc = b.add(acc, b.mul(w_idx(i, j), val[j]));
                zval[i] = acc;
                for (int k = 0; k < dim; ++k) {
                    int tacc = zero;
                    for (int j = 0; j < din; ++j)
                        tacc = b.add(tacc, b.mul(w_idx(i, j), tan[k][j]));
                    ztan[k][i] = tacc;
                }
            }
        }

        if (l < L) {
            val.assign(dout, -1);
            for (int k = 0; k < dim; ++k) tan[k].assign(dout, -1);
            for (int i = 0; i < dout; ++i) {
                const ActNodes a = emit_activation(b, spec.hidden_activation, zval[i], false);
                val[i] = a.val;
                for (int k = 0; k < dim; ++k) tan[k][i] = b.mul(a.d1, ztan[k][i]);
            }
        } else {
            val = zval;
            for (int k = 0; k < dim; ++k) tan[k] = ztan[k];
        }
    }

    int div = zero;
    for (int k = 0; k < dim; ++k) div = b.add(div, tan[k][k]);

    std::vector<int> outs = val;
    outs.push_back(div);
    return b.finish(std::move(outs));
}

autodiff::Graph mlp_forward_graph(const MlpSpec& spec) {
    spec.validate();
    if (spec.wrapper != OutputWrapper::none)
        throw std::invalid_argument("mlp_forward_graph: wrapper not supported");

    const int d = spec.input_dim();
    const int n_params = spec.param_count();
    GraphBuilder b(d + n_params);
    auto theta_node = [&](int p) { return d + p; };

    const int L = spec.layer_count();
    const LayerOffsets lo = layer_offsets(spec);

    std::vector<int> val(d);
    for (int j = 0; j < d; ++j) val[j] = j;

    for (int l = 1; l <= L; ++l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        const std::size_t off = lo.off[l - 1];
        std::vector<int> zval(dout);
        for (int i = 0; i < dout; ++i) {
            int acc = theta_node(static_cast<int>(off + static_cast<std::size_t>(dout) * din + i));
            for (int j = 0; j < din; ++j) {
                const int w = theta_node(static_cast<int>(off + static_cast<std::size_t>(i) * din + j));
                acc = b.add(acc, b.mul(w, val[j]));
            }
            zval[i] = acc;
        }
        if (l < L) {
            val.assign(dout, -1);
            for (int i = 0; i < dout; ++i)
                val[i] = emit_activation(b, spec.hidden_activation, zval[i], false).val;
        } else {
            val = zval;
        }
    }
    return b.finish(std::move(val));
}

} // namespace mfdl::nn
