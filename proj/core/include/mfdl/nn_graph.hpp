#pragma once

#include "mfdl/autodiff.hpp"
#include "mfdl/nn.hpp"

namespace mfdl::nn {

// Compile a scalar-output MLP u(x; theta) at a FIXED sample point x into a
// computational graph over theta alone, unrolling first- and second-order
// input derivatives layer by layer.
// Graph inputs:  theta (ParamVector order).
// Graph outputs: [u, du/dx_1 .. du/dx_d, d2u/dx_1^2 .. d2u/dx_d^2].
// With boundary_factor, u is multiplied by prod_i x_i (1 - x_i) so it
// vanishes on the boundary of the unit box.
// Supported hidden activations: tanh, sigmoid, identity (C^2 in-graph forms).
autodiff::Graph mlp_laplacian_graph(const MlpSpec& spec, const Vec& x, bool boundary_factor);

// Compile a vector drift f(t, x; theta): R^d -> R^d into a graph carrying its
// divergence. Graph inputs: [t, x_1..x_d, theta...] (t present iff
// time_input). Graph outputs: [f_1..f_d, div f].
autodiff::Graph mlp_drift_divergence_graph(const MlpSpec& spec, int dim, bool time_input);

// Compile the plain forward map of an MLP over inputs [x..., theta...].
// Graph outputs: network outputs (after the wrapper when representable;
// only OutputWrapper::none is supported here).
autodiff::Graph mlp_forward_graph(const MlpSpec& spec);

} // namespace mfdl::nn
