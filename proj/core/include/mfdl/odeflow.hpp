#pragma once

#include <functional>

#include "mfdl/linalg.hpp"
#include "mfdl/nn.hpp"
#include "mfdl/nn_graph.hpp"
#include "mfdl/trace.hpp"

namespace mfdl::odeflow {

enum class SolverMethod { euler, midpoint, rk4 };

struct SolverConfig {
    SolverMethod method = SolverMethod::rk4;
    double step = 0.01;
    double horizon = 1.0;

    void validate() const;
    int step_count() const; // ceil(T / h); last step padded
};

// Drift with the derivative products needed by the adjoint machinery.
// All callbacks follow the convention f : [0,T] x R^d -> R^d.
struct OdeSystem {
    int dim = 0;
    int n_params = 0;
    std::function<Vec(double, const Vec&)> drift;
    // p^T df/dx (row vector through the state Jacobian)
    std::function<Vec(double, const Vec&, const Vec&)> vjp_state;
    // p^T df/dt (scalar)
    std::function<double(double, const Vec&, const Vec&)> vjp_time;
    // p^T df/dtheta
    std::function<Vec(double, const Vec&, const Vec&)> vjp_params;
    // df/dx v (column product), used for divergence probes
    std::function<Vec(double, const Vec&, const Vec&)> jvp_state;
};

struct Trajectory {
    Vec times;
    std::vector<Vec> states;

    const Vec& terminal() const { return states.back(); }
    Vec interpolate(double t) const; // piecewise linear
};

Trajectory ode_solve(const OdeSystem& sys, const Vec& x0, const SolverConfig& cfg);

// Terminal-reward gradient via the adjoint (costate) system. The forward
// trajectory is stored and interpolated for the backward pass. p_sigma(0) is
// the parameter gradient; p_tau(0) the start-time sensitivity.
struct NodeGradResult {
    double objective = 0.0; // J = g(x(T))
    Vec grad_theta;         // p_sigma(0)
    Vec p_x0;               // p_x(0)
    double p_tau0 = 0.0;    // p_tau(0)
    Vec terminal_state;
};

struct TerminalReward {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
};

NodeGradResult node_grad(const OdeSystem& sys, const Vec& x0, const TerminalReward& reward,
                         const SolverConfig& cfg);

// Joint integration of the state with log-density along the trajectory:
// d/dt log rho = -div f, divergence taken exactly via dim jvp probes.
struct LogDensityResult {
    Vec terminal_state;
    double log_density = 0.0;
};
LogDensityResult logdensity_trace(const OdeSystem& sys, const Vec& x0, double logp0,
                                  const SolverConfig& cfg);

// Wrap an MLP drift f_theta(t, x) (time folded in as the first input when
// time_dependent) into an OdeSystem at fixed theta.
OdeSystem mlp_ode_system(const nn::MlpSpec& spec, const nn::ParamVector& theta,
                         bool time_dependent);

// --- probability density control ------------------------------------------

// Drift represented as one computational graph over [t, x, theta] with
// outputs [f_1..f_d, div f]; built once and reused for every theta.
struct GraphDrift {
    int dim = 0;
    int n_params = 0;
    autodiff::Graph graph;
};
GraphDrift make_mlp_graph_drift(const nn::MlpSpec& spec, int dim, bool time_dependent);

// Loss h_T + (1/2M) sum |x_T^(i)|^2 where h' = -(1/M) sum div f(x^(i)),
// h_0 = 0, one particle per data sample; integrates all particles jointly.
struct DensityControlResult {
    double loss = 0.0;
    double entropy_term = 0.0;   // h_T
    double quadratic_term = 0.0; // (1/2M) sum |x_T|^2
    std::vector<Vec> terminal_samples;
};
DensityControlResult density_control_loss(const GraphDrift& drift, const Vec& theta,
                                          const std::vector<Vec>& samples,
                                          const SolverConfig& cfg);

// Same loss with its parameter gradient via the adjoint of the stacked
// particle + entropy system.
struct DensityControlGrad {
    DensityControlResult result;
    Vec grad_theta;
};
DensityControlGrad density_control_grad(const GraphDrift& drift, const Vec& theta,
                                        const std::vector<Vec>& samples, const SolverConfig& cfg);

// Generation pass: integrate z' = -f(T - t, z) from z0 (reverse of the
// learned forward flow).
Vec density_control_generate(const GraphDrift& drift, const Vec& theta, const Vec& z0,
                             const SolverConfig& cfg);

} // namespace mfdl::odeflow
