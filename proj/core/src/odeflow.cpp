#include "mfdl/odeflow.hpp"

#include <cmath>
#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::odeflow {

void SolverConfig::validate() const {
    if (step <= 0.0) throw std::invalid_argument("solver: step must be positive");
    if (horizon <= 0.0) throw std::invalid_argument("solver: horizon must be positive");
}

int SolverConfig::step_count() const {
    return static_cast<int>(std::ceil(horizon / step - 1e-12));
}

Vec Trajectory::interpolate(double t) const {
    if (states.empty()) throw std::logic_error("trajectory: empty");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    // times are increasing; locate the bracketing knot
    std::size_t hi = 1;
    while (hi < times.size() && times[hi] < t) ++hi;
    const double t0 = times[hi - 1];
    const double t1 = times[hi];
    const double w = (t - t0) / (t1 - t0);
    Vec out(states[hi].size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - w) * states[hi - 1][i] + w * states[hi][i];
    return out;
}

namespace {

using Rhs = std::function<Vec(double, const Vec&)>;

Vec rk_step(const Rhs& rhs, SolverMethod method, double t, const Vec& x, double h) {
    switch (method) {
        case SolverMethod::euler: {
            Vec k1 = rhs(t, x);
            Vec out = x;
            axpy(h, k1, out);
            return out;
        }
        case SolverMethod::midpoint: {
            Vec k1 = rhs(t, x);
            Vec xm = x;
            axpy(0.5 * h, k1, xm);
            Vec k2 = rhs(t + 0.5 * h, xm);
            Vec out = x;
            axpy(h, k2, out);
            return out;
        }
        case SolverMethod::rk4: {
            Vec k1 = rhs(t, x);
            Vec x2 = x;
            axpy(0.5 * h, k1, x2);
            Vec k2 = rhs(t + 0.5 * h, x2);
            Vec x3 = x;
            axpy(0.5 * h, k2, x3);
            Vec k3 = rhs(t + 0.5 * h, x3);
            Vec x4 = x;
            axpy(h, k3, x4);
            Vec k4 = rhs(t + h, x4);
            Vec out = x;
            for (std::size_t i = 0; i < x.size(); ++i)
                out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            return out;
        }
    }
    throw std::logic_error("rk_step: unhandled method");
}

Trajectory integrate(const Rhs& rhs, SolverMethod method, const Vec& x0, double horizon,
                     double step) {
    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    double t = 0.0;
    while (t < horizon - 1e-12) {
        const double h = std::min(step, horizon - t);
        Vec next = rk_step(rhs, method, t, traj.states.back(), h);
        t += h;
        if (!all_finite(next))
            throw NumericError("ode: state blow-up at t=" + std::to_string(t), traj.states.back());
        traj.times.push_back(t);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

} // namespace

Trajectory ode_solve(const OdeSystem& sys, const Vec& x0, const SolverConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(x0.size()) != sys.dim)
        throw std::invalid_argument("ode_solve: initial state dimension mismatch");
    if (!all_finite(x0)) throw std::invalid_argument("ode_solve: non-finite initial state");
    return integrate([&](double t, const Vec& x) { return sys.drift(t, x); }, cfg.method, x0,
                     cfg.horizon, cfg.step);
}

NodeGradResult node_grad(const OdeSystem& sys, const Vec& x0, const TerminalReward& reward,
                         const SolverConfig& cfg) {
    cfg.validate();
    const Trajectory traj = ode_solve(sys, x0, cfg);
    const Vec xT = traj.terminal();
    const double T = cfg.horizon;

    NodeGradResult res;
    res.objective = reward.value(xT);
    res.terminal_state = xT;

    const int d = sys.dim;
    const int n = sys.n_params;

    // costate (p_x, p_tau, p_sigma) integrated in reversed time s = T - t
    Vec q0(d + 1 + n, 0.0);
    {
        const Vec gx = reward.grad(xT);
        for (int i = 0; i < d; ++i) q0[i] = gx[i];
    }

    auto rhs = [&](double s, const Vec& q) {
        const double t = T - s;
        const Vec x = traj.interpolate(t);
        Vec px(q.begin(), q.begin() + d);
        Vec dq(d + 1 + n, 0.0);
        // dp/ds = +p . dh/dz evaluated along the stored trajectory
        const Vec jx = sys.vjp_state(t, x, px);
        for (int i = 0; i < d; ++i) dq[i] = jx[i];
        dq[d] = sys.vjp_time ? sys.vjp_time(t, x, px) : 0.0;
        if (n > 0) {
            const Vec jth = sys.vjp_params(t, x, px);
            for (int i = 0; i < n; ++i) dq[d + 1 + i] = jth[i];
        }
        return dq;
    };
    const Trajectory back = integrate(rhs, cfg.method, q0, T, cfg.step);
    const Vec& qf = back.terminal();

    res.p_x0.assign(qf.begin(), qf.begin() + d);
    res.p_tau0 = qf[d];
    res.grad_theta.assign(qf.begin() + d + 1, qf.end());
    return res;
}

LogDensityResult logdensity_trace(const OdeSystem& sys, const Vec& x0, double logp0,
                                  const SolverConfig& cfg) {
    cfg.validate();
    if (!sys.jvp_state) throw std::invalid_argument("logdensity_trace: jvp_state required");
    const int d = sys.dim;

    Vec z0 = x0;
    z0.push_back(logp0);
    auto rhs = [&](double t, const Vec& z) {
        const Vec x(z.begin(), z.begin() + d);
        Vec dz = sys.drift(t, x);
        double div = 0.0;
        Vec e(d, 0.0);
        for (int k = 0; k < d; ++k) {
            e[k] = 1.0;
            div += sys.jvp_state(t, x, e)[k];
            e[k] = 0.0;
        }
        dz.push_back(-div);
        return dz;
    };
    const Trajectory traj = integrate(rhs, cfg.method, z0, cfg.horizon, cfg.step);
    LogDensityResult res;
    const Vec& zf = traj.terminal();
    res.terminal_state.assign(zf.begin(), zf.begin() + d);
    res.log_density = zf[d];
    return res;
}

OdeSystem mlp_ode_system(const nn::MlpSpec& spec, const nn::ParamVector& theta,
                         bool time_dependent) {
    spec.validate();
    const int d = spec.output_dim();
    if (spec.input_dim() != d + (time_dependent ? 1 : 0))
        throw std::invalid_argument("mlp_ode_system: input width must be dim (+1 with time)");

    OdeSystem sys;
    sys.dim = d;
    sys.n_params = spec.param_count();

    auto pack = [time_dependent](double t, const Vec& x) {
        Vec in;
        if (time_dependent) in.push_back(t);
        in.insert(in.end(), x.begin(), x.end());
        return in;
    };

    sys.drift = [spec, theta, pack](double t, const Vec& x) {
        return nn::mlp_forward(spec, theta, pack(t, x));
    };
    sys.vjp_state = [spec, theta, pack, time_dependent, d](double t, const Vec& x, const Vec& p) {
        const auto g = nn::mlp_grad(spec, theta, pack(t, x), p);
        Vec out(d);
        const int off = time_dependent ? 1 : 0;
        for (int i = 0; i < d; ++i) out[i] = g.dx[off + i];
        return out;
    };
    sys.vjp_time = [spec, theta, pack, time_dependent](double t, const Vec& x, const Vec& p) {
        if (!time_dependent) return 0.0;
        const auto g = nn::mlp_grad(spec, theta, pack(t, x), p);
        return g.dx[0];
    };
    sys.vjp_params = [spec, theta, pack](double t, const Vec& x, const Vec& p) {
        return nn::mlp_grad(spec, theta, pack(t, x), p).dtheta;
    };
    sys.jvp_state = [spec, theta, pack, time_dependent](double t, const Vec& x, const Vec& v) {
        // forward-mode tangent through the layers, tangent zero in t
        const Vec in = pack(t, x);
        Vec vin(in.size(), 0.0);
        const int off = time_dependent ? 1 : 0;
        for (std::size_t i = 0; i < v.size(); ++i) vin[off + i] = v[i];

        Vec h = in, dh = vin;
        std::size_t p = 0;
        const int L = spec.layer_count();
        for (int l = 1; l <= L; ++l) {
            const int din = spec.widths[l - 1];
            const int dout = spec.widths[l];
            Vec z(dout), dz(dout);
            for (int i = 0; i < dout; ++i) {
                double s = theta[p + static_cast<std::size_t>(dout) * din + i];
                double ds = 0.0;
                for (int j = 0; j < din; ++j) {
                    const double w = theta[p + static_cast<std::size_t>(i) * din + j];
                    s += w * h[j];
                    ds += w * dh[j];
                }
                z[i] = s;
                dz[i] = ds;
            }
            p += static_cast<std::size_t>(dout) * (din + 1);
            if (l < L) {
                h.resize(dout);
                dh.resize(dout);
                for (int i = 0; i < dout; ++i) {
                    const auto a = nn::activation_apply(spec.hidden_activation, z[i]);
                    h[i] = a.value;
                    dh[i] = a.derivative * dz[i];
                }
            } else {
                h = std::move(z);
                dh = std::move(dz);
            }
        }
        return dh;
    };
    return sys;
}

GraphDrift make_mlp_graph_drift(const nn::MlpSpec& spec, int dim, bool time_dependent) {
    GraphDrift gd;
    gd.dim = dim;
    gd.n_params = spec.param_count();
    gd.graph = nn::mlp_drift_divergence_graph(spec, dim, time_dependent);
    return gd;
}

namespace {

// inputs [t, x, theta] for the drift graph
Vec graph_inputs(const GraphDrift& drift, double t, const Vec& x, const Vec& theta) {
    Vec in;
    in.reserve(1 + drift.dim + drift.n_params);
    in.push_back(t);
    in.insert(in.end(), x.begin(), x.end());
    in.insert(in.end(), theta.begin(), theta.end());
    return in;
}

} // namespace

DensityControlResult density_control_loss(const GraphDrift& drift, const Vec& theta,
                                          const std::vector<Vec>& samples,
                                          const SolverConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw std::invalid_argument("density_control_loss: need samples");
    const int d = drift.dim;
    const int m = static_cast<int>(samples.size());

    // stacked state: M particles then the shared entropy variable h
    Vec z0;
    for (const auto& s : samples) {
        if (static_cast<int>(s.size()) != d)
            throw std::invalid_argument("density_control_loss: sample dimension mismatch");
        z0.insert(z0.end(), s.begin(), s.end());
    }
    z0.push_back(0.0);

    auto rhs = [&](double t, const Vec& z) {
        Vec dz(z.size(), 0.0);
        double div_sum = 0.0;
        for (int i = 0; i < m; ++i) {
            const Vec xi(z.begin() + static_cast<std::ptrdiff_t>(i) * d,
                         z.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
            const Vec out = autodiff::evaluate_all(drift.graph, graph_inputs(drift, t, xi, theta));
            for (int j = 0; j < d; ++j) dz[static_cast<std::size_t>(i) * d + j] = out[j];
            div_sum += out[d];
        }
        dz.back() = -div_sum / m;
        return dz;
    };
    const Trajectory traj = integrate(rhs, cfg.method, z0, cfg.horizon, cfg.step);

    DensityControlResult res;
    const Vec& zf = traj.terminal();
    res.entropy_term = zf.back();
    double quad = 0.0;
    for (int i = 0; i < m; ++i) {
        Vec xi(zf.begin() + static_cast<std::ptrdiff_t>(i) * d,
               zf.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
        quad += dot(xi, xi);
        res.terminal_samples.push_back(std::move(xi));
    }
    res.quadratic_term = quad / (2.0 * m);
    res.loss = res.entropy_term + res.quadratic_term;
    return res;
}

DensityControlGrad density_control_grad(const GraphDrift& drift, const Vec& theta,
                                        const std::vector<Vec>& samples,
                                        const SolverConfig& cfg) {
    cfg.validate();
    const int d = drift.dim;
    const int m = static_cast<int>(samples.size());
    const int n = drift.n_params;
    const double T = cfg.horizon;

    // forward pass, storing the stacked trajectory
    Vec z0;
    for (const auto& s : samples) z0.insert(z0.end(), s.begin(), s.end());
    z0.push_back(0.0);
    auto fwd_rhs = [&](double t, const Vec& z) {
        Vec dz(z.size(), 0.0);
        double div_sum = 0.0;
        for (int i = 0; i < m; ++i) {
            const Vec xi(z.begin() + static_cast<std::ptrdiff_t>(i) * d,
                         z.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
            const Vec out = autodiff::evaluate_all(drift.graph, graph_inputs(drift, t, xi, theta));
            for (int j = 0; j < d; ++j) dz[static_cast<std::size_t>(i) * d + j] = out[j];
            div_sum += out[d];
        }
        dz.back() = -div_sum / m;
        return dz;
    };
    const Trajectory traj = integrate(fwd_rhs, cfg.method, z0, cfg.horizon, cfg.step);

    DensityControlGrad out;
    {
        const Vec& zf = traj.terminal();
        out.result.entropy_term = zf.back();
        double quad = 0.0;
        for (int i = 0; i < m; ++i) {
            Vec xi(zf.begin() + static_cast<std::ptrdiff_t>(i) * d,
                   zf.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
            quad += dot(xi, xi);
            out.result.terminal_samples.push_back(std::move(xi));
        }
        out.result.quadratic_term = quad / (2.0 * m);
        out.result.loss = out.result.entropy_term + out.result.quadratic_term;
    }

    // adjoint: costate for each particle plus the parameter block; the
    // entropy costate stays 1 since nothing feeds back into h
    Vec q0(static_cast<std::size_t>(m) * d + n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j)
            q0[static_cast<std::size_t>(i) * d + j] = out.result.terminal_samples[i][j] / m;

    auto bwd_rhs = [&](double s, const Vec& q) {
        const double t = T - s;
        const Vec z = traj.interpolate(t);
        Vec dq(q.size(), 0.0);
        Vec seed(static_cast<std::size_t>(d) + 1, 0.0);
        for (int i = 0; i < m; ++i) {
            const Vec xi(z.begin() + static_cast<std::ptrdiff_t>(i) * d,
                         z.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);
            for (int j = 0; j < d; ++j) seed[j] = q[static_cast<std::size_t>(i) * d + j];
            seed[d] = -1.0 / m; // entropy costate is identically 1
            const auto vjp =
                autodiff::reverse_vjp(drift.graph, graph_inputs(drift, t, xi, theta), seed);
            // grad layout: [t, x, theta]
            for (int j = 0; j < d; ++j)
                dq[static_cast<std::size_t>(i) * d + j] = vjp.grad[1 + j];
            for (int p = 0; p < n; ++p)
                dq[static_cast<std::size_t>(m) * d + p] += vjp.grad[1 + d + p];
        }
        return dq;
    };
    const Trajectory back = integrate(bwd_rhs, cfg.method, q0, T, cfg.step);
    const Vec& qf = back.terminal();
    out.grad_theta.assign(qf.begin() + static_cast<std::ptrdiff_t>(m) * d, qf.end());
    return out;
}

Vec density_control_generate(const GraphDrift& drift, const Vec& theta, const Vec& z0,
                             const SolverConfig& cfg) {
    cfg.validate();
    const double T = cfg.horizon;
    auto rhs = [&](double t, const Vec& z) {
        Vec out = autodiff::evaluate_all(drift.graph, graph_inputs(drift, T - t, z, theta));
        out.resize(drift.dim);
        for (auto& v : out) v = -v;
        return out;
    };
    return integrate(rhs, cfg.method, z0, T, cfg.step).terminal();
}

} // namespace mfdl::odeflow
