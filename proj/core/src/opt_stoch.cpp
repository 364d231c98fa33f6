#include "mfdl/opt_stoch.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "mfdl/errors.hpp"

namespace mfdl::optstoch {

Method method_from_name(const std::string& name) {
    if (name == "sgd") return Method::sgd;
    if (name == "momentum") return Method::momentum;
    if (name == "adagrad") return Method::adagrad;
    if (name == "rmsprop") return Method::rmsprop;
    if (name == "adam") return Method::adam;
    if (name == "adamw") return Method::adamw;
    if (name == "muon") return Method::muon;
    throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::sgd: return "sgd";
        case Method::momentum: return "momentum";
        case Method::adagrad: return "adagrad";
        case Method::rmsprop: return "rmsprop";
        case Method::adam: return "adam";
        case Method::adamw: return "adamw";
        case Method::muon: return "muon";
    }
    return "?";
}

StochState make_state(Method method, int n, Hyper hyper) {
    StochState s;
    s.method = method;
    s.k = 1;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    if (method == Method::rmsprop && hyper.beta2 == 0.999) hyper.beta2 = 0.99;
    s.hyper = hyper;
    return s;
}

std::pair<Method, Hyper> hyper_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const Method method = method_from_name(j.value("method", std::string("adam")));
    Hyper hp;
    if (method == Method::rmsprop) hp.beta2 = 0.99;
    hp.alpha = j.value("alpha", hp.alpha);
    hp.beta1 = j.value("beta1", hp.beta1);
    hp.beta2 = j.value("beta2", hp.beta2);
    hp.eps = j.value("eps", hp.eps);
    hp.weight_decay = j.value("weight_decay", hp.weight_decay);
    return {method, hp};
}

StepResult stochastic_step(const StochState& state, const Vec& theta, const Vec& g) {
    if (g.size() != theta.size())
        throw std::invalid_argument("stochastic_step: gradient size mismatch");
    if (!all_finite(g)) throw NumericError("stochastic_step: non-finite gradient", theta);
    if (state.m.size() != theta.size() || state.v.size() != theta.size())
        throw std::invalid_argument("stochastic_step: state buffers do not match theta");

    const Hyper& hp = state.hyper;
    StepResult out{theta, state};
    StochState& st = out.state;
    Vec& x = out.theta;
    const std::size_t n = theta.size();

    switch (state.method) {
        case Method::sgd:
            for (std::size_t i = 0; i < n; ++i) x[i] -= hp.alpha * g[i];
            break;
        case Method::momentum:
            for (std::size_t i = 0; i < n; ++i) {
                st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * g[i];
                x[i] -= hp.alpha * st.m[i];
            }
            break;
        case Method::adagrad:
            for (std::size_t i = 0; i < n; ++i) {
                st.v[i] += g[i] * g[i];
                x[i] -= hp.alpha * g[i] / (std::sqrt(st.v[i]) + hp.eps);
            }
            break;
        case Method::rmsprop:
            for (std::size_t i = 0; i < n; ++i) {
                st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * g[i] * g[i];
                x[i] -= hp.alpha * g[i] / (std::sqrt(st.v[i]) + hp.eps);
            }
            break;
        case Method::adam:
        case Method::adamw: {
            const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.k));
            const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.k));
            for (std::size_t i = 0; i < n; ++i) {
                st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * g[i];
                st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * g[i] * g[i];
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                if (state.method == Method::adamw) x[i] -= hp.alpha * hp.weight_decay * theta[i];
                x[i] -= hp.alpha * mhat / (std::sqrt(vhat) + hp.eps);
            }
            break;
        }
        case Method::muon:
            throw std::invalid_argument("stochastic_step: use muon_step for matrix parameters");
    }
    st.k = state.k + 1;
    return out;
}

Mat newton_schulz(const Mat& m, NsCoeffs coeffs, int k_iters, double eps) {
    if (k_iters < 1) throw std::invalid_argument("newton_schulz: need at least one iteration");
    const double fro = frobenius_norm(m);
    if (fro == 0.0) throw std::invalid_argument("newton_schulz: zero matrix");

    Mat x = m;
    for (double& e : x.data) e /= (fro + eps);

    for (int it = 0; it < k_iters; ++it) {
        const Mat xxt = matmul(x, transpose(x));
        const Mat xxt_x = matmul(xxt, x);
        const Mat xxt2_x = matmul(xxt, xxt_x);
        Mat next(x.rows, x.cols);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            next.data[i] = coeffs.a * x.data[i] + coeffs.b * xxt_x.data[i] + coeffs.c * xxt2_x.data[i];
        double delta = 0.0;
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double diff = next.data[i] - x.data[i];
            delta += diff * diff;
        }
        const double rel = std::sqrt(delta) / std::max(frobenius_norm(x), 1e-300);
        x = std::move(next);
        if (rel < eps) break;
    }
    return x;
}

void MuonConfig::validate() const {
    if (ns_iters < 1) throw std::invalid_argument("muon: ns_iters must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("muon: momentum in [0,1)");
    if (alpha <= 0.0) throw std::invalid_argument("muon: alpha must be positive");
}

MuonStepResult muon_step(const MuonConfig& cfg, const Mat& weight, const Mat& grad,
                         const Mat& momentum_buffer) {
    cfg.validate();
    if (grad.rows != weight.rows || grad.cols != weight.cols)
        throw std::invalid_argument("muon_step: gradient shape mismatch");
    if (momentum_buffer.rows != weight.rows || momentum_buffer.cols != weight.cols)
        throw std::invalid_argument("muon_step: momentum shape mismatch");

    MuonStepResult out;
    out.momentum_buffer = momentum_buffer;
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        out.momentum_buffer.data[i] = cfg.momentum * momentum_buffer.data[i] + grad.data[i];

    Mat direction(weight.rows, weight.cols);
    if (frobenius_norm(out.momentum_buffer) > 0.0)
        direction = newton_schulz(out.momentum_buffer, cfg.coeffs, cfg.ns_iters, cfg.ns_eps);

    double alpha = cfg.alpha;
    if (cfg.shape_scaled_step)
        alpha *= std::sqrt(std::max(1.0, static_cast<double>(weight.rows) / weight.cols));

    out.weight = weight;
    for (std::size_t i = 0; i < weight.data.size(); ++i)
        out.weight.data[i] -= alpha * cfg.weight_decay * weight.data[i] + alpha * direction.data[i];
    return out;
}

} // namespace mfdl::optstoch
