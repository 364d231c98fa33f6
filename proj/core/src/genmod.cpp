#include "mfdl/genmod.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::genmod {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

double softplus(double t) {
    if (t > 30.0) return t;
    if (t < -30.0) return std::exp(t);
    return std::log1p(std::exp(t));
}

double softplus_deriv(double t) {
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

} // namespace

void Schedule::validate() const {
    if (horizon <= 0.0) throw std::invalid_argument("schedule: horizon must be positive");
    if (kind == Kind::ou) {
        if (a <= 0.0) throw std::invalid_argument("schedule: OU rate must be positive");
    } else {
        if (gamma_min <= 0.0 || gamma_max < gamma_min)
            throw std::invalid_argument("schedule: need 0 < gamma_min <= gamma_max");
    }
}

ScheduleValue schedule_eval(const Schedule& sched, double t) {
    sched.validate();
    if (t < 0.0 || t > sched.horizon + 1e-12)
        throw std::domain_error("schedule_eval: t outside [0, T]");
    double integral; // int_0^t gamma_tau dtau (gamma = a for OU)
    if (sched.kind == Schedule::Kind::ou) {
        integral = sched.a * t;
    } else {
        integral = t * sched.gamma_min + 0.5 * t * t * (sched.gamma_max - sched.gamma_min);
    }
    const double alpha = std::exp(-integral);
    const double beta = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * integral)));
    return {alpha, beta};
}

Vec sample_times(const Schedule& sched, int count, SplitRng& rng) {
    sched.validate();
    constexpr int kKnots = 1024;
    const double t0 = kTimeFloor;
    const double t1 = sched.horizon;
    // cumulative trapezoid of beta^2 over the knot grid
    Vec ts(kKnots), cdf(kKnots, 0.0);
    double prev = 0.0;
    for (int i = 0; i < kKnots; ++i) {
        ts[i] = t0 + (t1 - t0) * i / (kKnots - 1);
        const double b = schedule_eval(sched, ts[i]).beta;
        const double w = b * b;
        if (i > 0) cdf[i] = cdf[i - 1] + 0.5 * (prev + w) * (ts[i] - ts[i - 1]);
        prev = w;
    }
    const double total = cdf.back();
    Vec out(count);
    for (int k = 0; k < count; ++k) {
        const double u = rng.next_double() * total;
        int lo = 0, hi = kKnots - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            (cdf[mid] <= u ? lo : hi) = mid;
        }
        const double seg = cdf[hi] - cdf[lo];
        const double w = seg > 0.0 ? (u - cdf[lo]) / seg : 0.0;
        out[k] = ts[lo] + w * (ts[hi] - ts[lo]);
    }
    return out;
}

void GenBatch::validate(double t_max) const {
    if (m < 1 || dim < 1) throw std::invalid_argument("batch: empty");
    if (x0.size() != static_cast<std::size_t>(m) * dim ||
        noise.size() != static_cast<std::size_t>(m) * dim || t.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("batch: shape mismatch");
    if (!all_finite(x0) || !all_finite(noise) || !all_finite(t))
        throw std::invalid_argument("batch: non-finite entry");
    for (double ti : t)
        if (ti < kTimeFloor || ti > t_max + 1e-12)
            throw std::invalid_argument("batch: time outside (t_min, T]");
}

GenBatch make_denoise_batch(const Vec& data, int dim, const Schedule& sched, int m, SplitRng& rng) {
    const int rows = static_cast<int>(data.size()) / dim;
    GenBatch b;
    b.m = m;
    b.dim = dim;
    b.t = sample_times(sched, m, rng);
    for (int i = 0; i < m; ++i) {
        const int row = static_cast<int>(rng.next_below(rows));
        for (int j = 0; j < dim; ++j) {
            b.x0.push_back(data[static_cast<std::size_t>(row) * dim + j]);
            b.noise.push_back(rng.next_gaussian());
        }
    }
    return b;
}

GenBatch make_fm_batch(const Vec& data, int dim, int m, SplitRng& rng) {
    const int rows = static_cast<int>(data.size()) / dim;
    GenBatch b;
    b.m = m;
    b.dim = dim;
    for (int i = 0; i < m; ++i) {
        const int row = static_cast<int>(rng.next_below(rows));
        for (int j = 0; j < dim; ++j) {
            b.x0.push_back(data[static_cast<std::size_t>(row) * dim + j]);
            b.noise.push_back(rng.next_gaussian());
        }
        b.t.push_back(std::max(kTimeFloor, rng.next_double()));
    }
    return b;
}

LossGrad denoise_loss(const nn::MlpSpec& eps_net, const nn::ParamVector& theta,
                      const Schedule& sched, const GenBatch& batch) {
    batch.validate(sched.horizon);
    const int d = batch.dim;
    if (eps_net.input_dim() != d + 1 || eps_net.output_dim() != d)
        throw std::invalid_argument("denoise_loss: network must map (x, t) -> R^d");

    LossGrad out;
    out.grad.assign(theta.size(), 0.0);
    const double inv_m = 1.0 / batch.m;
    for (int i = 0; i < batch.m; ++i) {
        const auto sv = schedule_eval(sched, batch.t[i]);
        Vec in(d + 1);
        Vec eps(d);
        for (int j = 0; j < d; ++j) {
            eps[j] = batch.noise[static_cast<std::size_t>(i) * d + j];
            in[j] = sv.alpha * batch.x0[static_cast<std::size_t>(i) * d + j] + sv.beta * eps[j];
        }
        in[d] = batch.t[i];
        const Vec pred = nn::mlp_forward(eps_net, theta, in);
        Vec up(d);
        for (int j = 0; j < d; ++j) {
            const double r = pred[j] - eps[j];
            out.loss += r * r * inv_m;
            up[j] = 2.0 * r * inv_m;
        }
        const auto g = nn::mlp_grad(eps_net, theta, in, up);
        axpy(1.0, g.dtheta, out.grad);
    }
    return out;
}

std::function<Vec(const Vec&, double)> score_from_eps_net(const nn::MlpSpec& eps_net,
                                                          nn::ParamVector theta, Schedule sched) {
    return [eps_net, theta = std::move(theta), sched](const Vec& x, double t) {
        const double tc = std::max(t, kTimeFloor);
        const auto sv = schedule_eval(sched, tc);
        Vec in = x;
        in.push_back(tc);
        Vec eps = nn::mlp_forward(eps_net, theta, in);
        for (auto& e : eps) e = -e / sv.beta;
        return eps;
    };
}

Vec diffusion_sample(const std::function<Vec(const Vec&, double)>& score, const Schedule& sched,
                     int dim, SampleMode mode, int n_samples, int steps, std::uint64_t seed) {
    sched.validate();
    if (sched.kind != Schedule::Kind::ou)
        throw CapabilityError("diffusion_sample: sampler is derived for the OU schedule");
    const double a = sched.a;
    const double horizon = sched.horizon - kTimeFloor; // score stays off the singular end

    SplitRng root(seed);
    Vec out(static_cast<std::size_t>(n_samples) * dim);
    for (int s = 0; s < n_samples; ++s) {
        SplitRng rng = root.split(s);
        Vec z = rng.gaussian_vector(dim);
        if (steps > 0) {
            const double h = horizon / steps;
            if (mode == SampleMode::em) {
                for (int k = 0; k < steps; ++k) {
                    const double tau = k * h;            // reverse-time variable
                    const double t_fwd = sched.horizon - tau;
                    const Vec sc = score(z, t_fwd);
                    const double sqh = std::sqrt(2.0 * a * h);
                    for (int j = 0; j < dim; ++j)
                        z[j] += h * (a * z[j] + 2.0 * a * sc[j]) + sqh * rng.next_gaussian();
                    if (!all_finite(z)) throw NumericError("diffusion_sample: blow-up", z);
                }
            } else {
                auto rhs = [&](double tau, const Vec& x) {
                    const Vec sc = score(x, sched.horizon - tau);
                    Vec dz(dim);
                    for (int j = 0; j < dim; ++j) dz[j] = a * x[j] + a * sc[j];
                    return dz;
                };
                for (int k = 0; k < steps; ++k) {
                    const double tau = k * h;
                    // classic rk4 step
                    Vec k1 = rhs(tau, z);
                    Vec x2 = z;
                    axpy(0.5 * h, k1, x2);
                    Vec k2 = rhs(tau + 0.5 * h, x2);
                    Vec x3 = z;
                    axpy(0.5 * h, k2, x3);
                    Vec k3 = rhs(tau + 0.5 * h, x3);
                    Vec x4 = z;
                    axpy(h, k3, x4);
                    Vec k4 = rhs(tau + h, x4);
                    for (int j = 0; j < dim; ++j)
                        z[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                    if (!all_finite(z)) throw NumericError("diffusion_sample: blow-up", z);
                }
            }
        }
        for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(s) * dim + j] = z[j];
    }
    return out;
}

LossGrad fm_loss(const nn::MlpSpec& u_net, const nn::ParamVector& theta, const GenBatch& batch) {
    batch.validate(1.0);
    const int d = batch.dim;
    if (u_net.input_dim() != d + 1 || u_net.output_dim() != d)
        throw std::invalid_argument("fm_loss: network must map (x, t) -> R^d");

    LossGrad out;
    out.grad.assign(theta.size(), 0.0);
    const double inv_m = 1.0 / batch.m;
    for (int i = 0; i < batch.m; ++i) {
        const double t = batch.t[i];
        Vec in(d + 1);
        Vec target(d);
        for (int j = 0; j < d; ++j) {
            const double z = batch.x0[static_cast<std::size_t>(i) * d + j];
            const double eps = batch.noise[static_cast<std::size_t>(i) * d + j];
            in[j] = t * z + (1.0 - t) * eps;
            target[j] = z - eps;
        }
        in[d] = t;
        const Vec pred = nn::mlp_forward(u_net, theta, in);
        Vec up(d);
        for (int j = 0; j < d; ++j) {
            const double r = pred[j] - target[j];
            out.loss += r * r * inv_m;
            up[j] = 2.0 * r * inv_m;
        }
        const auto g = nn::mlp_grad(u_net, theta, in, up);
        axpy(1.0, g.dtheta, out.grad);
    }
    return out;
}

Vec fm_sample(const nn::MlpSpec& u_net, const nn::ParamVector& theta, int dim, int n_samples,
              int steps, std::uint64_t seed) {
    if (u_net.input_dim() != dim + 1 || u_net.output_dim() != dim)
        throw std::invalid_argument("fm_sample: network must map (x, t) -> R^d");
    SplitRng root(seed);
    const double horizon = 1.0 - kTimeFloor;
    const double h = horizon / steps;
    Vec out(static_cast<std::size_t>(n_samples) * dim);
    for (int s = 0; s < n_samples; ++s) {
        SplitRng rng = root.split(s);
        Vec x = rng.gaussian_vector(dim);
        auto rhs = [&](double t, const Vec& z) {
            Vec in = z;
            in.push_back(t);
            return nn::mlp_forward(u_net, theta, in);
        };
        for (int k = 0; k < steps; ++k) {
            const double t = k * h;
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
            for (int j = 0; j < dim; ++j)
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if (!all_finite(x)) throw NumericError("fm_sample: blow-up", x);
        }
        for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(s) * dim + j] = x[j];
    }
    return out;
}

void VaeNets::validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.input_dim() != data_dim || encoder.output_dim() != latent_dim + 1)
        throw std::invalid_argument("vae: encoder must map d -> m+1");
    if (decoder.input_dim() != latent_dim || decoder.output_dim() != data_dim + 1)
        throw std::invalid_argument("vae: decoder must map m -> d+1");
}

VaeLoss vae_elbo(const VaeNets& nets, const nn::ParamVector& theta_enc,
                 const nn::ParamVector& theta_dec, const Vec& batch_x, int batch_m,
                 std::uint64_t seed) {
    nets.validate();
    const int d = nets.data_dim;
    const int m = nets.latent_dim;
    if (batch_x.size() != static_cast<std::size_t>(batch_m) * d)
        throw std::invalid_argument("vae_elbo: batch shape mismatch");

    SplitRng root(seed);
    VaeLoss out;
    out.grad_encoder.assign(theta_enc.size(), 0.0);
    out.grad_decoder.assign(theta_dec.size(), 0.0);
    const double inv_m = 1.0 / batch_m;

    for (int i = 0; i < batch_m; ++i) {
        SplitRng rng = root.split(i);
        const Vec x(batch_x.begin() + static_cast<std::ptrdiff_t>(i) * d,
                    batch_x.begin() + static_cast<std::ptrdiff_t>(i + 1) * d);

        const Vec enc = nn::mlp_forward(nets.encoder, theta_enc, x);
        const Vec mu(enc.begin(), enc.begin() + m);
        const double raw_enc = enc[m];
        const double sp_enc = softplus(raw_enc);
        const double sigma_e = kSigmaFloor + sp_enc;
        if (sp_enc < 1e-12) ++out.sigma_clamps;

        const Vec eps = rng.gaussian_vector(m);
        Vec z(m);
        for (int j = 0; j < m; ++j) z[j] = mu[j] + sigma_e * eps[j];

        const Vec dec = nn::mlp_forward(nets.decoder, theta_dec, z);
        const Vec mu_d(dec.begin(), dec.begin() + d);
        const double raw_dec = dec[d];
        const double sp_dec = softplus(raw_dec);
        const double sigma_d = kSigmaFloor + sp_dec;
        if (sp_dec < 1e-12) ++out.sigma_clamps;

        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            const double r = x[j] - mu_d[j];
            sq += r * r;
        }
        const double a_term = -sq / (2.0 * sigma_d * sigma_d) -
                              0.5 * d * std::log(kTwoPi * sigma_d * sigma_d);
        const double mu_sq = dot(mu, mu);
        const double b_term = 0.5 * (m * sigma_e * sigma_e + mu_sq - m -
                                     2.0 * m * std::log(sigma_e));
        out.recon_term += a_term * inv_m;
        out.kl_term += b_term * inv_m;
        out.loss += (b_term - a_term) * inv_m;

        // decoder backward: loss contribution is -A/M
        Vec up_dec(d + 1);
        for (int j = 0; j < d; ++j) {
            const double dA_dmu = (x[j] - mu_d[j]) / (sigma_d * sigma_d);
            up_dec[j] = -dA_dmu * inv_m;
        }
        const double dA_dsigma = sq / (sigma_d * sigma_d * sigma_d) - d / sigma_d;
        up_dec[d] = -dA_dsigma * softplus_deriv(raw_dec) * inv_m;
        const auto gdec = nn::mlp_grad(nets.decoder, theta_dec, z, up_dec);
        axpy(1.0, gdec.dtheta, out.grad_decoder);

        // encoder backward via the reparameterized z
        const Vec& g_z = gdec.dx; // dLoss/dz
        Vec up_enc(m + 1);
        for (int j = 0; j < m; ++j) up_enc[j] = mu[j] * inv_m + g_z[j];
        const double dB_dsigma = m * sigma_e - m / sigma_e;
        up_enc[m] = (dB_dsigma * inv_m + dot(g_z, eps)) * softplus_deriv(raw_enc);
        const auto genc = nn::mlp_grad(nets.encoder, theta_enc, x, up_enc);
        axpy(1.0, genc.dtheta, out.grad_encoder);
    }
    return out;
}

// ---------------------------------------------------------------------------
// training loops

TrainedNet train_denoiser(const Vec& data, int dim, const Schedule& sched,
                          const nn::MlpSpec& eps_net, const TrainConfig& cfg) {
    const double t0 = now_ms();
    TrainedNet out;
    out.theta = nn::mlp_init(eps_net, cfg.seed);
    auto state = optstoch::make_state(cfg.method, static_cast<int>(out.theta.size()), cfg.hyper);
    SplitRng root(cfg.seed + 1);
    for (int k = 0; k < cfg.steps; ++k) {
        SplitRng rng = root.split(k);
        const GenBatch batch = make_denoise_batch(data, dim, sched, cfg.batch_size, rng);
        const LossGrad lg = denoise_loss(eps_net, out.theta, sched, batch);
        auto step = optstoch::stochastic_step(state, out.theta, lg.grad);
        out.theta = std::move(step.theta);
        state = std::move(step.state);
        out.trace.add(k, lg.loss, nrm2(lg.grad), state.hyper.alpha, 0, now_ms() - t0);
    }
    return out;
}

TrainedNet train_fm(const Vec& data, int dim, const nn::MlpSpec& u_net, const TrainConfig& cfg) {
    const double t0 = now_ms();
    TrainedNet out;
    out.theta = nn::mlp_init(u_net, cfg.seed);
    auto state = optstoch::make_state(cfg.method, static_cast<int>(out.theta.size()), cfg.hyper);
    SplitRng root(cfg.seed + 1);
    for (int k = 0; k < cfg.steps; ++k) {
        SplitRng rng = root.split(k);
        const GenBatch batch = make_fm_batch(data, dim, cfg.batch_size, rng);
        const LossGrad lg = fm_loss(u_net, out.theta, batch);
        auto step = optstoch::stochastic_step(state, out.theta, lg.grad);
        out.theta = std::move(step.theta);
        state = std::move(step.state);
        out.trace.add(k, lg.loss, nrm2(lg.grad), state.hyper.alpha, 0, now_ms() - t0);
    }
    return out;
}

TrainedVae train_vae(const Vec& data, const VaeNets& nets, const TrainConfig& cfg) {
    const double t0 = now_ms();
    const int d = nets.data_dim;
    const int rows = static_cast<int>(data.size()) / d;
    TrainedVae out;
    out.theta_enc = nn::mlp_init(nets.encoder, cfg.seed);
    out.theta_dec = nn::mlp_init(nets.decoder, cfg.seed + 17);
    auto st_e = optstoch::make_state(cfg.method, static_cast<int>(out.theta_enc.size()), cfg.hyper);
    auto st_d = optstoch::make_state(cfg.method, static_cast<int>(out.theta_dec.size()), cfg.hyper);
    SplitRng root(cfg.seed + 2);
    for (int k = 0; k < cfg.steps; ++k) {
        SplitRng rng = root.split(k);
        Vec bx;
        for (int i = 0; i < cfg.batch_size; ++i) {
            const int row = static_cast<int>(rng.next_below(rows));
            for (int j = 0; j < d; ++j) bx.push_back(data[static_cast<std::size_t>(row) * d + j]);
        }
        const VaeLoss vl =
            vae_elbo(nets, out.theta_enc, out.theta_dec, bx, cfg.batch_size, rng.next_u64());
        auto se = optstoch::stochastic_step(st_e, out.theta_enc, vl.grad_encoder);
        auto sd = optstoch::stochastic_step(st_d, out.theta_dec, vl.grad_decoder);
        out.theta_enc = std::move(se.theta);
        out.theta_dec = std::move(sd.theta);
        st_e = std::move(se.state);
        st_d = std::move(sd.state);
        out.trace.add(k, vl.loss, 0.0, st_e.hyper.alpha, 0, now_ms() - t0);
    }
    return out;
}

} // namespace mfdl::genmod
