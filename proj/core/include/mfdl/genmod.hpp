#pragma once

#include <cstdint>
#include <functional>

#include "mfdl/linalg.hpp"
#include "mfdl/nn.hpp"
#include "mfdl/opt_stoch.hpp"
#include "mfdl/rng.hpp"
#include "mfdl/trace.hpp"

namespace mfdl::genmod {

// Noising schedules exposing (alpha_t, beta_t) in closed form.
// OU: alpha = e^{-a t}, beta^2 = 1 - e^{-2 a t} (so alpha^2 + beta^2 = 1).
// VP with linear gamma_t on [0,1]: Gamma(t) = t gmin + t^2 (gmax - gmin)/2,
// alpha = e^{-Gamma}, beta^2 = 1 - e^{-2 Gamma}.
struct Schedule {
    enum class Kind { ou, vp } kind = Kind::ou;
    double a = 1.0;          // ou rate
    double gamma_min = 0.01; // vp bounds
    double gamma_max = 20.0;
    double horizon = 1.0;

    void validate() const;
};

inline constexpr double kTimeFloor = 1e-3; // clamp for the singular ends

struct ScheduleValue {
    double alpha;
    double beta;
};
ScheduleValue schedule_eval(const Schedule& sched, double t);

// Sample times from the density xi(t) proportional to beta_t^2 on
// (kTimeFloor, T] via inverse-CDF on a 1024-knot table.
Vec sample_times(const Schedule& sched, int count, SplitRng& rng);

// Data points, paired noise draws, and times for one training batch.
struct GenBatch {
    int m = 0;
    int dim = 0;
    Vec x0;    // M x d
    Vec noise; // M x d
    Vec t;     // M
    void validate(double t_max) const;
};

GenBatch make_denoise_batch(const Vec& data, int dim, const Schedule& sched, int m, SplitRng& rng);
GenBatch make_fm_batch(const Vec& data, int dim, int m, SplitRng& rng);

struct LossGrad {
    double loss = 0.0;
    nn::ParamVector grad;
};

// Mean squared epsilon-prediction error; eps_net maps (x_t, t) -> R^d.
LossGrad denoise_loss(const nn::MlpSpec& eps_net, const nn::ParamVector& theta,
                      const Schedule& sched, const GenBatch& batch);

// Score learned from the epsilon network: s_t(x) = -eps(x, t) / beta_t.
std::function<Vec(const Vec&, double)> score_from_eps_net(const nn::MlpSpec& eps_net,
                                                          nn::ParamVector theta,
                                                          Schedule sched);

enum class SampleMode { em, pf_ode };

// Reverse-time generation driven by score s(x, t). em draws one Gaussian per
// step and sample; pf_ode integrates deterministically (rk4) with noise only
// at initialization. Requires an OU schedule. Returns n x d samples row-major.
Vec diffusion_sample(const std::function<Vec(const Vec&, double)>& score, const Schedule& sched,
                     int dim, SampleMode mode, int n_samples, int steps, std::uint64_t seed);

// Flow matching: regression of u(x_t, t) onto z - eps with x_t = t z + (1-t) eps.
LossGrad fm_loss(const nn::MlpSpec& u_net, const nn::ParamVector& theta, const GenBatch& batch);

// Integrate dx/dt = u(x, t) for t in [0, 1 - kTimeFloor] from N(0, I) draws.
Vec fm_sample(const nn::MlpSpec& u_net, const nn::ParamVector& theta, int dim, int n_samples,
              int steps, std::uint64_t seed);

// --- VAE -------------------------------------------------------------------

inline constexpr double kSigmaFloor = 1e-3;

// Encoder d -> (m + 1): mu_eta and a raw scalar mapped through
// sigma = kSigmaFloor + softplus(raw). Decoder m -> (d + 1) likewise.
struct VaeNets {
    nn::MlpSpec encoder;
    nn::MlpSpec decoder;
    int data_dim = 0;
    int latent_dim = 0;
    void validate() const;
};

struct VaeLoss {
    double loss = 0.0; // -(A - B) averaged over the batch
    double recon_term = 0.0;
    double kl_term = 0.0;
    nn::ParamVector grad_encoder;
    nn::ParamVector grad_decoder;
    int sigma_clamps = 0; // diagnostics: how often the floor was active
};

// Single-sample reparameterized estimator: one eps per data point.
VaeLoss vae_elbo(const VaeNets& nets, const nn::ParamVector& theta_enc,
                 const nn::ParamVector& theta_dec, const Vec& batch_x, int batch_m,
                 std::uint64_t seed);

// --- small training loops (shared by CLI and tests) ------------------------

struct TrainConfig {
    int steps = 1000;
    int batch_size = 64;
    optstoch::Method method = optstoch::Method::adam;
    optstoch::Hyper hyper;
    std::uint64_t seed = 0;
};

struct TrainedNet {
    nn::ParamVector theta;
    Trace trace;
};

TrainedNet train_denoiser(const Vec& data, int dim, const Schedule& sched,
                          const nn::MlpSpec& eps_net, const TrainConfig& cfg);
TrainedNet train_fm(const Vec& data, int dim, const nn::MlpSpec& u_net, const TrainConfig& cfg);

struct TrainedVae {
    nn::ParamVector theta_enc;
    nn::ParamVector theta_dec;
    Trace trace;
};
TrainedVae train_vae(const Vec& data, const VaeNets& nets, const TrainConfig& cfg);

} // namespace mfdl::genmod
