#pragma once

#include <cstdint>
#include <functional>

#include "mfdl/linalg.hpp"
#include "mfdl/rng.hpp"

namespace mfdl::statutil {

// Gaussian with scalar, diagonal, or full SPD covariance.
struct GaussianParams {
    enum class Cov { scalar, diagonal, full };
    Vec mean;
    Cov cov_kind = Cov::scalar;
    double scalar_var = 1.0; // sigma^2 I
    Vec diag_var;            // diagonal entries
    Mat full_cov;

    int dim() const { return static_cast<int>(mean.size()); }
    void validate() const;
    Mat covariance() const; // dense form
};

// Importance-sampled Monte Carlo for I_h = int h(x) dx with proposal density
// p > 0 on the support of h: J = (1/N) sum h(X_i)/p(X_i).
struct ImportanceSpec {
    std::function<Vec(SplitRng&)> sampler; // draws one point from p
    std::function<double(const Vec&)> density;
    std::function<double(const Vec&)> integrand;
    int n_samples = 1;
    std::uint64_t seed = 0;
};

struct ImportanceResult {
    double estimate = 0.0;
    double standard_error = 0.0; // sqrt(sample variance / N)
};
ImportanceResult importance_estimate(const ImportanceSpec& spec);

// Closed-form divergences and distances.
double gaussian_entropy(const GaussianParams& p);
double kl_gaussian(const GaussianParams& p1, const GaussianParams& p2);
double kl_poisson(double lambda1, double lambda2);
// categorical tables of equal length; natural log, so max is log 2
double js_discrete(const Vec& p, const Vec& q);
// scalar/diagonal covariances only (commuting square roots)
double w2_gaussian(const GaussianParams& p1, const GaussianParams& p2);

// Scalar Euler-Maruyama over N independent paths:
// X_{k+1} = X_k + f(t,X) h + g(t,X) sqrt(h) zeta. The Ito accumulator sums
// X_k dW_k along each path.
struct EmResult {
    Vec terminal;      // X(T) per path
    Vec ito_integral;  // sum X_k dW_k per path
    Vec brownian;      // W(T) per path
};
EmResult euler_maruyama(const std::function<double(double, double)>& drift,
                        const std::function<double(double, double)>& diffusion, double x0,
                        double horizon, double step, std::uint64_t seed, int n_paths,
                        bool accumulate_ito = false);

} // namespace mfdl::statutil
