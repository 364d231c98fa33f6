#include "mfdl/statutil.hpp"

#include <cmath>
#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::statutil {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void GaussianParams::validate() const {
    const int d = dim();
    if (d < 1) throw std::invalid_argument("gaussian: empty mean");
    switch (cov_kind) {
        case Cov::scalar:
            if (scalar_var <= 0.0) throw std::invalid_argument("gaussian: variance must be positive");
            break;
        case Cov::diagonal:
            if (static_cast<int>(diag_var.size()) != d)
                throw std::invalid_argument("gaussian: diagonal size mismatch");
            for (double v : diag_var)
                if (v <= 0.0) throw std::invalid_argument("gaussian: variance must be positive");
            break;
        case Cov::full:
            if (full_cov.rows != d || full_cov.cols != d)
                throw std::invalid_argument("gaussian: covariance shape mismatch");
            cholesky(full_cov); // throws if not SPD
            break;
    }
}

Mat GaussianParams::covariance() const {
    const int d = dim();
    Mat c(d, d);
    switch (cov_kind) {
        case Cov::scalar:
            for (int i = 0; i < d; ++i) c(i, i) = scalar_var;
            break;
        case Cov::diagonal:
            for (int i = 0; i < d; ++i) c(i, i) = diag_var[i];
            break;
        case Cov::full:
            c = full_cov;
            break;
    }
    return c;
}

ImportanceResult importance_estimate(const ImportanceSpec& spec) {
    if (spec.n_samples < 1) throw std::invalid_argument("importance: need at least one sample");
    SplitRng rng(spec.seed);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < spec.n_samples; ++i) {
        const Vec x = spec.sampler(rng);
        const double p = spec.density(x);
        if (p <= 0.0)
            throw NumericError("importance: proposal density vanished at a drawn sample", x);
        const double w = spec.integrand(x) / p;
        sum += w;
        sum_sq += w * w;
    }
    ImportanceResult res;
    const double n = spec.n_samples;
    res.estimate = sum / n;
    const double var = spec.n_samples > 1
                           ? (sum_sq - sum * sum / n) / (n - 1.0)
                           : 0.0;
    res.standard_error = std::sqrt(std::max(0.0, var) / n);
    return res;
}

double gaussian_entropy(const GaussianParams& p) {
    p.validate();
    const int d = p.dim();
    double logdet = 0.0;
    switch (p.cov_kind) {
        case GaussianParams::Cov::scalar:
            logdet = d * std::log(p.scalar_var);
            break;
        case GaussianParams::Cov::diagonal: {
            logdet = 0.0;
            for (double v : p.diag_var) logdet += std::log(v);
            break;
        }
        case GaussianParams::Cov::full:
            logdet = logdet_spd(p.full_cov);
            break;
    }
    return 0.5 * d * (1.0 + std::log(kTwoPi)) + 0.5 * logdet;
}

double kl_gaussian(const GaussianParams& p1, const GaussianParams& p2) {
    p1.validate();
    p2.validate();
    const int d = p1.dim();
    if (p2.dim() != d) throw std::invalid_argument("kl_gaussian: dimension mismatch");

    const Mat s1 = p1.covariance();
    const Mat s2 = p2.covariance();

    // tr(S2^{-1} S1) and the quadratic form via the Cholesky solve of S2
    double trace = 0.0;
    {
        for (int j = 0; j < d; ++j) {
            Vec col(d);
            for (int i = 0; i < d; ++i) col[i] = s1(i, j);
            const Vec sol = solve_spd(s2, col);
            trace += sol[j];
        }
    }
    const Vec dmu = vdiff(p2.mean, p1.mean);
    const double quad = dot(dmu, solve_spd(s2, dmu));
    const double logdet = logdet_spd(s2) - logdet_spd(s1);
    return 0.5 * (logdet - d + trace + quad);
}

double kl_poisson(double lambda1, double lambda2) {
    if (lambda1 <= 0.0 || lambda2 <= 0.0)
        throw std::invalid_argument("kl_poisson: rates must be positive");
    return lambda1 * std::log(lambda1 / lambda2) + lambda2 - lambda1;
}

double js_discrete(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw std::invalid_argument("js: tables must have equal length");
    auto check = [](const Vec& t) {
        double s = 0.0;
        for (double v : t) {
            if (v < 0.0) throw std::invalid_argument("js: negative mass");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("js: table does not sum to 1");
    };
    check(p);
    check(q);
    // per-index terms combined before accumulating keeps JS(p,q) and
    // JS(q,p) bitwise identical
    double js = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = 0.5 * (p[i] + q[i]);
        const double a = p[i] > 0.0 ? 0.5 * p[i] * std::log(p[i] / r) : 0.0;
        const double b = q[i] > 0.0 ? 0.5 * q[i] * std::log(q[i] / r) : 0.0;
        js += a + b;
    }
    return js;
}

double w2_gaussian(const GaussianParams& p1, const GaussianParams& p2) {
    p1.validate();
    p2.validate();
    if (p1.cov_kind == GaussianParams::Cov::full || p2.cov_kind == GaussianParams::Cov::full)
        throw CapabilityError("w2_gaussian: full covariances unsupported (need commuting roots)");
    const int d = p1.dim();
    if (p2.dim() != d) throw std::invalid_argument("w2_gaussian: dimension mismatch");

    auto var_at = [](const GaussianParams& p, int i) {
        return p.cov_kind == GaussianParams::Cov::scalar ? p.scalar_var : p.diag_var[i];
    };
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dm = p1.mean[i] - p2.mean[i];
        const double ds = std::sqrt(var_at(p1, i)) - std::sqrt(var_at(p2, i));
        acc += dm * dm + ds * ds;
    }
    return std::sqrt(acc);
}

EmResult euler_maruyama(const std::function<double(double, double)>& drift,
                        const std::function<double(double, double)>& diffusion, double x0,
                        double horizon, double step, std::uint64_t seed, int n_paths,
                        bool accumulate_ito) {
    if (step <= 0.0 || horizon <= 0.0)
        throw std::invalid_argument("euler_maruyama: step and horizon must be positive");
    const int n_steps = static_cast<int>(std::ceil(horizon / step - 1e-12));

    SplitRng root(seed);
    EmResult res;
    res.terminal.resize(n_paths);
    res.ito_integral.assign(n_paths, 0.0);
    res.brownian.assign(n_paths, 0.0);
    for (int p = 0; p < n_paths; ++p) {
        SplitRng rng = root.split(p);
        double x = x0;
        double w = 0.0;
        double ito = 0.0;
        double t = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            const double h = std::min(step, horizon - t);
            const double dw = std::sqrt(h) * rng.next_gaussian();
            if (accumulate_ito) ito += x * dw;
            x += drift(t, x) * h + diffusion(t, x) * dw;
            w += dw;
            t += h;
            if (!std::isfinite(x))
                throw NumericError("euler_maruyama: path blow-up", {x});
        }
        res.terminal[p] = x;
        res.brownian[p] = w;
        res.ito_integral[p] = ito;
    }
    return res;
}

} // namespace mfdl::statutil
