#include "mfdl/opt_det.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::optdet {

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Backtracking line search for a descent direction dir with slope = grad.dir.
// Returns the accepted step and the number of objective evaluations spent.
struct LsOutcome {
    double alpha = 0.0;
    double f_new = 0.0;
    int evals = 0;
};

LsOutcome armijo_backtrack(const ObjectiveHandle& obj, const Vec& x, double fx, const Vec& dir,
                           double slope, const LineSearchConfig& cfg) {
    if (slope >= 0.0) throw NumericError("line search: direction is not a descent direction", x);
    LsOutcome out;
    double alpha = cfg.alpha_bar;
    constexpr int kMaxShrinks = 200;
    for (int l = 0; l <= kMaxShrinks; ++l) {
        Vec xt = x;
        axpy(alpha, dir, xt);
        const double ft = obj.value(xt);
        ++out.evals;
        if (!std::isfinite(ft)) {
            alpha *= cfg.rho;
            continue;
        }
        if (ft <= fx + cfg.c * alpha * slope) {
            out.alpha = alpha;
            out.f_new = ft;
            return out;
        }
        alpha *= cfg.rho;
    }
    throw NumericError("line search: no Armijo step found", x);
}

} // namespace

void LineSearchConfig::validate() const {
    if (alpha_bar <= 0.0) throw std::invalid_argument("line search: alpha_bar must be positive");
    if (rho <= 0.0 || rho >= 1.0) throw std::invalid_argument("line search: rho must be in (0,1)");
    if (c <= 0.0 || c >= 1.0) throw std::invalid_argument("line search: c must be in (0,1)");
    if (eps_tol <= 0.0) throw std::invalid_argument("line search: eps_tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("line search: max_iter must be >= 1");
}

int backtracking_count_bound(double alpha_bar, double rho, double c, double lipschitz) {
    const double v = std::log(2.0 * (1.0 - c) / (alpha_bar * lipschitz)) / std::log(rho);
    return std::max(0, static_cast<int>(std::ceil(v)));
}

OptResult gd_backtracking(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg) {
    cfg.validate();
    const double t0 = now_ms();
    OptResult res;
    res.x = x0;
    double fx = obj.value(res.x);
    if (!std::isfinite(fx)) throw NumericError("gd: non-finite objective at start", res.x);

    for (int k = 0; k < cfg.max_iter; ++k) {
        Vec g = obj.grad(res.x);
        if (!all_finite(g)) throw NumericError("gd: non-finite gradient", res.x);
        const double gn = nrm2(g);
        if (gn < cfg.eps_tol) {
            res.converged = true;
            break;
        }
        Vec dir = scaled(g, -1.0);
        const LsOutcome ls = armijo_backtrack(obj, res.x, fx, dir, -gn * gn, cfg);
        axpy(ls.alpha, dir, res.x);
        fx = ls.f_new;
        res.trace.add(k, fx, gn, ls.alpha, ls.evals, now_ms() - t0);
        ++res.iterations;
    }
    res.f = fx;
    res.grad_norm = nrm2(obj.grad(res.x));
    if (res.grad_norm < cfg.eps_tol) res.converged = true;
    return res;
}

CgResult cg_solve(const std::function<Vec(const Vec&)>& q_apply, const Vec& b, double tol,
                  int max_iter) {
    const int n = static_cast<int>(b.size());
    CgResult res;
    res.x.assign(n, 0.0);
    const double bn = nrm2(b);
    if (bn == 0.0) return res;

    Vec g = scaled(b, -1.0); // g = Qx - b at x = 0
    Vec d = b;               // d = -g
    double best_res = bn;
    Vec best_x = res.x;

    const int limit = std::min(max_iter, n);
    for (int j = 0; j < limit; ++j) {
        const Vec qd = q_apply(d);
        const double curvature = dot(d, qd);
        if (curvature <= 0.0) {
            res.indefinite = true;
            break;
        }
        const double alpha = -dot(g, d) / curvature; // = |g|^2 / d.Qd
        axpy(alpha, d, res.x);
        axpy(alpha, qd, g);
        const double rn = nrm2(g);
        res.residual_history.push_back(rn);
        if (rn < best_res) {
            best_res = rn;
            best_x = res.x;
        }
        ++res.iterations;
        if (rn <= tol * bn) break;
        const double beta = dot(g, qd) / curvature;
        for (int i = 0; i < n; ++i) d[i] = -g[i] + beta * d[i];
    }
    res.x = best_x;
    res.rel_residual = best_res / bn;
    return res;
}

OptResult newton_cg(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg,
                    double rho_cg, int k_cg) {
    cfg.validate();
    if (!obj.hvp) throw std::invalid_argument("newton_cg: objective must provide hvp");
    const double t0 = now_ms();
    OptResult res;
    res.x = x0;
    double fx = obj.value(res.x);

    for (int k = 0; k < cfg.max_iter; ++k) {
        Vec g = obj.grad(res.x);
        if (!all_finite(g)) throw NumericError("newton_cg: non-finite gradient", res.x);
        const double gn = nrm2(g);
        if (gn < cfg.eps_tol) {
            res.converged = true;
            break;
        }
        const Vec rhs = scaled(g, -1.0);
        const Vec& xk = res.x;
        CgResult cg = cg_solve([&](const Vec& v) { return obj.hvp(xk, v); }, rhs, rho_cg, k_cg);
        Vec dir = cg.x;
        double slope = dot(g, dir);
        if (cg.indefinite || nrm2(dir) == 0.0 || slope >= 0.0) {
            dir = scaled(g, -1.0); // steepest-descent fallback
            slope = -gn * gn;
        }
        const LsOutcome ls = armijo_backtrack(obj, res.x, fx, dir, slope, cfg);
        axpy(ls.alpha, dir, res.x);
        fx = ls.f_new;
        res.trace.add(k, fx, gn, ls.alpha, ls.evals, now_ms() - t0);
        ++res.iterations;
    }
    res.f = fx;
    res.grad_norm = nrm2(obj.grad(res.x));
    if (res.grad_norm < cfg.eps_tol) res.converged = true;
    return res;
}

OptResult bfgs(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg) {
    cfg.validate();
    const double t0 = now_ms();
    const int n = static_cast<int>(x0.size());
    OptResult res;
    res.x = x0;
    double fx = obj.value(res.x);
    Vec g = obj.grad(res.x);
    Mat h = Mat::identity(n);

    for (int k = 0; k < cfg.max_iter; ++k) {
        if (!all_finite(g)) throw NumericError("bfgs: non-finite gradient", res.x);
        const double gn = nrm2(g);
        if (gn < cfg.eps_tol) {
            res.converged = true;
            break;
        }
        Vec dir = scaled(matvec(h, g), -1.0);
        double slope = dot(g, dir);
        if (slope >= 0.0) { // safeguard: reset curvature model
            h = Mat::identity(n);
            dir = scaled(g, -1.0);
            slope = -gn * gn;
        }
        const LsOutcome ls = armijo_backtrack(obj, res.x, fx, dir, slope, cfg);
        Vec x_new = res.x;
        axpy(ls.alpha, dir, x_new);
        Vec g_new = obj.grad(x_new);

        const Vec s = vdiff(x_new, res.x);
        const Vec y = vdiff(g_new, g);
        const double ys = dot(y, s);
        if (ys > 1e-10) {
            // H' = H + (1 + y.Hy/ys) s s^T / ys - (H y s^T + s y^T H)/ys
            const Vec hy = matvec(h, y);
            const double yhy = dot(y, hy);
            const double r = 1.0 / ys;
            const double coef = (1.0 + r * yhy) * r;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    h(i, j) += coef * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }

        res.x = std::move(x_new);
        g = std::move(g_new);
        fx = ls.f_new;
        res.trace.add(k, fx, gn, ls.alpha, ls.evals, now_ms() - t0);
        ++res.iterations;
    }
    res.f = fx;
    res.grad_norm = nrm2(obj.grad(res.x));
    if (res.grad_norm < cfg.eps_tol) res.converged = true;
    return res;
}

namespace {

// J^T v for a row-major Jacobian
Vec jac_t_vec(const Mat& j, const Vec& v) { return matvec(transpose(j), v); }

ObjectiveHandle penalty_subproblem(const ObjectiveHandle& f, const ConstraintSet& h, double gamma) {
    ObjectiveHandle q;
    q.dimension = f.dimension;
    q.value = [&f, &h, gamma](const Vec& x) {
        const Vec hv = h.eval(x);
        return f.value(x) + dot(hv, hv) / (2.0 * gamma);
    };
    q.grad = [&f, &h, gamma](const Vec& x) {
        Vec g = f.grad(x);
        const Vec hv = h.eval(x);
        const Mat j = h.jacobian(x);
        axpy(1.0 / gamma, jac_t_vec(j, hv), g);
        return g;
    };
    return q;
}

} // namespace

ConstrainedResult quadratic_penalty(const ObjectiveHandle& f, const ConstraintSet& h,
                                    const PenaltySchedule& schedule,
                                    const LineSearchConfig& inner_cfg, const Vec& x0) {
    const double t0 = now_ms();
    ConstrainedResult res;
    res.x = x0;
    res.lambda.assign(h.out_dim, 0.0);
    double gamma = schedule.gamma0;
    double eps = schedule.eps0;

    for (int k = 0; k < schedule.max_outer; ++k) {
        ObjectiveHandle q = penalty_subproblem(f, h, gamma);
        LineSearchConfig cfg = inner_cfg;
        cfg.eps_tol = eps;
        OptResult inner = bfgs(q, res.x, cfg); // warm start from previous iterate
        if (!inner.converged && inner.grad_norm > std::max(100.0 * eps, 1e-4))
            throw NumericError("quadratic_penalty: inner solver stagnated", inner.x);
        res.x = inner.x;
        const Vec hv = h.eval(res.x);
        res.lambda = scaled(hv, 1.0 / gamma); // multiplier estimate h(x)/gamma
        const double viol = nrm2(hv);
        res.trace.add(k, f.value(res.x), inner.grad_norm, gamma, inner.iterations, now_ms() - t0);
        ++res.outer_iterations;
        if (viol < schedule.tol_constraint && inner.grad_norm < schedule.tol_grad) {
            res.converged = true;
            break;
        }
        gamma = std::max(gamma * schedule.gamma_factor, schedule.gamma_min);
        eps = std::max(eps * schedule.eps_factor, schedule.eps_min);
    }
    return res;
}

ConstrainedResult augmented_lagrangian(const ObjectiveHandle& f, const ConstraintSet& h,
                                       const ConstraintSet& g, const PenaltySchedule& schedule,
                                       const LineSearchConfig& inner_cfg, const Vec& x0) {
    const double t0 = now_ms();
    ConstrainedResult res;
    res.x = x0;
    res.lambda.assign(h.out_dim, 0.0);
    res.mu.assign(g.out_dim, 0.0);
    double gamma = schedule.gamma0;
    double eps = schedule.eps0;

    for (int k = 0; k < schedule.max_outer; ++k) {
        const Vec lambda = res.lambda;
        const Vec mu = res.mu;
        // l_A = f + lambda.h + |h|^2/(2 gamma)
        //       + (gamma/2) sum_j (max(g_j/gamma + mu_j, 0)^2 - mu_j^2)
        ObjectiveHandle la;
        la.dimension = f.dimension;
        la.value = [&, gamma](const Vec& x) {
            double v = f.value(x);
            if (h.out_dim > 0) {
                const Vec hv = h.eval(x);
                v += dot(lambda, hv) + dot(hv, hv) / (2.0 * gamma);
            }
            if (g.out_dim > 0) {
                const Vec gv = g.eval(x);
                for (int j = 0; j < g.out_dim; ++j) {
                    const double m = std::max(gv[j] / gamma + mu[j], 0.0);
                    v += 0.5 * gamma * (m * m - mu[j] * mu[j]);
                }
            }
            return v;
        };
        la.grad = [&, gamma](const Vec& x) {
            Vec grad = f.grad(x);
            if (h.out_dim > 0) {
                const Vec hv = h.eval(x);
                const Mat j = h.jacobian(x);
                Vec w = lambda;
                axpy(1.0 / gamma, hv, w);
                axpy(1.0, jac_t_vec(j, w), grad);
            }
            if (g.out_dim > 0) {
                const Vec gv = g.eval(x);
                const Mat j = g.jacobian(x);
                Vec w(g.out_dim);
                for (int jj = 0; jj < g.out_dim; ++jj)
                    w[jj] = std::max(mu[jj] + gv[jj] / gamma, 0.0);
                axpy(1.0, jac_t_vec(j, w), grad);
            }
            return grad;
        };

        LineSearchConfig cfg = inner_cfg;
        cfg.eps_tol = eps;
        OptResult inner = bfgs(la, res.x, cfg);
        if (!inner.converged && inner.grad_norm > std::max(100.0 * eps, 1e-4))
            throw NumericError("augmented_lagrangian: inner solver stagnated", inner.x);
        res.x = inner.x;

        double viol = 0.0;
        if (h.out_dim > 0) {
            const Vec hv = h.eval(res.x);
            axpy(1.0 / gamma, hv, res.lambda); // lambda <- lambda + h/gamma
            viol = std::max(viol, nrm_inf(hv));
        }
        if (g.out_dim > 0) {
            const Vec gv = g.eval(res.x);
            for (int j = 0; j < g.out_dim; ++j) {
                res.mu[j] = std::max(res.mu[j] + gv[j] / gamma, 0.0);
                viol = std::max(viol, std::max(gv[j], 0.0));
            }
        }
        res.trace.add(k, f.value(res.x), inner.grad_norm, gamma, inner.iterations, now_ms() - t0);
        ++res.outer_iterations;
        if (viol < schedule.tol_constraint && inner.grad_norm < schedule.tol_grad) {
            res.converged = true;
            break;
        }
        gamma = std::max(gamma * schedule.gamma_factor, schedule.gamma_min);
        eps = std::max(eps * schedule.eps_factor, schedule.eps_min);
    }
    return res;
}

LagrangianResult lagrangian_first_order(const ObjectiveHandle& f, const ConstraintSet& h,
                                        double alpha, double beta, int max_iter, const Vec& x0,
                                        double tol) {
    if (alpha <= 0.0 || beta <= 0.0)
        throw std::invalid_argument("lagrangian_first_order: step sizes must be positive");
    const double t0 = now_ms();
    LagrangianResult res;
    res.x = x0;
    res.lambda.assign(h.out_dim, 0.0);

    for (int k = 0; k < max_iter; ++k) {
        Vec grad = f.grad(res.x);
        Vec hv;
        if (h.out_dim > 0) {
            hv = h.eval(res.x);
            const Mat j = h.jacobian(res.x);
            axpy(1.0, jac_t_vec(j, res.lambda), grad);
        }
        const double stat = nrm2(grad);
        const double feas = h.out_dim > 0 ? nrm2(hv) : 0.0;
        if (stat < tol && feas < tol) {
            res.converged = true;
            break;
        }
        axpy(-alpha, grad, res.x);
        if (h.out_dim > 0) axpy(beta, hv, res.lambda);
        if (nrm2(res.x) > 1e8)
            throw NumericError("lagrangian_first_order: iterates diverged", res.x);
        res.trace.add(k, f.value(res.x), stat, alpha, 0, now_ms() - t0);
        ++res.iterations;
    }
    return res;
}

} // namespace mfdl::optdet
