#pragma once

#include <functional>

#include "mfdl/linalg.hpp"
#include "mfdl/objectives.hpp"
#include "mfdl/trace.hpp"

namespace mfdl::optdet {

using objectives::ObjectiveHandle;

// Backtracking line-search parameters: start at alpha_bar, shrink by rho
// until the Armijo condition holds with constant c; stop the outer loop when
// |grad f| < eps_tol.
struct LineSearchConfig {
    double alpha_bar = 1.0;
    double rho = 0.5;
    double c = 1e-1;
    double eps_tol = 1e-8;
    int max_iter = 1000;

    void validate() const;
};

struct OptResult {
    Vec x;
    Trace trace;
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Gradient descent with backtracking Armijo line search. Every accepted step
// satisfies f(x + a v) <= f(x) - c a |v|^2 with v = -grad f.
OptResult gd_backtracking(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg);

// Conjugate gradient for SPD systems given as a matvec callback.
struct CgResult {
    Vec x;
    int iterations = 0;
    double rel_residual = 0.0;
    bool indefinite = false; // non-positive curvature encountered; x is the best iterate
    Vec residual_history;    // |Qx_j - b| after each iteration
};
CgResult cg_solve(const std::function<Vec(const Vec&)>& q_apply, const Vec& b, double tol,
                  int max_iter);

// Hessian-free inexact Newton: each inner CG stops after k_cg iterations or
// residual <= rho_cg |grad|; indefinite directions fall back to steepest
// descent; steps gated by the same Armijo backtracking.
OptResult newton_cg(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg,
                    double rho_cg = 0.1, int k_cg = 50);

// BFGS with the Sherman-Morrison-Woodbury inverse update; updates with
// curvature y.s <= 1e-10 are skipped.
OptResult bfgs(const ObjectiveHandle& obj, const Vec& x0, const LineSearchConfig& cfg);

// Vector-valued constraint with Jacobian (rows = constraints).
struct ConstraintSet {
    int out_dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;
};

// Outer schedule for penalty/augmented-Lagrangian methods. gamma and eps
// shrink geometrically down to their floors; the run stops when constraint
// violation and inner gradient norm are below tolerance (or max_outer).
// The floors keep the inner problems solvable in double precision.
struct PenaltySchedule {
    double gamma0 = 1.0;
    double eps0 = 1e-1;
    double gamma_factor = 0.2;
    double eps_factor = 0.5;
    int max_outer = 40;
    double tol_constraint = 1e-6;
    double tol_grad = 1e-5;
    double gamma_min = 1e-6;
    double eps_min = 2e-6;
};

struct ConstrainedResult {
    Vec x;
    Vec lambda; // equality multipliers
    Vec mu;     // inequality multipliers (>= 0)
    Trace trace;
    int outer_iterations = 0;
    bool converged = false;
};

// Quadratic penalty: minimize f + |h|^2/(2 gamma_k) with shrinking gamma;
// the multiplier estimate h(x_k)/gamma_k is reported in `lambda`.
ConstrainedResult quadratic_penalty(const ObjectiveHandle& f, const ConstraintSet& h,
                                    const PenaltySchedule& schedule,
                                    const LineSearchConfig& inner_cfg, const Vec& x0);

// Augmented Lagrangian with equality constraints h = 0 and inequality
// constraints g <= 0 (squared-slack elimination for g).
ConstrainedResult augmented_lagrangian(const ObjectiveHandle& f, const ConstraintSet& h,
                                       const ConstraintSet& g, const PenaltySchedule& schedule,
                                       const LineSearchConfig& inner_cfg, const Vec& x0);

// First-order Lagrangian method: simultaneous descent in x, ascent in lambda.
struct LagrangianResult {
    Vec x;
    Vec lambda;
    Trace trace;
    int iterations = 0;
    bool converged = false;
};
LagrangianResult lagrangian_first_order(const ObjectiveHandle& f, const ConstraintSet& h,
                                        double alpha, double beta, int max_iter, const Vec& x0,
                                        double tol = 1e-9);

// Uniform bound on backtracking shrink counts when the gradient
// Lipschitz constant L is known: ceil(log(2(1-c)/(alpha_bar L)) / log rho).
int backtracking_count_bound(double alpha_bar, double rho, double c, double lipschitz);

} // namespace mfdl::optdet
