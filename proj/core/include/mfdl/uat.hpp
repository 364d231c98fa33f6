#pragma once

#include <functional>
#include <vector>

#include "mfdl/linalg.hpp"

namespace mfdl::uat {

// s-fold composition of the tent map g (2x on [0,1/2], 2(1-x) on [1/2,1]);
// g_s has 2^{s-1} teeth on [0,1].
double sawtooth(int s, double x);

// Piecewise-linear interpolant of x^2 on the dyadic grid j/2^m:
// f_m(x) = x - sum_{s=1..m} g_s(x) / 4^s. Sup error is exactly 2^{-(2m+2)},
// attained at x* = 1 - 2^{-(m+1)}.
double square_approx(int m, double x);

// Approximate product for |a|,|b| <= M with |p(a,b) - ab| <= eps and
// p(a,b) = 0 exactly when a = 0 or b = 0. Built from square_approx with
// accuracy delta = eps / (6 M^2).
double product_net(double eps, double big_m, double a, double b);

// Nonnegative integer multi-index, one entry per spatial dimension.
using MultiIndex = std::vector<int>;

int order(const MultiIndex& k); // |k|_1

// all k with |k|_1 < korder in d dimensions
std::vector<MultiIndex> multi_indices_below(int d, int korder);

// Bump factor product phi_m(x) = prod_i psi(3N(x_i - m_i/N)); the family
// {phi_m : m in {0..N}^d} is a partition of unity on [0,1]^d.
double partition_bump(int n_grid, const MultiIndex& m, const Vec& x);

// Supplies exact derivatives D^k f at requested points.
struct TaylorOracle {
    int dim = 0;
    int korder = 0; // smoothness order k; Taylor degree is k-1
    std::function<double(const MultiIndex&, const Vec&)> deriv;
};

enum class AssemblyMode { exact_fN, relu_composed_h };

// Taylor-polynomial partition-of-unity approximation:
//   exact_fN evaluates sum_m phi_m(x) P_m(x) directly;
//   relu_composed_h chains product_net over the <= d+k-1 factors of each
//   term with tolerance delta and M = d + k.
double taylor_partition_approx(const TaylorOracle& oracle, int n_grid, AssemblyMode mode,
                               const Vec& x, double delta = 1e-6);

} // namespace mfdl::uat
