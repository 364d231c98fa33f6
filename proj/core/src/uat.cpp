#include "mfdl/uat.hpp"

#include <cmath>
#include <stdexcept>

#include "mfdl/errors.hpp"

namespace mfdl::uat {

namespace {

void check_unit(double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("uat: argument outside [0,1]");
}

double tent(double x) { return x <= 0.5 ? 2.0 * x : 2.0 * (1.0 - x); }

// smallest m with 2^{-(2m+2)} <= delta
int square_level_for(double delta) {
    int m = 0;
    double err = 0.25;
    while (err > delta && m < 60) {
        ++m;
        err *= 0.25;
    }
    return m;
}

double psi(double t) {
    const double a = std::abs(t);
    if (a <= 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    return 2.0 - a;
}

} // namespace

double sawtooth(int s, double x) {
    if (s < 1) throw std::invalid_argument("sawtooth: s must be >= 1");
    check_unit(x);
    double v = x;
    for (int i = 0; i < s; ++i) v = tent(v);
    return v;
}

double square_approx(int m, double x) {
    if (m < 0) throw std::invalid_argument("square_approx: m must be >= 0");
    check_unit(x);
    double v = x;
    double g = x;
    double scale = 1.0;
    for (int s = 1; s <= m; ++s) {
        g = tent(g);
        scale *= 0.25;
        v -= scale * g;
    }
    return v;
}

double product_net(double eps, double big_m, double a, double b) {
    if (eps <= 0.0 || eps >= 1.0) throw std::invalid_argument("product_net: eps must be in (0,1)");
    if (big_m < 1.0) throw std::invalid_argument("product_net: M must be >= 1");
    if (std::abs(a) > big_m || std::abs(b) > big_m)
        throw std::domain_error("product_net: inputs outside [-M, M]");

    const double delta = eps / (6.0 * big_m * big_m);
    const int m = square_level_for(delta);
    auto q = [m](double t) { return square_approx(m, t); };
    const double inv = 1.0 / (2.0 * big_m);
    return 2.0 * big_m * big_m *
           (q(std::abs(a + b) * inv) - q(std::abs(a) * inv) - q(std::abs(b) * inv));
}

int order(const MultiIndex& k) {
    int s = 0;
    for (int ki : k) s += ki;
    return s;
}

std::vector<MultiIndex> multi_indices_below(int d, int korder) {
    std::vector<MultiIndex> out;
    MultiIndex cur(d, 0);
    // odometer enumeration with per-entry cap korder-1 and |k|_1 < korder
    while (true) {
        if (order(cur) < korder) out.push_back(cur);
        int i = 0;
        while (i < d) {
            if (++cur[i] < korder) break;
            cur[i] = 0;
            ++i;
        }
        if (i == d) break;
    }
    return out;
}

double partition_bump(int n_grid, const MultiIndex& m, const Vec& x) {
    if (n_grid < 1) throw std::invalid_argument("partition_bump: N must be >= 1");
    if (m.size() != x.size()) throw std::invalid_argument("partition_bump: dimension mismatch");
    double p = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m[i] < 0 || m[i] > n_grid)
            throw std::invalid_argument("partition_bump: index outside 0..N");
        p *= psi(3.0 * n_grid * (x[i] - static_cast<double>(m[i]) / n_grid));
        if (p == 0.0) return 0.0;
    }
    return p;
}

namespace {

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// grid enumeration over m in {0..N}^d
bool next_grid_index(MultiIndex& m, int n_grid) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (++m[i] <= n_grid) return true;
        m[i] = 0;
    }
    return false;
}

} // namespace

double taylor_partition_approx(const TaylorOracle& oracle, int n_grid, AssemblyMode mode,
                               const Vec& x, double delta) {
    const int d = oracle.dim;
    if (d < 1 || d > 2 || oracle.korder < 1 || oracle.korder > 2 || n_grid < 1 || n_grid > 8)
        throw CapabilityError("taylor_partition_approx: supported range is d<=2, k<=2, N<=8");
    if (static_cast<int>(x.size()) != d)
        throw std::invalid_argument("taylor_partition_approx: point dimension mismatch");
    for (double xi : x) check_unit(xi);

    const auto indices = multi_indices_below(d, oracle.korder);
    const double big_m = d + oracle.korder;

    double total = 0.0;
    MultiIndex m(d, 0);
    do {
        Vec center(d);
        for (int i = 0; i < d; ++i) center[i] = static_cast<double>(m[i]) / n_grid;

        if (mode == AssemblyMode::exact_fN) {
            const double phi = partition_bump(n_grid, m, x);
            if (phi == 0.0) continue;
            double pm = 0.0;
            for (const auto& k : indices) {
                double coef = oracle.deriv(k, center);
                double mono = 1.0;
                for (int i = 0; i < d; ++i) {
                    coef /= factorial(k[i]);
                    for (int p = 0; p < k[i]; ++p) mono *= (x[i] - center[i]);
                }
                pm += coef * mono;
            }
            total += phi * pm;
        } else {
            for (const auto& k : indices) {
                double coef = oracle.deriv(k, center);
                for (int i = 0; i < d; ++i) coef /= factorial(k[i]);
                if (coef == 0.0) continue;

                // factor list: d bump factors then |k|_1 linear factors
                Vec factors;
                for (int i = 0; i < d; ++i)
                    factors.push_back(psi(3.0 * n_grid * (x[i] - center[i])));
                for (int i = 0; i < d; ++i)
                    for (int p = 0; p < k[i]; ++p) factors.push_back(x[i] - center[i]);

                // right fold with the approximate product
                double acc = factors.back();
                for (int i = static_cast<int>(factors.size()) - 2; i >= 0; --i)
                    acc = product_net(delta, big_m, factors[i], acc);
                total += coef * acc;
            }
        }
    } while (next_grid_index(m, n_grid));
    return total;
}

} // namespace mfdl::uat
