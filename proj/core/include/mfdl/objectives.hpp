#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "mfdl/autodiff.hpp"
#include "mfdl/linalg.hpp"
#include "mfdl/nn.hpp"

namespace mfdl::objectives {

// Feature matrix X (M x d, row-major) and targets Y (length M).
struct Dataset {
    int m = 0;
    int d = 0;
    Vec x; // row-major M x d
    Vec y;

    double feature(int i, int j) const { return x[static_cast<std::size_t>(i) * d + j]; }
    void validate(bool binary_targets = false) const;
};

// header row, last column = target, remaining columns = features
Dataset load_dataset_csv(std::istream& is);
Dataset load_dataset_csv_file(const std::string& path);

// Generic differentiable objective handed to the optimizer modules.
struct ObjectiveHandle {
    int dimension = 0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Vec(const Vec&, const Vec&)> hvp; // empty when unavailable
    std::optional<double> known_minimum;
    std::optional<Vec> known_minimizer;
};

// f(theta) = 1/2 |Y - [X,1] theta|^2 with the normal-equation solution
// attached. Throws on rank-deficient normal equations.
ObjectiveHandle least_squares(const Dataset& data);

// Logistic negative log-likelihood with gradient and exact Hessian products;
// the Hessian is PSD everywhere.
ObjectiveHandle logistic_nll(const Dataset& data);

// The batch-vs-stochastic quadratic family f_i(x) = (x - z_i)^2 on the grid
// z_i = -1 + 2(i-1)/(N-1); average F_N(x) = x^2 + const with minimizer 0.
struct SgFamily {
    int n = 0;
    Vec z;
    double component_value(int i, double x) const;
    double component_grad(int i, double x) const;
    ObjectiveHandle average;
};
SgFamily sg_family(int n);

// --- PDE benchmark objectives over network parameters --------------------

enum class PdeKind { pinn_poisson, deep_ritz };

// Differentiable scalar field u(x; theta) presented as per-point graphs over
// theta with outputs [u, du/dx_1..du/dx_d, d2u/dx_1^2..d2u/dx_d^2].
struct FieldGraphs {
    int dim = 0;
    int n_params = 0;
    std::function<autodiff::Graph(const Vec& x)> at;
};

// MLP-backed field; boundary_factor multiplies by prod x_i(1-x_i).
// Throws if the hidden activation is ReLU (Laplacian undefined).
FieldGraphs mlp_field(const nn::MlpSpec& spec, bool boundary_factor);

// Monte Carlo collocation points are sampled uniformly on (0,1)^d once at
// construction and frozen, so the objective is deterministic in seed.
ObjectiveHandle pde_loss(PdeKind kind, const FieldGraphs& field,
                         std::function<double(const Vec&)> f_source, int sample_count,
                         std::uint64_t seed);

// Classic two-dimensional banana benchmark, minimizer (1, 1).
ObjectiveHandle rosenbrock();

} // namespace mfdl::objectives
