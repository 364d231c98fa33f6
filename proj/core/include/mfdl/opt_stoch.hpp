#pragma once

#include <cstdint>
#include <string>

#include "mfdl/linalg.hpp"

namespace mfdl::optstoch {

enum class Method { sgd, momentum, adagrad, rmsprop, adam, adamw, muon };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct Hyper {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999; // 0.99 default for rmsprop (set by make_state)
    double eps = 1e-8;
    double weight_decay = 0.01; // adamw lambda
};

// Optimizer state for the elementwise methods; one update of stochastic_step
// is a pure transition (state in, state out).
struct StochState {
    Method method = Method::sgd;
    std::int64_t k = 1; // step counter, starts at 1
    Vec m;              // first-moment buffer
    Vec v;              // second-moment buffer (componentwise, >= 0)
    Hyper hyper;
};

// state sized for an n-parameter vector, with the usual default
// hyperparameters for the chosen method
StochState make_state(Method method, int n, Hyper hyper = {});

// JSON hyperparameter block, e.g.
//   {"method":"adam","alpha":1e-3,"beta1":0.9,"beta2":0.999,
//    "eps":1e-8,"weight_decay":0.01}
// Missing keys keep their defaults.
std::pair<Method, Hyper> hyper_from_json(const std::string& text);

struct StepResult {
    Vec theta;
    StochState state;
};

// One update of the selected method; deterministic in (state, theta, g).
StepResult stochastic_step(const StochState& state, const Vec& theta, const Vec& g);

// Newton-Schulz orthogonalization: pre-normalize by the Frobenius norm, then
// iterate phi(X) = aX + b(XX^T)X + c(XX^T)^2 X up to K times (early stop when
// the relative change drops below eps). Drives singular values toward 1.
struct NsCoeffs {
    double a = 3.4445;
    double b = -4.775;
    double c = 2.0315;
};
Mat newton_schulz(const Mat& m, NsCoeffs coeffs, int k_iters, double eps);

// Muon configuration for one 2-D weight matrix.
struct MuonConfig {
    NsCoeffs coeffs;
    int ns_iters = 5;
    double ns_eps = 1e-7;
    double momentum = 0.95;
    double weight_decay = 0.1;
    double alpha = 1e-3;
    bool shape_scaled_step = false; // multiply alpha by sqrt(max(1, rows/cols))

    void validate() const;
};

struct MuonStepResult {
    Mat weight;
    Mat momentum_buffer;
};

// M <- mu M + g; O <- NS(M); W <- W - alpha lambda W - alpha O.
MuonStepResult muon_step(const MuonConfig& cfg, const Mat& weight, const Mat& grad,
                         const Mat& momentum_buffer);

} // namespace mfdl::optstoch
