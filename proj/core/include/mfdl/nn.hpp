#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfdl/linalg.hpp"
#include "mfdl/rng.hpp"

namespace mfdl::nn {

// Scalar activation; celu/swish/swiglu carry their parameters.
struct ActivationKind {
    enum class Kind { sigmoid, tanh_, relu, elu, celu, gelu, swish, swiglu, identity };
    Kind kind = Kind::tanh_;
    double alpha = 1.0;                    // celu: alpha > 0
    double beta = 1.0;                     // swish: beta > 0
    double v = 1.0, w = 1.0, b = 0.0, c = 0.0; // swiglu unit parameters

    static ActivationKind sigmoid() { return {Kind::sigmoid}; }
    static ActivationKind tanh() { return {Kind::tanh_}; }
    static ActivationKind relu() { return {Kind::relu}; }
    static ActivationKind elu() { return {Kind::elu}; }
    static ActivationKind celu(double a);
    static ActivationKind gelu() { return {Kind::gelu}; }
    static ActivationKind swish(double beta);
    static ActivationKind swiglu(double v, double w, double b, double c);
    static ActivationKind identity() { return {Kind::identity}; }
};

struct ActivationValue {
    double value;
    double derivative;
};

// sigma(x) and sigma'(x) for every catalog entry. GELU uses erf(x/2) as the
// book prints it (nonstandard; the usual form uses erf(x/sqrt 2)).
ActivationValue activation_apply(const ActivationKind& kind, double x);

enum class OutputWrapper { none, softmax, box, nonneg, sigmoid, tanh_ };

// widths d0..dL; hidden layers use `hidden_activation`, the last affine layer
// feeds the output wrapper.
struct MlpSpec {
    std::vector<int> widths;
    ActivationKind hidden_activation = ActivationKind::tanh();
    OutputWrapper wrapper = OutputWrapper::none;
    Vec box_lo, box_hi; // for OutputWrapper::box, sized widths.back()

    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    int layer_count() const { return static_cast<int>(widths.size()) - 1; }
    int param_count() const;
    void validate() const;
};

// Flat parameter vector: for l = 1..L, W_l (d_l x d_{l-1}) row-major, then b_l.
using ParamVector = Vec;

// Glorot-style uniform init, biases zero; deterministic in seed.
ParamVector mlp_init(const MlpSpec& spec, std::uint64_t seed);

// Cached per-layer state from a forward pass, for the reverse pass.
struct MlpCache {
    std::vector<Vec> layer_inputs;  // x, h1, ..., h_{L-1} (post-activation)
    Vec pre_output;                 // affine_L output before the wrapper
    Vec output;
};

Vec mlp_forward(const MlpSpec& spec, const ParamVector& theta, const Vec& x,
                MlpCache* cache = nullptr);

// Reverse pass of upstream . y through wrapper and layers.
struct MlpGrad {
    ParamVector dtheta;
    Vec dx;
};
MlpGrad mlp_grad(const MlpSpec& spec, const ParamVector& theta, const Vec& x,
                 const Vec& upstream);

// spec JSON: {"widths":[...],"activation":"relu","wrapper":"none", ...}
std::string spec_to_json(const MlpSpec& spec);
MlpSpec spec_from_json(const std::string& json_text);

// flat little-endian float64 with an 8-byte (uint64) length header
void save_params(std::ostream& os, const ParamVector& theta);
ParamVector load_params(std::istream& is);

} // namespace mfdl::nn
