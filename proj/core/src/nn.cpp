#include "mfdl/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace mfdl::nn {

using json = nlohmann::json;

ActivationKind ActivationKind::celu(double a) {
    if (a <= 0.0) throw std::invalid_argument("celu: alpha must be positive");
    ActivationKind k{Kind::celu};
    k.alpha = a;
    return k;
}

ActivationKind ActivationKind::swish(double beta) {
    if (beta <= 0.0) throw std::invalid_argument("swish: beta must be positive");
    ActivationKind k{Kind::swish};
    k.beta = beta;
    return k;
}

ActivationKind ActivationKind::swiglu(double v, double w, double b, double c) {
    ActivationKind k{Kind::swiglu};
    k.v = v;
    k.w = w;
    k.b = b;
    k.c = c;
    return k;
}

namespace {

double stable_sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

} // namespace

ActivationValue activation_apply(const ActivationKind& kind, double x) {
    using K = ActivationKind::Kind;
    switch (kind.kind) {
        case K::sigmoid: {
            const double s = stable_sigmoid(x);
            return {s, s * (1.0 - s)};
        }
        case K::tanh_: {
            const double t = std::tanh(x);
            return {t, 1.0 - t * t};
        }
        case K::relu:
            return {x > 0.0 ? x : 0.0, x > 0.0 ? 1.0 : 0.0};
        case K::elu:
            if (x >= 0.0) return {x, 1.0};
            return {std::exp(x) - 1.0, std::exp(x)};
        case K::celu:
            if (x >= 0.0) return {x, 1.0};
            return {kind.alpha * (std::exp(x / kind.alpha) - 1.0), std::exp(x / kind.alpha)};
        case K::gelu: {
            // (x/2)(1 + erf(x/2)); erf'(u) = 2/sqrt(pi) e^{-u^2}
            const double e = std::erf(0.5 * x);
            const double de = 1.1283791670955125738961589031215 * std::exp(-0.25 * x * x);
            return {0.5 * x * (1.0 + e), 0.5 * (1.0 + e) + 0.25 * x * de};
        }
        case K::swish: {
            const double s = stable_sigmoid(kind.beta * x);
            return {x * s, s + kind.beta * x * s * (1.0 - s)};
        }
        case K::swiglu: {
            // (vx + c) * swish_1(wx + b)
            const double u = kind.w * x + kind.b;
            const double s = stable_sigmoid(u);
            const double sw = u * s;
            const double dsw = kind.w * (s + u * s * (1.0 - s));
            return {(kind.v * x + kind.c) * sw, kind.v * sw + (kind.v * x + kind.c) * dsw};
        }
        case K::identity:
            return {x, 1.0};
    }
    throw std::logic_error("activation_apply: unhandled kind");
}

int MlpSpec::param_count() const {
    int n = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) n += widths[l] * (widths[l - 1] + 1);
    return n;
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("mlp: need at least one layer");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("mlp: widths must be >= 1");
    if (wrapper == OutputWrapper::box) {
        const std::size_t d = static_cast<std::size_t>(widths.back());
        if (box_lo.size() != d || box_hi.size() != d)
            throw std::invalid_argument("mlp: box bounds must match output width");
        for (std::size_t i = 0; i < d; ++i)
            if (!(box_lo[i] < box_hi[i]))
                throw std::invalid_argument("mlp: box requires lo < hi componentwise");
    }
}

ParamVector mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    SplitRng rng(seed);
    ParamVector theta(spec.param_count(), 0.0);
    std::size_t off = 0;
    for (int l = 1; l <= spec.layer_count(); ++l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        const double bound = std::sqrt(6.0 / (din + dout));
        for (int i = 0; i < dout * din; ++i) theta[off + i] = rng.uniform(-bound, bound);
        off += static_cast<std::size_t>(dout) * din;
        off += dout; // biases stay zero
    }
    return theta;
}

namespace {

void apply_wrapper(const MlpSpec& spec, const Vec& z, Vec& y) {
    const std::size_t d = z.size();
    y.resize(d);
    switch (spec.wrapper) {
        case OutputWrapper::none:
            y = z;
            break;
        case OutputWrapper::softmax: {
            double m = z[0];
            for (double zi : z) m = std::max(m, zi);
            double sum = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                y[i] = std::exp(z[i] - m);
                sum += y[i];
            }
            for (auto& yi : y) yi /= sum;
            break;
        }
        case OutputWrapper::box:
            for (std::size_t i = 0; i < d; ++i)
                y[i] = spec.box_lo[i] + (spec.box_hi[i] - spec.box_lo[i]) * stable_sigmoid(z[i]);
            break;
        case OutputWrapper::nonneg:
            for (std::size_t i = 0; i < d; ++i) y[i] = 0.5 * z[i] * z[i];
            break;
        case OutputWrapper::sigmoid:
            for (std::size_t i = 0; i < d; ++i) y[i] = stable_sigmoid(z[i]);
            break;
        case OutputWrapper::tanh_:
            for (std::size_t i = 0; i < d; ++i) y[i] = std::tanh(z[i]);
            break;
    }
}

// upstream . dy/dz
Vec wrapper_vjp(const MlpSpec& spec, const Vec& z, const Vec& y, const Vec& upstream) {
    const std::size_t d = z.size();
    Vec g(d, 0.0);
    switch (spec.wrapper) {
        case OutputWrapper::none:
            g = upstream;
            break;
        case OutputWrapper::softmax: {
            const double us = dot(upstream, y);
            for (std::size_t i = 0; i < d; ++i) g[i] = y[i] * (upstream[i] - us);
            break;
        }
        case OutputWrapper::box:
            for (std::size_t i = 0; i < d; ++i) {
                const double s = stable_sigmoid(z[i]);
                g[i] = upstream[i] * (spec.box_hi[i] - spec.box_lo[i]) * s * (1.0 - s);
            }
            break;
        case OutputWrapper::nonneg:
            for (std::size_t i = 0; i < d; ++i) g[i] = upstream[i] * z[i];
            break;
        case OutputWrapper::sigmoid:
            for (std::size_t i = 0; i < d; ++i) {
                const double s = stable_sigmoid(z[i]);
                g[i] = upstream[i] * s * (1.0 - s);
            }
            break;
        case OutputWrapper::tanh_:
            for (std::size_t i = 0; i < d; ++i) {
                const double t = std::tanh(z[i]);
                g[i] = upstream[i] * (1.0 - t * t);
            }
            break;
    }
    return g;
}

} // namespace

Vec mlp_forward(const MlpSpec& spec, const ParamVector& theta, const Vec& x, MlpCache* cache) {
    spec.validate();
    if (static_cast<int>(theta.size()) != spec.param_count())
        throw std::invalid_argument("mlp_forward: parameter count mismatch");
    if (static_cast<int>(x.size()) != spec.input_dim())
        throw std::invalid_argument("mlp_forward: input size mismatch");

    Vec h = x;
    if (cache) {
        cache->layer_inputs.clear();
        cache->layer_inputs.push_back(h);
    }
    std::size_t off = 0;
    const int L = spec.layer_count();
    for (int l = 1; l <= L; ++l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        Vec z(dout);
        for (int i = 0; i < dout; ++i) {
            double s = theta[off + static_cast<std::size_t>(dout) * din + i]; // bias
            const std::size_t row = off + static_cast<std::size_t>(i) * din;
            for (int j = 0; j < din; ++j) s += theta[row + j] * h[j];
            z[i] = s;
        }
        off += static_cast<std::size_t>(dout) * (din + 1);
        if (l < L) {
            h.resize(dout);
            for (int i = 0; i < dout; ++i) h[i] = activation_apply(spec.hidden_activation, z[i]).value;
            if (cache) cache->layer_inputs.push_back(h);
        } else {
            h = std::move(z);
        }
    }
    Vec y;
    apply_wrapper(spec, h, y);
    if (cache) {
        cache->pre_output = h;
        cache->output = y;
    }
    return y;
}

MlpGrad mlp_grad(const MlpSpec& spec, const ParamVector& theta, const Vec& x, const Vec& upstream) {
    if (static_cast<int>(upstream.size()) != spec.output_dim())
        throw std::invalid_argument("mlp_grad: upstream size mismatch");
    MlpCache cache;
    mlp_forward(spec, theta, x, &cache);

    MlpGrad out;
    out.dtheta.assign(theta.size(), 0.0);

    Vec delta = wrapper_vjp(spec, cache.pre_output, cache.output, upstream);

    const int L = spec.layer_count();
    // layer offsets
    std::vector<std::size_t> offs(L + 1, 0);
    for (int l = 1; l <= L; ++l)
        offs[l] = offs[l - 1] + static_cast<std::size_t>(spec.widths[l]) * (spec.widths[l - 1] + 1);

    for (int l = L; l >= 1; --l) {
        const int din = spec.widths[l - 1];
        const int dout = spec.widths[l];
        const std::size_t off = offs[l - 1];
        const Vec& hin = cache.layer_inputs[l - 1];

        // delta currently holds dLoss/dz_l; accumulate weight/bias grads
        for (int i = 0; i < dout; ++i) {
            const std::size_t row = off + static_cast<std::size_t>(i) * din;
            for (int j = 0; j < din; ++j) out.dtheta[row + j] += delta[i] * hin[j];
            out.dtheta[off + static_cast<std::size_t>(dout) * din + i] += delta[i];
        }

        // propagate to the layer input
        Vec dh(din, 0.0);
        for (int i = 0; i < dout; ++i) {
            const std::size_t row = off + static_cast<std::size_t>(i) * din;
            for (int j = 0; j < din; ++j) dh[j] += delta[i] * theta[row + j];
        }

        if (l > 1) {
            // through the hidden activation: need pre-activation of layer l-1,
            // recompute from its input (cheap at desk scale)
            const int dprev_in = spec.widths[l - 2];
            const int dprev_out = spec.widths[l - 1];
            const std::size_t poff = offs[l - 2];
            const Vec& pin = cache.layer_inputs[l - 2];
            Vec zprev(dprev_out);
            for (int i = 0; i < dprev_out; ++i) {
                double s = theta[poff + static_cast<std::size_t>(dprev_out) * dprev_in + i];
                const std::size_t row = poff + static_cast<std::size_t>(i) * dprev_in;
                for (int j = 0; j < dprev_in; ++j) s += theta[row + j] * pin[j];
                zprev[i] = s;
            }
            delta.resize(dprev_out);
            for (int i = 0; i < dprev_out; ++i)
                delta[i] = dh[i] * activation_apply(spec.hidden_activation, zprev[i]).derivative;
        } else {
            out.dx = dh;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

std::string activation_name(ActivationKind::Kind k) {
    using K = ActivationKind::Kind;
    switch (k) {
        case K::sigmoid: return "sigmoid";
        case K::tanh_: return "tanh";
        case K::relu: return "relu";
        case K::elu: return "elu";
        case K::celu: return "celu";
        case K::gelu: return "gelu";
        case K::swish: return "swish";
        case K::swiglu: return "swiglu";
        case K::identity: return "identity";
    }
    return "?";
}

ActivationKind::Kind activation_from_name(const std::string& s) {
    using K = ActivationKind::Kind;
    if (s == "sigmoid") return K::sigmoid;
    if (s == "tanh") return K::tanh_;
    if (s == "relu") return K::relu;
    if (s == "elu") return K::elu;
    if (s == "celu") return K::celu;
    if (s == "gelu") return K::gelu;
    if (s == "swish") return K::swish;
    if (s == "swiglu") return K::swiglu;
    if (s == "identity") return K::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string wrapper_name(OutputWrapper w) {
    switch (w) {
        case OutputWrapper::none: return "none";
        case OutputWrapper::softmax: return "softmax";
        case OutputWrapper::box: return "box";
        case OutputWrapper::nonneg: return "nonneg";
        case OutputWrapper::sigmoid: return "sigmoid";
        case OutputWrapper::tanh_: return "tanh";
    }
    return "?";
}

OutputWrapper wrapper_from_name(const std::string& s) {
    if (s == "none") return OutputWrapper::none;
    if (s == "softmax") return OutputWrapper::softmax;
    if (s == "box") return OutputWrapper::box;
    if (s == "nonneg") return OutputWrapper::nonneg;
    if (s == "sigmoid") return OutputWrapper::sigmoid;
    if (s == "tanh") return OutputWrapper::tanh_;
    throw std::invalid_argument("unknown wrapper '" + s + "'");
}

} // namespace

std::string spec_to_json(const MlpSpec& spec) {
    json j;
    j["widths"] = spec.widths;
    j["activation"] = activation_name(spec.hidden_activation.kind);
    j["wrapper"] = wrapper_name(spec.wrapper);
    if (spec.hidden_activation.kind == ActivationKind::Kind::celu)
        j["alpha"] = spec.hidden_activation.alpha;
    if (spec.hidden_activation.kind == ActivationKind::Kind::swish)
        j["beta"] = spec.hidden_activation.beta;
    if (spec.wrapper == OutputWrapper::box) {
        j["box_lo"] = spec.box_lo;
        j["box_hi"] = spec.box_hi;
    }
    return j.dump();
}

MlpSpec spec_from_json(const std::string& text) {
    const json j = json::parse(text);
    MlpSpec spec;
    spec.widths = j.at("widths").get<std::vector<int>>();
    spec.hidden_activation.kind = activation_from_name(j.at("activation").get<std::string>());
    if (j.contains("alpha")) spec.hidden_activation.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) spec.hidden_activation.beta = j["beta"].get<double>();
    spec.wrapper = wrapper_from_name(j.at("wrapper").get<std::string>());
    if (j.contains("box_lo")) spec.box_lo = j["box_lo"].get<Vec>();
    if (j.contains("box_hi")) spec.box_hi = j["box_hi"].get<Vec>();
    spec.validate();
    return spec;
}

void save_params(std::ostream& os, const ParamVector& theta) {
    const std::uint64_t n = theta.size();
    char hdr[8];
    for (int i = 0; i < 8; ++i) hdr[i] = static_cast<char>((n >> (8 * i)) & 0xff);
    os.write(hdr, 8);
    for (double x : theta) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        os.write(b, 8);
    }
}

ParamVector load_params(std::istream& is) {
    char hdr[8];
    if (!is.read(hdr, 8)) throw std::runtime_error("load_params: truncated header");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i)
        n |= static_cast<std::uint64_t>(static_cast<unsigned char>(hdr[i])) << (8 * i);
    ParamVector theta(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        char b[8];
        if (!is.read(b, 8)) throw std::runtime_error("load_params: truncated payload");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        std::memcpy(&theta[k], &bits, 8);
    }
    return theta;
}

} // namespace mfdl::nn
