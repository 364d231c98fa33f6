#pragma once

#include <functional>

#include "mfdl/autodiff.hpp"
#include "mfdl/linalg.hpp"
#include "mfdl/rng.hpp"

namespace mfdl::testing {

// central finite-difference gradient, h = 1e-5 by default
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-5) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

// Random smooth scalar graph: depth-bounded, division and logarithm guarded
// so evaluation stays in-domain for inputs in [-2, 2]^n.
inline autodiff::Graph random_smooth_graph(SplitRng& rng, int n_inputs, int extra_nodes) {
    using autodiff::GraphBuilder;
    GraphBuilder b(n_inputs);
    std::vector<int> pool;
    for (int i = 0; i < n_inputs; ++i) pool.push_back(i);
    auto pick = [&]() { return pool[rng.next_below(pool.size())]; };

    int last = pool.back();
    for (int i = 0; i < extra_nodes; ++i) {
        const int choice = static_cast<int>(rng.next_below(12));
        int node = -1;
        switch (choice) {
            case 0: node = b.add(pick(), pick()); break;
            case 1: node = b.sub(pick(), pick()); break;
            case 2: node = b.mul(b.tanh(pick()), b.sigmoid(pick())); break;
            case 3: node = b.neg(pick()); break;
            case 4: node = b.scale(rng.uniform(-2.0, 2.0), pick()); break;
            case 5: node = b.shift(rng.uniform(-1.0, 1.0), pick()); break;
            case 6: node = b.sin(pick()); break;
            case 7: node = b.cos(pick()); break;
            case 8: node = b.exp(b.tanh(pick())); break;
            case 9: node = b.div(b.tanh(pick()), b.shift(2.0, b.sigmoid(pick()))); break;
            case 10: node = b.log(b.shift(1.5, b.sigmoid(pick()))); break;
            case 11: node = b.powi(2 + static_cast<int>(rng.next_below(2)), b.tanh(pick())); break;
        }
        pool.push_back(node);
        last = node;
    }
    // make sure every input can reach the output so gradients are nontrivial
    int out = last;
    for (int i = 0; i < n_inputs; ++i) out = b.add(out, b.scale(0.1, b.sin(i)));
    return b.finish(out);
}

} // namespace mfdl::testing
