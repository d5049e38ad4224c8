#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "infnet/autodiff.hpp"

namespace infnet {

template <class Real>
struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<Real>> m;  // first moments, one buffer per parameter
    std::vector<std::vector<Real>> v;  // second moments

    static AdamState init(std::span<const Tensor<Real>> params, double lr = 0.001) {
        AdamState s;
        s.lr = lr;
        for (const auto& p : params) {
            s.m.emplace_back(p.size(), Real(0));
            s.v.emplace_back(p.size(), Real(0));
        }
        return s;
    }
};

// Standard Adam with bias correction; reads gradients from each parameter's
// grad buffer and updates values in place.
template <class Real>
void adam_step(std::span<Tensor<Real>> params, AdamState<Real>& state) {
    check(params.size() == state.m.size(), "adam_step: state does not match parameter list");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params[p];
        check(state.m[p].size() == t.size(), "adam_step: moment buffer shape mismatch");
        auto& m = state.m[p];
        auto& v = state.v[p];
        const auto& g = t.grad_buffer();
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = Real(state.beta1) * m[i] + Real(1.0 - state.beta1) * g[i];
            v[i] = Real(state.beta2) * v[i] + Real(1.0 - state.beta2) * g[i] * g[i];
            double mhat = double(m[i]) / bc1;
            double vhat = double(v[i]) / bc2;
            t.set_value(i, t.value(i) - Real(state.lr * mhat / (std::sqrt(vhat) + state.eps)));
        }
    }
}

}  // namespace infnet
