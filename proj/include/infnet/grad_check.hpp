#pragma once

#include <span>

#include "infnet/autodiff.hpp"

namespace infnet {

// Central-difference check of one scalar-valued function against the tape's
// analytic gradient. `f` must rebuild its computation from scratch on the
// given tape so repeated evaluation stays independent.
//
// Relative error per element: |a - n| / max(1, |a|, |n|).
template <class F>
double grad_check(F f, Tensor<double> x, double h = 1e-5) {
    Tape<double> tape;
    auto loss = f(tape, x);
    check(loss.is_scalar(), "grad_check: function must be scalar-valued");
    x.zero_grad();
    tape.backward(loss);
    std::vector<double> analytic(x.grad_buffer());

    double max_err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.value(i);
        Tape<double> t1, t2;
        x.set_value(i, orig + h);
        double up = f(t1, x).value(0);
        x.set_value(i, orig - h);
        double dn = f(t2, x).value(0);
        x.set_value(i, orig);
        double numeric = (up - dn) / (2.0 * h);
        double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
    }
    return max_err;
}

// Same check across a whole parameter list; `loss_fn` rebuilds the loss on a
// fresh tape using the parameters' current values.
template <class F>
double grad_check_params(F loss_fn, std::span<Tensor<double>> params, double h = 1e-5) {
    Tape<double> tape;
    auto loss = loss_fn(tape);
    check(loss.is_scalar(), "grad_check_params: loss must be scalar");
    for (auto& p : params) p.zero_grad();
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.grad_buffer());

    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p.value(i);
            Tape<double> t1, t2;
            p.set_value(i, orig + h);
            double up = loss_fn(t1).value(0);
            p.set_value(i, orig - h);
            double dn = loss_fn(t2).value(0);
            p.set_value(i, orig);
            double numeric = (up - dn) / (2.0 * h);
            double a = analytic[pi][i];
            double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            max_err = std::max(max_err, std::abs(a - numeric) / denom);
        }
    }
    return max_err;
}

}  // namespace infnet
