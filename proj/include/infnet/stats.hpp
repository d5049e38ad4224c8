#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "infnet/common.hpp"
#include "infnet/rng.hpp"

namespace infnet {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// one-sided test that proportion c1/n1 exceeds c2/n2 (pooled z-test)
inline double two_proportion_pvalue(std::size_t c1, std::size_t n1, std::size_t c2,
                                    std::size_t n2) {
    check(n1 > 0 && n2 > 0, "two_proportion_pvalue: empty sample");
    const double p1 = double(c1) / double(n1);
    const double p2 = double(c2) / double(n2);
    const double pooled = double(c1 + c2) / double(n1 + n2);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    if (se == 0.0) return p1 > p2 ? 0.0 : 1.0;
    return 1.0 - normal_cdf((p1 - p2) / se);
}

// average ranks, ties get the mean of their rank span
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[order[j]] == v[order[i]]) ++j;
        const double avg = (double(i) + double(j - 1)) / 2.0 + 1.0;
        for (std::size_t p = i; p < j; ++p) r[order[p]] = avg;
        i = j;
    }
    return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
    check(x.size() == y.size() && x.size() >= 2, "spearman_rho: need paired samples");
    auto rx = ranks(x);
    auto ry = ranks(y);
    return pearson(rx, ry);
}

// one-sided permutation p-value for rho having the given sign
inline double spearman_permutation_pvalue(std::span<const double> x, std::span<const double> y,
                                          int expected_sign, std::size_t n_perm = 20000,
                                          std::uint64_t seed = 7) {
    const double rho = spearman_rho(x, y) * double(expected_sign);
    Rng rng(seed);
    std::vector<double> shuffled(y.begin(), y.end());
    std::size_t at_least = 0;
    for (std::size_t k = 0; k < n_perm; ++k) {
        rng.shuffle(shuffled);
        if (spearman_rho(x, shuffled) * double(expected_sign) >= rho) ++at_least;
    }
    return double(at_least + 1) / double(n_perm + 1);
}

inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    check(x.size() == y.size() && x.size() >= 2, "ols_slope: need paired samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    check(sxx > 0.0, "ols_slope: x has zero variance");
    return sxy / sxx;
}

}  // namespace infnet
