#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "infnet/common.hpp"

namespace infnet {

namespace detail {

template <class Real>
struct TensorData {
    std::vector<std::size_t> shape;
    std::vector<Real> values;
    std::vector<Real> grad;  // allocated iff requires_grad
    std::vector<Real> adj;   // scratch adjoints, owned by Tape::backward
    bool requires_grad = false;
    std::uint64_t epoch = 0;
};

}  // namespace detail

inline std::string shape_str(std::span<const std::size_t> shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

// Value-semantics handle to shared tensor storage. Copies alias the same
// buffer, which is what the tape's backward closures rely on.
template <class Real>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.d_ = std::make_shared<detail::TensorData<Real>>();
        t.d_->shape = std::move(shape);
        std::size_t n = 1;
        for (auto d : t.d_->shape) n *= d;
        t.d_->values.assign(n, Real(0));
        t.d_->requires_grad = requires_grad;
        if (requires_grad) t.d_->grad.assign(n, Real(0));
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<Real> values,
                       bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        check(values.size() == t.size(), "tensor: values length does not match shape");
        t.d_->values = std::move(values);
        return t;
    }

    static Tensor scalar(Real v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    bool valid() const { return d_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape[i]; }
    std::size_t size() const { return d_->values.size(); }
    bool is_scalar() const { return size() == 1; }
    bool requires_grad() const { return d_->requires_grad; }

    Real* data() { return d_->values.data(); }
    const Real* data() const { return d_->values.data(); }
    Real value(std::size_t i = 0) const { return d_->values[i]; }
    void set_value(std::size_t i, Real v) { d_->values[i] = v; }
    const std::vector<Real>& values() const { return d_->values; }
    std::vector<Real>& values_mutable() { return d_->values; }

    Real grad(std::size_t i = 0) const { return d_->grad[i]; }
    std::vector<Real>& grad_buffer() { return d_->grad; }
    const std::vector<Real>& grad_buffer() const { return d_->grad; }
    void zero_grad() {
        if (d_->requires_grad) std::fill(d_->grad.begin(), d_->grad.end(), Real(0));
    }

    detail::TensorData<Real>* raw() const { return d_.get(); }

private:
    std::shared_ptr<detail::TensorData<Real>> d_;
};

// Reverse-mode tape. Ops append nodes in execution order; backward() replays
// them in reverse, accumulating adjoints into scratch buffers and flushing
// the result into .grad of every tensor that requires gradients. grads
// accumulate across backward() calls until explicitly zeroed.
template <class Real>
class Tape {
public:
    struct Node {
        std::vector<Tensor<Real>> tensors;  // inputs and output
        std::function<void()> backward;
    };

    void record(std::vector<Tensor<Real>> tensors, std::function<void()> backward) {
        nodes_.push_back({std::move(tensors), std::move(backward)});
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void backward(const Tensor<Real>& loss) {
        if (!loss.valid() || !loss.is_scalar())
            fail("backward: loss must be a scalar tensor");
        // epochs are process-wide so tapes never mistake another tape's
        // leftover adjoints for their own
        const std::uint64_t epoch = next_epoch();
        std::vector<detail::TensorData<Real>*> involved;
        auto touch = [&](const Tensor<Real>& t) {
            auto* d = t.raw();
            if (d->epoch != epoch) {
                d->epoch = epoch;
                d->adj.assign(d->values.size(), Real(0));
                involved.push_back(d);
            }
        };
        touch(loss);
        for (const auto& node : nodes_)
            for (const auto& t : node.tensors) touch(t);
        loss.raw()->adj[0] = Real(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
        for (auto* d : involved)
            if (d->requires_grad)
                for (std::size_t i = 0; i < d->grad.size(); ++i) d->grad[i] += d->adj[i];
    }

private:
    static std::uint64_t next_epoch() {
        static std::atomic<std::uint64_t> counter{0};
        return ++counter;
    }

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
void require_same_shape(const char* op, const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.shape() != b.shape())
        fail("%s: shape mismatch %s vs %s", op, shape_str(a.shape()).c_str(),
             shape_str(b.shape()).c_str());
}

template <class Real>
bool any_grad(std::span<const Tensor<Real>> ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

}  // namespace detail

template <class Real>
Tensor<Real> add(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_shape("add", a, b);
    auto out = Tensor<Real>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.set_value(i, a.value(i) + b.value(i));
    if (out.requires_grad())
        tape.record({a, b, out}, [a, b, out]() {
            auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) {
                a.raw()->adj[i] += oadj[i];
                b.raw()->adj[i] += oadj[i];
            }
        });
    return out;
}

template <class Real>
Tensor<Real> sub(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_shape("sub", a, b);
    auto out = Tensor<Real>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.set_value(i, a.value(i) - b.value(i));
    if (out.requires_grad())
        tape.record({a, b, out}, [a, b, out]() {
            auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) {
                a.raw()->adj[i] += oadj[i];
                b.raw()->adj[i] -= oadj[i];
            }
        });
    return out;
}

template <class Real>
Tensor<Real> mul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_shape("mul", a, b);
    auto out = Tensor<Real>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.set_value(i, a.value(i) * b.value(i));
    if (out.requires_grad())
        tape.record({a, b, out}, [a, b, out]() {
            auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) {
                a.raw()->adj[i] += b.value(i) * oadj[i];
                b.raw()->adj[i] += a.value(i) * oadj[i];
            }
        });
    return out;
}

template <class Real>
Tensor<Real> scale(Tape<Real>& tape, const Tensor<Real>& a, Real s) {
    auto out = Tensor<Real>::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.set_value(i, a.value(i) * s);
    if (out.requires_grad())
        tape.record({a, out}, [a, out, s]() {
            auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) a.raw()->adj[i] += s * oadj[i];
        });
    return out;
}

// A [m,k] times B [k,n] -> [m,n], or A [m,k] times b [k] -> [m].
template <class Real>
Tensor<Real> matmul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
        fail("matmul: unsupported ranks %s x %s", shape_str(a.shape()).c_str(),
             shape_str(b.shape()).c_str());
    const std::size_t m = a.dim(0), k = a.dim(1);
    const std::size_t bk = b.dim(0);
    const bool vec = (b.rank() == 1);
    const std::size_t n = vec ? 1 : b.dim(1);
    if (k != bk)
        fail("matmul: shape mismatch %s x %s", shape_str(a.shape()).c_str(),
             shape_str(b.shape()).c_str());
    auto out = vec ? Tensor<Real>::zeros({m}, a.requires_grad() || b.requires_grad())
                   : Tensor<Real>::zeros({m, n}, a.requires_grad() || b.requires_grad());
    const Real* av = a.data();
    const Real* bv = b.data();
    Real* ov = out.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[p * n + j];
            ov[i * n + j] = acc;
        }
    if (out.requires_grad())
        tape.record({a, b, out}, [a, b, out, m, k, n]() {
            const Real* av = a.data();
            const Real* bv = b.data();
            const auto& oadj = out.raw()->adj;
            auto& aadj = a.raw()->adj;
            auto& badj = b.raw()->adj;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    Real g = oadj[i * n + j];
                    if (g == Real(0)) continue;
                    for (std::size_t p = 0; p < k; ++p) {
                        aadj[i * k + p] += g * bv[p * n + j];
                        badj[p * n + j] += g * av[i * k + p];
                    }
                }
        });
    return out;
}

template <class Real>
Tensor<Real> dot(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::require_same_shape("dot", a, b);
    Real acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.value(i) * b.value(i);
    auto out = Tensor<Real>::from({1}, {acc}, a.requires_grad() || b.requires_grad());
    if (out.requires_grad())
        tape.record({a, b, out}, [a, b, out]() {
            Real g = out.raw()->adj[0];
            for (std::size_t i = 0; i < a.size(); ++i) {
                a.raw()->adj[i] += g * b.value(i);
                b.raw()->adj[i] += g * a.value(i);
            }
        });
    return out;
}

template <class Real>
Tensor<Real> concat(Tape<Real>& tape, std::span<const Tensor<Real>> parts) {
    check(!parts.empty(), "concat: empty input");
    std::size_t total = 0;
    for (const auto& p : parts) {
        check(p.rank() == 1, "concat: inputs must be vectors");
        total += p.size();
    }
    auto out = Tensor<Real>::zeros({total}, detail::any_grad(parts));
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.size(); ++i) out.set_value(off + i, p.value(i));
        off += p.size();
    }
    if (out.requires_grad()) {
        std::vector<Tensor<Real>> tensors(parts.begin(), parts.end());
        tensors.push_back(out);
        std::vector<Tensor<Real>> inputs(parts.begin(), parts.end());
        tape.record(std::move(tensors), [inputs, out]() {
            const auto& oadj = out.raw()->adj;
            std::size_t off = 0;
            for (const auto& p : inputs) {
                for (std::size_t i = 0; i < p.size(); ++i) p.raw()->adj[i] += oadj[off + i];
                off += p.size();
            }
        });
    }
    return out;
}

template <class Real>
Tensor<Real> concat(Tape<Real>& tape, std::initializer_list<Tensor<Real>> parts) {
    std::vector<Tensor<Real>> v(parts);
    return concat(tape, std::span<const Tensor<Real>>(v));
}

// n vectors of dim c -> matrix [n, c]
template <class Real>
Tensor<Real> stack_rows(Tape<Real>& tape, std::span<const Tensor<Real>> rows) {
    check(!rows.empty(), "stack_rows: empty input");
    const std::size_t c = rows.front().size();
    for (const auto& r : rows)
        if (r.rank() != 1 || r.size() != c) fail("stack_rows: rows must be vectors of equal size");
    auto out = Tensor<Real>::zeros({rows.size(), c}, detail::any_grad(rows));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.set_value(i * c + j, rows[i].value(j));
    if (out.requires_grad()) {
        std::vector<Tensor<Real>> tensors(rows.begin(), rows.end());
        tensors.push_back(out);
        std::vector<Tensor<Real>> inputs(rows.begin(), rows.end());
        tape.record(std::move(tensors), [inputs, out, c]() {
            const auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < inputs.size(); ++i)
                for (std::size_t j = 0; j < c; ++j) inputs[i].raw()->adj[j] += oadj[i * c + j];
        });
    }
    return out;
}

template <class Real>
Tensor<Real> row(Tape<Real>& tape, const Tensor<Real>& m, std::size_t i) {
    check(m.rank() == 2, "row: input must be a matrix");
    check(i < m.dim(0), "row: index out of range");
    const std::size_t c = m.dim(1);
    auto out = Tensor<Real>::zeros({c}, m.requires_grad());
    for (std::size_t j = 0; j < c; ++j) out.set_value(j, m.value(i * c + j));
    if (out.requires_grad())
        tape.record({m, out}, [m, out, i, c]() {
            for (std::size_t j = 0; j < c; ++j) m.raw()->adj[i * c + j] += out.raw()->adj[j];
        });
    return out;
}

template <class Real>
Tensor<Real> leaky_relu(Tape<Real>& tape, const Tensor<Real>& x, Real alpha) {
    auto out = Tensor<Real>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Real v = x.value(i);
        out.set_value(i, v >= Real(0) ? v : alpha * v);
    }
    if (out.requires_grad())
        tape.record({x, out}, [x, out, alpha]() {
            const auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i)
                x.raw()->adj[i] += (x.value(i) >= Real(0) ? Real(1) : alpha) * oadj[i];
        });
    return out;
}

template <class Real>
Tensor<Real> sigmoid(Tape<Real>& tape, const Tensor<Real>& x) {
    auto out = Tensor<Real>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.set_value(i, Real(1) / (Real(1) + std::exp(-x.value(i))));
    if (out.requires_grad())
        tape.record({x, out}, [x, out]() {
            const auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) {
                Real s = out.value(i);
                x.raw()->adj[i] += s * (Real(1) - s) * oadj[i];
            }
        });
    return out;
}

template <class Real>
Tensor<Real> tanh_op(Tape<Real>& tape, const Tensor<Real>& x) {
    auto out = Tensor<Real>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i) out.set_value(i, std::tanh(x.value(i)));
    if (out.requires_grad())
        tape.record({x, out}, [x, out]() {
            const auto& oadj = out.raw()->adj;
            for (std::size_t i = 0; i < oadj.size(); ++i) {
                Real t = out.value(i);
                x.raw()->adj[i] += (Real(1) - t * t) * oadj[i];
            }
        });
    return out;
}

// softmax within contiguous segments; segment ids must be non-decreasing
template <class Real>
Tensor<Real> segment_softmax(Tape<Real>& tape, const Tensor<Real>& logits,
                             const std::vector<std::uint32_t>& segments) {
    check(logits.rank() == 1, "segment_softmax: logits must be a vector");
    check(segments.size() == logits.size(), "segment_softmax: segment ids length mismatch");
    for (std::size_t i = 1; i < segments.size(); ++i)
        check(segments[i] >= segments[i - 1], "segment_softmax: segment ids must be non-decreasing");
    const std::size_t n = logits.size();
    auto out = Tensor<Real>::zeros({n}, logits.requires_grad());
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && segments[j] == segments[i]) ++j;
        Real mx = logits.value(i);
        for (std::size_t p = i; p < j; ++p) mx = std::max(mx, logits.value(p));
        Real denom = 0;
        for (std::size_t p = i; p < j; ++p) denom += std::exp(logits.value(p) - mx);
        for (std::size_t p = i; p < j; ++p)
            out.set_value(p, std::exp(logits.value(p) - mx) / denom);
        i = j;
    }
    if (out.requires_grad())
        tape.record({logits, out}, [logits, out, segments, n]() {
            const auto& oadj = out.raw()->adj;
            std::size_t i = 0;
            while (i < n) {
                std::size_t j = i;
                while (j < n && segments[j] == segments[i]) ++j;
                Real inner = 0;
                for (std::size_t p = i; p < j; ++p) inner += oadj[p] * out.value(p);
                for (std::size_t p = i; p < j; ++p)
                    logits.raw()->adj[p] += out.value(p) * (oadj[p] - inner);
                i = j;
            }
        });
    return out;
}

// out[s] = sum over i with segments[i]==s of weights[i] * rows[i, :]
template <class Real>
Tensor<Real> weighted_segment_sum(Tape<Real>& tape, const Tensor<Real>& weights,
                                  const Tensor<Real>& rows,
                                  const std::vector<std::uint32_t>& segments,
                                  std::size_t n_segments) {
    check(rows.rank() == 2, "weighted_segment_sum: rows must be a matrix");
    check(weights.rank() == 1 && weights.size() == rows.dim(0),
          "weighted_segment_sum: weights length mismatch");
    check(segments.size() == rows.dim(0), "weighted_segment_sum: segment ids length mismatch");
    const std::size_t n = rows.dim(0), c = rows.dim(1);
    for (auto s : segments)
        check(s < n_segments, "weighted_segment_sum: segment id out of range");
    auto out =
        Tensor<Real>::zeros({n_segments, c}, weights.requires_grad() || rows.requires_grad());
    for (std::size_t i = 0; i < n; ++i) {
        Real w = weights.value(i);
        const Real* rv = rows.data() + i * c;
        Real* ov = out.data() + segments[i] * c;
        for (std::size_t j = 0; j < c; ++j) ov[j] += w * rv[j];
    }
    if (out.requires_grad())
        tape.record({weights, rows, out}, [weights, rows, out, segments, n, c]() {
            const auto& oadj = out.raw()->adj;
            const bool wg = weights.requires_grad();
            const bool rg = rows.requires_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const Real* g = oadj.data() + segments[i] * c;
                const Real* rv = rows.data() + i * c;
                if (wg) {
                    Real acc = 0;
                    for (std::size_t j = 0; j < c; ++j) acc += g[j] * rv[j];
                    weights.raw()->adj[i] += acc;
                }
                if (rg) {
                    Real w = weights.value(i);
                    Real* radj = rows.raw()->adj.data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) radj[j] += w * g[j];
                }
            }
        });
    return out;
}

template <class Real>
Tensor<Real> sum(Tape<Real>& tape, const Tensor<Real>& x) {
    Real acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.value(i);
    auto out = Tensor<Real>::from({1}, {acc}, x.requires_grad());
    if (out.requires_grad())
        tape.record({x, out}, [x, out]() {
            Real g = out.raw()->adj[0];
            for (std::size_t i = 0; i < x.size(); ++i) x.raw()->adj[i] += g;
        });
    return out;
}

// arithmetic mean of a sequence of equal-shape vectors
template <class Real>
Tensor<Real> mean_over_steps(Tape<Real>& tape, std::span<const Tensor<Real>> seq) {
    check(!seq.empty(), "mean_over_steps: empty sequence");
    const std::size_t c = seq.front().size();
    for (const auto& t : seq)
        check(t.size() == c, "mean_over_steps: inconsistent element sizes");
    auto out = Tensor<Real>::zeros(seq.front().shape(), detail::any_grad(seq));
    const Real inv = Real(1) / Real(seq.size());
    for (const auto& t : seq)
        for (std::size_t j = 0; j < c; ++j) out.set_value(j, out.value(j) + inv * t.value(j));
    if (out.requires_grad()) {
        std::vector<Tensor<Real>> tensors(seq.begin(), seq.end());
        tensors.push_back(out);
        std::vector<Tensor<Real>> inputs(seq.begin(), seq.end());
        tape.record(std::move(tensors), [inputs, out, inv, c]() {
            const auto& oadj = out.raw()->adj;
            for (const auto& t : inputs)
                for (std::size_t j = 0; j < c; ++j) t.raw()->adj[j] += inv * oadj[j];
        });
    }
    return out;
}

// mean binary cross-entropy with predictions clamped away from {0, 1}
template <class Real>
Tensor<Real> binary_cross_entropy(Tape<Real>& tape, const Tensor<Real>& yhat,
                                  const std::vector<Real>& y) {
    check(yhat.rank() == 1 && yhat.size() == y.size(),
          "binary_cross_entropy: prediction/label length mismatch");
    constexpr Real eps = Real(1e-7);
    const std::size_t n = yhat.size();
    Real acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Real p = std::clamp(yhat.value(i), eps, Real(1) - eps);
        acc += -(y[i] * std::log(p) + (Real(1) - y[i]) * std::log(Real(1) - p));
    }
    auto out = Tensor<Real>::from({1}, {acc / Real(n)}, yhat.requires_grad());
    if (out.requires_grad())
        tape.record({yhat, out}, [yhat, out, y, n]() {
            Real g = out.raw()->adj[0] / Real(n);
            for (std::size_t i = 0; i < n; ++i) {
                Real raw = yhat.value(i);
                if (raw <= Real(1e-7) || raw >= Real(1) - Real(1e-7)) continue;  // clamped flat
                yhat.raw()->adj[i] += g * (raw - y[i]) / (raw * (Real(1) - raw));
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// composite cells
// ---------------------------------------------------------------------------

template <class Real>
struct GruCellParams {
    Tensor<Real> wz, wr, wh;  // input transforms [c, in]
    Tensor<Real> uz, ur, uh;  // hidden transforms [c, c]
    Tensor<Real> bz, br, bh;  // biases [c]

    std::vector<Tensor<Real>> tensors() const { return {wz, wr, wh, uz, ur, uh, bz, br, bh}; }
};

// h' = (1 - z) * h_prev + z * tanh(Wh x + Uh (r * h_prev) + bh), fused into a
// single tape node
template <class Real>
Tensor<Real> gru_cell(Tape<Real>& tape, const Tensor<Real>& x, const Tensor<Real>& h_prev,
                      const GruCellParams<Real>& p) {
    const std::size_t c = h_prev.size();
    const std::size_t in = x.size();
    check(p.wz.rank() == 2 && p.wz.dim(0) == c && p.wz.dim(1) == in,
          "gru_cell: parameter shapes do not match the inputs");

    auto affine = [&](const Tensor<Real>& w, const Tensor<Real>& u, const Tensor<Real>& b,
                      const Real* hv, std::vector<Real>& out) {
        for (std::size_t i = 0; i < c; ++i) {
            Real acc = b.value(i);
            const Real* wrow = w.data() + i * in;
            for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * x.value(j);
            const Real* urow = u.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) acc += urow[j] * hv[j];
            out[i] = acc;
        }
    };
    std::vector<Real> z(c), r(c), cand(c), rh(c);
    affine(p.wz, p.uz, p.bz, h_prev.data(), z);
    affine(p.wr, p.ur, p.br, h_prev.data(), r);
    for (std::size_t i = 0; i < c; ++i) {
        z[i] = Real(1) / (Real(1) + std::exp(-z[i]));
        r[i] = Real(1) / (Real(1) + std::exp(-r[i]));
        rh[i] = r[i] * h_prev.value(i);
    }
    affine(p.wh, p.uh, p.bh, rh.data(), cand);
    for (std::size_t i = 0; i < c; ++i) cand[i] = std::tanh(cand[i]);

    bool needs_grad = x.requires_grad() || h_prev.requires_grad();
    for (const auto& t : p.tensors()) needs_grad = needs_grad || t.requires_grad();
    auto out = Tensor<Real>::zeros({c}, needs_grad);
    for (std::size_t i = 0; i < c; ++i)
        out.set_value(i, (Real(1) - z[i]) * h_prev.value(i) + z[i] * cand[i]);
    if (!needs_grad) return out;

    std::vector<Tensor<Real>> tensors = p.tensors();
    tensors.push_back(x);
    tensors.push_back(h_prev);
    tensors.push_back(out);
    tape.record(std::move(tensors), [p, x, h_prev, out, z, r, cand, rh, c, in]() {
        const auto& g = out.raw()->adj;
        // d(pre-activation) of each gate, then the shared affine backward
        std::vector<Real> dpre_z(c), dpre_c(c), dpre_r(c), drh(c, Real(0)), dh(c, Real(0));
        for (std::size_t i = 0; i < c; ++i) {
            dh[i] = g[i] * (Real(1) - z[i]);
            dpre_z[i] = g[i] * (cand[i] - h_prev.value(i)) * z[i] * (Real(1) - z[i]);
            dpre_c[i] = g[i] * z[i] * (Real(1) - cand[i] * cand[i]);
        }
        auto back_affine = [&](const Tensor<Real>& w, const Tensor<Real>& u,
                               const Tensor<Real>& b, const Real* hv,
                               const std::vector<Real>& dpre, std::vector<Real>& dhv) {
            for (std::size_t i = 0; i < c; ++i) {
                Real d = dpre[i];
                if (d == Real(0)) continue;
                b.raw()->adj[i] += d;
                Real* wadj = w.raw()->adj.data() + i * in;
                const Real* wrow = w.data() + i * in;
                for (std::size_t j = 0; j < in; ++j) {
                    wadj[j] += d * x.value(j);
                    x.raw()->adj[j] += d * wrow[j];
                }
                Real* uadj = u.raw()->adj.data() + i * c;
                const Real* urow = u.data() + i * c;
                for (std::size_t j = 0; j < c; ++j) {
                    uadj[j] += d * hv[j];
                    dhv[j] += d * urow[j];
                }
            }
        };
        back_affine(p.wh, p.uh, p.bh, rh.data(), dpre_c, drh);
        for (std::size_t i = 0; i < c; ++i) {
            dh[i] += drh[i] * r[i];  // rh = r * h_prev
            dpre_r[i] = drh[i] * h_prev.value(i) * r[i] * (Real(1) - r[i]);
        }
        back_affine(p.wz, p.uz, p.bz, h_prev.data(), dpre_z, dh);
        back_affine(p.wr, p.ur, p.br, h_prev.data(), dpre_r, dh);
        for (std::size_t i = 0; i < c; ++i) h_prev.raw()->adj[i] += dh[i];
    });
    return out;
}

template <class Real>
struct SelfAttentionParams {
    Tensor<Real> wq, wk, wv;   // [c, c]
    Tensor<Real> pos_bias;     // [max_offset, 1] logit bias per relative offset

    std::vector<Tensor<Real>> tensors() const {
        std::vector<Tensor<Real>> out = {wq, wk, wv};
        if (pos_bias.valid()) out.push_back(pos_bias);
        return out;
    }
};

// Single-head scaled dot-product attention over a short sequence; position t
// attends to positions i <= t only.
template <class Real>
std::vector<Tensor<Real>> masked_self_attention(Tape<Real>& tape,
                                                std::span<const Tensor<Real>> seq,
                                                const SelfAttentionParams<Real>& p) {
    check(!seq.empty(), "masked_self_attention: empty sequence");
    const std::size_t T = seq.size();
    const Real inv_sqrt_c = Real(1) / std::sqrt(Real(seq.front().size()));
    std::vector<Tensor<Real>> q(T), k(T), v(T);
    // positions often alias the same input tensor (e.g. repeated idle states);
    // project each distinct tensor once
    std::vector<std::size_t> owner(T);
    for (std::size_t t = 0; t < T; ++t) {
        owner[t] = t;
        for (std::size_t s = 0; s < t; ++s)
            if (seq[s].raw() == seq[t].raw()) {
                owner[t] = s;
                break;
            }
        if (owner[t] == t) {
            q[t] = matmul(tape, p.wq, seq[t]);
            k[t] = matmul(tape, p.wk, seq[t]);
            v[t] = matmul(tape, p.wv, seq[t]);
        } else {
            q[t] = q[owner[t]];
            k[t] = k[owner[t]];
            v[t] = v[owner[t]];
        }
    }
    std::vector<Tensor<Real>> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<Tensor<Real>> logits(t + 1);
        for (std::size_t i = 0; i <= t; ++i) {
            logits[i] = scale(tape, dot(tape, q[t], k[i]), inv_sqrt_c);
            if (p.pos_bias.valid()) {
                std::size_t offset = std::min(t - i, p.pos_bias.dim(0) - 1);
                logits[i] = add(tape, logits[i], row(tape, p.pos_bias, offset));
            }
        }
        auto logit_vec = concat(tape, std::span<const Tensor<Real>>(logits));
        std::vector<std::uint32_t> seg(t + 1, 0);
        auto weights = segment_softmax(tape, logit_vec, seg);
        auto rows = stack_rows(tape, std::span<const Tensor<Real>>(v.data(), t + 1));
        auto mixed = weighted_segment_sum(tape, weights, rows, seg, 1);
        out[t] = row(tape, mixed, 0);
    }
    return out;
}

}  // namespace infnet
