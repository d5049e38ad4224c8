#include <doctest.h>

#include <cmath>

#include "infnet/autodiff.hpp"
#include "infnet/checkpoint.hpp"
#include "infnet/grad_check.hpp"
#include "infnet/optimizer.hpp"
#include "infnet/rng.hpp"
#include "test_util.hpp"

using namespace infnet;
using TensorD = Tensor<double>;
using TapeD = Tape<double>;

namespace {

TensorD random_tensor(std::vector<std::size_t> shape, Rng& rng, bool grad = true) {
    auto t = TensorD::zeros(std::move(shape), grad);
    for (std::size_t i = 0; i < t.size(); ++i) t.set_value(i, rng.uniform(-1.5, 1.5));
    return t;
}

}  // namespace

TEST_CASE("segment_softmax: singleton segment gives weight one") {
    TapeD tape;
    auto logits = TensorD::from({1}, {3.7});
    auto w = segment_softmax(tape, logits, {0});
    CHECK(w.value(0) == doctest::Approx(1.0));
}

TEST_CASE("segment_softmax: [1,2] in one segment") {
    TapeD tape;
    auto logits = TensorD::from({2}, {1.0, 2.0});
    auto w = segment_softmax(tape, logits, {0, 0});
    const double e = std::exp(1.0);
    CHECK(w.value(0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
    CHECK(w.value(1) == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("segment_softmax: positive weights summing to one per segment") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 1 + rng.below(12);
        std::vector<std::uint32_t> segs;
        std::uint32_t seg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0 && rng.bernoulli(0.3)) ++seg;
            segs.push_back(seg);
        }
        TapeD tape;
        auto w = segment_softmax(tape, random_tensor({n}, rng, false), segs);
        std::vector<double> sums(seg + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(w.value(i) > 0.0);
            sums[segs[i]] += w.value(i);
        }
        for (double s : sums) CHECK(std::abs(s - 1.0) <= 1e-6);
    }
    CHECK_THROWS_AS(
        [] {
            TapeD tape;
            auto l = TensorD::from({2}, {0.0, 0.0});
            segment_softmax(tape, l, {1, 0});
        }(),
        Error);
}

TEST_CASE("gru_cell: all-zero parameters halve the previous state") {
    GruCellParams<double> p;
    for (auto* t : {&p.wz, &p.wr, &p.wh, &p.uz, &p.ur, &p.uh})
        *t = TensorD::zeros({3, 3}, true);
    for (auto* t : {&p.bz, &p.br, &p.bh}) *t = TensorD::zeros({3}, true);
    TapeD tape;
    auto x = TensorD::from({3}, {1.0, -2.0, 0.5});
    auto h_prev = TensorD::from({3}, {0.8, -0.4, 0.2});
    auto h = gru_cell(tape, x, h_prev, p);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(h.value(i) == doctest::Approx(0.5 * h_prev.value(i)).epsilon(1e-12));
}

TEST_CASE("binary_cross_entropy: closed forms and clamping") {
    TapeD tape;
    auto mid = binary_cross_entropy(tape, TensorD::from({1}, {0.5}), {1.0});
    CHECK(mid.value(0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    auto perfect = binary_cross_entropy(tape, TensorD::from({1}, {1.0 - 1e-7}), {1.0});
    CHECK(perfect.value(0) == doctest::Approx(0.0).epsilon(1e-6));
    // exact 0/1 predictions are clamped instead of producing infinities
    auto clamped = binary_cross_entropy(tape, TensorD::from({2}, {0.0, 1.0}), {1.0, 0.0});
    CHECK(std::isfinite(clamped.value(0)));
    CHECK(clamped.value(0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
}

TEST_CASE("backward: identity loss has unit gradient") {
    TapeD tape;
    auto x = TensorD::from({1}, {4.2}, true);
    tape.backward(x);
    CHECK(x.grad(0) == doctest::Approx(1.0));
}

TEST_CASE("backward: sum of sigmoid at zero gives quarter gradients") {
    TapeD tape;
    auto x = TensorD::zeros({5}, true);
    auto loss = sum(tape, sigmoid(tape, x));
    tape.backward(loss);
    for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad(i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward: repeated calls accumulate gradients") {
    TapeD tape;
    auto x = TensorD::from({3}, {0.3, -0.2, 0.9}, true);
    auto loss = sum(tape, mul(tape, x, x));
    tape.backward(loss);
    std::vector<double> once = x.grad_buffer();
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(x.grad(i) == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
    x.zero_grad();
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad(i) == doctest::Approx(once[i]).epsilon(1e-12));
}

TEST_CASE("backward: rejects non-scalar losses") {
    TapeD tape;
    auto x = TensorD::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(tape.backward(x), Error);
}

TEST_CASE("shape errors name the op and the shapes") {
    TapeD tape;
    auto a = TensorD::zeros({2, 3});
    auto b = TensorD::zeros({3});
    CHECK_THROWS_WITH_AS(add(tape, a, b), doctest::Contains("add"), Error);
    auto c = TensorD::zeros({4, 4});
    CHECK_THROWS_WITH_AS(matmul(tape, a, c), doctest::Contains("[2,3]"), Error);
}

TEST_CASE("grad_check: linear function is exact") {
    Rng rng(17);
    auto x = random_tensor({6}, rng);
    auto w = random_tensor({6}, rng, false);
    auto err = grad_check([&](TapeD& t, const TensorD& v) { return dot(t, v, w); }, x);
    CHECK(err <= 1e-9);
}

TEST_CASE("grad_check: every op passes under randomized inputs") {
    Rng rng(2024);
    double worst = 0.0;
    for (int seed_trial = 0; seed_trial < 20; ++seed_trial) {
        // elementwise chain: leaky_relu(sigmoid(x) * tanh(x) + x)
        {
            auto x = random_tensor({7}, rng);
            worst = std::max(worst, grad_check(
                                        [](TapeD& t, const TensorD& v) {
                                            auto a = mul(t, sigmoid(t, v), tanh_op(t, v));
                                            return sum(t, leaky_relu(t, add(t, a, v), 0.2));
                                        },
                                        x));
        }
        // matmul / dot / concat / rows
        {
            auto x = random_tensor({3, 4}, rng);
            auto v = random_tensor({4}, rng, false);
            worst = std::max(worst, grad_check(
                                        [&](TapeD& t, const TensorD& m) {
                                            auto y = matmul(t, m, v);          // [3]
                                            auto z = concat(t, {y, y});        // [6]
                                            return dot(t, z, z);
                                        },
                                        x));
        }
        // segment ops
        {
            auto x = random_tensor({5}, rng);
            auto rows = random_tensor({5, 3}, rng);
            std::vector<std::uint32_t> segs = {0, 0, 1, 1, 1};
            worst = std::max(worst, grad_check(
                                        [&](TapeD& t, const TensorD& logits) {
                                            auto w = segment_softmax(t, logits, segs);
                                            auto s = weighted_segment_sum(t, w, rows, segs, 2);
                                            return sum(t, mul(t, s, s));
                                        },
                                        x));
            worst = std::max(worst, grad_check(
                                        [&](TapeD& t, const TensorD& r) {
                                            auto w = segment_softmax(t, x, segs);
                                            auto s = weighted_segment_sum(t, w, r, segs, 2);
                                            auto r0 = row(t, s, 0);
                                            auto r1 = row(t, s, 1);
                                            return dot(t, r0, r1);
                                        },
                                        rows));
        }
        // gru cell, differentiating through the input
        {
            GruCellParams<double> p;
            p.wz = random_tensor({3, 3}, rng);
            p.wr = random_tensor({3, 3}, rng);
            p.wh = random_tensor({3, 3}, rng);
            p.uz = random_tensor({3, 3}, rng);
            p.ur = random_tensor({3, 3}, rng);
            p.uh = random_tensor({3, 3}, rng);
            p.bz = random_tensor({3}, rng);
            p.br = random_tensor({3}, rng);
            p.bh = random_tensor({3}, rng);
            auto h_prev = random_tensor({3}, rng, false);
            auto x = random_tensor({3}, rng);
            worst = std::max(worst, grad_check(
                                        [&](TapeD& t, const TensorD& v) {
                                            auto h = gru_cell(t, v, h_prev, p);
                                            return sum(t, mul(t, h, h));
                                        },
                                        x));
        }
        // masked self-attention + mean_over_steps + bce head
        {
            SelfAttentionParams<double> p;
            p.wq = random_tensor({3, 3}, rng);
            p.wk = random_tensor({3, 3}, rng);
            p.wv = random_tensor({3, 3}, rng);
            auto x = random_tensor({3}, rng);
            std::vector<TensorD> fixed = {random_tensor({3}, rng, false),
                                          random_tensor({3}, rng, false)};
            worst = std::max(worst, grad_check(
                                        [&](TapeD& t, const TensorD& v) {
                                            std::vector<TensorD> seq = {fixed[0], v, fixed[1]};
                                            auto enc = masked_self_attention(
                                                t, std::span<const TensorD>(seq), p);
                                            auto m = mean_over_steps(
                                                t, std::span<const TensorD>(enc));
                                            auto y = sigmoid(t, sum(t, m));
                                            return binary_cross_entropy(t, y, {1.0});
                                        },
                                        x));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("grad_check: a corrupted backward rule is detected") {
    Rng rng(31);
    auto x = random_tensor({4}, rng);
    // sigmoid with a deliberately wrong local derivative
    auto bad_sigmoid = [](TapeD& tape, const TensorD& in) {
        auto out = TensorD::zeros(in.shape(), in.requires_grad());
        for (std::size_t i = 0; i < in.size(); ++i)
            out.set_value(i, 1.0 / (1.0 + std::exp(-in.value(i))));
        tape.record({in, out}, [in, out]() {
            for (std::size_t i = 0; i < in.size(); ++i)
                in.raw()->adj[i] += 0.7 * out.raw()->adj[i];  // should be s(1-s)
        });
        return out;
    };
    auto err = grad_check(
        [&](TapeD& t, const TensorD& v) { return sum(t, bad_sigmoid(t, v)); }, x);
    CHECK(err > 1e-2);
}

TEST_CASE("masked_self_attention: output at t ignores positions after t") {
    Rng rng(77);
    SelfAttentionParams<double> p;
    p.wq = random_tensor({4, 4}, rng, false);
    p.wk = random_tensor({4, 4}, rng, false);
    p.wv = random_tensor({4, 4}, rng, false);
    std::vector<TensorD> seq;
    for (int t = 0; t < 5; ++t) seq.push_back(random_tensor({4}, rng, false));

    TapeD tape0;
    auto base = masked_self_attention(tape0, std::span<const TensorD>(seq), p);
    for (std::size_t change = 1; change < 5; ++change) {
        auto perturbed = seq;
        perturbed[change] = random_tensor({4}, rng, false);
        TapeD tape1;
        auto enc = masked_self_attention(tape1, std::span<const TensorD>(perturbed), p);
        for (std::size_t t = 0; t < change; ++t)
            for (std::size_t i = 0; i < 4; ++i)
                CHECK(enc[t].value(i) == base[t].value(i));  // bit-identical prefix
    }
}

TEST_CASE("forward determinism: identical seeds give bit-identical values") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        auto x = random_tensor({6}, rng);
        TapeD tape;
        auto y = sigmoid(tape, scale(tape, mul(tape, x, x), 1.7));
        return y.values();
    };
    auto a = run(42), b = run(42);
    CHECK(a == b);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto w = TensorD::from({3}, {1.0, -2.0, 3.0}, true);
    std::vector<TensorD> params{w};
    auto state = AdamState<double>::init(std::span<const TensorD>(params));
    adam_step(std::span<TensorD>(params), state);
    CHECK(w.value(0) == 1.0);
    CHECK(w.value(1) == -2.0);
    CHECK(w.value(2) == 3.0);
}

TEST_CASE("adam: first step moves by about lr times sign of gradient") {
    auto w = TensorD::from({2}, {0.5, -0.5}, true);
    w.grad_buffer() = {0.3, -4.0};
    std::vector<TensorD> params{w};
    auto state = AdamState<double>::init(std::span<const TensorD>(params), 0.001);
    adam_step(std::span<TensorD>(params), state);
    CHECK(w.value(0) == doctest::Approx(0.5 - 0.001).epsilon(1e-4));
    CHECK(w.value(1) == doctest::Approx(-0.5 + 0.001).epsilon(1e-4));
}

TEST_CASE("adam: zero learning rate freezes parameters") {
    auto w = TensorD::from({2}, {1.0, 2.0}, true);
    w.grad_buffer() = {5.0, -5.0};
    std::vector<TensorD> params{w};
    auto state = AdamState<double>::init(std::span<const TensorD>(params), 0.0);
    adam_step(std::span<TensorD>(params), state);
    CHECK(w.value(0) == 1.0);
    CHECK(w.value(1) == 2.0);
}

TEST_CASE("checkpoint: round trip preserves names, shapes and values") {
    TempDir dir;
    Rng rng(3);
    Checkpoint ck;
    ck.meta.emplace_back("model_config", "hidden=4\n");
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor({5}, rng);
    checkpoint_add(ck, "layer.w", a);
    checkpoint_add(ck, "layer.b", b);
    auto path = dir.file("m.ckpt");
    ck.save(path);

    auto loaded = Checkpoint::load(path);
    REQUIRE(loaded.entries.size() == 2);
    CHECK(*loaded.find_meta("model_config") == "hidden=4\n");
    auto a2 = TensorD::zeros({2, 3}, true);
    checkpoint_restore(loaded, "layer.w", a2);
    CHECK(a2.values() == a.values());
    auto wrong = TensorD::zeros({3, 2}, true);
    CHECK_THROWS_WITH_AS(checkpoint_restore(loaded, "layer.w", wrong),
                         doctest::Contains("shape"), Error);
    CHECK_THROWS_WITH_AS(checkpoint_restore(loaded, "missing", a2), doctest::Contains("missing"),
                         Error);
    CHECK(slurp(path + ".manifest").find("layer.w [2,3] f64") != std::string::npos);
}
