#include <doctest.h>

#include <span>

#include <cmath>
#include <random>

#include "hwcost/error.hpp"
#include "hwcost/nn.hpp"

using namespace hwcost;
using namespace hwcost::nn;

namespace {

Buffer random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Buffer v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Wraps an input tensor as a parameter so the harness perturbs it too.
Parameter input_param(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Parameter p("input", shape);
    p.value.values = random_values(p.value.size(), rng);
    return p;
}

}  // namespace

TEST_CASE("embedding lookup and gradient") {
    Embedding e(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) e.table.value.values[i * 4 + j] = i == j ? 1.0 : 0.0;
    std::vector<std::int32_t> ids{0};
    auto y = e.forward(ids, 1, 1);
    CHECK(y.values == std::vector<double>{1, 0, 0, 0});

    std::vector<std::int32_t> rep{2, 2, 1};
    auto z = e.forward(rep, 1, 3);
    CHECK(std::equal(z.values.begin(), z.values.begin() + 4, z.values.begin() + 4));

    e.table.zero_grad();
    e.backward(rep, DenseTensor(z.shape, 1.0));
    CHECK(e.table.grad.values[2 * 4] == 2.0);
    CHECK(e.table.grad.values[1 * 4 + 3] == 1.0);
    CHECK(e.table.grad.values[0] == 0.0);

    std::vector<std::int32_t> bad{4};
    CHECK_THROWS_AS(e.forward(bad, 1, 1), IdOutOfRange);
    std::vector<std::int32_t> neg{-1};
    CHECK_THROWS_AS(e.forward(neg, 1, 1), IdOutOfRange);
}

TEST_CASE("conv1d arithmetic") {
    Conv1D c(1, 1, 2);
    c.kernel.value.values = {0.5, 0.5};
    DenseTensor x({1, 3, 1}, std::vector<double>{1, 3, 5});
    CHECK(c.forward(x, nullptr).values == std::vector<double>{2, 4});

    c.kernel.value.values = {1.0, 0.0};
    CHECK(c.forward(x, nullptr).values == std::vector<double>{1, 3});

    DenseTensor short_x({1, 1, 1}, std::vector<double>{1});
    CHECK_THROWS_AS(c.forward(short_x, nullptr), SequenceTooShort);
}

TEST_CASE("conv1d matches a direct reference") {
    std::mt19937_64 rng(5);
    const std::size_t B = 2, L = 7, I = 3, O = 4, K = 3;
    Conv1D c(I, O, K);
    c.kernel.value.values = random_values(c.kernel.value.size(), rng);
    c.bias.value.values = random_values(O, rng);
    DenseTensor x({B, L, I}, random_values(B * L * I, rng));
    auto y = c.forward(x, nullptr);
    REQUIRE(y.shape == std::vector<std::size_t>{B, L - K + 1, O});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t + K <= L; ++t)
            for (std::size_t o = 0; o < O; ++o) {
                double s = c.bias.value.values[o];
                for (std::size_t i = 0; i < I; ++i)
                    for (std::size_t j = 0; j < K; ++j)
                        s += c.kernel.value.values[(o * I + i) * K + j] * x.values[(b * L + t + j) * I + i];
                CHECK(y.values[(b * (L - K + 1) + t) * O + o] == doctest::Approx(s).epsilon(1e-12));
            }
}

TEST_CASE("max pooling") {
    DenseTensor x({1, 5, 1}, std::vector<double>{3, 1, 4, 1, 5});
    CHECK(maxpool1d_forward(x, {}, nullptr).values == std::vector<double>{5});
    DenseTensor y({1, 4, 1}, std::vector<double>{1, 2, 3, 4});
    CHECK(maxpool1d_forward(y, {2, 2}, nullptr).values == std::vector<double>{2, 4});

    DenseTensor tie({1, 2, 1}, std::vector<double>{2, 2});
    MaxPoolCache cache;
    maxpool1d_forward(tie, {}, &cache);
    auto dx = maxpool1d_backward(DenseTensor({1, 1, 1}, 1.0), cache);
    CHECK(dx.values == std::vector<double>{1, 0});
    CHECK_THROWS_AS(maxpool1d_forward(y, {5, 1}, nullptr), SequenceTooShort);
}

TEST_CASE("dense and loss") {
    Dense d(3, 3);
    for (std::size_t i = 0; i < 3; ++i) d.weight.value.values[i * 3 + i] = 1.0;
    DenseTensor x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(d.forward(x, nullptr).values == x.values);
    DenseTensor wrong({2, 2});
    CHECK_THROWS_AS(d.forward(wrong, nullptr), ShapeMismatch);

    std::vector<double> g;
    CHECK(mse_loss(x.values, x.values, &g) == 0.0);
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
    std::vector<double> p{1, 2}, t{0, 0};
    CHECK(mse_loss(p, t, &g) == 2.5);
    CHECK(g == std::vector<double>{1.0, 2.0});
    std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(mse_loss(three, t, nullptr), ShapeMismatch);
}

TEST_CASE("masked mean skips padding") {
    DenseTensor x({1, 3, 2}, std::vector<double>{1, 2, 3, 4, 100, 100});
    std::vector<std::int32_t> ids{5, 6, 0};
    std::vector<std::size_t> counts;
    auto y = masked_mean_forward(x, ids, 0, &counts);
    CHECK(y.values == std::vector<double>{2, 3});
    auto dx = masked_mean_backward(DenseTensor({1, 2}, 1.0), ids, 0, counts, 3);
    CHECK(dx.values == std::vector<double>{0.5, 0.5, 0.5, 0.5, 0, 0});
    std::vector<std::int32_t> all_pad{0, 0, 0};
    CHECK(masked_mean_forward(x, all_pad, 0, nullptr).values == std::vector<double>{0, 0});
}

TEST_CASE("optimizers") {
    Parameter p("p", {3});
    p.value.values = {1, 2, 3};
    p.zero_grad();
    std::vector<Parameter*> ps{&p};
    sgd_step(ps, 0.5);
    CHECK(p.value.values == std::vector<double>{1, 2, 3});
    p.grad.values = {1, -2, 0.5};
    sgd_step(ps, 1.0);
    CHECK(p.value.values == std::vector<double>{0, 4, 2.5});

    p.value.values = {0, 0, 0};
    p.grad.values = {1, 1, 1};
    AdamState st;
    AdamHyper h;
    h.lr = 0.01;
    adam_step(ps, st, h);
    CHECK(st.step == 1);
    for (double v : p.value.values) CHECK(v == doctest::Approx(-0.01).epsilon(1e-6));

    p.zero_grad();
    p.value.values = {1, 2, 3};
    AdamState fresh;
    adam_step(ps, fresh, h);
    CHECK(p.value.values == std::vector<double>{1, 2, 3});
}

TEST_CASE("grad check harness on a quadratic") {
    Parameter p("p", {4});
    p.value.values = {0.3, -1.2, 2.0, 0.7};
    GradCheckProblem prob;
    prob.params = {&p};
    prob.loss = [&] {
        double s = 0.0;
        for (double v : p.value.values) s += 1.5 * v * v;
        return s;
    };
    prob.gradient = [&] {
        for (std::size_t i = 0; i < 4; ++i) p.grad.values[i] = 3.0 * p.value.values[i];
    };
    auto r = grad_check(prob);
    CHECK(r.checked == 4);
    CHECK(r.max_rel_error <= 1e-6);

    prob.gradient = [&] {
        for (std::size_t i = 0; i < 4; ++i) p.grad.values[i] = 3.3 * p.value.values[i];
    };
    CHECK(grad_check(prob).max_rel_error > 1e-2);
}

TEST_CASE("layer gradients agree with finite differences") {
    std::mt19937_64 rng(11);

    SUBCASE("conv1d") {
        Conv1D c(3, 4, 2);
        init_uniform(c.kernel, 6, rng);
        c.bias.value.values = random_values(4, rng);
        auto x = input_param({2, 6, 3}, rng);
        auto w = random_values(2 * 5 * 4, rng);
        GradCheckProblem prob;
        prob.params = {&c.kernel, &c.bias, &x};
        prob.loss = [&] { return dot(c.forward(x.value, nullptr).values, w); };
        prob.gradient = [&] {
            for (auto* q : prob.params) q->zero_grad();
            Conv1D::Cache cache;
            auto y = c.forward(x.value, &cache);
            x.grad = c.backward(DenseTensor(y.shape, w), cache);
        };
        auto r = grad_check(prob);
        CHECK(r.max_rel_error <= 1e-4);
        CHECK(r.skipped == 0);
    }

    SUBCASE("dense") {
        Dense d(5, 3);
        init_uniform(d.weight, 5, rng);
        d.bias.value.values = random_values(3, rng);
        auto x = input_param({4, 5}, rng);
        auto w = random_values(12, rng);
        GradCheckProblem prob;
        prob.params = {&d.weight, &d.bias, &x};
        prob.loss = [&] { return dot(d.forward(x.value, nullptr).values, w); };
        prob.gradient = [&] {
            for (auto* q : prob.params) q->zero_grad();
            auto y = d.forward(x.value, nullptr);
            x.grad = d.backward(DenseTensor(y.shape, w), x.value);
        };
        CHECK(grad_check(prob).max_rel_error <= 1e-4);
    }

    SUBCASE("embedding") {
        Embedding e(6, 3);
        init_uniform(e.table, 1, rng);
        std::vector<std::int32_t> ids{1, 4, 4, 0, 5, 1};
        auto w = random_values(18, rng);
        GradCheckProblem prob;
        prob.params = {&e.table};
        prob.loss = [&] { return dot(e.forward(ids, 2, 3).values, w); };
        prob.gradient = [&] {
            e.table.zero_grad();
            e.backward(ids, DenseTensor({2, 3, 3}, w));
        };
        CHECK(grad_check(prob).max_rel_error <= 1e-4);
    }

    SUBCASE("relu and max pooling") {
        auto x = input_param({2, 6, 3}, rng);
        auto w = random_values(2 * 3 * 3, rng);
        const PoolSpec pool{2, 2};
        GradCheckProblem prob;
        prob.params = {&x};
        std::vector<std::uint8_t> mask;
        MaxPoolCache pc;
        prob.loss = [&] {
            auto r = relu_forward(x.value, &mask);
            return dot(maxpool1d_forward(r, pool, &pc).values, w);
        };
        prob.branch_signature = [&] {
            std::uint64_t h = 1469598103934665603ULL;
            for (auto m : mask) h = (h ^ m) * 1099511628211ULL;
            for (auto a : pc.argmax) h = (h ^ a) * 1099511628211ULL;
            return h;
        };
        prob.gradient = [&] {
            x.zero_grad();
            auto r = relu_forward(x.value, &mask);
            auto y = maxpool1d_forward(r, pool, &pc);
            x.grad = relu_backward(maxpool1d_backward(DenseTensor(y.shape, w), pc), mask);
        };
        auto r = grad_check(prob);
        CHECK(r.max_rel_error <= 1e-4);
        CHECK(r.checked > 0);
    }

    SUBCASE("masked mean") {
        auto x = input_param({2, 4, 3}, rng);
        std::vector<std::int32_t> ids{4, 5, 0, 0, 7, 7, 7, 0};
        auto w = random_values(6, rng);
        GradCheckProblem prob;
        prob.params = {&x};
        prob.loss = [&] { return dot(masked_mean_forward(x.value, ids, 0, nullptr).values, w); };
        prob.gradient = [&] {
            std::vector<std::size_t> counts;
            masked_mean_forward(x.value, ids, 0, &counts);
            x.grad = masked_mean_backward(DenseTensor({2, 3}, w), ids, 0, counts, 4);
        };
        CHECK(grad_check(prob).max_rel_error <= 1e-4);
    }

    SUBCASE("gru") {
        Gru g(3, 4);
        init_uniform(g.w_ih, 3, rng);
        init_uniform(g.w_hh, 4, rng);
        g.b_ih.value.values = random_values(12, rng, -0.5, 0.5);
        g.b_hh.value.values = random_values(12, rng, -0.5, 0.5);
        auto x = input_param({2, 5, 3}, rng);
        std::vector<std::size_t> lengths{5, 3};
        auto w = random_values(8, rng);
        GradCheckProblem prob;
        prob.params = {&g.w_ih, &g.w_hh, &g.b_ih, &g.b_hh, &x};
        prob.loss = [&] { return dot(g.forward(x.value, lengths, nullptr).values, w); };
        prob.gradient = [&] {
            for (auto* q : prob.params) q->zero_grad();
            Gru::Cache cache;
            g.forward(x.value, lengths, &cache);
            x.grad = g.backward(DenseTensor({2, 4}, w), cache);
        };
        CHECK(grad_check(prob).max_rel_error <= 1e-4);
    }

    SUBCASE("mse") {
        auto pred = input_param({5}, rng);
        auto target = random_values(5, rng);
        GradCheckProblem prob;
        prob.params = {&pred};
        prob.loss = [&] { return mse_loss(pred.value.values, target, nullptr); };
        prob.gradient = [&] {
            std::vector<double> g;
            mse_loss(pred.value.values, target, &g);
            pred.grad.values.assign(g.begin(), g.end());
        };
        CHECK(grad_check(prob).max_rel_error <= 1e-4);
    }
}

TEST_CASE("gru ignores steps past each sequence length") {
    std::mt19937_64 rng(2);
    Gru g(2, 3);
    init_uniform(g.w_ih, 2, rng);
    init_uniform(g.w_hh, 3, rng);
    DenseTensor x({1, 4, 2}, random_values(8, rng));
    std::vector<std::size_t> two{2};
    auto a = g.forward(x, two, nullptr);
    x.values[5] += 10.0;
    x.values[7] -= 3.0;
    CHECK(g.forward(x, two, nullptr).values == a.values);
}
