// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <doctest.h>

#include <cmath>
#include <vector>

#include "toktrack/errors.hpp"
#include "toktrack/rng.hpp"
#include "toktrack/tensor.hpp"

using namespace toktrack;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : *t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("matmul matches hand arithmetic") {
    Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    Tensor b = Tensor::from_rows({{5, 6}, {7, 8}});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 19.0);
    CHECK(c.at(0, 1) == 22.0);
    CHECK(c.at(1, 0) == 43.0);
    CHECK(c.at(1, 1) == 50.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tensor a({2, 3});
    Tensor b({2, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul backward matches hand-computed gradients") {
    // loss = sum(A*B); dA = ones * B^T, dB = A^T * ones.
    Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    Tensor b = Tensor::from_rows({{5, 6}, {7, 8}});
    a.requires_grad = true;
    b.requires_grad = true;
    Graph g;
    {
        GraphScope scope(g);
        Tensor loss = sum_all(matmul(a, b));
        g.backward(loss);
    }
    // dA row i col k = sum_j B[k][j]
    CHECK((*a.grad)[0] == doctest::Approx(11.0));
    CHECK((*a.grad)[1] == doctest::Approx(15.0));
    CHECK((*a.grad)[2] == doctest::Approx(11.0));
    CHECK((*a.grad)[3] == doctest::Approx(15.0));
    // dB row k col j = sum_i A[i][k]
    CHECK((*b.grad)[0] == doctest::Approx(4.0));
    CHECK((*b.grad)[1] == doctest::Approx(4.0));
    CHECK((*b.grad)[2] == doctest::Approx(6.0));
    CHECK((*b.grad)[3] == doctest::Approx(6.0));
}

TEST_CASE("softmax rows sum to one and shift invariance holds") {
    Rng rng(7);
    Tensor x = random_tensor(rng, {4, 6}, -3.0, 3.0);
    Tensor s1 = softmax(x, 1);
    Tensor xs = add_const(x, 123.25);
    Tensor s2 = softmax(xs, 1);
    for (int i = 0; i < 4; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < 6; ++j) {
            row_sum += s1.at(i, j);
            CHECK(s1.at(i, j) == doctest::Approx(s2.at(i, j)).epsilon(1e-12));
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("masked_softmax yields exact zeros on blocked entries") {
    Rng rng(11);
    Tensor x = random_tensor(rng, {3, 5}, -2.0, 2.0);
    BoolMatrix mask(3, 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) mask.set(i, j, (i + j) % 2 == 0);
    Tensor s = masked_softmax(x, mask);
    for (int i = 0; i < 3; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < 5; ++j) {
            if (!mask.at(i, j)) CHECK(s.at(i, j) == 0.0);
            row_sum += s.at(i, j);
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("masked_softmax rejects a fully blocked row") {
    Tensor x({2, 3});
    BoolMatrix mask(2, 3);
    mask.set(0, 1, true);
    CHECK_THROWS_AS(masked_softmax(x, mask), MaskError);
}

TEST_CASE("layer_norm normalizes rows") {
    Rng rng(3);
    Tensor x = random_tensor(rng, {5, 16}, -4.0, 4.0);
    Tensor gamma = Tensor::full({1, 16}, 1.0);
    Tensor beta = Tensor::zeros({1, 16});
    Tensor y = layer_norm(x, gamma, beta);
    for (int i = 0; i < 5; ++i) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mean += y.at(i, j);
        mean /= 16;
        for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= 16;
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("gelu matches erf closed form at sample points") {
    Tensor x = Tensor::from_rows({{0.0, 1.0, -1.0}});
    Tensor y = gelu(x);
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(0, 1) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(y.at(0, 2) == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
}

TEST_CASE("embedding_lookup gathers rows and rejects out-of-range indices") {
    Tensor table = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
    Tensor out = embedding_lookup(table, {2, 0});
    CHECK(out.at(0, 0) == 5.0);
    CHECK(out.at(1, 1) == 2.0);
    CHECK_THROWS_AS(embedding_lookup(table, {3}), VocabRangeError);
    CHECK_THROWS_AS(embedding_lookup(table, {-1}), VocabRangeError);
}

TEST_CASE("slice and concat are inverses") {
    Rng rng(19);
    Tensor x = random_tensor(rng, {6, 4});
    Tensor top = slice_rows(x, 0, 2);
    Tensor rest = slice_rows(x, 2, 4);
    Tensor back = concat_rows({top, rest});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK((*back.data)[i] == (*x.data)[i]);

    Tensor left = slice_cols(x, 0, 1);
    Tensor right = slice_cols(x, 1, 3);
    Tensor back2 = concat_cols({left, right});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK((*back2.data)[i] == (*x.data)[i]);
}

TEST_CASE("replace_rows swaps selected rows and routes gradient") {
    Tensor x = Tensor::from_rows({{1, 1}, {2, 2}, {3, 3}});
    Tensor row = Tensor::from_rows({{9, 9}});
    x.requires_grad = true;
    row.requires_grad = true;
    Graph g;
    Tensor out;
    {
        GraphScope scope(g);
        out = replace_rows(x, row, {0, 2});
        Tensor loss = sum_all(out);
        g.backward(loss);
    }
    CHECK(out.at(0, 0) == 9.0);
    CHECK(out.at(1, 0) == 2.0);
    CHECK(out.at(2, 1) == 9.0);
    CHECK((*x.grad)[0] == 0.0);
    CHECK((*x.grad)[2] == 1.0);
    CHECK((*row.grad)[0] == 2.0);
}

TEST_CASE("cross_entropy matches scalar log-softmax arithmetic") {
    Tensor logits = Tensor::from_rows({{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}});
    Tensor loss = cross_entropy(logits, {2, 0});
    const double l0 = -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
    const double l1 = std::log(3.0);
    CHECK(loss.value() == doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy(logits, {3, 0}), VocabRangeError);
}

TEST_CASE("gradient checks pass for core ops") {
    Rng rng(123);
    const double tol = 1e-5;

    SUBCASE("matmul") {
        Tensor x = random_tensor(rng, {3, 4});
        Tensor w = random_tensor(rng, {4, 2});
        double err = grad_check([&](const Tensor& t) { return sum_all(matmul(t, w)); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("softmax") {
        Tensor x = random_tensor(rng, {3, 5});
        Tensor c = random_tensor(rng, {3, 5});
        double err = grad_check([&](const Tensor& t) { return sum_all(mul(softmax(t, 1), c)); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("masked_softmax") {
        Tensor x = random_tensor(rng, {3, 5});
        Tensor c = random_tensor(rng, {3, 5});
        BoolMatrix mask(3, 5);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) mask.set(i, j, (i * 5 + j) % 3 != 0 || j == 4);
        double err = grad_check([&](const Tensor& t) { return sum_all(mul(masked_softmax(t, mask), c)); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("layer_norm") {
        Tensor x = random_tensor(rng, {4, 8});
        Tensor gamma = random_tensor(rng, {1, 8}, 0.5, 1.5);
        Tensor beta = random_tensor(rng, {1, 8});
        Tensor c = random_tensor(rng, {4, 8});
        double err = grad_check([&](const Tensor& t) { return sum_all(mul(layer_norm(t, gamma, beta), c)); }, x);
        CHECK(err <= tol);
        double errg = grad_check([&](const Tensor& t) { return sum_all(layer_norm(x, t, beta)); }, gamma);
        CHECK(errg <= tol);
    }
    SUBCASE("gelu") {
        Tensor x = random_tensor(rng, {3, 6}, -2.0, 2.0);
        double err = grad_check([&](const Tensor& t) { return sum_all(gelu(t)); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("sigmoid") {
        Tensor x = random_tensor(rng, {2, 5}, -3.0, 3.0);
        double err = grad_check([&](const Tensor& t) { return sum_all(sigmoid(t)); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("cross_entropy") {
        Tensor x = random_tensor(rng, {4, 7}, -2.0, 2.0);
        std::vector<int> targets{0, 3, 6, 2};
        double err = grad_check([&](const Tensor& t) { return cross_entropy(t, targets); }, x);
        CHECK(err <= tol);
    }
    SUBCASE("masked_attention") {
        Tensor q = random_tensor(rng, {4, 3});
        Tensor k = random_tensor(rng, {5, 3});
        Tensor v = random_tensor(rng, {5, 3});
        BoolMatrix mask(4, 5);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) mask.set(i, j, j <= i + 1);
        double err = grad_check([&](const Tensor& t) { return sum_all(masked_attention(t, k, v, mask)); }, q);
        CHECK(err <= tol);
        double errk = grad_check([&](const Tensor& t) { return sum_all(masked_attention(q, t, v, mask)); }, k);
        CHECK(errk <= tol);
        double errv = grad_check([&](const Tensor& t) { return sum_all(masked_attention(q, k, t, mask)); }, v);
        CHECK(errv <= tol);
    }
    SUBCASE("elementwise chain") {
        Tensor x = random_tensor(rng, {3, 3}, 0.1, 2.0);
        double err = grad_check(
            [&](const Tensor& t) {
                Tensor y = mul(exp_t(neg(t)), sqrt_t(t));
                return sum_all(divide(y, add_const(t, 3.0)));
            },
            x);
        CHECK(err <= tol);
    }
    SUBCASE("min max abs") {
        Tensor x = random_tensor(rng, {3, 4}, -2.0, 2.0);
        Tensor other = random_tensor(rng, {3, 4}, -2.0, 2.0);
        double err = grad_check(
            [&](const Tensor& t) { return sum_all(add(minimum(t, other), abs_t(maximum(t, other)))); }, x);
        CHECK(err <= tol);
    }
}

TEST_CASE("graph backward accumulates through shared subexpressions") {
    // y = x*x + x  =>  dy/dx = 2x + 1
    Tensor x = Tensor::scalar(3.0);
    x.requires_grad = true;
    Graph g;
    {
        GraphScope scope(g);
        Tensor y = add(mul(x, x), x);
        g.backward(y);
    }
    CHECK((*x.grad)[0] == doctest::Approx(7.0));
}

TEST_CASE("detach blocks gradient flow") {
    Tensor x = Tensor::scalar(2.0);
    x.requires_grad = true;
    Graph g;
    {
        GraphScope scope(g);
        Tensor y = mul(x.detach(), x); // d/dx = detached value only
        g.backward(y);
    }
    CHECK((*x.grad)[0] == doctest::Approx(2.0));
}

TEST_CASE("non-finite op output raises NumericError") {
    Tensor x = Tensor::full({1, 2}, 1e308);
    CHECK_THROWS_AS(exp_t(x), NumericError);
    Tensor a = Tensor::full({1, 1}, 1.0);
    Tensor b = Tensor::zeros({1, 1});
    CHECK_THROWS_AS(divide(a, b), NumericError);
}

TEST_CASE("flop counter counts matmul madds") {
    reset_flop_count();
    Tensor a = Tensor::full({3, 4}, 1.0);
    Tensor b = Tensor::full({4, 5}, 1.0);
    (void)matmul(a, b);
    CHECK(flop_count() == 60);
    reset_flop_count();
}

TEST_CASE("rng streams are deterministic and bounded") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        int k = r.range_int(-3, 9);
        CHECK(k >= -3);
        CHECK(k <= 9);
    }
    // sample_without_replacement yields distinct in-range values
    Rng s(5);
    auto picks = s.sample_without_replacement(10, 4);
    CHECK(picks.size() == 4);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        CHECK(picks[i] >= 0);
        CHECK(picks[i] < 10);
        for (std::size_t j = i + 1; j < picks.size(); ++j) CHECK(picks[i] != picks[j]);
    }
}
