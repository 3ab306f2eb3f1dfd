#include <doctest.h>

#include <cmath>

#include "uprompt/ops.hpp"
#include "uprompt/tensor.hpp"

using namespace uprompt;

TEST_CASE("factories build the requested shapes") {
    auto z = TensorD::zeros({2, 3});
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    CHECK(z.numel() == 6);
    for (double v : z.values()) {
        CHECK(v == 0.0);
    }

    auto f = TensorD::full({4}, 2.5);
    CHECK(f.rank() == 1);
    for (double v : f.values()) {
        CHECK(v == 2.5);
    }

    auto s = TensorD::scalar(7.0);
    CHECK(s.item() == 7.0);

    auto m = TensorD::from({2, 2}, {1, 2, 3, 4});
    CHECK(m.at(0, 1) == 2.0);
    CHECK(m.at(1, 0) == 3.0);
}

TEST_CASE("from rejects mismatched value counts") {
    CHECK_THROWS_AS(TensorD::from({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(TensorD::zeros({2, -1}), ShapeError);
}

TEST_CASE("randn is deterministic in the seed") {
    Rng a(42), b(42), c(43);
    auto t1 = TensorD::randn({3, 3}, a, 0.5);
    auto t2 = TensorD::randn({3, 3}, b, 0.5);
    auto t3 = TensorD::randn({3, 3}, c, 0.5);
    CHECK(t1.values() == t2.values());
    CHECK(t1.values() != t3.values());
}

TEST_CASE("randn stddev scales the draw") {
    Rng rng(7);
    auto t = TensorD::randn({100, 100}, rng, 0.02);
    double sq = 0.0;
    for (double v : t.values()) {
        sq += v * v;
    }
    const double stddev = std::sqrt(sq / static_cast<double>(t.numel()));
    CHECK(stddev == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("trainable implies requires_grad") {
    auto t = TensorD::zeros({2});
    CHECK_FALSE(t.requires_grad());
    t.set_trainable(true);
    CHECK(t.trainable());
    CHECK(t.requires_grad());
}

TEST_CASE("detached copies values without a graph") {
    auto t = TensorD::from({2}, {1, 2}).set_trainable(true);
    auto loss = sum(mul(t, t));
    auto d = loss.detached();
    CHECK(d.item() == loss.item());
    CHECK_FALSE(d.requires_grad());
}

TEST_CASE("backward on sum gives ones, unrelated parameters get nothing") {
    auto p = TensorD::from({3}, {1, 2, 3}).set_trainable(true);
    auto q = TensorD::from({3}, {4, 5, 6}).set_trainable(true);
    auto loss = sum(p);
    loss.backward();
    REQUIRE(p.grad().size() == 3);
    for (double g : p.grad()) {
        CHECK(g == 1.0);
    }
    CHECK(q.grad().empty());  // q is not an ancestor of the loss
}

TEST_CASE("backward demands a scalar unless seeded") {
    auto t = TensorD::from({2}, {1, 2}).set_trainable(true);
    auto y = mul(t, t);
    CHECK_THROWS_AS(y.backward(), ShapeError);
    CHECK_NOTHROW(y.backward({1.0, 1.0}));
    CHECK(t.grad()[0] == doctest::Approx(2.0));
    CHECK(t.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("zero_grad_graph clears accumulated gradients") {
    auto t = TensorD::from({2}, {1, 2}).set_trainable(true);
    auto loss = sum(mul(t, t));
    loss.backward();
    CHECK(t.grad()[0] != 0.0);
    loss.zero_grad_graph();
    for (double g : t.grad()) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    auto t = TensorD::from({2}, {1, 1}).set_trainable(true);
    auto loss = sum(t);
    loss.backward();
    loss.backward();
    CHECK(t.grad()[0] == 2.0);
}

TEST_CASE("NoGradGuard suppresses graph recording") {
    auto t = TensorD::from({2}, {1, 2}).set_trainable(true);
    NoGradGuard guard;
    auto y = sum(mul(t, t));
    CHECK_FALSE(y.requires_grad());
    CHECK_THROWS_AS(y.backward(), NumericError);
}

TEST_CASE("empty handle reports rather than crashing") {
    TensorD t;
    CHECK_FALSE(t.defined());
    CHECK_THROWS_AS(t.numel(), IndexError);
}
