#include <doctest.h>

#include <cmath>

#include "emoda/tensor.hpp"

using emoda::ShapeError;
using emoda::ad::Tensor;

TEST_CASE("zeros") {
    auto t = Tensor<double>::zeros({2, 2});
    CHECK(t.shape() == std::vector<std::size_t>{2, 2});
    CHECK(t.values() == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("constant") {
    auto t = Tensor<float>::constant({3}, 1.5f);
    CHECK(t.values() == std::vector<float>{1.5f, 1.5f, 1.5f});
}

TEST_CASE("xavier uniform stays within the fan bound") {
    auto t = Tensor<double>::xavier_uniform({300, 256}, 7);
    double limit = std::sqrt(6.0 / 556.0);
    CHECK(limit == doctest::Approx(0.1039).epsilon(1e-3));
    REQUIRE(t.size() == 300u * 256u);
    double lo = 0, hi = 0;
    for (double v : t.values()) {
        CHECK(std::abs(v) <= limit);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // not degenerate
    CHECK(hi > 0.5 * limit);
    CHECK(lo < -0.5 * limit);
}

TEST_CASE("xavier is bit-deterministic in (shape, seed)") {
    auto a = Tensor<float>::xavier_uniform({17, 5}, 123);
    auto b = Tensor<float>::xavier_uniform({17, 5}, 123);
    auto c = Tensor<float>::xavier_uniform({17, 5}, 124);
    CHECK(a.values() == b.values());
    CHECK(a.values() != c.values());
}

TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(Tensor<double>::zeros({0}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>::zeros({2, -1}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>::zeros({}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>::from_values({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("grad buffer mirrors value length") {
    auto t = Tensor<double>::zeros({4});
    CHECK(!t.has_grad());
    t.set_requires_grad(true);
    CHECK(t.grad().size() == t.size());
    t.grad()[2] = 5.0;
    t.zero_grad();
    CHECK(t.grad() == std::vector<double>{0, 0, 0, 0});
}
