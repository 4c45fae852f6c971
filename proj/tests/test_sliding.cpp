#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "texturefuse/nets.hpp"
#include "texturefuse/sliding.hpp"

using namespace texturefuse;
using test::random_tensor;

namespace {

double relative_deviation(const Tensor<float>& a, const Tensor<float>& b) {
    double scale = 0;
    for (float v : b.values()) scale = std::max(scale, double(std::abs(v)));
    return max_abs_diff(a, b) / std::max(scale, 1e-12);
}

}  // namespace

TEST(Sliding, WindowCountAndOriginsFollowJump) {
    BuildOptions o;
    o.width_divisor = 8;
    const auto net = Network<float>::random(build_hapticnet(o), 1);
    const SlidingWindowOracle<float> oracle(net);
    EXPECT_EQ(oracle.jump(), (Extent2{16, 16}));
    const auto w = oracle.windows({50, 300});
    ASSERT_EQ(w.size(), 8u);
    for (std::size_t j = 0; j < w.size(); ++j) {
        EXPECT_EQ(w[j].nominal_origin.w, 16 * j);
        EXPECT_LE(w[j].cols.size(), 222u);
        EXPECT_LE(w[j].cols.end, 300u);
    }
}

TEST(Sliding, SmallStackMatchesDenseOutput) {
    NetworkSpec s{"small",
                  {LayerSpec::conv("c1", 4, {3, 3}, {1, 1}, {1, 1}), LayerSpec::maxpool("p1", {2, 2}, {2, 2}),
                   LayerSpec::local_response_norm("n1"), LayerSpec::conv("c2", 5, {3, 3}, {1, 1}, {1, 1}),
                   LayerSpec::maxpool("p2", {3, 3}, {2, 2}), LayerSpec::conv("fc", 6, {2, 2}),
                   LayerSpec::dropout("d"), LayerSpec::conv("out", 3, {1, 1}, {1, 1}, {0, 0}, false),
                   LayerSpec::softmax("prob")},
                  3, 2};
    const auto net = Network<float>::random(s, 2, 0.3);
    std::mt19937_64 rng(3);
    for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{11, 11}, {13, 20}, {16, 9}, {21, 21}}) {
        const auto x = random_tensor<float>({2, h, w}, rng);
        const auto dense = net.forward(x);
        const auto sliding = fcn_to_sliding_cnn(net).predict(x);
        ASSERT_EQ(dense.shape(), sliding.shape());
        EXPECT_LT(relative_deviation(sliding, dense), 1e-4) << h << "x" << w;
    }
}

TEST(Sliding, HapticNetMatchesDenseOutput) {
    BuildOptions o;
    o.width_divisor = 8;
    const auto net = Network<float>::random(build_hapticnet(o), 4, 0.1);
    std::mt19937_64 rng(5);
    for (std::size_t frames : {192u, 208u, 300u}) {
        const auto x = random_tensor<float>({1, 50, frames}, rng, 0, 1);
        const auto fc3 = net.spec().layer_index("fc3") + 1;
        const auto dense = net.forward(x, fc3);
        const auto sliding = SlidingWindowOracle<float>(net, fc3).predict(x);
        EXPECT_LT(relative_deviation(sliding, dense), 1e-4) << frames;
    }
}

TEST(Sliding, VisualNetsMatchDenseOutput) {
    BuildOptions o;
    o.width_divisor = 16;
    std::mt19937_64 rng(6);
    for (const auto& spec : {build_visualnet(o), build_visualnet_tcnn(o)}) {
        const auto net = Network<float>::random(spec, 7, 0.05);
        const auto x = random_tensor<float>({3, 256, 288}, rng, -0.5, 0.5);
        const auto end = spec.layer_index("fc3") + 1;
        const auto dense = net.forward(x, end);
        const auto sliding = SlidingWindowOracle<float>(net, end).predict(x);
        ASSERT_EQ(dense.shape(), sliding.shape());
        EXPECT_LT(relative_deviation(sliding, dense), 1e-4) << spec.name;
    }
}

TEST(Sliding, SingleLocationEvaluationUsesOnlyItsCrop) {
    BuildOptions o;
    o.width_divisor = 8;
    const auto net = Network<float>::random(build_hapticnet(o), 8, 0.1);
    const SlidingWindowOracle<float> oracle(net);
    std::mt19937_64 rng(9);
    auto x = random_tensor<float>({1, 50, 400}, rng, 0, 1);
    const auto windows = oracle.windows({50, 400});
    const auto& w = windows[5];
    const auto before = oracle.evaluate(x, w.location);
    // perturbing input outside the crop must not change this location
    for (std::size_t t = 0; t < 400; ++t)
        if (t < w.cols.begin || t >= w.cols.end)
            for (std::size_t f = 0; f < 50; ++f) x(0, f, t) = 0.5f;
    EXPECT_EQ(oracle.evaluate(x, w.location), before);
    EXPECT_THROW(oracle.evaluate(x, {0, 99}), RangeError);
}
