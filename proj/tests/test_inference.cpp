#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "test_util.hpp"
#include "texturefuse/inference.hpp"
#include "texturefuse/sliding.hpp"

using namespace texturefuse;
using test::random_tensor;

TEST(Argmax, TiesGoToLowestClass) {
    const Tensor<float> p({3, 1, 4}, std::vector<float>{0.5f, 0.2f, 0.4f, 0.1f,  //
                                                         0.5f, 0.6f, 0.2f, 0.1f,  //
                                                         0.0f, 0.2f, 0.4f, 0.8f});
    EXPECT_EQ(argmax_labels(p), (std::vector<std::size_t>{0, 1, 0, 2}));
}

TEST(MaxVote, WorkedExamples) {
    const std::vector<std::size_t> a{2, 2, 1, 2, 1};
    EXPECT_EQ(max_vote(a, 3).label, 2u);
    const std::vector<std::size_t> tie{3, 1, 1, 3};
    EXPECT_EQ(max_vote(tie, 4).label, 1u);
    const std::vector<std::size_t> one{4};
    EXPECT_EQ(max_vote(one, 5).label, 4u);
    EXPECT_THROW(max_vote(std::vector<std::size_t>{}, 3), RangeError);
    EXPECT_THROW(max_vote(std::vector<std::size_t>{3}, 3), RangeError);
}

TEST(MaxVote, MatchesBruteForceOnRandomGrids) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> classes(1, 6), side(1, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t C = classes(rng), H = side(rng), W = side(rng);
        // coarse values so that ties occur often
        Tensor<float> p({C, H, W});
        std::uniform_int_distribution<int> coarse(0, 3);
        for (auto& v : p.values()) v = float(coarse(rng));

        std::map<std::size_t, std::size_t> counts;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                std::size_t best = 0;
                for (std::size_t c = 0; c < C; ++c)
                    if (p(c, i, j) > p(best, i, j)) best = c;
                ++counts[best];
            }
        std::size_t expect = 0, most = 0;
        for (const auto& [c, n] : counts)
            if (n > most) {
                most = n;
                expect = c;
            }
        const auto r = vote_grid(p);
        ASSERT_EQ(r.label, expect) << "trial " << trial;
        ASSERT_EQ(r.fragment_labels.size(), H * W);
    }
}

TEST(MaxVote, PermutingLocationsKeepsWinner) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> labels(1 + rng() % 30);
        for (auto& l : labels) l = rng() % 4;
        const auto expect = max_vote(labels, 4).label;
        std::shuffle(labels.begin(), labels.end(), rng);
        ASSERT_EQ(max_vote(labels, 4).label, expect);
    }
}

TEST(MaxVote, DominantClassWinsAnyGrid) {
    for (std::size_t H = 1; H < 4; ++H)
        for (std::size_t W = 1; W < 6; ++W) {
            std::mt19937_64 rng(H * 10 + W);
            auto p = random_tensor<float>({4, H, W}, rng, 0, 1);
            for (std::size_t i = 0; i < H * W; ++i) p[2 * H * W + i] = 2.0f;
            EXPECT_EQ(vote_grid(p).label, 2u);
        }
}

TEST(MaxVote, LogitScaleDoesNotChangeLabels) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto logits = random_tensor<float>({5, 3, 4}, rng, -3, 3);
        const auto base = argmax_labels(kernels::softmax_forward(logits));
        for (float a : {0.1f, 0.5f, 2.0f, 7.0f}) {
            Tensor<float> scaled = logits;
            for (auto& v : scaled.values()) v *= a;
            ASSERT_EQ(argmax_labels(kernels::softmax_forward(scaled)), base);
        }
    }
}

TEST(Classify, SingleLocationAndUniformOutputs) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 4;
    auto haptic = Network<float>::random(build_hapticnet(o), 1);
    std::mt19937_64 rng(2);
    const auto x = random_tensor<float>({1, 50, 192}, rng, 0, 1);
    const auto grid = haptic.forward(x);
    ASSERT_EQ(grid.dim(1) * grid.dim(2), 1u);
    EXPECT_EQ(classify_haptic(haptic, x).label, argmax_labels(grid)[0]);

    auto visual = Network<float>::random(build_visualnet(o), 3);
    const auto img = random_tensor<float>({3, 224, 224}, rng, -0.5, 0.5);
    EXPECT_EQ(classify_image(visual, img).label, argmax_labels(visual.forward(img))[0]);

    for (auto& p : haptic.parameters()) p.fill(0.0f);
    for (auto& p : visual.parameters()) p.fill(0.0f);
    EXPECT_EQ(classify_haptic(haptic, random_tensor<float>({1, 50, 400}, rng, 0, 1)).label, 0u);
    EXPECT_EQ(classify_image(visual, random_tensor<float>({3, 288, 288}, rng, 0, 1)).label, 0u);
}

TEST(Classify, VoteEqualsOraclePlusVote) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 5;
    std::mt19937_64 rng(4);
    const auto haptic = Network<float>::random(build_hapticnet(o), 5, 0.1);
    const auto x = random_tensor<float>({1, 50, 400}, rng, 0, 1);
    const auto h = classify_haptic(haptic, x);
    const auto ho = vote_grid(SlidingWindowOracle<float>(haptic).predict(x));
    EXPECT_EQ(h.label, ho.label);
    EXPECT_EQ(h.fragment_labels, ho.fragment_labels);

    const auto visual = Network<float>::random(build_visualnet(o), 6, 0.1);
    const auto img = random_tensor<float>({3, 384, 384}, rng, -0.5, 0.5);
    const auto v = classify_image(visual, img);
    const auto vo = vote_grid(SlidingWindowOracle<float>(visual).predict(img));
    EXPECT_EQ(v.label, vo.label);
    EXPECT_EQ(v.fragment_labels, vo.fragment_labels);
}

TEST(Classify, HapticInputTooShortIsRejected) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 4;
    const auto net = Network<float>::random(build_hapticnet(o), 1);
    try {
        classify_haptic(net, Tensor<float>({1, 50, 150}));
        FAIL();
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("192"), std::string::npos);
    }
    const auto r = classify_haptic(net, Tensor<float>({1, 50, 300}, 0.5f));
    EXPECT_EQ(r.fragment_labels.size(), 8u);
    EXPECT_LT(r.label, 4u);
}

TEST(Classify, ImageVotesOverGrid) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 5;
    const auto net = Network<float>::random(build_visualnet(o), 2);
    std::mt19937_64 rng(3);
    const auto r = classify_image(net, random_tensor<float>({3, 288, 288}, rng));
    EXPECT_EQ(r.fragment_labels.size(), 9u);
    EXPECT_THROW(classify_image(net, Tensor<float>({3, 200, 288})), RangeError);
}

TEST(Fusion, PairSamplingIsUniform) {
    std::mt19937_64 rng(4);
    const std::size_t draws = 100000;
    const auto pairs = sample_fusion_pairs(2, 3, draws, rng);
    std::size_t counts[2][3] = {};
    for (auto [h, v] : pairs) ++counts[h][v];
    const double expect = double(draws) / 6;
    double chi2 = 0;
    for (auto& row : counts)
        for (auto c : row) chi2 += (double(c) - expect) * (double(c) - expect) / expect;
    EXPECT_LT(chi2, 20.52);  // 5 degrees of freedom, p = 0.001
    EXPECT_THROW(sample_fusion_pairs(2, 3, 0, rng), RangeError);
}

TEST(Fusion, GatheredPairsMatchPerPairHeadEvaluation) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 3;
    auto model = make_fusion_model(Network<float>::random(build_hapticnet(o), 5, 0.1),
                                   Network<float>::random(build_visualnet(o), 6, 0.1), FusionLayer::fc2,
                                   FeatureSource::outputs, 7, 0.1);
    std::mt19937_64 rng(8);
    const auto spec = random_tensor<float>({1, 50, 240}, rng, 0, 1);
    const auto img = random_tensor<float>({3, 256, 256}, rng, -0.5, 0.5);
    const auto hf = model.haptic.forward(spec, model.haptic_end());
    const auto vf = model.visual.forward(img, model.visual_end());
    ASSERT_EQ(hf.dim(0) + vf.dim(0), model.head.spec().input_channels);

    // every (haptic, visual) location pair, in order
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t h = 0; h < hf.dim(2); ++h)
        for (std::size_t v = 0; v < vf.dim(1) * vf.dim(2); ++v) all.emplace_back(h, v);
    const auto batch = model.head.forward(gather_fused_features<float>(hf, vf, all));
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto [h, v] = all[k];
        Tensor<float> single({hf.dim(0) + vf.dim(0), 1, 1});
        for (std::size_t c = 0; c < hf.dim(0); ++c) single[c] = hf[c * hf.dim(2) + h];
        for (std::size_t c = 0; c < vf.dim(0); ++c) single[hf.dim(0) + c] = vf[c * vf.dim(1) * vf.dim(2) + v];
        const auto out = model.head.forward(single);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(batch[c * all.size() + k], out[c], 1e-6);
    }

    const auto r = classify_fused(model, spec, img, 50, rng);
    EXPECT_EQ(r.fragment_labels.size(), 50u);
    EXPECT_THROW(classify_fused(model, spec, img, 0, rng), RangeError);
    EXPECT_THROW(classify_fused(model, Tensor<float>({1, 50, 100}), img, 5, rng), RangeError);
}

TEST(Fusion, InputSideFeaturesUseWiderLayer) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 3;
    const auto model = make_fusion_model(Network<float>::random(build_hapticnet(o), 1),
                                         Network<float>::random(build_visualnet(o), 2), FusionLayer::fc2,
                                         FeatureSource::inputs, 3);
    EXPECT_EQ(model.head.spec().input_channels, 400u / 16 + 300u / 16);
    o.class_count = 4;
    EXPECT_THROW(make_fusion_model(Network<float>::random(build_hapticnet(), 1),
                                   Network<float>::random(build_visualnet(o), 2), FusionLayer::fc3,
                                   FeatureSource::outputs, 3),
                 RangeError);
}

TEST(Fusion, DegenerateGridsGiveTheSinglePrediction) {
    BuildOptions o;
    o.width_divisor = 16;
    o.class_count = 3;
    auto model = make_fusion_model(Network<float>::random(build_hapticnet(o), 1, 0.1),
                                   Network<float>::random(build_visualnet(o), 2, 0.1), FusionLayer::fc2,
                                   FeatureSource::outputs, 3, 0.1);
    std::mt19937_64 rng(4);
    const auto spec = random_tensor<float>({1, 50, 192}, rng, 0, 1);
    const auto img = random_tensor<float>({3, 224, 224}, rng, -0.5, 0.5);
    const auto hf = model.haptic.forward(spec, model.haptic_end());
    const auto vf = model.visual.forward(img, model.visual_end());
    const std::vector<std::pair<std::size_t, std::size_t>> only{{0, 0}};
    const auto expect = argmax_labels(model.head.forward(gather_fused_features<float>(hf, vf, only)))[0];
    for (std::size_t K : {1, 7, 1000}) {
        const auto r = classify_fused(model, spec, img, K, rng);
        EXPECT_EQ(r.label, expect);
        EXPECT_EQ(r.counts[expect], K);
    }
}

TEST(Fusion, SampledVoteAgreesWithExhaustivePairs) {
    // small feature grids: 3 haptic locations x 4 visual locations
    const std::size_t Dh = 6, Dv = 5, classes = 3;
    std::mt19937_64 rng(9);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto head = Network<float>::random(build_fusion_head(Dh, Dv, classes), 100 + trial, 0.5);
        const auto hf = random_tensor<float>({Dh, 1, 3}, rng, 0, 1);
        const auto vf = random_tensor<float>({Dv, 2, 2}, rng, 0, 1);
        std::vector<std::pair<std::size_t, std::size_t>> all;
        for (std::size_t h = 0; h < 3; ++h)
            for (std::size_t v = 0; v < 4; ++v) all.emplace_back(h, v);
        const auto exhaustive = vote_grid(head.forward(gather_fused_features<float>(hf, vf, all))).label;
        const auto pairs = sample_fusion_pairs(3, 4, 1000, rng);
        agree += vote_grid(head.forward(gather_fused_features<float>(hf, vf, pairs))).label == exhaustive;
    }
    EXPECT_GE(agree, 95);
}
