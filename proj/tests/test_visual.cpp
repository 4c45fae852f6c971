#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "test_util.hpp"
#include "texturefuse/visual.hpp"

using namespace texturefuse;

namespace {
TextureImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return {test::random_tensor<float>({3, h, w}, rng, 0, 1), "img"};
}
}  // namespace

TEST(HalfResize, EvenSizesAverageTwoByTwoBlocks) {
    const auto img = random_image(8, 6, 1);
    const auto half = half_resize(img);
    ASSERT_EQ(half.pixels.shape(), (Shape{3, 4, 3}));
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const float avg = (img.pixels(c, 2 * i, 2 * j) + img.pixels(c, 2 * i + 1, 2 * j) +
                                   img.pixels(c, 2 * i, 2 * j + 1) + img.pixels(c, 2 * i + 1, 2 * j + 1)) / 4;
                EXPECT_NEAR(half.pixels(c, i, j), avg, 1e-6);
            }
}

TEST(HalfResize, OddSizesRoundUpAndConstantsSurvive) {
    TextureImage img{Tensor<float>({3, 5, 7}, 0.25f), "c"};
    const auto half = half_resize(img);
    EXPECT_EQ(half.pixels.shape(), (Shape{3, 3, 4}));
    for (float v : half.pixels.values()) EXPECT_NEAR(v, 0.25f, 1e-6);
    EXPECT_THROW(half_resize(TextureImage{Tensor<float>({3, 1, 7}), ""}), RangeError);
}

TEST(HalfResize, CheckerboardBlendsToGrey) {
    const TextureImage img{Tensor<float>({3, 2, 2}, std::vector<float>{0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0}), "cb"};
    const auto half = half_resize(img);
    ASSERT_EQ(half.pixels.shape(), (Shape{3, 1, 1}));
    for (float v : half.pixels.values()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Patches, CropAndSampleStayInside) {
    const auto img = random_image(20, 30, 2);
    const auto p = crop_patch(img, 3, 5, 10);
    EXPECT_EQ(p.pixels(1, 0, 0), img.pixels(1, 3, 5));
    EXPECT_EQ(p.pixels(2, 9, 9), img.pixels(2, 12, 14));
    std::mt19937_64 rng(3);
    std::set<float> corners;
    for (int i = 0; i < 2000; ++i) {
        const auto s = sample_patch(img, 18, rng);
        ASSERT_EQ(s.pixels.shape(), (Shape{3, 18, 18}));
        corners.insert(s.pixels(0, 0, 0));
    }
    EXPECT_EQ(corners.size(), 3u * 13u);  // every placement seen
    EXPECT_THROW(sample_patch(img, 21, rng), RangeError);
}

TEST(Rotation, QuarterTurnsAreClockwiseAndCyclic) {
    const auto img = random_image(5, 5, 4);
    const auto r = rotate_quarter_turns(img, 1);
    EXPECT_EQ(r.pixels(0, 0, 4), img.pixels(0, 0, 0));  // top-left goes to top-right
    EXPECT_EQ(r.pixels(0, 4, 4), img.pixels(0, 0, 4));
    EXPECT_EQ(rotate_quarter_turns(img, 4).pixels, img.pixels);
    EXPECT_EQ(rotate_quarter_turns(rotate_quarter_turns(img, 3), 1).pixels, img.pixels);
    EXPECT_THROW(rotate_quarter_turns(random_image(4, 5, 5), 1), ShapeError);
}

TEST(Rotation, HalfTurnIsAnInvolutionAndSmallCaseByHand) {
    const auto img = random_image(7, 7, 10);
    EXPECT_EQ(rotate_quarter_turns(rotate_quarter_turns(img, 2), 2).pixels, img.pixels);
    EXPECT_EQ(rotate_quarter_turns(img, 0).pixels, img.pixels);
    // [a b; c d] clockwise -> [c a; d b]
    const TextureImage abcd{Tensor<float>({3, 2, 2}, std::vector<float>{.1f, .2f, .3f, .4f, 0, 0, 0, 0, 0, 0, 0, 0}), ""};
    const auto r = rotate_quarter_turns(abcd, 1);
    EXPECT_EQ(r.pixels(0, 0, 0), .3f);
    EXPECT_EQ(r.pixels(0, 0, 1), .1f);
    EXPECT_EQ(r.pixels(0, 1, 0), .4f);
    EXPECT_EQ(r.pixels(0, 1, 1), .2f);
}

TEST(Rotation, RandomRotationDrawsAllFourAngles) {
    const auto img = random_image(6, 6, 6);
    std::mt19937_64 rng(7);
    std::set<float> seen;
    for (int i = 0; i < 400; ++i) seen.insert(random_rotate(img, rng).pixels(0, 0, 0));
    EXPECT_EQ(seen.size(), 4u);
}

TEST(Rotation, ArbitraryAngleCropsInscribedSquare) {
    const auto img = random_image(40, 40, 8);
    const auto same = rotate_arbitrary(img, 0.0);
    EXPECT_EQ(same.pixels.shape(), img.pixels.shape());
    EXPECT_LT(max_abs_diff(same.pixels, img.pixels), 1e-6);
    const auto r45 = rotate_arbitrary(img, 45.0);
    EXPECT_EQ(r45.height(), std::size_t(40 / std::sqrt(2.0)));
    const auto r90 = rotate_arbitrary(img, 90.0);
    EXPECT_LT(max_abs_diff(r90.pixels, rotate_quarter_turns(img, 3).pixels), 1e-4);
}

TEST(MeanSubtraction, InverseRestoresImage) {
    const auto img = random_image(7, 9, 9);
    const ChannelMeans m{0.1f, 0.5f, 0.9f};
    const auto centred = mean_subtract(img, m);
    EXPECT_NEAR(centred(1, 3, 3), img.pixels(1, 3, 3) - 0.5f, 1e-7);
    EXPECT_LT(max_abs_diff(add_channel_means(centred, m), img.pixels), 1e-6);
    EXPECT_THROW(mean_subtract(img, {0, NAN, 0}), NumericError);
}

TEST(MeanSubtraction, ChannelMeansOverImageSet) {
    std::vector<TextureImage> imgs{{Tensor<float>({3, 2, 2}, 0.2f), "a"}, {Tensor<float>({3, 4, 4}, 0.8f), "b"}};
    imgs[0].pixels(2, 0, 0) = 1.0f;
    const auto m = channel_means(imgs);
    EXPECT_NEAR(m[0], (4 * 0.2 + 16 * 0.8) / 20, 1e-6);
    EXPECT_NEAR(m[2], (3 * 0.2 + 1.0 + 16 * 0.8) / 20, 1e-6);
}

TEST(TextureImage, ValidateRejectsOutOfRange) {
    TextureImage img{Tensor<float>({3, 2, 2}, 0.5f), "x"};
    EXPECT_NO_THROW(img.validate());
    img.pixels[0] = 1.5f;
    EXPECT_THROW(img.validate(), RangeError);
    EXPECT_THROW((TextureImage{Tensor<float>({1, 2, 2}), ""}.validate()), ShapeError);
}
