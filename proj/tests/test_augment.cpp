#include "ussl/augment.hpp"
#include "ussl/datasets.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace ussl;

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

const ImageShape kImage{4, 5};

std::vector<double> ramp(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 0.1 * static_cast<double>(i) + 0.05;
    return x;
}

}  // namespace

TEST(Augment, ZeroJitterIsIdentity) {
    Rng rng(1);
    const std::vector<double> x{0.3, -1.2};
    EXPECT_EQ(apply_transform({TransformKind::jitter, 0.0}, x, std::nullopt, rng), x);
}

TEST(Augment, JitterMagnitudeMatchesSigma) {
    // For d-dimensional N(0, s^2 I) noise, E||x' - x||^2 = d s^2.
    const double sigma = 0.2;
    const std::vector<double> x{1.0, 2.0, 3.0};
    Rng rng(7);
    double sq = 0.0;
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) {
        const auto y = apply_transform({TransformKind::jitter, sigma}, x, std::nullopt, rng);
        const double d = distance(x, y);
        sq += d * d;
    }
    const double estimated_sigma = std::sqrt(sq / draws / 3.0);
    EXPECT_NEAR(estimated_sigma, sigma, 0.1 * sigma);
}

TEST(Augment, ForcedFlipIsAnInvolution) {
    const auto img = ramp(kImage.rows * kImage.cols);
    Rng rng(3);
    const Transform always{TransformKind::flip, 1.0};
    const auto once = apply_transform(always, img, kImage, rng);
    EXPECT_NE(once, img);
    EXPECT_EQ(once[0], img[kImage.cols - 1]);
    EXPECT_EQ(apply_transform(always, once, kImage, rng), img);
}

TEST(Augment, UnitScaleIsIdentity) {
    Rng rng(5);
    const std::vector<double> x{0.25, -4.0, 9.5};
    EXPECT_EQ(apply_transform({TransformKind::scale, 1.0, 1.0}, x, std::nullopt, rng), x);
}

TEST(Augment, IdentityOnlyStrongSetIsIdentity) {
    AugmentConfig cfg;
    cfg.strong_set = {TransformKind::identity};
    const auto policy = strong_policy(cfg, std::nullopt);
    Rng rng(9);
    const std::vector<double> x{1.0, 2.0};
    for (int i = 0; i < 10; ++i) EXPECT_EQ(strong_augment(policy, x, rng), x);
}

TEST(Augment, EmptyStrongSetThrows) {
    AugPolicy empty{PolicyKind::strong, {}, std::nullopt};
    Rng rng(0);
    EXPECT_THROW((void)empty({1.0}, rng), std::invalid_argument);
}

TEST(Augment, ImageTransformOnVectorThrows) {
    Rng rng(0);
    EXPECT_THROW((void)apply_transform({TransformKind::cutout, 0.5}, {1.0, 2.0}, std::nullopt, rng), std::invalid_argument);
}

TEST(Augment, StrongSelectionIsUniform) {
    const auto policy = strong_policy(AugmentConfig{}, std::nullopt);
    ASSERT_EQ(policy.transforms.size(), 4u);
    Rng rng(2024);
    std::map<std::size_t, int> counts;
    for (int i = 0; i < 10000; ++i) ++counts[policy.choose(rng)];
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_GE(counts[k], 2500 - 150) << "transform " << k;
        EXPECT_LE(counts[k], 2500 + 150) << "transform " << k;
    }
}

TEST(Augment, ShapePreservedAndInputUntouched) {
    AugmentConfig cfg;
    const auto img = ramp(kImage.rows * kImage.cols);
    const auto vec = ramp(6);
    for (const auto& policy : {weak_policy(cfg, kImage), strong_policy(cfg, kImage)}) {
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(s);
            const auto copy = img;
            EXPECT_EQ(policy(img, rng).size(), img.size());
            EXPECT_EQ(img, copy);
        }
    }
    for (const auto& policy : {weak_policy(cfg, std::nullopt), strong_policy(cfg, std::nullopt)}) {
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(s);
            EXPECT_EQ(policy(vec, rng).size(), vec.size());
        }
    }
}

TEST(Augment, ReproducibleFromSeed) {
    const auto policy = strong_policy(AugmentConfig{}, kImage);
    const auto img = ramp(kImage.rows * kImage.cols);
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng a = make_rng(s, Stream::unlabeled_strong, {3, 4});
        Rng b = make_rng(s, Stream::unlabeled_strong, {3, 4});
        EXPECT_EQ(policy(img, a), policy(img, b));
    }
}

TEST(Augment, ShiftMovesContentWithZeroFill) {
    const auto img = ramp(kImage.rows * kImage.cols);
    const auto shifted = detail::shift_image(img, kImage, 1, 0);
    for (std::size_t c = 0; c < kImage.cols; ++c) EXPECT_EQ(shifted[c], 0.0);
    for (std::size_t c = 0; c < kImage.cols; ++c) EXPECT_EQ(shifted[kImage.cols + c], img[c]);
}

TEST(Augment, WeakDisplacementBelowStrong) {
    const auto ds = standardize(split_labeled(make_two_moons(400, 0.1, 1), 4, 0.0, 1));
    AugmentConfig cfg;
    const auto weak = weak_policy(cfg, std::nullopt);
    const auto strong = strong_policy(cfg, std::nullopt);
    double dw = 0.0, ds_ = 0.0;
    std::uint64_t i = 0;
    for (const auto& s : ds.unlabeled) {
        Rng a = make_rng(17, Stream::labeled_weak, {i});
        Rng b = make_rng(17, Stream::unlabeled_strong, {i});
        dw += distance(s.x, weak(s.x, a));
        ds_ += distance(s.x, strong(s.x, b));
        ++i;
    }
    EXPECT_LT(dw, ds_);

    const auto img = ramp(kImage.rows * kImage.cols);
    const auto wi = weak_policy(cfg, kImage);
    const auto si = strong_policy(cfg, kImage);
    dw = ds_ = 0.0;
    for (std::uint64_t s = 0; s < 500; ++s) {
        Rng a(s), b(s + 1000);
        dw += distance(img, wi(img, a));
        ds_ += distance(img, si(img, b));
    }
    EXPECT_LT(dw, ds_);
}

TEST(Augment, ParseTransformNames) {
    for (auto k : {TransformKind::identity, TransformKind::jitter, TransformKind::dropout, TransformKind::rotate, TransformKind::scale,
                   TransformKind::flip, TransformKind::shift, TransformKind::translate, TransformKind::cutout,
                   TransformKind::brightness_contrast, TransformKind::image_rotate}) {
        EXPECT_EQ(parse_transform_kind(transform_name(k)), k);
    }
    EXPECT_FALSE(parse_transform_kind("mixup").has_value());
}
