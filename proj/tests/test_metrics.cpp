#include "ussl/metrics.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <stdlib.h>
#include <sstream>

using namespace ussl;

namespace {

ModelConfig tiny_config(std::size_t d = 4) {
    ModelConfig c;
    c.input_dim = 2;
    c.num_classes = 2;
    c.hidden = {6};
    c.feature_dim = d;
    c.certificates = 2;
    return c;
}

// Zero network whose logit bias favours one class everywhere.
ModelParams constant_predictor(std::size_t cls) {
    auto m = zero_model(tiny_config());
    m.tensors[m.logits_index() + 1].value.values[cls] = 1.0;
    return m;
}

std::vector<Sample> labeled_points(const std::vector<int>& labels) {
    std::vector<Sample> s;
    for (std::size_t i = 0; i < labels.size(); ++i) s.push_back({{static_cast<double>(i), -static_cast<double>(i)}, labels[i]});
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / ("ussl_metrics_" + name)).string(); }

}  // namespace

TEST(Accuracy, Examples) {
    EXPECT_EQ(accuracy(constant_predictor(1), labeled_points({1, 1, 1})), 1.0);
    EXPECT_EQ(accuracy(constant_predictor(0), labeled_points({0, 1, 0, 1, 1, 0})), 0.5);
    EXPECT_NEAR(accuracy(constant_predictor(0), labeled_points({0, 0, 1})), 0.666667, 1e-6);
    EXPECT_THROW((void)accuracy(constant_predictor(0), {}), std::invalid_argument);
}

TEST(Histogram, CountsSumToPoolSizesAndEdgesIncrease) {
    Rng rng(3);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> a(37), b(91);
    for (auto& v : a) v = e(rng);
    for (auto& v : b) v = 2.0 * e(rng);
    const auto r = score_histogram(a, b, 30);
    ASSERT_EQ(r.edges.size(), 31u);
    for (std::size_t i = 1; i < r.edges.size(); ++i) EXPECT_LT(r.edges[i - 1], r.edges[i]);
    std::size_t sa = 0, sb = 0;
    for (auto c : r.labeled_counts) sa += c;
    for (auto c : r.unlabeled_counts) sb += c;
    EXPECT_EQ(sa, a.size());
    EXPECT_EQ(sb, b.size());
    EXPECT_EQ(r.labeled.count, a.size());
}

TEST(Histogram, IdenticalPoolsGiveIdenticalCounts) {
    const std::vector<double> s{0.1, 0.4, 0.4, 2.0, 3.5};
    const auto r = score_histogram(s, s, 7);
    EXPECT_EQ(r.labeled_counts, r.unlabeled_counts);
    EXPECT_EQ(r.separation, 0.0);
}

TEST(Histogram, AllEqualScoresOccupyOneBin) {
    const std::vector<double> s(5, 0.75);
    const auto r = score_histogram(s, {0.75, 0.75}, 4);
    std::size_t occupied = 0;
    for (auto c : r.labeled_counts) occupied += c > 0;
    EXPECT_EQ(occupied, 1u);
    for (double q : r.labeled.quantiles) EXPECT_EQ(q, 0.75);
    for (double q : r.unlabeled.quantiles) EXPECT_EQ(q, 0.75);
}

TEST(Histogram, QuantilesInterpolateLinearly) {
    const auto r = score_histogram({0.0, 1.0, 2.0, 3.0, 4.0}, {0.0, 10.0}, 2);
    EXPECT_NEAR(r.labeled.quantiles[0], 0.04, 1e-15);
    EXPECT_EQ(r.labeled.quantiles[1], 1.0);
    EXPECT_EQ(r.labeled.quantiles[2], 2.0);
    EXPECT_NEAR(r.unlabeled.quantiles[4], 9.9, 1e-12);
    EXPECT_EQ(r.labeled.mean, 2.0);
}

TEST(Histogram, MaximumLandsInLastBin) {
    const auto r = score_histogram({0.0, 1.0}, {0.5, 1.0}, 2);
    EXPECT_EQ(r.labeled_counts, (std::vector<std::size_t>{1, 1}));
    EXPECT_EQ(r.unlabeled_counts, (std::vector<std::size_t>{0, 2}));
}

TEST(Histogram, Errors) {
    EXPECT_THROW((void)score_histogram({}, {1.0}, 5), std::invalid_argument);
    EXPECT_THROW((void)score_histogram({1.0}, {1.0}, 1), std::invalid_argument);
}

TEST(Separation, MeanGapOverPooledStd) {
    // pooled variance = (2 + 2) / 4 = 1, mean gap = 3
    EXPECT_NEAR(separation({0.0, 1.0, 2.0}, {3.0, 4.0, 5.0}), 3.0, 1e-15);
    EXPECT_EQ(separation({1.0, 1.0}, {1.0, 1.0}), 0.0);
    EXPECT_TRUE(std::isinf(separation({1.0, 1.0}, {2.0, 2.0})));
    EXPECT_THROW((void)separation({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Separation, InvariantToShiftAndScale) {
    const std::vector<double> a{0.3, 1.7, 2.2, 0.9}, b{1.1, 2.5, 3.0};
    std::vector<double> a2, b2;
    for (double v : a) a2.push_back(5.0 * v - 2.0);
    for (double v : b) b2.push_back(5.0 * v - 2.0);
    EXPECT_NEAR(separation(a, b), separation(a2, b2), 1e-12);
}

TEST(CertificateHistogram, ScoresComeFromUnaugmentedInputs) {
    const auto m = init_model(tiny_config(), 5);
    const auto pool = labeled_points({0, 1, 0, 1});
    const auto scores = certificate_scores(m, pool);
    const auto direct = certificate_scores(evaluate(m, stack_features(pool)).residual);
    EXPECT_EQ(scores, direct);
    const auto r = certificate_histogram(m, pool, pool, 30);
    EXPECT_EQ(r.labeled_counts, r.unlabeled_counts);
}

TEST(ExportEmbeddings, ShapeTagsAndDeterminism) {
    const auto m = init_model(tiny_config(32), 7);
    SplitDataset split;
    split.num_classes = 2;
    split.feature_dim = 2;
    split.labeled = labeled_points({0, 1, 0, 1});
    for (int i = 0; i < 6; ++i) split.unlabeled.push_back({{0.1 * i, 1.0 - 0.2 * i}, std::nullopt});
    split.set_unlabeled_truth({0, 1, 1, std::nullopt, 0, 1});
    AugmentConfig aug;
    const auto weak = weak_policy(aug, std::nullopt), strong = strong_policy(aug, std::nullopt);

    const auto a = temp_path("a.csv"), b = temp_path("b.csv");
    export_embeddings(m, split, weak, strong, 11, a);
    export_embeddings(m, split, weak, strong, 11, b);
    const auto text = slurp(a);
    EXPECT_EQ(text, slurp(b));

    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 36);
    std::size_t rows = 0, labeled = 0, unlabeled = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 36) << line;
        labeled += line.find(",labeled-weak,") != std::string::npos;
        unlabeled += line.find(",unlabeled-strong,") != std::string::npos;
        ++rows;
    }
    EXPECT_EQ(rows, 10u);
    EXPECT_EQ(labeled, split.labeled.size());
    EXPECT_EQ(unlabeled, split.unlabeled.size());
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST(ExportEmbeddings, UnwritablePathNamedInError) {
    const auto m = init_model(tiny_config(), 7);
    SplitDataset split;
    split.labeled = labeled_points({0, 1});
    const AugmentConfig aug;
    try {
        export_embeddings(m, split, weak_policy(aug, std::nullopt), strong_policy(aug, std::nullopt), 1, "/nonexistent/dir/e.csv");
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/e.csv"), std::string::npos);
    }
}

TEST(WorkerThreads, ParallelEvaluationMatchesSerial) {
    const auto m = init_model(tiny_config(), 9);
    std::vector<Sample> pool;
    Rng rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < 257; ++i) pool.push_back({{g(rng), g(rng)}, i % 2});
    ::unsetenv("USSL_THREADS");
    const auto serial = predict_classes(m, pool);
    const auto serial_scores = certificate_scores(m, pool);
    ::setenv("USSL_THREADS", "4", 1);
    EXPECT_EQ(worker_threads(), 4u);
    EXPECT_EQ(predict_classes(m, pool), serial);
    EXPECT_EQ(certificate_scores(m, pool), serial_scores);
    ::setenv("USSL_THREADS", "zero", 1);
    EXPECT_EQ(worker_threads(), 1u);
    ::unsetenv("USSL_THREADS");
}
