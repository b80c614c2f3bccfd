#include "support.hpp"

#include "rap/streaming_stats.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace rap;

TEST(WeightedMoments, InitIsEmpty) {
    WeightedMoments m(3, 0.95);
    EXPECT_EQ(m.omega(), 0.0);
    EXPECT_EQ(m.count(), 0u);
    EXPECT_TRUE(m.mean().isZero(0.0));
    EXPECT_TRUE(m.gram().isZero(0.0));
    EXPECT_TRUE(m.cross().isZero(0.0));

    WeightedMoments one(1, 1.0);
    EXPECT_EQ(one.omega(), 0.0);
    EXPECT_EQ(one.count(), 0u);
}

TEST(WeightedMoments, RejectsBadArguments) {
    EXPECT_THROW(WeightedMoments(2, 1.5), std::invalid_argument);
    EXPECT_THROW(WeightedMoments(2, 0.0), std::invalid_argument);
    EXPECT_THROW(WeightedMoments(2, -0.1), std::invalid_argument);
    EXPECT_THROW(WeightedMoments(0, 0.9), std::invalid_argument);
}

TEST(WeightedMoments, FirstUpdate) {
    for (double r : {0.3, 0.95, 1.0}) {
        WeightedMoments m(2, r);
        m.update(Eigen::Vector2d(1, 2), 3);
        EXPECT_DOUBLE_EQ(m.omega(), 1.0);
        EXPECT_DOUBLE_EQ(m.mean()[0], 1.0);
        EXPECT_DOUBLE_EQ(m.mean()[1], 2.0);
        EXPECT_DOUBLE_EQ(m.cross()[0], 3.0);
        EXPECT_DOUBLE_EQ(m.cross()[1], 6.0);
    }
}

TEST(WeightedMoments, OmegaRecursion) {
    WeightedMoments m(1, 0.5);
    m.update(Vector::Ones(1), 0);
    m.update(Vector::Ones(1), 0);
    EXPECT_DOUBLE_EQ(m.omega(), 1.5);
}

TEST(WeightedMoments, RejectsNonFiniteAndWrongSize) {
    WeightedMoments m(2, 0.9);
    EXPECT_THROW(m.update(Eigen::Vector2d(1, NAN), 0), DataError);
    EXPECT_THROW(m.update(Eigen::Vector2d(1, 2), INFINITY), DataError);
    EXPECT_THROW(m.update(Vector::Ones(3), 0), std::invalid_argument);
    EXPECT_EQ(m.count(), 0u);
}

TEST(WeightedMoments, EffectiveWeight) {
    WeightedMoments m(1, 0.5);
    for (int i = 0; i < 4; ++i) m.update(Vector::Ones(1), 1);
    EXPECT_DOUBLE_EQ(m.effective_weight(4), 1.0);
    EXPECT_DOUBLE_EQ(m.effective_weight(2), 0.25);
    EXPECT_THROW(m.effective_weight(0), std::out_of_range);
    EXPECT_THROW(m.effective_weight(5), std::out_of_range);

    WeightedMoments flat(1, 1.0);
    for (int i = 0; i < 5; ++i) flat.update(Vector::Ones(1), 1);
    for (std::size_t i = 1; i <= 5; ++i) EXPECT_EQ(flat.effective_weight(i), 1.0);
}

TEST(WeightedMoments, UniformGramMatchesBatchSum) {
    std::mt19937_64 rng(7);
    auto s = fixtures::random_problem(rng, 10, 4);
    auto m = fixtures::stream(s, 1.0);
    Matrix batch = s.X.transpose() * s.X;
    EXPECT_LE((m.gram() - batch).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(m.omega(), 10.0);
}

// Oracle: direct weighted sums over a stored copy of the stream.
TEST(WeightedMoments, RecursionMatchesDirectSummation) {
    std::mt19937_64 rng(11);
    for (double r : {0.5, 0.9, 0.95, 0.999, 1.0}) {
        for (Index n : {1, 7, 200, 1000}) {
            auto s = fixtures::random_problem(rng, n, 5);
            auto m = fixtures::stream(s, r);
            Matrix gram = Matrix::Zero(5, 5);
            Vector cross = Vector::Zero(5);
            Vector wmean = Vector::Zero(5);
            double omega = 0.0;
            for (Index i = 0; i < n; ++i) {
                const double w = std::pow(r, static_cast<double>(n - 1 - i));
                gram += w * s.X.row(i).transpose() * s.X.row(i);
                cross += w * s.y[i] * s.X.row(i).transpose();
                wmean += w * s.X.row(i).transpose();
                omega += w;
            }
            wmean /= omega;
            EXPECT_LE((m.gram() - gram).norm(), 1e-10 * gram.norm()) << "r=" << r << " n=" << n;
            EXPECT_LE((m.cross() - cross).norm(), 1e-10 * std::max(1.0, cross.norm()));
            EXPECT_NEAR(m.omega(), omega, 1e-12 * omega);
            EXPECT_LE((m.mean() - wmean).norm(), 1e-10 * std::max(1.0, wmean.norm()));
        }
    }
}

TEST(WeightedMoments, GramStaysSymmetricPsd) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = fixtures::random_problem(rng, 3 + trial, 8);
        auto m = fixtures::stream(s, 0.9);
        EXPECT_EQ((m.gram() - m.gram().transpose()).norm(), 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(m.gram());
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * m.gram().diagonal().maxCoeff());
    }
}
