#include "support.hpp"

#include "rap/bench.hpp"

#include <gtest/gtest.h>

using namespace rap;
using namespace rap::bench;

namespace {

std::pair<Matrix, Vector> as_matrix(const std::vector<sim::StreamSample>& stream) {
    Matrix X(static_cast<Index>(stream.size()), stream.front().x.size());
    Vector y(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        X.row(i) = stream[static_cast<std::size_t>(i)].x.transpose();
        y[i] = stream[static_cast<std::size_t>(i)].y;
    }
    return {X, y};
}

} // namespace

TEST(FScore, Examples) {
    EXPECT_EQ(f_score({1, 3}, {1, 3}), 1.0);
    EXPECT_EQ(f_score({}, {0, 2}), 0.0);
    EXPECT_EQ(f_score({}, {}), 1.0);
    EXPECT_EQ(f_score({4}, {}), 0.0);
    // precision 1/2, recall 1
    EXPECT_NEAR(f_score({0, 1}, {0}), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(f_score({0, 2}, {1, 2}), f_score({1, 2}, {0, 2}));
}

TEST(DeltaL1, Examples) {
    EXPECT_EQ(delta_l1(Eigen::Vector2d(1, -1), Eigen::Vector2d(1, -1)), 0.0);
    EXPECT_EQ(delta_l1(Eigen::Vector2d(1, -1), Eigen::Vector2d(0.5, 0)), 1.5);
    const Eigen::Vector3d a(0.3, -2, 1), b(1, 1, -0.25);
    EXPECT_EQ(delta_l1(a, b), -delta_l1(b, a));
    EXPECT_THROW(delta_l1(a, Vector::Zero(2)), std::invalid_argument);
}

TEST(MeanSe, Basics) {
    const auto one = mean_se({2.0});
    EXPECT_EQ(one.mean, 2.0);
    EXPECT_FALSE(one.se);
    const auto two = mean_se({1.0, 3.0});
    EXPECT_EQ(two.mean, 2.0);
    ASSERT_TRUE(two.se);
    EXPECT_NEAR(*two.se, 1.0, 1e-15);
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0}), 2.5);
}

TEST(KfoldCv, NoiseSelectsHeavyShrinkage) {
    int top_decile = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        sim::RegimeSpec spec;
        spec.p = 10;
        spec.rho = 0.0;
        spec.duration = 200;
        spec.seed = seed;
        auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
        const auto cv = kfold_cv_lambda(X, y, Family::gaussian());
        EXPECT_EQ(cv.grid.size(), 50u);
        EXPECT_EQ(cv.lambda, cv.grid[cv.best_index]);
        top_decile += cv.best_index < 5;
    }
    EXPECT_GE(top_decile, 16);
}

TEST(KfoldCv, DuplicatedRowsGiveSameLambda) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        sim::RegimeSpec spec;
        spec.p = 8;
        spec.rho = 0.5;
        spec.duration = 200;
        spec.seed = seed;
        auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
        Matrix X2(400, 8);
        Vector y2(400);
        for (Index i = 0; i < 200; ++i) {
            X2.row(2 * i) = X2.row(2 * i + 1) = X.row(i);
            y2[2 * i] = y2[2 * i + 1] = y[i];
        }
        const auto a = kfold_cv_lambda(X, y, Family::gaussian());
        const auto b = kfold_cv_lambda(X2, y2, Family::gaussian());
        EXPECT_EQ(a.best_index, b.best_index);
        EXPECT_NEAR(a.lambda, b.lambda, 1e-12 * a.lambda);
    }
}

TEST(KfoldCv, SingleGridValueAndErrors) {
    sim::RegimeSpec spec;
    spec.p = 4;
    spec.duration = 50;
    auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
    CvOptions one;
    one.grid_size = 1;
    const auto cv = kfold_cv_lambda(X, y, Family::gaussian(), one);
    ASSERT_EQ(cv.grid.size(), 1u);
    EXPECT_EQ(cv.lambda, cv.grid[0]);
    EXPECT_NEAR(cv.lambda, (X.transpose() * y).cwiseAbs().maxCoeff() / 50.0, 1e-12);

    CvOptions k;
    k.folds = 60;
    EXPECT_THROW(kfold_cv_lambda(X, y, Family::gaussian(), k), std::invalid_argument);
    EXPECT_FALSE(kfold_cv_lambda(X, y, Family::gaussian()).degenerate);
    EXPECT_TRUE(kfold_cv_lambda(X, Vector::Constant(50, 1.0), Family::binomial()).degenerate);
}

TEST(KfoldCv, BinomialRuns) {
    sim::RegimeSpec spec;
    spec.p = 5;
    spec.rho = 0.6;
    spec.family = FamilyKind::binomial;
    spec.duration = 150;
    spec.seed = 4;
    auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
    const auto cv = kfold_cv_lambda(X, y, Family::binomial());
    EXPECT_GT(cv.lambda, 0.0);
    EXPECT_LT(cv.best_index, 50u);
}

TEST(StepwiseCv, OneSegmentEqualsKfold) {
    sim::RegimeSpec spec;
    spec.p = 6;
    spec.duration = 100;
    auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
    const auto s = stepwise_cv_lambda(X, y, Family::gaussian(), {});
    ASSERT_EQ(s.lambdas.size(), 1u);
    EXPECT_EQ(s.lambdas[0], kfold_cv_lambda(X, y, Family::gaussian()).lambda);
    EXPECT_EQ(s.at(57), s.lambdas[0]);
}

TEST(StepwiseCv, ShortSegmentRejected) {
    sim::RegimeSpec spec;
    spec.p = 3;
    spec.duration = 50;
    auto [X, y] = as_matrix(sim::sample_regime(spec).samples);
    EXPECT_THROW(stepwise_cv_lambda(X, y, Family::gaussian(), {45}), std::invalid_argument);
    EXPECT_THROW(stepwise_cv_lambda(X, y, Family::gaussian(), {20, 10}), std::invalid_argument);
}

TEST(StepwiseCv, SparseRegimeGetsLargestPenalty) {
    std::vector<double> dense1, sparse, dense2;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        sim::Rng rng(seed);
        const auto stream = sim::make_piecewise_stream(sim::table1_specs(FamilyKind::gaussian), rng);
        auto [X, y] = as_matrix(stream);
        const auto s = stepwise_cv_lambda(X, y, Family::gaussian(), sim::changepoints(stream));
        ASSERT_EQ(s.lambdas.size(), 3u);
        EXPECT_EQ(s.at(0), s.lambdas[0]);
        EXPECT_EQ(s.at(100), s.lambdas[1]);
        EXPECT_EQ(s.at(299), s.lambdas[2]);
        dense1.push_back(s.lambdas[0]);
        sparse.push_back(s.lambdas[1]);
        dense2.push_back(s.lambdas[2]);
    }
    EXPECT_GT(median(sparse), median(dense1));
    EXPECT_GT(median(sparse), median(dense2));
}

TEST(Presets, Names) {
    const auto s = preset_config("stationary-gaussian");
    EXPECT_EQ(s.preset, Preset::stationary);
    EXPECT_EQ(s.dims, (std::vector<Index>{10, 50, 100}));
    EXPECT_EQ(s.forgetting, 1.0);
    const auto n = preset_config("nonstationary-binomial");
    EXPECT_EQ(n.preset, Preset::nonstationary);
    EXPECT_EQ(n.family, FamilyKind::binomial);
    EXPECT_EQ(n.forgetting, 0.95);
    EXPECT_EQ(n.epsilon, 0.025);
    EXPECT_THROW(preset_config("table1"), std::invalid_argument);
    EXPECT_THROW(preset_config("stationary-poisson"), std::invalid_argument);
}

TEST(RunReplications, ZeroStepIsFixedLambdaLasso) {
    auto config = preset_config("nonstationary-gaussian");
    config.epsilon = 0.0;
    const auto result = run_replications(config, 1);
    ASSERT_EQ(result.replications.size(), 1u);
    const auto& rep = result.replications[0];
    ASSERT_TRUE(rep.ok) << rep.error;
    ASSERT_EQ(rep.arms.size(), 4u);
    EXPECT_EQ(rep.arms[0].arm, kArmRap);
    EXPECT_EQ(rep.arms[1].arm, kArmRapApprox);
    EXPECT_EQ(rep.arms[2].arm, kArmFixedCv);
    EXPECT_EQ(rep.arms[3].arm, kArmStepwise);
    const double lambda0 = rep.arms[0].trace.front().lambda;
    EXPECT_GE(lambda0, 0.0);
    EXPECT_LE(lambda0, 1.0);
    for (const auto& rec : rep.arms[0].trace) EXPECT_EQ(rec.lambda, lambda0);
    // Same stream, same fixed penalty: the exact and approximate arms agree.
    EXPECT_EQ(rep.arms[0].mean_loss, rep.arms[1].mean_loss);
    for (const auto& arm : result.summary.arms) {
        EXPECT_FALSE(arm.loss.se);
        EXPECT_FALSE(arm.f.se);
    }
    EXPECT_EQ(result.summary.completed, 1u);
}

TEST(RunReplications, ReproducibleAndThreadIndependent) {
    auto config = preset_config("nonstationary-binomial");
    config.threads = 1;
    const auto a = run_replications(config, 3);
    config.threads = 3;
    const auto b = run_replications(config, 3);
    ASSERT_EQ(a.summary.arms.size(), b.summary.arms.size());
    for (std::size_t k = 0; k < a.summary.arms.size(); ++k) {
        EXPECT_EQ(a.summary.arms[k].loss.mean, b.summary.arms[k].loss.mean);
        EXPECT_EQ(a.summary.arms[k].f.mean, b.summary.arms[k].f.mean);
        EXPECT_EQ(a.summary.arms[k].loss.se, b.summary.arms[k].loss.se);
    }
    config.seed = 2;
    const auto c = run_replications(config, 3);
    EXPECT_NE(a.summary.arms[0].loss.mean, c.summary.arms[0].loss.mean);
}

TEST(RunReplications, TraceInvariants) {
    auto config = preset_config("nonstationary-gaussian");
    const auto result = run_replications(config, 2);
    for (const auto& rep : result.replications) {
        ASSERT_TRUE(rep.ok);
        for (const auto& arm : rep.arms) {
            ASSERT_EQ(arm.trace.size(), 300u);
            for (std::size_t t = 0; t < arm.trace.size(); ++t) {
                const auto& rec = arm.trace[t];
                EXPECT_EQ(rec.t, t + 1);
                EXPECT_GE(rec.lambda, 0.0);
                ASSERT_TRUE(rec.f_score);
                EXPECT_GE(*rec.f_score, 0.0);
                EXPECT_LE(*rec.f_score, 1.0);
                EXPECT_EQ(rec.regime_id, static_cast<int>(t / 100));
            }
        }
    }
}

TEST(RunReplications, StationaryDeltas) {
    auto config = preset_config("stationary-gaussian");
    config.dims = {10};
    const auto result = run_replications(config, 2);
    ASSERT_EQ(result.summary.deltas.size(), 1u);
    EXPECT_EQ(result.summary.deltas[0].p, 10);
    for (const auto& rep : result.replications) {
        ASSERT_TRUE(rep.ok);
        EXPECT_EQ(rep.arms.size(), 3u);
        EXPECT_NEAR(rep.delta, rep.l1_cv - rep.l1_rap, 1e-12);
    }
}

TEST(ContractionProbe, ZeroStepIsIdentity) {
    std::mt19937_64 gen(3);
    auto s = fixtures::random_problem(gen, 80, 5);
    RapOptions opts;
    opts.epsilon = 0.0;
    RapLearner learner(5, Family::gaussian(), opts);
    for (Index i = 0; i < 79; ++i) learner.step(s.X.row(i).transpose(), s.y[i]);
    sim::Rng rng(1);
    const auto rep = contraction_probe(learner, s.X.row(79).transpose(), s.y[79], 0.0, 200, rng);
    EXPECT_GT(rep.same_set_pairs, 0u);
    EXPECT_EQ(rep.max_ratio, 1.0);
    EXPECT_EQ(rep.contracting_pairs, 0u);
}

TEST(ContractionProbe, SmallStepContractsAndOrbitsStayBounded) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 5; ++trial) {
        auto s = fixtures::random_problem(gen, 80, 6);
        RapOptions opts;
        opts.epsilon = 0.0;
        RapLearner learner(6, Family::gaussian(), opts);
        for (Index i = 0; i < 79; ++i) learner.step(s.X.row(i).transpose(), s.y[i]);
        const Vector x = s.X.row(79).transpose();
        const double eps = contraction_step_bound(learner, x);
        sim::Rng rng(trial);
        const auto rep = contraction_probe(learner, x, s.y[79], eps, 200, rng, 5, 2000);
        EXPECT_GT(rep.same_set_pairs, 0u);
        EXPECT_EQ(rep.contracting_pairs, rep.same_set_pairs);
        EXPECT_LT(rep.max_ratio, 1.0);
        EXPECT_EQ(rep.bounded_orbits, rep.orbits);
        EXPECT_EQ(rep.expanding_cycles, 0u);
    }
}
