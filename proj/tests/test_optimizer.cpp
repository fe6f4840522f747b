#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <dtdq/optimizer.hpp>

namespace dtdq {
namespace {

SystemConfig identical(const DphDistribution& d, PriorityPolicy pr = PriorityPolicy::S1) { return {d, d, 1, pr}; }

TEST(FindOptimalK, DeterministicTwelvePicksSix) {
    const OptimalK opt = find_optimal_k(identical(dph_uniform(12, 12)), 24);
    EXPECT_EQ(opt.k_star, 6);
    ASSERT_EQ(opt.curve.size(), 24u);
}

TEST(FindOptimalK, MatchesTheArgminOfItsOwnCurveWithTiesToSmallerK) {
    for (const SystemConfig& cfg : {identical(dph_geometric(0.1)), identical(dph_uniform(1, 9)),
                                    identical(dph_triangular(9, 3)), identical(dph_uniform(8, 8)),
                                    SystemConfig{dph_geometric(0.2), dph_uniform(1, 5), 1, PriorityPolicy::S2}}) {
        const OptimalK opt = find_optimal_k(cfg, 16);
        int argmin = 1;
        double best = opt.curve[0].aoi_mean;
        for (const KCurvePoint& p : opt.curve) {
            EXPECT_EQ(p.k, static_cast<int>(&p - opt.curve.data()) + 1);
            if (p.aoi_mean < best) {
                best = p.aoi_mean;
                argmin = p.k;
            }
        }
        EXPECT_EQ(opt.k_star, argmin);
        EXPECT_EQ(opt.aoi_mean_at_star, best);
    }
}

TEST(FindOptimalK, DeterministicTwoIsNondecreasingFromItsMinimum) {
    const OptimalK opt = find_optimal_k(identical(dph_uniform(2, 2)), 8);
    EXPECT_EQ(opt.k_star, 1);
    for (std::size_t n = 1; n < opt.curve.size(); ++n)
        EXPECT_GE(opt.curve[n].aoi_mean, opt.curve[n - 1].aoi_mean - 1e-12);
}

TEST(FindOptimalK, GeometricTenDipsThenRises) {
    const OptimalK opt = find_optimal_k(identical(dph_geometric(0.1)), 12);
    int sign_changes = 0;
    double prev = 0.0;
    for (std::size_t n = 1; n < opt.curve.size(); ++n) {
        const double diff = opt.curve[n].aoi_mean - opt.curve[n - 1].aoi_mean;
        if (n > 1 && (diff > 0) != (prev > 0)) ++sign_changes;
        prev = diff;
    }
    EXPECT_EQ(sign_changes, 1);
    EXPECT_LT(opt.curve[1].aoi_mean, opt.curve[0].aoi_mean);
    EXPECT_GT(opt.curve.back().aoi_mean, opt.aoi_mean_at_star);
}

TEST(FindOptimalK, RejectsEmptyRange) {
    EXPECT_THROW(find_optimal_k(identical(dph_geometric(0.5)), 0), ModelError);
}

TEST(GainFrom, PropagatesTheBaselineError) {
    OptimalK opt;
    opt.k_star = 3;
    opt.aoi_mean_at_star = 8.0;
    const GainRecord g = gain_from(opt, {10.0, 0.1});
    EXPECT_DOUBLE_EQ(g.raw_gain_percent, 20.0);
    EXPECT_DOUBLE_EQ(g.gain_std_error, 0.8);
    EXPECT_DOUBLE_EQ(g.ci_low, 20.0 - 1.96 * 0.8);
    EXPECT_DOUBLE_EQ(g.ci_high, 20.0 + 1.96 * 0.8);
    EXPECT_TRUE(g.freezing_beneficial);
    EXPECT_EQ(g.k_star, 3);
    EXPECT_DOUBLE_EQ(g.gain_percent, 20.0);
}

TEST(GainFrom, NegativeOrInsignificantGainsAreFlaggedZero) {
    OptimalK opt;
    opt.k_star = 2;
    opt.aoi_mean_at_star = 10.5;
    const GainRecord worse = gain_from(opt, {10.0, 0.01});
    EXPECT_LT(worse.raw_gain_percent, 0.0);
    EXPECT_FALSE(worse.freezing_beneficial);
    EXPECT_EQ(worse.k_star, 0);
    EXPECT_EQ(worse.gain_percent, 0.0);

    opt.aoi_mean_at_star = 9.99;
    const GainRecord noisy = gain_from(opt, {10.0, 0.1});
    EXPECT_GT(noisy.raw_gain_percent, 0.0);
    EXPECT_FALSE(noisy.freezing_beneficial);
    EXPECT_EQ(noisy.gain_percent, 0.0);
}

TEST(FreezingGain, GeometricBelowTwoIsNotBeneficial) {
    for (double mean : {1.2, 1.5, 1.8}) {
        const GainRecord g = freezing_gain(identical(make_service({ServiceFamily::Geometric, mean})), 6, 1'000'000, 3);
        EXPECT_FALSE(g.freezing_beneficial) << mean << ": raw " << g.raw_gain_percent << " ci_low " << g.ci_low;
        EXPECT_EQ(g.k_star, 0);
        EXPECT_EQ(g.gain_percent, 0.0);
    }
}

TEST(FreezingGain, DeterministicOneSlotServiceCannotBeImproved) {
    const GainRecord g = freezing_gain(identical(dph_uniform(1, 1)), 4, 1'000'000, 1);
    EXPECT_EQ(g.raw_gain_percent, 0.0);
    EXPECT_FALSE(g.freezing_beneficial);
    EXPECT_EQ(g.gain_percent, 0.0);
}

TEST(FreezingGain, TriangularThirteenZeroVarianceExceedsSeventeenPercent) {
    const GainRecord g = freezing_gain(identical(dph_triangular(13, 0)), 26, 1'000'000, 5);
    EXPECT_TRUE(g.freezing_beneficial);
    EXPECT_GT(g.gain_percent, 17.0);
    EXPECT_EQ(g.k_star, 6);
}

TEST(FreezingGain, RequiresALongBaseline) {
    EXPECT_THROW(freezing_gain(identical(dph_geometric(0.5)), 4, 999'999, 1), ModelError);
}

TEST(Services, FamilyMembersHaveTheRequestedMean) {
    EXPECT_EQ(make_service({ServiceFamily::Geometric, 4}), dph_geometric(0.25));
    EXPECT_EQ(make_service({ServiceFamily::Uniform, 5.5}), dph_uniform(1, 10));
    EXPECT_EQ(make_service({ServiceFamily::Deterministic, 12}), dph_uniform(12, 12));
    EXPECT_NEAR(make_service({ServiceFamily::Triangular, 13, 7}).variance(), 7.0, 1e-9);
    EXPECT_THROW(make_service({ServiceFamily::Uniform, 5.3}), ModelError);
    EXPECT_THROW(make_service({ServiceFamily::Deterministic, 2.5}), ModelError);
    EXPECT_THROW(make_service({ServiceFamily::Geometric, 0.5}), ModelError);
    EXPECT_EQ(parse_family("triangular"), ServiceFamily::Triangular);
    EXPECT_THROW(parse_family("gamma"), ModelError);
}

TEST(Services, ExpectedMaximumAndDefaultScanRange) {
    EXPECT_NEAR(expected_max(dph_uniform(3, 3), dph_uniform(3, 3)), 3.0, 1e-12);
    // Geometric(1/2) pair: sum over h of 2 q^h - q^(2h) = 2/(1-q) - 1/(1-q^2).
    EXPECT_NEAR(expected_max(dph_geometric(0.5), dph_geometric(0.5)), 8.0 / 3.0, 1e-12);
    EXPECT_NEAR(expected_max(dph_uniform(2, 2), dph_uniform(5, 5)), 5.0, 1e-12);
    EXPECT_EQ(default_k_max(identical(dph_uniform(12, 12))), 24);
    EXPECT_EQ(default_k_max(identical(dph_geometric(0.5))), 6);
}

TEST(Sweeps, GeometricOptimumIsNondecreasingInTheMean) {
    SweepOptions opt;
    opt.k_max = 12;
    const SweepResult r = sweep_mean(ServiceFamily::Geometric, {1.5, 3.0, 5.0, 8.0}, opt);
    ASSERT_EQ(r.points.size(), 4u);
    EXPECT_EQ(r.kind, "mean");
    for (std::size_t n = 1; n < r.points.size(); ++n)
        EXPECT_GE(r.points[n].gain.optimum.k_star, r.points[n - 1].gain.optimum.k_star);
    EXPECT_EQ(r.points[0].gain.k_star, 0);
    EXPECT_GE(r.points.back().gain.k_star, 3);
}

TEST(Sweeps, VarianceSweepKeepsTheMean) {
    SweepOptions opt;
    opt.k_max = 10;
    const SweepResult r = sweep_variance(ServiceFamily::Triangular, 7, {0, 2, 4}, opt);
    ASSERT_EQ(r.points.size(), 3u);
    for (const SweepPoint& p : r.points) {
        EXPECT_EQ(p.s1.mean, 7.0);
        EXPECT_NEAR(make_service(p.s1).mean(), 7.0, 1e-10);
    }
    // Less variable service gains more from freezing.
    EXPECT_GT(r.points[0].gain.raw_gain_percent, r.points[2].gain.raw_gain_percent);
}

TEST(Sweeps, SwappingMeansAndPriorityLeavesTheAnalyticCurveUnchanged) {
    SweepOptions s1;
    s1.k_max = 8;
    SweepOptions s2 = s1;
    s2.priority = PriorityPolicy::S2;
    const SweepResult a = sweep_nonidentical(ServiceFamily::Geometric, {2, 6}, {4, 8}, s1);
    const SweepResult b = sweep_nonidentical(ServiceFamily::Geometric, {4, 8}, {2, 6}, s2);
    ASSERT_EQ(a.points.size(), 4u);
    for (std::size_t x = 0; x < 2; ++x)
        for (std::size_t y = 0; y < 2; ++y) {
            const SweepPoint& p = a.points[x * 2 + y];
            const SweepPoint& q = b.points[y * 2 + x];
            ASSERT_EQ(p.s1.mean, q.s2.mean);
            ASSERT_EQ(p.s2.mean, q.s1.mean);
            EXPECT_EQ(p.gain.optimum.k_star, q.gain.optimum.k_star);
            for (std::size_t n = 0; n < p.gain.optimum.curve.size(); ++n)
                EXPECT_NEAR(p.gain.optimum.curve[n].aoi_mean, q.gain.optimum.curve[n].aoi_mean, 1e-9);
            const double se = std::hypot(p.gain.gain_std_error, q.gain.gain_std_error);
            EXPECT_LT(std::abs(p.gain.raw_gain_percent - q.gain.raw_gain_percent), 3.5 * se);
        }
}

TEST(Sweeps, PointSeedsAreStableAndDistinct) {
    EXPECT_EQ(point_seed(7, 3), point_seed(7, 3));
    EXPECT_NE(point_seed(7, 3), point_seed(7, 4));
    EXPECT_NE(point_seed(7, 3), point_seed(8, 3));
}

}  // namespace
}  // namespace dtdq
