#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <dtdq/rmc.hpp>
#include <dtdq/simulator.hpp>

#include "test_support.hpp"

namespace dtdq {
namespace {

using testing::dense;

// Order-1 servers with k = 1: states (1,0,0,0), (2,1,0,0), (3,0,1,0), (4,1,1,0).
Eigen::Matrix4d hand_expanded_w(double p1, double p2, PriorityPolicy pr) {
    const double b1 = p1, b2 = p2, B1 = 1.0 - p1, B2 = 1.0 - p2;
    const int idle_target = pr == PriorityPolicy::S1 ? 1 : 2;
    Eigen::Matrix4d w = Eigen::Matrix4d::Zero();
    w(0, idle_target) = 1.0;
    w(1, idle_target) += b1;
    w(1, 3) += B1;
    w(2, idle_target) += b2;
    w(2, 3) += B2;
    w(3, idle_target) += b1 * b2;
    w(3, 3) += b1 * B2 + b2 * B1 + B1 * B2;
    return w;
}

TEST(BuildRmc, OrderOneKOneMatchesHandExpansion) {
    for (PriorityPolicy pr : {PriorityPolicy::S1, PriorityPolicy::S2}) {
        for (auto [p1, p2] : {std::pair{0.3, 0.7}, std::pair{0.5, 0.5}, std::pair{0.9, 0.15}}) {
            const RmcModel rmc = build_rmc({dph_geometric(p1), dph_geometric(p2), 1, pr});
            ASSERT_EQ(rmc.size(), 4);
            EXPECT_LE((dense(rmc.W) - Eigen::MatrixXd(hand_expanded_w(p1, p2, pr))).cwiseAbs().maxCoeff(), 1e-15);
        }
    }
}

TEST(BuildRmc, RowsCloseOnRandomConfigs) {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 100; ++trial) {
        const SystemConfig cfg{testing::random_dph(gen, 5), testing::random_dph(gen, 5),
                               1 + static_cast<int>(gen() % 6), gen() % 2 ? PriorityPolicy::S1 : PriorityPolicy::S2};
        const RmcModel rmc = build_rmc(cfg);
        const Eigen::VectorXd rows = dense(rmc.W).rowwise().sum();
        EXPECT_LE((rows.array() - 1.0).abs().maxCoeff(), 1e-12) << "trial " << trial;
        EXPECT_GE(dense(rmc.W).minCoeff(), 0.0);
    }
}

// While the clock is still running, S1 finishing leaves S1 idle: the entry is
// b1(i) B2(j, j') with no initial-phase factor for S1.
TEST(BuildRmc, FrozenDepartureFromBothBusyCarriesNoNewPacket) {
    std::mt19937_64 gen(3);
    const SystemConfig cfg{testing::random_dense_dph(gen, 3), testing::random_dense_dph(gen, 2), 3};
    const RmcModel rmc = build_rmc(cfg);
    const Eigen::MatrixXd W = dense(rmc.W);
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 2; ++j)
            for (int jn = 1; jn <= 2; ++jn) {
                const double want = cfg.dph1.exit()[i - 1] * cfg.dph2.B()(j - 1, jn - 1);
                EXPECT_NEAR(W(rmc.space.index_of({4, i, j, 0}), rmc.space.index_of({3, 0, jn, 1})), want, 1e-15);
            }
}

RmcState mirror(const RmcState& s) {
    static constexpr int kSwap[5] = {0, 1, 3, 2, 4};
    return {kSwap[s.cls], s.j, s.i, s.l};
}

TEST(BuildRmc, PrioritiesAreMirrorImagesForIdenticalServers) {
    for (const DphDistribution& d : {dph_geometric(0.35), dph_uniform(1, 4), dph_triangular(6, 2)}) {
        for (int k = 1; k <= 4; ++k) {
            const RmcModel s1 = build_rmc({d, d, k, PriorityPolicy::S1});
            const RmcModel s2 = build_rmc({d, d, k, PriorityPolicy::S2});
            const Eigen::MatrixXd w1 = dense(s1.W), w2 = dense(s2.W);
            for (int r = 0; r < s1.size(); ++r)
                for (int c = 0; c < s1.size(); ++c) {
                    const int mr = s2.space.index_of(mirror(s1.space.state_of(r)));
                    const int mc = s2.space.index_of(mirror(s1.space.state_of(c)));
                    ASSERT_NEAR(w1(r, c), w2(mr, mc), 1e-15);
                }
        }
    }
}

TEST(BuildRmc, RejectsZeroFreezing) {
    EXPECT_THROW(build_rmc({dph_geometric(0.5), dph_geometric(0.5), 0}), ModelError);
}

TEST(RmcSteadyState, ResidualIsTinyOnRandomConfigs) {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 100; ++trial) {
        const SystemConfig cfg{testing::random_dph(gen, 5), testing::random_dph(gen, 5),
                               1 + static_cast<int>(gen() % 6), gen() % 2 ? PriorityPolicy::S1 : PriorityPolicy::S2};
        const RmcModel rmc = build_rmc(cfg);
        const Eigen::VectorXd pi = rmc_steady_state(rmc);
        EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
        EXPECT_GE(pi.minCoeff(), 0.0);
        const Eigen::VectorXd residual = (pi.transpose() * rmc.W).transpose() - pi;
        EXPECT_LT(residual.lpNorm<Eigen::Infinity>(), 1e-10) << "trial " << trial;
    }
}

// Server occupancy observed by the simulator, keyed like the RMC space.
struct Occupancy {
    Eigen::VectorXd frequency;
    Eigen::VectorXd std_error;
};

Occupancy simulated_occupancy(const SystemConfig& cfg, long slots, std::uint64_t seed) {
    const RmcSpace space(cfg.dph1.order(), cfg.dph2.order(), cfg.k);
    constexpr int kBatchCount = 40;
    Eigen::MatrixXd batch = Eigen::MatrixXd::Zero(kBatchCount, space.size());
    SlotSimulator sim(cfg, seed);
    const long warm = slots / 100;
    for (long t = 1; t <= warm + slots; ++t) {
        sim.advance();
        if (t <= warm) continue;
        const int p1 = sim.phase(0), p2 = sim.phase(1);
        const RmcState s{1 + (p1 > 0) + 2 * (p2 > 0), p1, p2, sim.clock()};
        batch(static_cast<int>((t - warm - 1) * kBatchCount / slots), space.index_of(s)) += 1.0;
    }
    batch /= static_cast<double>(slots / kBatchCount);
    Occupancy o;
    o.frequency = batch.colwise().mean().transpose();
    o.std_error = Eigen::VectorXd(space.size());
    for (int c = 0; c < space.size(); ++c) {
        const double var = (batch.col(c).array() - o.frequency[c]).square().sum() / (kBatchCount - 1);
        o.std_error[c] = std::sqrt(var / kBatchCount);
    }
    return o;
}

// The pair of deterministic one-slot servers with k = 1 is driven into a
// single state: every slot the packet on S1 is delivered and a new one is
// generated onto the now idle S1, while S2 is never used.
TEST(RmcSteadyState, DeterministicOneSlotServiceKeepsOnlyS1Busy) {
    const SystemConfig cfg{dph_uniform(1, 1), dph_uniform(1, 1), 1, PriorityPolicy::S1};
    RmcModel rmc = build_rmc(cfg);
    const Eigen::VectorXd pi = rmc_steady_state(rmc);
    const Occupancy sim = simulated_occupancy(cfg, 100'000, 5);
    EXPECT_EQ(sim.frequency[rmc.space.index_of({2, 1, 0, 0})], 1.0);
    EXPECT_NEAR(pi[rmc.space.index_of({2, 1, 0, 0})], 1.0, 1e-12);
    EXPECT_LE((pi - sim.frequency).cwiseAbs().maxCoeff(), 1e-12);
}

// Deterministic service makes the chain reducible (most states are never
// visited); the stationary vector is the long-run occupancy from an idle start.
TEST(RmcSteadyState, ReducibleChainsUseTheOccupancyFromAnIdleStart) {
    const SystemConfig cfg{dph_uniform(3, 3), dph_uniform(3, 3), 2, PriorityPolicy::S1};
    const RmcModel rmc = build_rmc(cfg);
    const Eigen::VectorXd pi = rmc_steady_state(rmc);
    const Occupancy sim = simulated_occupancy(cfg, 200'000, 9);
    EXPECT_LE((pi - sim.frequency).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(RmcSteadyState, GeometricHalfKTwoMatchesSimulatedOccupancy) {
    const SystemConfig cfg{dph_geometric(0.5), dph_geometric(0.5), 2, PriorityPolicy::S1};
    const RmcModel rmc = build_rmc(cfg);
    const Eigen::VectorXd pi = rmc_steady_state(rmc);
    const Occupancy sim = simulated_occupancy(cfg, 1'000'000, 77);
    for (int s = 0; s < rmc.size(); ++s) {
        if (pi[s] == 0.0) {
            EXPECT_EQ(sim.frequency[s], 0.0);
            continue;
        }
        EXPECT_LT(std::abs(pi[s] - sim.frequency[s]), 3.0 * sim.std_error[s])
            << to_string(rmc.space.state_of(s)) << " pi " << pi[s] << " sim " << sim.frequency[s];
    }
}

TEST(InitialVector, OrderOneKOneHasThreeNonzerosFromTheClosedForms) {
    for (auto [p1, p2] : {std::pair{0.3, 0.7}, std::pair{0.5, 0.5}, std::pair{0.82, 0.11}}) {
        const SystemConfig cfg{dph_geometric(p1), dph_geometric(p2), 1, PriorityPolicy::S1};
        RmcModel rmc = build_rmc(cfg);
        rmc.pi = rmc_steady_state(rmc);
        AmcModel amc = build_amc(cfg);
        initial_vector(rmc, amc, cfg);

        const double b1 = p1, b2 = p2, B1 = 1.0 - p1, B2 = 1.0 - p2;
        const double r1 = rmc.pi[0], r2 = rmc.pi[1], r3 = rmc.pi[2], r4 = rmc.pi[3];
        const double q1 = B2 * r3 + b1 * B2 * r4;
        const double q4 = B1 * r2 + b2 * B1 * r4;
        const double q5 = r1 + b1 * r2 + b2 * r3 + b1 * b2 * r4;
        const double total = q1 + q4 + q5;
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(14);
        expected[0] = q1 / total;
        expected[3] = q4 / total;
        expected[4] = q5 / total;
        EXPECT_LE((amc.sigma - expected).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(InitialVector, NormalizedAndOnTheLegalSupport) {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 100; ++trial) {
        const SystemConfig cfg{testing::random_dph(gen, 5), testing::random_dph(gen, 5),
                               1 + static_cast<int>(gen() % 6), gen() % 2 ? PriorityPolicy::S1 : PriorityPolicy::S2};
        const AmcModel model = build_model(cfg);
        EXPECT_NEAR(model.sigma.sum(), 1.0, 1e-12);
        EXPECT_TRUE(validate_amc(model).empty()) << "trial " << trial;
    }
}

TEST(InitialVector, ClassOneWeightEqualsTheFlowIntoNewS1PacketsBesideABusyS2) {
    std::mt19937_64 gen(37);
    for (int trial = 0; trial < 20; ++trial) {
        const SystemConfig cfg{testing::random_dph(gen, 4), testing::random_dph(gen, 4),
                               1 + static_cast<int>(gen() % 4), PriorityPolicy::S1};
        RmcModel rmc = build_rmc(cfg);
        rmc.pi = rmc_steady_state(rmc);
        const AmcSpace space = enumerate_amc(cfg.dph1.order(), cfg.dph2.order(), cfg.k);
        const Eigen::VectorXd q = initial_weights(rmc, space, cfg);
        double by_state = 0.0;
        for (int r = 0; r < space.size(); ++r)
            if (space.state_of(r).cls == 1) by_state += q[r];
        // Direct flow: S2 keeps serving (probability 1 - b2(j)) while a new
        // packet lands on S1, which is either idle or just finished.
        const int last = cfg.k - 1;
        const Eigen::VectorXd &b1 = cfg.dph1.exit(), &b2 = cfg.dph2.exit();
        double by_flow = 0.0;
        for (int j = 1; j <= cfg.dph2.order(); ++j) {
            by_flow += (1.0 - b2[j - 1]) * rmc.pi[rmc.space.index_of({3, 0, j, last})];
            for (int i = 1; i <= cfg.dph1.order(); ++i)
                by_flow += b1[i - 1] * (1.0 - b2[j - 1]) * rmc.pi[rmc.space.index_of({4, i, j, last})];
        }
        EXPECT_NEAR(by_state, by_flow, 1e-13);
    }
}

AmcState mirror_amc(const AmcState& s) {
    static constexpr int kSwap[15] = {0, 4, 3, 2, 1, 6, 5, 7, 8, 10, 9, 12, 11, 14, 13};
    return {kSwap[s.cls], s.j, s.i, s.l};
}

TEST(InitialVector, PrioritiesAreMirrorImagesForIdenticalServers) {
    for (const DphDistribution& d : {dph_geometric(0.35), dph_uniform(1, 4), dph_triangular(6, 2)}) {
        for (int k = 1; k <= 4; ++k) {
            const AmcModel s1 = build_model({d, d, k, PriorityPolicy::S1});
            const AmcModel s2 = build_model({d, d, k, PriorityPolicy::S2});
            for (int r = 0; r < s1.size(); ++r)
                EXPECT_NEAR(s1.sigma[r], s2.sigma[s2.space.index_of(mirror_amc(s1.space.state_of(r)))], 1e-12);
        }
    }
}

TEST(InitialVector, GeometricHalfKThreeMatchesTheGenerationCensus) {
    const SystemConfig cfg{dph_geometric(0.5), dph_geometric(0.5), 3, PriorityPolicy::S1};
    const AmcModel model = build_model(cfg);
    const InitialCensus census = simulate_amc_initial_census(cfg, 1'000'000, 4242);
    EXPECT_EQ(census.illegal, 0);
    for (int r = 0; r < model.size(); ++r) {
        if (model.sigma[r] == 0.0) {
            EXPECT_EQ(census.frequency[r], 0.0) << to_string(model.space.state_of(r));
            continue;
        }
        EXPECT_LT(std::abs(model.sigma[r] - census.frequency[r]), 3.0 * census.std_error[r])
            << to_string(model.space.state_of(r));
    }
}

}  // namespace
}  // namespace dtdq
