#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

#include "amc.hpp"
#include "dph.hpp"
#include "errors.hpp"
#include "state_space.hpp"

namespace dtdq {

/// Recurrent server-occupancy chain; pi is empty until rmc_steady_state().
struct RmcModel {
    RmcSpace space;
    SparseRowMatrix W;
    Eigen::VectorXd pi;
    PriorityPolicy priority = PriorityPolicy::S1;

    int size() const { return space.size(); }
};

inline RmcModel build_rmc(const SystemConfig& cfg) {
    if (cfg.k < 1)
        throw ModelError("rmc: the recurrent chain needs k >= 1; k = 0 (zero-wait) is only available via simulate");
    RmcSpace space(cfg.dph1.order(), cfg.dph2.order(), cfg.k);
    const int n1 = cfg.dph1.order(), n2 = cfg.dph2.order(), k = cfg.k;
    const Eigen::VectorXd &a1 = cfg.dph1.alpha(), &a2 = cfg.dph2.alpha();
    const Eigen::VectorXd &b1 = cfg.dph1.exit(), &b2 = cfg.dph2.exit();
    const Eigen::MatrixXd &B1 = cfg.dph1.B(), &B2 = cfg.dph2.B();

    std::vector<Eigen::Triplet<double>> triplets;
    int row = 0;
    auto to = [&](const RmcState& t, double p) {
        if (p != 0.0) triplets.emplace_back(row, space.index_of(t), p);
    };
    // Both servers idle with probability p after this step.
    auto idle = [&](double p, int l) {
        if (p == 0.0) return;
        if (l < k - 1) {
            to({1, 0, 0, l + 1}, p);
        } else if (cfg.priority == PriorityPolicy::S1) {
            for (int in = 1; in <= n1; ++in) to({2, in, 0, 0}, p * a1[in - 1]);
        } else {
            for (int jn = 1; jn <= n2; ++jn) to({3, 0, jn, 0}, p * a2[jn - 1]);
        }
    };

    for (row = 0; row < space.size(); ++row) {
        const RmcState& s = space.state_of(row);
        const int i = s.i, j = s.j, l = s.l;
        const bool last = (l == k - 1);
        switch (s.cls) {
            case 1:
                idle(1.0, l);
                break;
            case 2:
                idle(b1[i - 1], l);
                for (int in = 1; in <= n1; ++in) {
                    const double p = B1(i - 1, in - 1);
                    if (!last) to({2, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2; ++jn) to({4, in, jn, 0}, p * a2[jn - 1]);
                }
                break;
            case 3:
                idle(b2[j - 1], l);
                for (int jn = 1; jn <= n2; ++jn) {
                    const double p = B2(j - 1, jn - 1);
                    if (!last) to({3, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1; ++in) to({4, in, jn, 0}, p * a1[in - 1]);
                }
                break;
            case 4:
                // S1 done, S2 continues. No packet is generated before the clock
                // reaches k-1, so the l < k-1 branch carries no alpha factor.
                for (int jn = 1; jn <= n2; ++jn) {
                    const double p = b1[i - 1] * B2(j - 1, jn - 1);
                    if (!last) to({3, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1; ++in) to({4, in, jn, 0}, p * a1[in - 1]);
                }
                idle(b1[i - 1] * b2[j - 1], l);
                for (int in = 1; in <= n1; ++in) {
                    const double p = b2[j - 1] * B1(i - 1, in - 1);
                    if (!last) to({2, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2; ++jn) to({4, in, jn, 0}, p * a2[jn - 1]);
                }
                for (int in = 1; in <= n1; ++in)
                    for (int jn = 1; jn <= n2; ++jn)
                        to({4, in, jn, last ? k - 1 : l + 1}, B1(i - 1, in - 1) * B2(j - 1, jn - 1));
                break;
            default:
                throw ModelError("rmc: unknown state class " + std::to_string(s.cls));
        }
    }
    SparseRowMatrix W(space.size(), space.size());
    W.setFromTriplets(triplets.begin(), triplets.end());
    W.makeCompressed();
    return RmcModel{std::move(space), std::move(W), Eigen::VectorXd(), cfg.priority};
}

namespace detail {

using ColMatrix = Eigen::SparseMatrix<double>;

// Stationary vector of the irreducible block `members` of W (which must be
// closed): pi (W_C - I) = 0 with the first balance equation replaced by
// sum(pi) = 1, solved directly by sparse LU.
inline Eigen::VectorXd closed_class_stationary(const SparseRowMatrix& W, const std::vector<int>& members,
                                               const std::vector<int>& local) {
    const int n = static_cast<int>(members.size());
    std::vector<Eigen::Triplet<double>> triplets;
    for (int r = 0; r < n; ++r) {
        for (SparseRowMatrix::InnerIterator it(W, members[static_cast<std::size_t>(r)]); it; ++it) {
            const int c = local[static_cast<std::size_t>(it.col())];
            if (c > 0) triplets.emplace_back(c, r, it.value());
        }
        if (r != 0) triplets.emplace_back(r, r, -1.0);
        triplets.emplace_back(0, r, 1.0);
    }
    ColMatrix system(n, n);
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();
    Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success)
        throw NumericalError("rmc: stationary system is singular: " + lu.lastErrorMessage());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[0] = 1.0;
    Eigen::VectorXd pi = lu.solve(rhs);
    pi += lu.solve(rhs - system * pi);
    return pi;
}

}  // namespace detail

/// The state the occupancy chain is in one slot before the first packet of
/// an empty system is generated: both idle, freezing clock expired.
inline RmcState rmc_start_state(const RmcSpace& space) { return {1, 0, 0, space.k() - 1}; }

/// Long-run occupancy distribution of W for a system started empty.
///
/// With deterministic service the chain can have several closed classes (the
/// phase offset between the two servers is then preserved forever), so the
/// stationary vector is not unique. The returned vector is the Cesaro limit
/// from rmc_start_state(): each closed class reachable from the start gets
/// its own stationary vector, weighted by the probability of being absorbed
/// into it. Everything is solved by direct sparse LU.
inline Eigen::VectorXd rmc_steady_state(const RmcModel& model, double residual_tol = 1e-10) {
    const int n = model.size();
    const SparseRowMatrix& W = model.W;
    const int start = model.space.index_of(rmc_start_state(model.space));

    // States reachable from the start.
    std::vector<int> reach_id(static_cast<std::size_t>(n), -1);
    std::vector<int> reachable{start};
    reach_id[static_cast<std::size_t>(start)] = 0;
    for (std::size_t head = 0; head < reachable.size(); ++head) {
        for (SparseRowMatrix::InnerIterator it(W, reachable[head]); it; ++it) {
            if (it.value() > 0.0 && reach_id[static_cast<std::size_t>(it.col())] < 0) {
                reach_id[static_cast<std::size_t>(it.col())] = static_cast<int>(reachable.size());
                reachable.push_back(static_cast<int>(it.col()));
            }
        }
    }
    const int nr = static_cast<int>(reachable.size());
    using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;
    Graph g(static_cast<std::size_t>(nr));
    for (int a = 0; a < nr; ++a) {
        for (SparseRowMatrix::InnerIterator it(W, reachable[static_cast<std::size_t>(a)]); it; ++it) {
            if (it.value() > 0.0) boost::add_edge(static_cast<std::size_t>(a),
                                                  static_cast<std::size_t>(reach_id[static_cast<std::size_t>(it.col())]), g);
        }
    }
    std::vector<int> component(static_cast<std::size_t>(nr));
    const int n_components = boost::strong_components(g, component.data());
    std::vector<bool> closed(static_cast<std::size_t>(n_components), true);
    for (int a = 0; a < nr; ++a) {
        for (SparseRowMatrix::InnerIterator it(W, reachable[static_cast<std::size_t>(a)]); it; ++it) {
            const int b = reach_id[static_cast<std::size_t>(it.col())];
            if (it.value() > 0.0 && component[static_cast<std::size_t>(a)] != component[static_cast<std::size_t>(b)])
                closed[static_cast<std::size_t>(component[static_cast<std::size_t>(a)])] = false;
        }
    }

    // Probability of ending in each closed class, from the transient part.
    std::vector<int> transient_local(static_cast<std::size_t>(n), -1);
    std::vector<int> transient;
    for (int a = 0; a < nr; ++a) {
        if (!closed[static_cast<std::size_t>(component[static_cast<std::size_t>(a)])]) {
            transient_local[static_cast<std::size_t>(reachable[static_cast<std::size_t>(a)])] =
                static_cast<int>(transient.size());
            transient.push_back(reachable[static_cast<std::size_t>(a)]);
        }
    }
    std::vector<double> class_weight(static_cast<std::size_t>(n_components), 0.0);
    const int start_component = component[0];
    if (closed[static_cast<std::size_t>(start_component)]) {
        class_weight[static_cast<std::size_t>(start_component)] = 1.0;
    } else {
        const int nt = static_cast<int>(transient.size());
        std::vector<Eigen::Triplet<double>> triplets;
        for (int t = 0; t < nt; ++t) {
            triplets.emplace_back(t, t, 1.0);
            for (SparseRowMatrix::InnerIterator it(W, transient[static_cast<std::size_t>(t)]); it; ++it) {
                const int c = transient_local[static_cast<std::size_t>(it.col())];
                if (c >= 0) triplets.emplace_back(t, c, -it.value());
            }
        }
        detail::ColMatrix system(nt, nt);
        system.setFromTriplets(triplets.begin(), triplets.end());
        system.makeCompressed();
        Eigen::SparseLU<detail::ColMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(system);
        if (lu.info() != Eigen::Success)
            throw NumericalError("rmc: transient system is singular: " + lu.lastErrorMessage());
        for (int cls = 0; cls < n_components; ++cls) {
            if (!closed[static_cast<std::size_t>(cls)]) continue;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nt);
            for (int t = 0; t < nt; ++t) {
                for (SparseRowMatrix::InnerIterator it(W, transient[static_cast<std::size_t>(t)]); it; ++it) {
                    const int b = reach_id[static_cast<std::size_t>(it.col())];
                    if (transient_local[static_cast<std::size_t>(it.col())] < 0 && component[static_cast<std::size_t>(b)] == cls)
                        rhs[t] += it.value();
                }
            }
            class_weight[static_cast<std::size_t>(cls)] = lu.solve(rhs)[transient_local[static_cast<std::size_t>(start)]];
        }
    }

    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    for (int cls = 0; cls < n_components; ++cls) {
        if (!closed[static_cast<std::size_t>(cls)] || class_weight[static_cast<std::size_t>(cls)] <= 0.0) continue;
        std::vector<int> members;
        std::vector<int> local(static_cast<std::size_t>(n), -1);
        for (int a = 0; a < nr; ++a) {
            if (component[static_cast<std::size_t>(a)] == cls) {
                local[static_cast<std::size_t>(reachable[static_cast<std::size_t>(a)])] = static_cast<int>(members.size());
                members.push_back(reachable[static_cast<std::size_t>(a)]);
            }
        }
        const Eigen::VectorXd block = detail::closed_class_stationary(W, members, local);
        for (std::size_t m = 0; m < members.size(); ++m)
            pi[members[m]] += class_weight[static_cast<std::size_t>(cls)] * block[static_cast<Eigen::Index>(m)];
    }
    for (int r = 0; r < n; ++r) {
        if (pi[r] < 0.0 && pi[r] > -1e-14) pi[r] = 0.0;
    }
    pi /= pi.sum();
    const Eigen::VectorXd balance = (pi.transpose() * W).transpose() - pi;
    const double residual = balance.lpNorm<Eigen::Infinity>();
    if (!(residual < residual_tol) || pi.minCoeff() < 0.0) {
        throw NumericalError("rmc: stationary solve residual " + std::to_string(residual) +
                             " exceeds tolerance " + std::to_string(residual_tol));
    }
    return pi;
}

/// Unnormalized probabilities q(.) that a newly generated packet finds the
/// system in each legal initial state of the absorbing chain, computed from
/// the stationary occupancy at clock k-1. Indexed like amc.space.
inline Eigen::VectorXd initial_weights(const RmcModel& rmc, const AmcSpace& amc_space, const SystemConfig& cfg) {
    if (rmc.pi.size() != rmc.size()) throw ModelError("initial vector: RMC stationary vector not computed");
    const int n1 = cfg.dph1.order(), n2 = cfg.dph2.order(), last = cfg.k - 1;
    const Eigen::VectorXd &a1 = cfg.dph1.alpha(), &a2 = cfg.dph2.alpha();
    const Eigen::VectorXd &b1 = cfg.dph1.exit(), &b2 = cfg.dph2.exit();
    const Eigen::MatrixXd &B1 = cfg.dph1.B(), &B2 = cfg.dph2.B();
    auto p = [&](int cls, int i, int j) { return rmc.pi[rmc.space.index_of({cls, i, j, last})]; };

    Eigen::VectorXd q = Eigen::VectorXd::Zero(amc_space.size());
    // New packet on S1 while S2 keeps serving an older packet.
    for (int jn = 1; jn <= n2; ++jn) {
        double flow = 0.0;
        for (int j = 1; j <= n2; ++j) flow += B2(j - 1, jn - 1) * p(3, 0, j);
        for (int i = 1; i <= n1; ++i)
            for (int j = 1; j <= n2; ++j) flow += b1[i - 1] * B2(j - 1, jn - 1) * p(4, i, j);
        for (int in = 1; in <= n1; ++in) q[amc_space.index_of({1, in, jn, 0})] = a1[in - 1] * flow;
    }
    // New packet on S2 while S1 keeps serving an older packet.
    for (int in = 1; in <= n1; ++in) {
        double flow = 0.0;
        for (int i = 1; i <= n1; ++i) flow += B1(i - 1, in - 1) * p(2, i, 0);
        for (int i = 1; i <= n1; ++i)
            for (int j = 1; j <= n2; ++j) flow += b2[j - 1] * B1(i - 1, in - 1) * p(4, i, j);
        for (int jn = 1; jn <= n2; ++jn) q[amc_space.index_of({4, in, jn, 0})] = a2[jn - 1] * flow;
    }
    // Both servers idle when the clock expires: the priority server takes it.
    double idle_flow = p(1, 0, 0);
    for (int i = 1; i <= n1; ++i) idle_flow += b1[i - 1] * p(2, i, 0);
    for (int j = 1; j <= n2; ++j) idle_flow += b2[j - 1] * p(3, 0, j);
    for (int i = 1; i <= n1; ++i)
        for (int j = 1; j <= n2; ++j) idle_flow += b1[i - 1] * b2[j - 1] * p(4, i, j);
    if (cfg.priority == PriorityPolicy::S1) {
        for (int in = 1; in <= n1; ++in) q[amc_space.index_of({5, in, 0, 0})] = a1[in - 1] * idle_flow;
    } else {
        for (int jn = 1; jn <= n2; ++jn) q[amc_space.index_of({6, 0, jn, 0})] = a2[jn - 1] * idle_flow;
    }
    return q;
}

/// Normalizes the initial weights into sigma and installs it in `amc`.
inline const Eigen::VectorXd& initial_vector(const RmcModel& rmc, AmcModel& amc, const SystemConfig& cfg) {
    Eigen::VectorXd q = initial_weights(rmc, amc.space, cfg);
    const double total = q.sum();
    if (!(total > 0.0)) throw NumericalError("initial vector: zero generation rate (internal error)");
    amc.sigma = q / total;
    return amc.sigma;
}

/// Builds the absorbing chain, solves the occupancy chain and installs sigma.
inline AmcModel build_model(const SystemConfig& cfg) {
    AmcModel amc = build_amc(cfg);
    RmcModel rmc = build_rmc(cfg);
    rmc.pi = rmc_steady_state(rmc);
    initial_vector(rmc, amc, cfg);
    return amc;
}

}  // namespace dtdq
