#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dph.hpp"
#include "errors.hpp"
#include "state_space.hpp"

namespace dtdq {

/// Which server takes a new packet when both are idle.
enum class PriorityPolicy { S1, S2 };

inline const char* to_string(PriorityPolicy p) { return p == PriorityPolicy::S1 ? "S1" : "S2"; }

/// Two servers with DPH service times, freezing parameter k and a strict
/// priority policy. k >= 1 is required by the Markov models; the simulator
/// also accepts k = 0 (zero-wait).
struct SystemConfig {
    DphDistribution dph1;
    DphDistribution dph2;
    int k = 1;
    PriorityPolicy priority = PriorityPolicy::S1;

    SystemConfig with_k(int new_k) const {
        SystemConfig c = *this;
        c.k = new_k;
        return c;
    }
};

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Absorbing chain of one AoI cycle: transient block A, absorption vectors
/// towards the successful (c_s) and obsolete (c_u) absorbing states, initial
/// vector sigma and the non-P* indicator v.
struct AmcModel {
    AmcSpace space;
    SparseRowMatrix A;
    Eigen::VectorXd cs;
    Eigen::VectorXd cu;
    Eigen::VectorXd sigma;  // empty until initial_vector() installs it
    Eigen::VectorXd v;
    PriorityPolicy priority = PriorityPolicy::S1;

    int size() const { return space.size(); }
    bool complete() const { return sigma.size() == space.size(); }
};

inline bool is_non_pstar_class(int cls) { return cls >= 7 && cls <= 14; }

namespace detail {

// Row-by-row emitter for the transition table.
class AmcRowBuilder {
public:
    AmcRowBuilder(const AmcSpace& space, const SystemConfig& cfg, std::vector<Eigen::Triplet<double>>& triplets,
                  Eigen::VectorXd& cs, Eigen::VectorXd& cu)
        : space_(space), cfg_(cfg), a1_(cfg.dph1.alpha()), a2_(cfg.dph2.alpha()), b1_(cfg.dph1.exit()),
          b2_(cfg.dph2.exit()), B1_(cfg.dph1.B()), B2_(cfg.dph2.B()), n1_(cfg.dph1.order()),
          n2_(cfg.dph2.order()), k_(cfg.k), triplets_(triplets), cs_(cs), cu_(cu) {}

    void emit(int row, const AmcState& s) {
        row_ = row;
        const int i = s.i, j = s.j, l = s.l;
        const bool last = (l == k_ - 1);
        const int next_l = last ? k_ - 1 : l + 1;
        switch (s.cls) {
            case 1:  // P* on S1, S2 older
                for (int jn = 1; jn <= n2_; ++jn) {
                    const double p = b1(i) * B2(j, jn);
                    if (!last) to({10, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1_; ++in) to({11, in, jn, 0}, p * a1(in));
                }
                both_idle(b1(i) * b2(j), l);
                for (int in = 1; in <= n1_; ++in) {
                    const double p = b2(j) * B1(i, in);
                    if (!last) to({5, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2_; ++jn) to({2, in, jn, 0}, p * a2(jn));
                }
                both_continue(1, i, j, next_l);
                break;
            case 2:  // P* on S1, S2 newer
                for (int jn = 1; jn <= n2_; ++jn) {
                    const double p = b1(i) * B2(j, jn);
                    if (!last) to({14, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1_; ++in) to({8, in, jn, 0}, p * a1(in));
                }
                obsolete(b2(j));
                both_continue(2, i, j, next_l);
                break;
            case 3:  // P* on S2, S1 newer
                for (int in = 1; in <= n1_; ++in) {
                    const double p = b2(j) * B1(i, in);
                    if (!last) to({13, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2_; ++jn) to({8, in, jn, 0}, p * a2(jn));
                }
                obsolete(b1(i));
                both_continue(3, i, j, next_l);
                break;
            case 4:  // P* on S2, S1 older
                for (int in = 1; in <= n1_; ++in) {
                    const double p = b2(j) * B1(i, in);
                    if (!last) to({9, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2_; ++jn) to({12, in, jn, 0}, p * a2(jn));
                }
                both_idle(b1(i) * b2(j), l);
                for (int jn = 1; jn <= n2_; ++jn) {
                    const double p = b1(i) * B2(j, jn);
                    if (!last) to({6, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1_; ++in) to({3, in, jn, 0}, p * a1(in));
                }
                both_continue(4, i, j, next_l);
                break;
            case 5:  // P* on S1, S2 idle
            case 9:  // obsolete P1 on S1, S2 idle
                both_idle(b1(i), l);
                for (int in = 1; in <= n1_; ++in) {
                    if (!last) to({s.cls, in, 0, l + 1}, B1(i, in));
                    else for (int jn = 1; jn <= n2_; ++jn) to({s.cls == 5 ? 2 : 12, in, jn, 0}, B1(i, in) * a2(jn));
                }
                break;
            case 6:   // P* on S2, S1 idle
            case 10:  // obsolete P2 on S2, S1 idle
                // The printed S2-priority factor for class 10 reads b_i^(1); b_j^(2) is the
                // only value that closes the row.
                both_idle(b2(j), l);
                for (int jn = 1; jn <= n2_; ++jn) {
                    if (!last) to({s.cls, 0, jn, l + 1}, B2(j, jn));
                    else for (int in = 1; in <= n1_; ++in) to({s.cls == 6 ? 3 : 11, in, jn, 0}, B2(j, jn) * a1(in));
                }
                break;
            case 7:
                both_idle(1.0, l);
                break;
            case 8:
                success(b1(i) + b2(j) - b1(i) * b2(j));
                for (int in = 1; in <= n1_; ++in)
                    for (int jn = 1; jn <= n2_; ++jn) to({8, in, jn, 0}, B1(i, in) * B2(j, jn));
                break;
            case 11:  // P1 up to date, P2 obsolete
                success(b1(i));
                for (int in = 1; in <= n1_; ++in) {
                    const double p = b2(j) * B1(i, in);
                    if (!last) to({13, in, 0, l + 1}, p);
                    else for (int jn = 1; jn <= n2_; ++jn) to({8, in, jn, 0}, p * a2(jn));
                }
                both_continue(11, i, j, next_l);
                break;
            case 12:  // P2 up to date, P1 obsolete
                success(b2(j));
                for (int jn = 1; jn <= n2_; ++jn) {
                    const double p = b1(i) * B2(j, jn);
                    if (!last) to({14, 0, jn, l + 1}, p);
                    else for (int in = 1; in <= n1_; ++in) to({8, in, jn, 0}, p * a1(in));
                }
                both_continue(12, i, j, next_l);
                break;
            case 13:  // P1 up to date, S2 idle
                success(b1(i));
                for (int in = 1; in <= n1_; ++in) {
                    if (!last) to({13, in, 0, l + 1}, B1(i, in));
                    else for (int jn = 1; jn <= n2_; ++jn) to({8, in, jn, 0}, B1(i, in) * a2(jn));
                }
                break;
            case 14:  // P2 up to date, S1 idle
                success(b2(j));
                for (int jn = 1; jn <= n2_; ++jn) {
                    if (!last) to({14, 0, jn, l + 1}, B2(j, jn));
                    else for (int in = 1; in <= n1_; ++in) to({8, in, jn, 0}, B2(j, jn) * a1(in));
                }
                break;
            default:
                throw ModelError("amc: unknown state class " + std::to_string(s.cls));
        }
    }

private:
    double a1(int i) const { return a1_[i - 1]; }
    double a2(int j) const { return a2_[j - 1]; }
    double b1(int i) const { return b1_[i - 1]; }
    double b2(int j) const { return b2_[j - 1]; }
    double B1(int i, int in) const { return B1_(i - 1, in - 1); }
    double B2(int j, int jn) const { return B2_(j - 1, jn - 1); }

    void to(const AmcState& target, double p) {
        if (p == 0.0) return;
        triplets_.emplace_back(row_, space_.index_of(target), p);
    }
    void success(double p) { cs_[row_] += p; }
    void obsolete(double p) { cu_[row_] += p; }

    // P* already received (or never will be) and both servers go idle with
    // probability p: wait in class 7 while frozen, otherwise the priority
    // server takes a fresh packet.
    void both_idle(double p, int l) {
        if (p == 0.0) return;
        if (l < k_ - 1) {
            to({7, 0, 0, l + 1}, p);
        } else if (cfg_.priority == PriorityPolicy::S1) {
            for (int in = 1; in <= n1_; ++in) to({13, in, 0, 0}, p * a1(in));
        } else {
            for (int jn = 1; jn <= n2_; ++jn) to({14, 0, jn, 0}, p * a2(jn));
        }
    }

    // Neither server completes; the clock saturates at k-1.
    void both_continue(int cls, int i, int j, int next_l) {
        for (int in = 1; in <= n1_; ++in)
            for (int jn = 1; jn <= n2_; ++jn) to({cls, in, jn, next_l}, B1(i, in) * B2(j, jn));
    }

    const AmcSpace& space_;
    const SystemConfig& cfg_;
    const Eigen::VectorXd &a1_, &a2_, &b1_, &b2_;
    const Eigen::MatrixXd &B1_, &B2_;
    int n1_, n2_, k_;
    std::vector<Eigen::Triplet<double>>& triplets_;
    Eigen::VectorXd& cs_;
    Eigen::VectorXd& cu_;
    int row_ = 0;
};

}  // namespace detail

/// Transition structure (A, c_s, c_u, v) of the absorbing chain. The initial
/// vector is left empty; see initial_vector() in rmc.hpp.
inline AmcModel build_amc(const SystemConfig& cfg) {
    if (cfg.k < 1)
        throw ModelError("amc: the absorbing chain needs k >= 1; k = 0 (zero-wait) is only available via simulate");
    AmcSpace space(cfg.dph1.order(), cfg.dph2.order(), cfg.k);
    const int m = space.size();
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd cu = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(m) * 8);
    detail::AmcRowBuilder rows(space, cfg, triplets, cs, cu);
    for (int r = 0; r < m; ++r) {
        const AmcState& s = space.state_of(r);
        rows.emit(r, s);
        if (is_non_pstar_class(s.cls)) v[r] = 1.0;
    }
    SparseRowMatrix A(m, m);
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();
    return AmcModel{std::move(space), std::move(A), std::move(cs), std::move(cu), Eigen::VectorXd(), std::move(v),
                    cfg.priority};
}

struct AmcViolation {
    int row = -1;  // -1 for whole-model checks
    std::string state;
    std::string check;
    std::string detail;
};

/// Checks every AmcModel invariant; an empty result means the model is sound.
inline std::vector<AmcViolation> validate_amc(const AmcModel& model, double tol = 1e-12) {
    std::vector<AmcViolation> out;
    const int m = model.size();
    auto fail = [&](int row, std::string check, double value) {
        std::ostringstream d;
        d.precision(17);
        d << value;
        out.push_back({row, row >= 0 ? to_string(model.space.state_of(row)) : std::string("-"), std::move(check),
                       d.str()});
    };
    if (model.A.rows() != m || model.A.cols() != m || model.cs.size() != m || model.cu.size() != m ||
        model.v.size() != m) {
        out.push_back({-1, "-", "dimensions", "A, c_s, c_u, v must all match the state count"});
        return out;
    }
    for (int r = 0; r < m; ++r) {
        const AmcState& s = model.space.state_of(r);
        double row_sum = model.cs[r] + model.cu[r];
        bool negative = model.cs[r] < 0.0 || model.cu[r] < 0.0;
        for (SparseRowMatrix::InnerIterator it(model.A, r); it; ++it) {
            row_sum += it.value();
            negative = negative || it.value() < 0.0;
        }
        if (negative) fail(r, "nonnegativity", row_sum);
        if (std::abs(row_sum - 1.0) > tol) fail(r, "row-sum", row_sum);
        if (model.cu[r] != 0.0 && s.cls != 2 && s.cls != 3) fail(r, "c_u-support", model.cu[r]);
        const bool cs_class = s.cls == 8 || s.cls == 11 || s.cls == 12 || s.cls == 13 || s.cls == 14;
        if (model.cs[r] != 0.0 && !cs_class) fail(r, "c_s-support", model.cs[r]);
        if (model.v[r] != (is_non_pstar_class(s.cls) ? 1.0 : 0.0)) fail(r, "v-indicator", model.v[r]);
    }
    if (model.sigma.size() == 0) return out;
    if (model.sigma.size() != m) {
        out.push_back({-1, "-", "dimensions", "sigma length differs from the state count"});
        return out;
    }
    const int idle_class = model.priority == PriorityPolicy::S1 ? 5 : 6;
    for (int r = 0; r < m; ++r) {
        const AmcState& s = model.space.state_of(r);
        if (model.sigma[r] < 0.0) fail(r, "sigma-nonnegativity", model.sigma[r]);
        const bool legal = s.l == 0 && (s.cls == 1 || s.cls == 4 || s.cls == idle_class);
        if (model.sigma[r] != 0.0 && !legal) fail(r, "sigma-support", model.sigma[r]);
    }
    if (std::abs(model.sigma.sum() - 1.0) > tol) fail(-1, "sigma-normalization", model.sigma.sum());
    return out;
}

}  // namespace dtdq
