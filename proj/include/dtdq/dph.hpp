#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace dtdq {

/// Discrete phase-type law DPH(alpha, B): the number of steps until a finite
/// transient chain with initial vector alpha and substochastic transition
/// matrix B is absorbed. Support starts at 1 (alpha carries no mass at 0).
///
/// Values are immutable after construction. Sampling takes a caller-owned Rng.
class DphDistribution {
public:
    static constexpr double kTolerance = 1e-12;

    DphDistribution(Eigen::VectorXd alpha, Eigen::MatrixXd transitions)
        : alpha_(std::move(alpha)), B_(std::move(transitions)) {
        validate();
        exit_ = Eigen::VectorXd::Ones(order()) - B_.rowwise().sum();
        for (Eigen::Index r = 0; r < exit_.size(); ++r) exit_[r] = std::clamp(exit_[r], 0.0, 1.0);
        build_sampling_tables();
    }

    int order() const { return static_cast<int>(alpha_.size()); }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::MatrixXd& B() const { return B_; }
    /// Absorption vector b = (I - B) 1.
    const Eigen::VectorXd& exit() const { return exit_; }

    /// Pr(T = h) = alpha B^{h-1} b.
    double pmf(long h) const {
        if (h < 1) throw ModelError("dph pmf: h must be >= 1, got " + std::to_string(h));
        Eigen::RowVectorXd row = alpha_.transpose();
        for (long s = 1; s < h; ++s) {
            row = row * B_;
            if (row.lpNorm<1>() == 0.0) return 0.0;
        }
        return row.dot(exit_);
    }

    double mean() const {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(order());
        return alpha_.dot(resolvent().solve(ones));
    }

    /// E[T^2] = alpha (I + B) (I - B)^{-2} 1.
    double second_moment() const {
        const auto lu = resolvent();
        const Eigen::VectorXd once = lu.solve(Eigen::VectorXd::Ones(order()));
        const Eigen::VectorXd twice = lu.solve(once);
        return alpha_.dot(twice + B_ * twice);
    }

    double variance() const {
        const double m = mean();
        return std::max(0.0, second_moment() - m * m);
    }

    /// Phase drawn from alpha (0-based).
    int initial_phase(Rng& rng) const { return draw(initial_cdf_, rng); }

    /// One step of the phase chain from `phase`; returns the next phase or -1
    /// on absorption.
    int step(int phase, Rng& rng) const { return draw(step_cdf_[static_cast<std::size_t>(phase)], rng); }

    /// One absorption time.
    long sample(Rng& rng) const {
        int phase = initial_phase(rng);
        long steps = 1;
        while ((phase = step(phase, rng)) >= 0) ++steps;
        return steps;
    }

    friend bool operator==(const DphDistribution& a, const DphDistribution& b) {
        return a.alpha_.size() == b.alpha_.size() && a.alpha_ == b.alpha_ && a.B_ == b.B_;
    }

private:
    struct Outcome {
        double cumulative;
        int target;  // -1 = absorbed
    };
    using Cdf = std::vector<Outcome>;

    Eigen::PartialPivLU<Eigen::MatrixXd> resolvent() const {
        return Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(order(), order()) - B_);
    }

    void validate() const {
        const Eigen::Index n = alpha_.size();
        if (n < 1) throw ModelError("dph: order must be >= 1");
        if (B_.rows() != n || B_.cols() != n)
            throw ModelError("dph: transition matrix must be " + std::to_string(n) + "x" + std::to_string(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(alpha_[i] >= 0.0 && alpha_[i] <= 1.0))
                throw ModelError("dph: alpha[" + std::to_string(i) + "] outside [0,1]");
        }
        if (std::abs(alpha_.sum() - 1.0) > kTolerance) throw ModelError("dph: alpha must sum to 1");
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) {
                if (!(B_(r, c) >= 0.0 && B_(r, c) <= 1.0))
                    throw ModelError("dph: B(" + std::to_string(r) + "," + std::to_string(c) + ") outside [0,1]");
            }
            if (B_.row(r).sum() > 1.0 + kTolerance)
                throw ModelError("dph: row " + std::to_string(r) + " of B sums above 1");
        }
        const Eigen::VectorXcd eig = B_.eigenvalues();
        const double radius = eig.cwiseAbs().maxCoeff();
        if (!(radius < 1.0 - 1e-12))
            throw ModelError("dph: spectral radius of B is not below 1 (absorption is not certain)");
    }

    void build_sampling_tables() {
        const int n = order();
        initial_cdf_.clear();
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            if (alpha_[i] > 0.0) initial_cdf_.push_back({acc += alpha_[i], i});
        }
        initial_cdf_.back().cumulative = 1.0;
        step_cdf_.assign(static_cast<std::size_t>(n), {});
        for (int i = 0; i < n; ++i) {
            Cdf& cdf = step_cdf_[static_cast<std::size_t>(i)];
            acc = 0.0;
            if (exit_[i] > 0.0) cdf.push_back({acc += exit_[i], -1});
            for (int j = 0; j < n; ++j) {
                if (B_(i, j) > 0.0) cdf.push_back({acc += B_(i, j), j});
            }
            cdf.back().cumulative = 1.0;
        }
    }

    static int draw(const Cdf& cdf, Rng& rng) {
        if (cdf.size() == 1) return cdf.front().target;
        const double u = rng.uniform();
        for (const Outcome& o : cdf) {
            if (u < o.cumulative) return o.target;
        }
        return cdf.back().target;
    }

    Eigen::VectorXd alpha_;
    Eigen::MatrixXd B_;
    Eigen::VectorXd exit_;
    Cdf initial_cdf_;
    std::vector<Cdf> step_cdf_;
};

/// Finite-support probability mass function over service times {1, 2, ...}.
using SupportPmf = std::map<long, double>;

/// DPH(1, 1 - p): geometric on {1, 2, ...} with success probability p.
inline DphDistribution dph_geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ModelError("geometric: p must lie in (0, 1], got " + std::to_string(p));
    return DphDistribution(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 1.0 - p));
}

/// Shift-register representation of a finite-support PMF: alpha = e_1 and
/// B(w, w+1) = 1 - u(w) / sum_{a >= w} u(a), all other entries zero. Interior
/// zero-mass points become pass-through phases.
inline DphDistribution dph_from_pmf(const SupportPmf& pmf) {
    if (pmf.empty()) throw ModelError("pmf: empty support");
    double total = 0.0;
    long top = 0;
    for (const auto& [w, mass] : pmf) {
        if (w <= 0) throw ModelError("pmf: support value " + std::to_string(w) + " must be >= 1");
        if (!(mass >= 0.0)) throw ModelError("pmf: negative probability at " + std::to_string(w));
        total += mass;
        if (mass > 0.0) top = std::max(top, w);
    }
    if (std::abs(total - 1.0) > DphDistribution::kTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "pmf: total mass " << total << " differs from 1 by more than 1e-12";
        throw ModelError(msg.str());
    }
    const auto n = static_cast<Eigen::Index>(top);
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    for (const auto& [w, mass] : pmf) {
        if (w <= top) u[static_cast<std::size_t>(w)] = mass / total;
    }
    // tail[w] = sum_{a >= w} u(a)
    std::vector<double> tail(static_cast<std::size_t>(n) + 2, 0.0);
    for (Eigen::Index w = n; w >= 1; --w) {
        tail[static_cast<std::size_t>(w)] = tail[static_cast<std::size_t>(w) + 1] + u[static_cast<std::size_t>(w)];
    }
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    alpha[0] = 1.0;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index w = 1; w < n; ++w) {
        // 1 - u(w)/tail(w) written as tail(w+1)/tail(w) to avoid cancellation.
        B(w - 1, w) = tail[static_cast<std::size_t>(w) + 1] / tail[static_cast<std::size_t>(w)];
    }
    return DphDistribution(std::move(alpha), std::move(B));
}

inline SupportPmf uniform_pmf(long a, long b) {
    if (a < 1 || b < a)
        throw ModelError("uniform: need 1 <= a <= b, got a=" + std::to_string(a) + " b=" + std::to_string(b));
    SupportPmf pmf;
    const double mass = 1.0 / static_cast<double>(b - a + 1);
    for (long w = a; w <= b; ++w) pmf[w] = mass;
    return pmf;
}

/// Uniform on the integers {a, ..., b}.
inline DphDistribution dph_uniform(long a, long b) { return dph_from_pmf(uniform_pmf(a, b)); }

namespace detail {

inline double pmf_mean(const SupportPmf& pmf) {
    double m = 0.0;
    for (const auto& [w, p] : pmf) m += static_cast<double>(w) * p;
    return m;
}

inline double pmf_variance(const SupportPmf& pmf) {
    const double m = pmf_mean(pmf);
    double v = 0.0;
    for (const auto& [w, p] : pmf) v += (static_cast<double>(w) - m) * (static_cast<double>(w) - m) * p;
    return v;
}

// Symmetric triangle centred at twice_center/2 with integer half-width r.
// Integer centre: points c-r..c+r, weights r+1-|w-c|.
// Half-integer centre: points c-r+1/2..c+r-1/2, weights r+1/2-|w-c| (r >= 1).
inline SupportPmf triangle(long twice_center, long r) {
    SupportPmf pmf;
    double total = 0.0;
    const bool half = (twice_center % 2) != 0;
    const double c = static_cast<double>(twice_center) / 2.0;
    const long lo = half ? (twice_center + 1) / 2 - r : twice_center / 2 - r;
    const long hi = half ? (twice_center - 1) / 2 + r : twice_center / 2 + r;
    const double peak = half ? static_cast<double>(r) + 0.5 : static_cast<double>(r) + 1.0;
    for (long w = lo; w <= hi; ++w) {
        const double weight = peak - std::abs(static_cast<double>(w) - c);
        pmf[w] = weight;
        total += weight;
    }
    for (auto& [w, p] : pmf) p /= total;
    return pmf;
}

}  // namespace detail

/// PMF of the symmetric discrete triangular family with the given mean and
/// variance. Variances between two adjacent half-widths are realised by
/// mixing the two neighbouring triangles (mixture variance is linear in the
/// weight because both share the mean).
inline SupportPmf triangular_pmf(double mean, double variance) {
    const double twice = 2.0 * mean;
    const long twice_center = std::lround(twice);
    if (!(mean >= 1.0) || std::abs(twice - static_cast<double>(twice_center)) > 1e-9)
        throw ModelError("triangular: mean must be an integer or half-integer >= 1, got " + std::to_string(mean));
    if (!(variance >= 0.0)) throw ModelError("triangular: variance must be >= 0");
    const bool half = (twice_center % 2) != 0;
    const long r_min = half ? 1 : 0;
    // Smallest support point must stay >= 1.
    const long r_max = half ? (twice_center - 1) / 2 : twice_center / 2 - 1;
    std::vector<double> attainable;
    for (long r = r_min; r <= r_max; ++r) attainable.push_back(detail::pmf_variance(detail::triangle(twice_center, r)));

    auto reject = [&](double nearest) {
        std::ostringstream msg;
        msg.precision(12);
        msg << "triangular: variance " << variance << " is not attainable with mean " << mean
            << "; attainable range is [" << attainable.front() << ", " << attainable.back()
            << "], nearest attainable variance " << nearest;
        throw ModelError(msg.str());
    };
    if (variance < attainable.front() - 1e-12) reject(attainable.front());
    if (variance > attainable.back() + 1e-12) reject(attainable.back());

    for (std::size_t idx = 0; idx < attainable.size(); ++idx) {
        if (std::abs(variance - attainable[idx]) <= 1e-12)
            return detail::triangle(twice_center, r_min + static_cast<long>(idx));
    }
    std::size_t idx = 0;
    while (attainable[idx + 1] < variance) ++idx;
    const double v_lo = attainable[idx];
    const double v_hi = attainable[idx + 1];
    const double theta = (v_hi - variance) / (v_hi - v_lo);
    const SupportPmf narrow = detail::triangle(twice_center, r_min + static_cast<long>(idx));
    const SupportPmf wide = detail::triangle(twice_center, r_min + static_cast<long>(idx) + 1);
    SupportPmf mixed;
    for (const auto& [w, p] : narrow) mixed[w] += theta * p;
    for (const auto& [w, p] : wide) mixed[w] += (1.0 - theta) * p;
    return mixed;
}

inline DphDistribution dph_triangular(double mean, double variance) {
    return dph_from_pmf(triangular_pmf(mean, variance));
}

}  // namespace dtdq
