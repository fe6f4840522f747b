#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "amc.hpp"
#include "errors.hpp"

namespace dtdq {

/// PMF on h = 1..truncation_h, plus the exact probability mass beyond it.
struct TruncatedPmf {
    std::vector<double> mass;  // mass[h - 1] = Pr(X = h)
    long truncation_h = 0;
    double tail_mass = 0.0;

    double at(long h) const {
        return (h >= 1 && h <= truncation_h) ? mass[static_cast<std::size_t>(h - 1)] : 0.0;
    }
    double total() const {
        double s = 0.0;
        for (double p : mass) s += p;
        return s;
    }
};

struct AoiReport {
    TruncatedPmf aoi_pmf;
    TruncatedPmf paoi_pmf;
    double aoi_mean = 0.0;
    double aoi_second_moment = 0.0;
    double paoi_mean = 0.0;
    double paoi_second_moment = 0.0;
    double tail_tol = 0.0;

    double aoi_variance() const { return aoi_second_moment - aoi_mean * aoi_mean; }
    double paoi_variance() const { return paoi_second_moment - paoi_mean * paoi_mean; }
};

inline constexpr double kDefaultTailTol = 1e-10;
inline constexpr long kMaxPmfSteps = 10'000'000;

/// Resolvent evaluations for a completed absorbing chain.
///
/// (I - A) is factorized once by sparse LU; every resolvent power is applied
/// by repeated solves against the specific right-hand side, so no inverse is
/// ever formed. The analyzer refers to the model, which must outlive it.
class AmcAnalyzer {
public:
    explicit AmcAnalyzer(AmcModel&&) = delete;
    explicit AmcAnalyzer(const AmcModel& model) : model_(model) {
        if (!model.complete()) throw ModelError("metrics: the model has no initial vector installed");
        const int m = model.size();
        Eigen::SparseMatrix<double> identity(m, m);
        identity.setIdentity();
        Eigen::SparseMatrix<double> system = identity - Eigen::SparseMatrix<double>(model.A);
        system.makeCompressed();
        lu_.compute(system);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("metrics: I - A is singular (broken chain): " + lu_.lastErrorMessage());
        // sigma A as a column vector.
        sigma_a_ = (model.sigma.transpose() * model.A).transpose();
    }

    /// x = (I - A)^{-1} rhs, refined once.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd x = lu_.solve(rhs);
        const Eigen::VectorXd residual = rhs - (x - model_.A * x);
        x += lu_.solve(residual);
        return x;
    }

    /// sigma A (I - A)^{-1} v: the normalizer of the AoI PMF.
    double aoi_normalizer() const { return sigma_a_.dot(solve(model_.v)); }
    double paoi_normalizer() const { return sigma_a_.dot(solve(model_.cs)); }

    double aoi_mean() const { return first_moment(model_.v); }
    double aoi_second_moment() const { return second_moment(model_.v); }
    double paoi_mean() const { return first_moment(model_.cs); }
    double paoi_second_moment() const { return second_moment(model_.cs); }

    TruncatedPmf aoi_pmf(double tail_tol) const { return pmf(model_.v, tail_tol); }
    TruncatedPmf paoi_pmf(double tail_tol) const { return pmf(model_.cs, tail_tol); }

private:
    // sigma A (I-A)^{-2} w / sigma A (I-A)^{-1} w
    double first_moment(const Eigen::VectorXd& w) const {
        const Eigen::VectorXd once = solve(w);
        const Eigen::VectorXd twice = solve(once);
        return sigma_a_.dot(twice) / sigma_a_.dot(once);
    }

    // sigma A (I-A)^{-3} (A + I) w / sigma A (I-A)^{-1} w
    double second_moment(const Eigen::VectorXd& w) const {
        const Eigen::VectorXd once = solve(w);
        const Eigen::VectorXd shifted = model_.A * w + w;
        const Eigen::VectorXd thrice = solve(solve(solve(shifted)));
        return sigma_a_.dot(thrice) / sigma_a_.dot(once);
    }

    // u(h) = sigma A^h w / sigma A (I-A)^{-1} w, iterated with one sparse
    // vector-matrix product per h. The exact remaining mass after h is
    // y_h (x - w) / norm with x = (I-A)^{-1} w, y_h = sigma A^h.
    TruncatedPmf pmf(const Eigen::VectorXd& w, double tail_tol) const {
        if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw ModelError("metrics: tail_tol must lie in (0, 1)");
        const Eigen::VectorXd x = solve(w);
        const double norm = sigma_a_.dot(x);
        if (!(norm > 0.0)) throw NumericalError("metrics: PMF normalizer is not positive");
        const Eigen::VectorXd tail_weight = x - w;
        TruncatedPmf out;
        Eigen::RowVectorXd y = sigma_a_.transpose();
        for (long h = 1; h <= kMaxPmfSteps; ++h) {
            out.mass.push_back(std::max(0.0, y.dot(w) / norm));
            const double tail = y.dot(tail_weight) / norm;
            if (tail < tail_tol) {
                out.truncation_h = h;
                out.tail_mass = std::max(0.0, tail);
                return out;
            }
            y = y * model_.A;
        }
        throw NumericalError("metrics: tail tolerance not reached within " + std::to_string(kMaxPmfSteps) + " steps");
    }

    const AmcModel& model_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    Eigen::VectorXd sigma_a_;
};

inline TruncatedPmf aoi_pmf(const AmcModel& model, double tail_tol = kDefaultTailTol) {
    return AmcAnalyzer(model).aoi_pmf(tail_tol);
}
inline TruncatedPmf paoi_pmf(const AmcModel& model, double tail_tol = kDefaultTailTol) {
    return AmcAnalyzer(model).paoi_pmf(tail_tol);
}
inline double aoi_mean(const AmcModel& model) { return AmcAnalyzer(model).aoi_mean(); }
inline double aoi_second_moment(const AmcModel& model) { return AmcAnalyzer(model).aoi_second_moment(); }
inline double paoi_mean(const AmcModel& model) { return AmcAnalyzer(model).paoi_mean(); }

inline AoiReport analyze(const AmcModel& model, double tail_tol = kDefaultTailTol) {
    const AmcAnalyzer an(model);
    AoiReport r;
    r.tail_tol = tail_tol;
    r.aoi_pmf = an.aoi_pmf(tail_tol);
    r.paoi_pmf = an.paoi_pmf(tail_tol);
    r.aoi_mean = an.aoi_mean();
    r.aoi_second_moment = an.aoi_second_moment();
    r.paoi_mean = an.paoi_mean();
    r.paoi_second_moment = an.paoi_second_moment();
    return r;
}

/// Raw moment E[X^order] from a truncated PMF. Mass beyond the truncation
/// point is extrapolated with the geometric decay ratio of the last two
/// emitted points; a PMF with zero tail needs no correction.
inline double pmf_moment(const TruncatedPmf& pmf, int order) {
    double sum = 0.0;
    for (long h = 1; h <= pmf.truncation_h; ++h) sum += std::pow(static_cast<double>(h), order) * pmf.at(h);
    if (pmf.tail_mass <= 0.0 || pmf.truncation_h < 2) return sum;
    const double last = pmf.at(pmf.truncation_h);
    const double prev = pmf.at(pmf.truncation_h - 1);
    if (!(last > 0.0 && prev > 0.0)) return sum;
    const double ratio = last / prev;
    if (!(ratio > 0.0 && ratio < 1.0)) return sum;
    // Tail terms scaled so that they carry exactly tail_mass.
    const double scale = pmf.tail_mass * (1.0 - ratio) / ratio;
    double term_weight = ratio;
    for (long m = 1; m < kMaxPmfSteps && term_weight > 1e-300; ++m) {
        const double term = std::pow(static_cast<double>(pmf.truncation_h + m), order) * scale * term_weight;
        sum += term;
        if (term < 1e-18 * sum) break;
        term_weight *= ratio;
    }
    return sum;
}

}  // namespace dtdq
