#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amc.hpp"
#include "dph.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "rmc.hpp"
#include "rng.hpp"
#include "simulator.hpp"

namespace dtdq {

inline constexpr long kMinBaselineSlots = 1'000'000;

/// Parametric service-time families used by the sweeps.
enum class ServiceFamily { Geometric, Uniform, Triangular, Deterministic };

inline const char* to_string(ServiceFamily f) {
    switch (f) {
        case ServiceFamily::Geometric: return "geometric";
        case ServiceFamily::Uniform: return "uniform";
        case ServiceFamily::Triangular: return "triangular";
        case ServiceFamily::Deterministic: return "deterministic";
    }
    return "?";
}

inline ServiceFamily parse_family(const std::string& name) {
    if (name == "geometric") return ServiceFamily::Geometric;
    if (name == "uniform") return ServiceFamily::Uniform;
    if (name == "triangular") return ServiceFamily::Triangular;
    if (name == "deterministic") return ServiceFamily::Deterministic;
    throw ModelError("unknown service family '" + name + "'");
}

struct ServiceSpec {
    ServiceFamily family = ServiceFamily::Geometric;
    double mean = 1.0;
    double variance = 0.0;  // triangular only
};

/// Member of `spec.family` with the requested mean. Uniform laws start at 1
/// (uniform on {1, ..., 2 mean - 1}), so their mean must be a multiple of 0.5.
inline DphDistribution make_service(const ServiceSpec& spec) {
    const double m = spec.mean;
    if (!(m >= 1.0)) throw ModelError("service mean must be >= 1, got " + std::to_string(m));
    switch (spec.family) {
        case ServiceFamily::Geometric:
            return dph_geometric(1.0 / m);
        case ServiceFamily::Uniform: {
            const double upper = 2.0 * m - 1.0;
            if (std::abs(upper - std::round(upper)) > 1e-9)
                throw ModelError("uniform service mean must be a multiple of 0.5, got " + std::to_string(m));
            return dph_uniform(1, std::lround(upper));
        }
        case ServiceFamily::Triangular:
            return dph_triangular(m, spec.variance);
        case ServiceFamily::Deterministic:
            if (std::abs(m - std::round(m)) > 1e-9)
                throw ModelError("deterministic service needs an integer mean, got " + std::to_string(m));
            return dph_uniform(std::lround(m), std::lround(m));
    }
    throw ModelError("unknown service family");
}

/// E[max(T1, T2)] for independent service times: sum over h >= 0 of
/// 1 - F1(h) F2(h), summed until both survival functions drop below 1e-13.
inline double expected_max(const DphDistribution& d1, const DphDistribution& d2) {
    Eigen::RowVectorXd y1 = d1.alpha().transpose(), y2 = d2.alpha().transpose();
    const Eigen::VectorXd one1 = Eigen::VectorXd::Ones(d1.order()), one2 = Eigen::VectorXd::Ones(d2.order());
    double sum = 0.0;
    for (long h = 0; h < kMaxPmfSteps; ++h) {
        const double s1 = y1.dot(one1), s2 = y2.dot(one2);
        if (s1 < 1e-13 && s2 < 1e-13) return sum;
        sum += 1.0 - (1.0 - s1) * (1.0 - s2);
        y1 = y1 * d1.B();
        y2 = y2 * d2.B();
    }
    throw NumericalError("expected_max: survival functions did not vanish");
}

/// Default upper end of the k scan: 2 ceil(E[max(T1, T2)]).
inline int default_k_max(const SystemConfig& cfg) {
    return std::max(1, 2 * static_cast<int>(std::ceil(expected_max(cfg.dph1, cfg.dph2) - 1e-9)));
}

struct KCurvePoint {
    int k = 0;
    double aoi_mean = 0.0;
    double paoi_mean = 0.0;
};

struct OptimalK {
    int k_star = 0;
    double aoi_mean_at_star = 0.0;
    std::vector<KCurvePoint> curve;  // k = 1..k_max
};

/// Full analytic scan of k = 1..k_max; the smallest minimizing k wins.
inline OptimalK find_optimal_k(const SystemConfig& base, int k_max) {
    if (k_max < 1) throw ModelError("find_optimal_k: k_max must be >= 1");
    OptimalK out;
    for (int k = 1; k <= k_max; ++k) {
        const AmcModel model = build_model(base.with_k(k));
        const AmcAnalyzer an(model);
        out.curve.push_back({k, an.aoi_mean(), an.paoi_mean()});
        if (k == 1 || out.curve.back().aoi_mean < out.aoi_mean_at_star) {
            out.k_star = k;
            out.aoi_mean_at_star = out.curve.back().aoi_mean;
        }
    }
    return out;
}

/// Reduction of the mean AoI at the optimal k relative to the simulated
/// zero-wait baseline (k = 0).
struct GainRecord {
    OptimalK optimum;
    Estimate baseline;
    long baseline_slots = 0;
    std::uint64_t baseline_seed = 0;
    double raw_gain_percent = 0.0;  // 100 (baseline - optimum) / baseline
    double gain_std_error = 0.0;    // delta method on the baseline's error
    double ci_low = 0.0;            // 95% interval of raw_gain_percent
    double ci_high = 0.0;
    /// Freezing counts as beneficial only when the interval lies above 0.
    bool freezing_beneficial = false;
    int k_star = 0;              // optimum.k_star, or 0 when not beneficial
    double gain_percent = 0.0;   // raw gain, or 0 when not beneficial
};

inline GainRecord gain_from(OptimalK optimum, const Estimate& baseline) {
    GainRecord g;
    g.optimum = std::move(optimum);
    g.baseline = baseline;
    const double b = baseline.value, o = g.optimum.aoi_mean_at_star;
    if (!(b > 0.0)) throw NumericalError("freezing gain: baseline mean AoI is not positive");
    g.raw_gain_percent = 100.0 * (b - o) / b;
    g.gain_std_error = 100.0 * o / (b * b) * baseline.std_error;
    g.ci_low = g.raw_gain_percent - 1.96 * g.gain_std_error;
    g.ci_high = g.raw_gain_percent + 1.96 * g.gain_std_error;
    g.freezing_beneficial = g.ci_low > 0.0;
    g.k_star = g.freezing_beneficial ? g.optimum.k_star : 0;
    g.gain_percent = g.freezing_beneficial ? g.raw_gain_percent : 0.0;
    return g;
}

/// find_optimal_k against a k = 0 simulation of `sim_slots` slots.
inline GainRecord freezing_gain(const SystemConfig& base, int k_max, long sim_slots, std::uint64_t seed) {
    if (sim_slots < kMinBaselineSlots)
        throw ModelError("freezing_gain: baseline needs >= " + std::to_string(kMinBaselineSlots) + " slots");
    OptimalK opt = find_optimal_k(base, k_max);
    const SimResult zw = simulate(base.with_k(0), sim_slots, seed);
    GainRecord g = gain_from(std::move(opt), zw.aoi_mean);
    g.baseline_slots = sim_slots;
    g.baseline_seed = seed;
    return g;
}

struct SweepPoint {
    ServiceSpec s1;
    ServiceSpec s2;
    PriorityPolicy priority = PriorityPolicy::S1;
    int k_max = 0;
    GainRecord gain;
};

/// One record per grid point, in grid order.
struct SweepResult {
    std::string kind;  // "mean", "variance" or "nonidentical"
    std::vector<SweepPoint> points;
};

struct SweepOptions {
    int k_max = 0;  // 0: default_k_max per point
    long sim_slots = kMinBaselineSlots;
    std::uint64_t seed = 1;
    PriorityPolicy priority = PriorityPolicy::S1;
};

/// Seed of the baseline simulation at grid index `index`.
inline std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
    return Rng(seed).split(index).seed();
}

namespace detail {

inline SweepPoint run_point(const ServiceSpec& s1, const ServiceSpec& s2, const SweepOptions& opt, std::size_t index) {
    SweepPoint p{s1, s2, opt.priority, 0, {}};
    const SystemConfig cfg{make_service(s1), make_service(s2), 1, opt.priority};
    p.k_max = opt.k_max > 0 ? opt.k_max : default_k_max(cfg);
    p.gain = freezing_gain(cfg, p.k_max, opt.sim_slots, point_seed(opt.seed, index));
    return p;
}

}  // namespace detail

/// Identical servers of one family over a grid of means.
inline SweepResult sweep_mean(ServiceFamily family, const std::vector<double>& means, const SweepOptions& opt,
                              double variance = 0.0) {
    SweepResult r{"mean", {}};
    for (std::size_t i = 0; i < means.size(); ++i) {
        const ServiceSpec s{family, means[i], variance};
        r.points.push_back(detail::run_point(s, s, opt, i));
    }
    return r;
}

/// Identical servers with fixed mean over a grid of variances.
inline SweepResult sweep_variance(ServiceFamily family, double mean, const std::vector<double>& variances,
                                  const SweepOptions& opt) {
    SweepResult r{"variance", {}};
    for (std::size_t i = 0; i < variances.size(); ++i) {
        const ServiceSpec s{family, mean, variances[i]};
        r.points.push_back(detail::run_point(s, s, opt, i));
    }
    return r;
}

/// Grid over (E[T1], E[T2]), row-major in means1.
inline SweepResult sweep_nonidentical(ServiceFamily family, const std::vector<double>& means1,
                                      const std::vector<double>& means2, const SweepOptions& opt,
                                      double variance = 0.0) {
    SweepResult r{"nonidentical", {}};
    std::size_t index = 0;
    for (double m1 : means1) {
        for (double m2 : means2) {
            r.points.push_back(
                detail::run_point({family, m1, variance}, {family, m2, variance}, opt, index++));
        }
    }
    return r;
}

}  // namespace dtdq
