#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amc.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"
#include "rmc.hpp"
#include "simulator.hpp"
#include "state_space.hpp"

namespace dtdq {

inline constexpr const char* kToolName = "dtdq";
inline constexpr const char* kToolVersion = "1.0.0";

/// Provenance stamped on every output file.
struct OutputHeader {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"tool", kToolName}, {"version", kToolVersion}, {"command", command},
                {"config_hash", config_hash}, {"seed", seed}};
    }

    /// Comment block for CSV and gnuplot files, one "# key: value" per line.
    std::string comment_block() const {
        return "# tool: " + std::string(kToolName) + " " + kToolVersion + "\n# command: " + command +
               "\n# config_hash: " + config_hash + "\n# seed: " + std::to_string(seed) + "\n";
    }
};

/// Shortest text that reads back to the same double; integers print bare.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

/// Small CSV builder: comma separated, '.' decimals, LF line ends.
class CsvWriter {
public:
    CsvWriter(const OutputHeader& header, const std::vector<std::string>& columns) {
        out_ = header.comment_block();
        row(columns);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += cells[i];
        }
        out_ += '\n';
    }
    const std::string& str() const { return out_; }

private:
    std::string out_;
};

/// JSON number, or null for NaN and infinities (JSON has no spelling for them).
inline nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---- analyze ---------------------------------------------------------------

inline nlohmann::json pmf_to_json(const TruncatedPmf& pmf) {
    nlohmann::json mass = nlohmann::json::array();
    for (double p : pmf.mass) mass.push_back(p);
    return {{"truncation_h", pmf.truncation_h}, {"tail_mass", pmf.tail_mass}, {"mass", mass}};
}

inline std::string pmf_csv(const OutputHeader& header, const TruncatedPmf& pmf) {
    CsvWriter csv(header, {"h", "probability"});
    for (long h = 1; h <= pmf.truncation_h; ++h) csv.row({std::to_string(h), fmt(pmf.at(h))});
    return csv.str();
}

inline nlohmann::json report_to_json(const AoiReport& r, bool with_pmfs) {
    nlohmann::json j = {
        {"aoi_mean", num(r.aoi_mean)},
        {"aoi_second_moment", num(r.aoi_second_moment)},
        {"aoi_variance", num(r.aoi_variance())},
        {"paoi_mean", num(r.paoi_mean)},
        {"paoi_second_moment", num(r.paoi_second_moment)},
        {"tail_tol", r.tail_tol},
        {"aoi_truncation_h", r.aoi_pmf.truncation_h},
        {"aoi_tail_mass", r.aoi_pmf.tail_mass},
        {"paoi_truncation_h", r.paoi_pmf.truncation_h},
        {"paoi_tail_mass", r.paoi_pmf.tail_mass},
    };
    if (with_pmfs) {
        j["aoi_pmf"] = pmf_to_json(r.aoi_pmf);
        j["paoi_pmf"] = pmf_to_json(r.paoi_pmf);
    }
    return j;
}

// ---- simulate --------------------------------------------------------------

inline nlohmann::json estimate_json(const Estimate& e) {
    return {{"value", num(e.value)}, {"std_error", num(e.std_error)}};
}

inline nlohmann::json sim_to_json(const SimResult& r, bool with_histogram) {
    nlohmann::json j = {
        {"slots", r.slots},
        {"warmup_slots", r.warmup_slots},
        {"seed", r.seed},
        {"rng", r.rng_algorithm},
        {"batches", r.batches},
        {"aoi_mean", estimate_json(r.aoi_mean)},
        {"aoi_second_moment", estimate_json(r.aoi_second_moment)},
        {"paoi_mean", estimate_json(r.paoi_mean)},
        {"cycles", r.cycles},
        {"obsolete_count", r.obsolete_count},
        {"generations", r.generations},
        {"min_generation_gap", r.min_generation_gap},
    };
    if (with_histogram) {
        nlohmann::json hist = nlohmann::json::object();
        for (std::size_t h = 0; h < r.aoi_histogram.size(); ++h)
            if (r.aoi_histogram[h] > 0) hist[std::to_string(h)] = r.aoi_histogram[h];
        j["aoi_histogram"] = hist;
    }
    return j;
}

inline std::string histogram_csv(const OutputHeader& header, const SimResult& r) {
    CsvWriter csv(header, {"h", "count"});
    for (std::size_t h = 0; h < r.aoi_histogram.size(); ++h)
        if (r.aoi_histogram[h] > 0) csv.row({std::to_string(h), std::to_string(r.aoi_histogram[h])});
    return csv.str();
}

// ---- optimize / sweep ------------------------------------------------------

inline nlohmann::json curve_to_json(const OptimalK& opt) {
    nlohmann::json curve = nlohmann::json::array();
    for (const KCurvePoint& p : opt.curve)
        curve.push_back({{"k", p.k}, {"aoi_mean", num(p.aoi_mean)}, {"paoi_mean", num(p.paoi_mean)}});
    return curve;
}

inline std::string curve_csv(const OutputHeader& header, const OptimalK& opt) {
    CsvWriter csv(header, {"k", "aoi_mean", "paoi_mean"});
    for (const KCurvePoint& p : opt.curve) csv.row({std::to_string(p.k), fmt(p.aoi_mean), fmt(p.paoi_mean)});
    return csv.str();
}

inline nlohmann::json gain_to_json(const GainRecord& g) {
    return {
        {"k_star", g.k_star},
        {"analytic_k_star", g.optimum.k_star},
        {"aoi_mean_at_k_star", num(g.optimum.aoi_mean_at_star)},
        {"baseline_k0_mean", estimate_json(g.baseline)},
        {"baseline_slots", g.baseline_slots},
        {"baseline_seed", g.baseline_seed},
        {"gain_percent", num(g.gain_percent)},
        {"raw_gain_percent", num(g.raw_gain_percent)},
        {"gain_std_error", num(g.gain_std_error)},
        {"gain_ci95", {num(g.ci_low), num(g.ci_high)}},
        {"freezing_beneficial", g.freezing_beneficial},
    };
}

inline nlohmann::json service_json(const ServiceSpec& s) {
    nlohmann::json j = {{"family", to_string(s.family)}, {"mean", s.mean}};
    if (s.family == ServiceFamily::Triangular) j["variance"] = s.variance;
    return j;
}

/// Long format: one row per grid point per k.
inline std::string sweep_long_csv(const OutputHeader& header, const SweepResult& r) {
    CsvWriter csv(header, {"point", "mean1", "var1", "mean2", "var2", "k", "aoi_mean", "paoi_mean", "is_k_star"});
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const SweepPoint& p = r.points[i];
        for (const KCurvePoint& c : p.gain.optimum.curve) {
            csv.row({std::to_string(i), fmt(p.s1.mean), fmt(p.s1.variance), fmt(p.s2.mean), fmt(p.s2.variance),
                     std::to_string(c.k), fmt(c.aoi_mean), fmt(c.paoi_mean),
                     c.k == p.gain.optimum.k_star ? "1" : "0"});
        }
    }
    return csv.str();
}

/// One row per grid point with the optimum and the gain.
inline std::string sweep_summary_csv(const OutputHeader& header, const SweepResult& r) {
    CsvWriter csv(header, {"point", "mean1", "var1", "mean2", "var2", "k_max", "analytic_k_star", "aoi_mean_at_k_star",
                           "baseline_k0_mean", "baseline_std_error", "raw_gain_percent", "gain_ci_low",
                           "gain_ci_high", "freezing_beneficial", "k_star", "gain_percent"});
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const SweepPoint& p = r.points[i];
        const GainRecord& g = p.gain;
        csv.row({std::to_string(i), fmt(p.s1.mean), fmt(p.s1.variance), fmt(p.s2.mean), fmt(p.s2.variance),
                 std::to_string(p.k_max), std::to_string(g.optimum.k_star), fmt(g.optimum.aoi_mean_at_star),
                 fmt(g.baseline.value), fmt(g.baseline.std_error), fmt(g.raw_gain_percent), fmt(g.ci_low),
                 fmt(g.ci_high), g.freezing_beneficial ? "1" : "0", std::to_string(g.k_star), fmt(g.gain_percent)});
    }
    return csv.str();
}

inline nlohmann::json sweep_to_json(const SweepResult& r, bool with_curves) {
    nlohmann::json points = nlohmann::json::array();
    for (const SweepPoint& p : r.points) {
        nlohmann::json j = {{"server1", service_json(p.s1)}, {"server2", service_json(p.s2)},
                            {"priority", to_string(p.priority)}, {"k_max", p.k_max}, {"gain", gain_to_json(p.gain)}};
        if (with_curves) j["curve"] = curve_to_json(p.gain.optimum);
        points.push_back(std::move(j));
    }
    return {{"kind", r.kind}, {"points", points}};
}

// ---- debug dumps -----------------------------------------------------------

template <typename State>
std::string states_csv(const OutputHeader& header, const StateSpace<State>& space) {
    CsvWriter csv(header, {"index", "class", "i", "j", "l"});
    for (int idx = 0; idx < space.size(); ++idx) {
        const State& s = space.state_of(idx);
        csv.row({std::to_string(idx), std::to_string(s.cls), std::to_string(s.i), std::to_string(s.j),
                 std::to_string(s.l)});
    }
    return csv.str();
}

namespace detail {

inline std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace detail

/// (row_state, col_state, probability) triples of A, followed by the
/// absorption entries with col_state "15" (success) and "16" (obsolete).
inline std::string amc_matrix_csv(const OutputHeader& header, const AmcModel& m) {
    CsvWriter csv(header, {"row", "row_state", "col", "col_state", "probability"});
    for (int r = 0; r < m.size(); ++r) {
        const std::string rs = detail::quoted(to_string(m.space.state_of(r)));
        for (SparseRowMatrix::InnerIterator it(m.A, r); it; ++it) {
            const int c = static_cast<int>(it.col());
            csv.row({std::to_string(r), rs, std::to_string(c), detail::quoted(to_string(m.space.state_of(c))),
                     fmt(it.value())});
        }
        if (m.cs[r] != 0.0) csv.row({std::to_string(r), rs, "-1", "\"15\"", fmt(m.cs[r])});
        if (m.cu[r] != 0.0) csv.row({std::to_string(r), rs, "-2", "\"16\"", fmt(m.cu[r])});
    }
    return csv.str();
}

inline std::string rmc_matrix_csv(const OutputHeader& header, const RmcModel& m) {
    CsvWriter csv(header, {"row", "row_state", "col", "col_state", "probability"});
    for (int r = 0; r < m.size(); ++r) {
        const std::string rs = detail::quoted(to_string(m.space.state_of(r)));
        for (SparseRowMatrix::InnerIterator it(m.W, r); it; ++it) {
            const int c = static_cast<int>(it.col());
            csv.row({std::to_string(r), rs, std::to_string(c), detail::quoted(to_string(m.space.state_of(c))),
                     fmt(it.value())});
        }
    }
    return csv.str();
}

}  // namespace dtdq
