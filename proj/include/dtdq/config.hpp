#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amc.hpp"
#include "dph.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"

namespace dtdq {

using json = nlohmann::json;

/// A config file that fails to parse or validate. `path` names the field.
class ConfigError : public ModelError {
public:
    ConfigError(const std::string& path, const std::string& what)
        : ModelError("config: " + (path.empty() ? std::string() : path + ": ") + what), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

namespace detail {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(at(key), "missing required field");
        return j_.at(key);
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(at(key), "must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    long integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        return v.get<long>();
    }
    long integer(const std::string& key, long fallback) { return has(key) ? integer(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError(at(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline PriorityPolicy parse_priority(const std::string& s, const std::string& path) {
    if (s == "S1") return PriorityPolicy::S1;
    if (s == "S2") return PriorityPolicy::S2;
    throw ConfigError(path, "priority must be \"S1\" or \"S2\", got \"" + s + "\"");
}

// Wraps constructor failures so that the diagnostic names the field.
template <typename F>
auto at_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const ModelError& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace detail

/// Service-time law from a config object with a "kind" field:
///   geometric     {p} or {mean}
///   uniform       {a, b}
///   deterministic {value}
///   triangular    {mean, variance}
///   pmf           {pmf: {"w": prob, ...}}
///   dph           {alpha: [...], B: [[...], ...]}
inline DphDistribution parse_distribution(const json& j, const std::string& path) {
    detail::Fields f(j, path);
    const std::string kind = f.text("kind");
    auto build = [&]() -> DphDistribution {
        if (kind == "geometric") {
            const bool by_p = f.has("p"), by_mean = f.has("mean");
            if (by_p == by_mean) throw ConfigError(path, "geometric needs exactly one of p or mean");
            if (by_p) return dph_geometric(f.number("p"));
            const double m = f.number("mean");
            if (!(m >= 1.0)) throw ConfigError(f.at("mean"), "must be >= 1");
            return dph_geometric(1.0 / m);
        }
        if (kind == "uniform") return dph_uniform(f.integer("a"), f.integer("b"));
        if (kind == "deterministic") {
            const long v = f.integer("value");
            return dph_uniform(v, v);
        }
        if (kind == "triangular") return dph_triangular(f.number("mean"), f.number("variance"));
        if (kind == "pmf") {
            const json& p = f.raw("pmf");
            if (!p.is_object() || p.empty()) throw ConfigError(f.at("pmf"), "expected a non-empty object");
            SupportPmf pmf;
            for (auto it = p.begin(); it != p.end(); ++it) {
                const std::string where = f.at("pmf") + "." + it.key();
                std::size_t used = 0;
                long w = 0;
                try {
                    w = std::stol(it.key(), &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != it.key().size()) throw ConfigError(where, "support value must be an integer");
                if (!it.value().is_number()) throw ConfigError(where, "expected a number");
                pmf[w] = it.value().get<double>();
            }
            return dph_from_pmf(pmf);
        }
        if (kind == "dph") {
            const json& a = f.raw("alpha");
            const json& b = f.raw("B");
            if (!a.is_array() || a.empty()) throw ConfigError(f.at("alpha"), "expected a non-empty array");
            const auto n = static_cast<Eigen::Index>(a.size());
            if (!b.is_array() || static_cast<Eigen::Index>(b.size()) != n)
                throw ConfigError(f.at("B"), "expected " + std::to_string(n) + " rows");
            Eigen::VectorXd alpha(n);
            Eigen::MatrixXd B(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                if (!a[static_cast<std::size_t>(r)].is_number()) throw ConfigError(f.at("alpha"), "expected numbers");
                alpha[r] = a[static_cast<std::size_t>(r)].get<double>();
                const json& row = b[static_cast<std::size_t>(r)];
                if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                    throw ConfigError(f.at("B"), "row " + std::to_string(r) + " must have " + std::to_string(n) + " entries");
                for (Eigen::Index c = 0; c < n; ++c) {
                    if (!row[static_cast<std::size_t>(c)].is_number()) throw ConfigError(f.at("B"), "expected numbers");
                    B(r, c) = row[static_cast<std::size_t>(c)].get<double>();
                }
            }
            return DphDistribution(alpha, B);
        }
        throw ConfigError(f.at("kind"), "unknown distribution kind \"" + kind +
                                            "\" (expected geometric, uniform, deterministic, triangular, pmf or dph)");
    };
    DphDistribution d = detail::at_path(path, build);
    f.finish();
    return d;
}

struct RunSettings {
    std::uint64_t seed = 1;
    long slots = 400'000;
    double tail_tol = kDefaultTailTol;
    int k_max = 0;  // 0: default_k_max
    long baseline_slots = kMinBaselineSlots;
};

struct SweepSpec {
    std::string kind;  // mean | variance | nonidentical
    ServiceFamily family = ServiceFamily::Geometric;
    PriorityPolicy priority = PriorityPolicy::S1;
    std::vector<double> grid;   // means (mean, nonidentical rows) or variances
    std::vector<double> grid2;  // nonidentical columns
    double mean = 0.0;          // variance sweeps
    double variance = 0.0;      // triangular mean and nonidentical sweeps
};

struct OutputSettings {
    std::string dir;
    std::string format = "csv";
};

/// Validated contents of a config file, after command-line overrides.
struct RunConfig {
    json effective;                       // canonical form the hash is taken of
    std::optional<SystemConfig> system;   // absent when the file has no "system"
    bool has_k = false;
    RunSettings run;
    std::optional<SweepSpec> sweep;
    OutputSettings output;
};

namespace detail {

inline std::vector<double> parse_grid(const json& j, const std::string& path) {
    std::vector<double> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(j[i].get<double>());
        }
    } else if (j.is_object()) {
        Fields f(j, path);
        const double from = f.number("from"), to = f.number("to"), step = f.number("step");
        f.finish();
        if (!(step > 0.0) || to < from) throw ConfigError(path, "need step > 0 and to >= from");
        const long n = std::lround(std::floor((to - from) / step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(from + static_cast<double>(i) * step);
    } else {
        throw ConfigError(path, "expected an array or {from, to, step}");
    }
    if (out.empty()) throw ConfigError(path, "grid is empty");
    return out;
}

inline SweepSpec parse_sweep(const json& j) {
    Fields f(j, "sweep");
    SweepSpec s;
    s.kind = f.text("kind");
    s.family = at_path(f.at("family"), [&] { return parse_family(f.text("family")); });
    s.priority = parse_priority(f.text("priority", "S1"), f.at("priority"));
    if (s.kind == "mean") {
        s.grid = parse_grid(f.raw("means"), f.at("means"));
        s.variance = f.number("variance", 0.0);
    } else if (s.kind == "variance") {
        s.mean = f.number("mean");
        s.grid = parse_grid(f.raw("variances"), f.at("variances"));
    } else if (s.kind == "nonidentical") {
        s.grid = parse_grid(f.raw("means1"), f.at("means1"));
        s.grid2 = parse_grid(f.raw("means2"), f.at("means2"));
        s.variance = f.number("variance", 0.0);
    } else {
        throw ConfigError(f.at("kind"), "must be mean, variance or nonidentical");
    }
    f.finish();
    // Build every grid point's law up front so that bad points fail early.
    auto check = [&](double mean, double var, const std::string& where) {
        at_path(where, [&] { return make_service({s.family, mean, var}); });
    };
    if (s.kind == "variance") {
        for (double v : s.grid) check(s.mean, v, "sweep.variances");
    } else {
        for (double m : s.grid) check(m, s.variance, s.kind == "mean" ? "sweep.means" : "sweep.means1");
        for (double m : s.grid2) check(m, s.variance, "sweep.means2");
    }
    return s;
}

}  // namespace detail

/// Validates a parsed config document. Every field is checked before any
/// computation starts; unknown keys are errors.
inline RunConfig parse_run_config(const json& doc) {
    detail::Fields top(doc, "");
    RunConfig rc;
    rc.effective = doc;
    if (top.has("system")) {
        detail::Fields f(doc.at("system"), "system");
        DphDistribution d1 = parse_distribution(f.raw("server1"), "system.server1");
        DphDistribution d2 = parse_distribution(f.raw("server2"), "system.server2");
        SystemConfig cfg{std::move(d1), std::move(d2), 1, PriorityPolicy::S1};
        if (f.has("k")) {
            const long k = f.integer("k");
            if (k < 0 || k > 100000) throw ConfigError("system.k", "must lie in [0, 100000]");
            cfg.k = static_cast<int>(k);
            rc.has_k = true;
        }
        cfg.priority = detail::parse_priority(f.text("priority", "S1"), "system.priority");
        f.finish();
        rc.system = std::move(cfg);
    }
    if (top.has("run")) {
        detail::Fields f(doc.at("run"), "run");
        rc.run.seed = f.unsigned_integer("seed", rc.run.seed);
        rc.run.slots = f.integer("slots", rc.run.slots);
        rc.run.tail_tol = f.number("tail_tol", rc.run.tail_tol);
        const long k_max = f.integer("k_max", rc.run.k_max);
        rc.run.baseline_slots = f.integer("baseline_slots", rc.run.baseline_slots);
        f.finish();
        if (rc.run.slots < kMinSimSlots)
            throw ConfigError("run.slots", "must be >= " + std::to_string(kMinSimSlots));
        if (!(rc.run.tail_tol > 0.0 && rc.run.tail_tol < 1.0)) throw ConfigError("run.tail_tol", "must lie in (0, 1)");
        if (k_max < 0 || k_max > 100000) throw ConfigError("run.k_max", "must lie in [0, 100000] (0 = default)");
        rc.run.k_max = static_cast<int>(k_max);
        if (rc.run.baseline_slots != 0 && rc.run.baseline_slots < kMinBaselineSlots)
            throw ConfigError("run.baseline_slots",
                              "must be 0 (no baseline) or >= " + std::to_string(kMinBaselineSlots));
    }
    if (top.has("sweep")) rc.sweep = detail::parse_sweep(doc.at("sweep"));
    if (top.has("output")) {
        detail::Fields f(doc.at("output"), "output");
        rc.output.dir = f.text("dir", "");
        rc.output.format = f.text("format", rc.output.format);
        f.finish();
        if (rc.output.format != "csv" && rc.output.format != "json")
            throw ConfigError("output.format", "must be csv or json");
    }
    top.finish();
    return rc;
}

/// Parses JSON text; syntax errors report line and column.
inline json parse_config_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", source + ": " + e.what());
    }
}

inline json read_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// FNV-1a 64-bit digest of the canonical (key-sorted, compact) JSON form.
inline std::string config_hash(const json& doc) {
    const std::string canon = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace dtdq
