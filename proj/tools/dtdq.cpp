// dtdq: command-line front end for the dual-server freezing model.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtdq/config.hpp"
#include "dtdq/metrics.hpp"
#include "dtdq/optimizer.hpp"
#include "dtdq/report.hpp"
#include "dtdq/rmc.hpp"
#include "dtdq/simulator.hpp"

namespace fs = std::filesystem;
using dtdq::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<long> slots;
    std::optional<double> tail_tol;
    std::optional<int> k_max;
    std::optional<std::string> format;
    std::string chain = "amc";
    std::string figure;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Loads the config file (or an empty document), applies command-line
// overrides and validates the result.
dtdq::RunConfig load(const Flags& flags, bool config_required) {
    json doc = json::object();
    if (!flags.config.empty()) {
        doc = dtdq::read_config_file(flags.config);
    } else if (config_required) {
        throw UsageError("--config is required for this command");
    }
    if (!doc.is_object()) throw dtdq::ConfigError("", "top level must be an object");
    auto run = [&]() -> json& {
        if (!doc.contains("run")) doc["run"] = json::object();
        return doc["run"];
    };
    if (flags.seed) run()["seed"] = *flags.seed;
    if (flags.slots) run()["slots"] = *flags.slots;
    if (flags.tail_tol) run()["tail_tol"] = *flags.tail_tol;
    if (flags.k_max) run()["k_max"] = *flags.k_max;
    if (flags.format) {
        if (!doc.contains("output")) doc["output"] = json::object();
        doc["output"]["format"] = *flags.format;
    }
    return dtdq::parse_run_config(doc);
}

// The hash covers everything that shapes the results; the output directory
// does not.
std::string hash_of(const dtdq::RunConfig& rc) {
    json doc = rc.effective;
    if (doc.contains("output") && doc["output"].is_object()) doc["output"].erase("dir");
    return dtdq::config_hash(doc);
}

fs::path output_dir(const Flags& flags, const dtdq::RunConfig& rc) {
    if (!flags.out.empty()) return flags.out;
    if (const char* env = std::getenv("DTDQ_OUT_DIR"); env && *env) return env;
    if (!rc.output.dir.empty()) return rc.output.dir;
    return "dtdq-out";
}

const dtdq::SystemConfig& require_system(const dtdq::RunConfig& rc, bool need_k) {
    if (!rc.system) throw dtdq::ConfigError("system", "missing required section");
    if (need_k && !rc.has_k) throw dtdq::ConfigError("system.k", "missing required field");
    return *rc.system;
}

const dtdq::SystemConfig& require_markov_system(const dtdq::RunConfig& rc, const std::string& command) {
    const dtdq::SystemConfig& cfg = require_system(rc, true);
    if (cfg.k < 1)
        throw dtdq::ConfigError("system.k", "k = 0 (zero-wait) has no Markov model; `" + command +
                                                "` needs k >= 1, use `simulate` for k = 0");
    return cfg;
}

json model_summary(const dtdq::SystemConfig& cfg) {
    return {{"k", cfg.k},
            {"priority", dtdq::to_string(cfg.priority)},
            {"server1", {{"order", cfg.dph1.order()}, {"mean", cfg.dph1.mean()}, {"variance", cfg.dph1.variance()}}},
            {"server2", {{"order", cfg.dph2.order()}, {"mean", cfg.dph2.mean()}, {"variance", cfg.dph2.variance()}}}};
}

void say(const fs::path& p) { std::cout << "wrote " << p.generic_string() << "\n"; }

void emit(const fs::path& p, const std::string& text) {
    dtdq::write_text(p, text);
    say(p);
}

// ---- analyze / simulate / optimize / sweep ---------------------------------

int cmd_analyze(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    const dtdq::SystemConfig& cfg = require_markov_system(rc, "analyze");
    const dtdq::OutputHeader header{"analyze", hash_of(rc), rc.run.seed};
    const dtdq::AmcModel model = dtdq::build_model(cfg);
    const dtdq::AoiReport report = dtdq::analyze(model, rc.run.tail_tol);
    const bool as_json = rc.output.format == "json";
    const fs::path dir = output_dir(flags, rc);
    json doc = {{"header", header.to_json()},
                {"config", rc.effective},
                {"model", model_summary(cfg)},
                {"amc_states", model.size()},
                {"rmc_states", dtdq::rmc_size(cfg.dph1.order(), cfg.dph2.order(), cfg.k)},
                {"report", dtdq::report_to_json(report, as_json)}};
    emit(dir / "report.json", dtdq::dump_json(doc));
    if (!as_json) {
        emit(dir / "aoi_pmf.csv", dtdq::pmf_csv(header, report.aoi_pmf));
        emit(dir / "paoi_pmf.csv", dtdq::pmf_csv(header, report.paoi_pmf));
    }
    std::cout << "E[AoI] = " << dtdq::fmt(report.aoi_mean) << "  E[AoI^2] = " << dtdq::fmt(report.aoi_second_moment)
              << "  E[PAoI] = " << dtdq::fmt(report.paoi_mean) << "\n";
    return kExitOk;
}

int cmd_simulate(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    const dtdq::SystemConfig& cfg = require_system(rc, true);
    const dtdq::OutputHeader header{"simulate", hash_of(rc), rc.run.seed};
    const dtdq::SimResult sim = dtdq::simulate(cfg, rc.run.slots, rc.run.seed);
    const bool as_json = rc.output.format == "json";
    const fs::path dir = output_dir(flags, rc);
    json doc = {{"header", header.to_json()},
                {"config", rc.effective},
                {"model", model_summary(cfg)},
                {"simulation", dtdq::sim_to_json(sim, as_json)}};
    emit(dir / "simulation.json", dtdq::dump_json(doc));
    if (!as_json) emit(dir / "aoi_histogram.csv", dtdq::histogram_csv(header, sim));
    std::cout << "E[AoI] = " << dtdq::fmt(sim.aoi_mean.value) << " +- " << dtdq::fmt(sim.aoi_mean.std_error)
              << "  E[PAoI] = " << dtdq::fmt(sim.paoi_mean.value) << " +- " << dtdq::fmt(sim.paoi_mean.std_error)
              << "\n";
    return kExitOk;
}

int cmd_optimize(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    const dtdq::SystemConfig& cfg = require_system(rc, false);
    const dtdq::OutputHeader header{"optimize", hash_of(rc), rc.run.seed};
    const int k_max = rc.run.k_max > 0 ? rc.run.k_max : dtdq::default_k_max(cfg);
    const bool as_json = rc.output.format == "json";
    const fs::path dir = output_dir(flags, rc);
    json doc = {{"header", header.to_json()}, {"config", rc.effective}, {"k_max", k_max}};
    dtdq::OptimalK opt;
    if (rc.run.baseline_slots > 0) {
        const dtdq::GainRecord g = dtdq::freezing_gain(cfg, k_max, rc.run.baseline_slots, rc.run.seed);
        opt = g.optimum;
        doc["optimum"] = dtdq::gain_to_json(g);
        std::cout << "k* = " << g.k_star << " (analytic argmin " << g.optimum.k_star << ")  E[AoI](k*) = "
                  << dtdq::fmt(g.optimum.aoi_mean_at_star) << "  gain = " << dtdq::fmt(g.gain_percent) << "%\n";
    } else {
        opt = dtdq::find_optimal_k(cfg, k_max);
        doc["optimum"] = {{"analytic_k_star", opt.k_star}, {"aoi_mean_at_k_star", opt.aoi_mean_at_star}};
        std::cout << "k* = " << opt.k_star << "  E[AoI](k*) = " << dtdq::fmt(opt.aoi_mean_at_star) << "\n";
    }
    if (as_json) doc["curve"] = dtdq::curve_to_json(opt);
    emit(dir / "optimum.json", dtdq::dump_json(doc));
    if (!as_json) emit(dir / "k_curve.csv", dtdq::curve_csv(header, opt));
    return kExitOk;
}

std::string sweep_script(const dtdq::SweepResult& r, const dtdq::OutputHeader& header, const std::string& stem) {
    std::string s = header.comment_block();
    s += "set datafile separator ','\nset terminal pngcairo size 1000,420\nset output '" + stem + ".png'\n";
    s += "set key top left\nset grid\nset multiplot layout 1,2\n";
    const std::string data = "'" + stem + "_summary.csv'";
    if (r.kind == "nonidentical") {
        s += "set xlabel 'E[T1]'\nset ylabel 'E[T2]'\nset title 'optimum freezing parameter k*'\n";
        s += "splot " + data + " using 2:4:15 with points pt 7 notitle\n";
        s += "set title 'freezing gain (%)'\nsplot " + data + " using 2:4:16 with points pt 7 notitle\n";
    } else {
        const std::string x = r.kind == "variance" ? "3" : "2";
        s += std::string("set xlabel '") + (r.kind == "variance" ? "Var[T]" : "E[T]") + "'\n";
        s += "set title 'optimum freezing parameter k*'\nset ylabel 'k*'\n";
        s += "plot " + data + " using " + x + ":15 with steps lw 2 notitle\n";
        s += "set title 'freezing gain'\nset ylabel 'reduction in E[AoI] (%)'\n";
        s += "plot " + data + " using " + x + ":16 with linespoints pt 7 notitle\n";
    }
    s += "unset multiplot\n";
    return s;
}

void write_sweep(const fs::path& dir, const std::string& stem, const dtdq::SweepResult& r,
                 const dtdq::OutputHeader& header, const json& config, bool as_json) {
    json doc = {{"header", header.to_json()}, {"config", config}, {"sweep", dtdq::sweep_to_json(r, as_json)}};
    emit(dir / (stem + ".json"), dtdq::dump_json(doc));
    emit(dir / (stem + "_summary.csv"), dtdq::sweep_summary_csv(header, r));
    if (!as_json) emit(dir / (stem + "_long.csv"), dtdq::sweep_long_csv(header, r));
    emit(dir / (stem + ".gp"), sweep_script(r, header, stem));
}

dtdq::SweepResult run_sweep(const dtdq::SweepSpec& s, const dtdq::SweepOptions& opt) {
    if (s.kind == "mean") return dtdq::sweep_mean(s.family, s.grid, opt, s.variance);
    if (s.kind == "variance") return dtdq::sweep_variance(s.family, s.mean, s.grid, opt);
    return dtdq::sweep_nonidentical(s.family, s.grid, s.grid2, opt, s.variance);
}

int cmd_sweep(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    if (!rc.sweep) throw dtdq::ConfigError("sweep", "missing required section");
    if (rc.run.baseline_slots == 0) throw dtdq::ConfigError("run.baseline_slots", "sweeps need a k = 0 baseline");
    const dtdq::OutputHeader header{"sweep", hash_of(rc), rc.run.seed};
    const dtdq::SweepOptions opt{rc.run.k_max, rc.run.baseline_slots, rc.run.seed, rc.sweep->priority};
    const dtdq::SweepResult r = run_sweep(*rc.sweep, opt);
    write_sweep(output_dir(flags, rc), "sweep", r, header, rc.effective, rc.output.format == "json");
    return kExitOk;
}

// ---- reproduce -------------------------------------------------------------

struct FigureContext {
    fs::path dir;
    dtdq::OutputHeader header;
    dtdq::RunSettings run;
    json config;
};

std::vector<double> range(double from, double to, double step) {
    std::vector<double> v;
    const long n = std::lround(std::floor((to - from) / step + 1e-9));
    for (long i = 0; i <= n; ++i) v.push_back(from + static_cast<double>(i) * step);
    return v;
}

dtdq::SystemConfig identical(dtdq::ServiceFamily f, double mean, int k, double variance = 0.0) {
    const dtdq::DphDistribution d = dtdq::make_service({f, mean, variance});
    return {d, d, k, dtdq::PriorityPolicy::S1};
}

// Validation: theory and simulation of E[AoI], E[AoI^2], E[PAoI] over the mean.
void fig3(const FigureContext& c) {
    const std::vector<int> ks{3, 4, 7, 8};
    std::uint64_t index = 0;
    std::vector<std::string> files;
    for (auto family : {dtdq::ServiceFamily::Geometric, dtdq::ServiceFamily::Uniform}) {
        for (int k : ks) {
            dtdq::CsvWriter csv(c.header, {"mean", "theory_aoi_mean", "theory_aoi_second_moment", "theory_paoi_mean",
                                           "sim_aoi_mean", "sim_aoi_mean_se", "sim_aoi_second_moment",
                                           "sim_aoi_second_moment_se", "sim_paoi_mean", "sim_paoi_mean_se"});
            for (double m : range(1, 12, 1)) {
                const dtdq::SystemConfig cfg = identical(family, m, k);
                const dtdq::AmcModel model = dtdq::build_model(cfg);
                const dtdq::AmcAnalyzer an(model);
                const dtdq::SimResult s = dtdq::simulate(cfg, c.run.slots, dtdq::point_seed(c.run.seed, index++));
                csv.row({dtdq::fmt(m), dtdq::fmt(an.aoi_mean()), dtdq::fmt(an.aoi_second_moment()),
                         dtdq::fmt(an.paoi_mean()), dtdq::fmt(s.aoi_mean.value), dtdq::fmt(s.aoi_mean.std_error),
                         dtdq::fmt(s.aoi_second_moment.value), dtdq::fmt(s.aoi_second_moment.std_error),
                         dtdq::fmt(s.paoi_mean.value), dtdq::fmt(s.paoi_mean.std_error)});
            }
            const std::string name = std::string("fig3_") + dtdq::to_string(family) + "_k" + std::to_string(k) + ".csv";
            files.push_back(name);
            emit(c.dir / name, csv.str());
        }
    }
    std::string gp = c.header.comment_block();
    gp += "set datafile separator ','\nset terminal pngcairo size 1500,450\nset output 'fig3.png'\n";
    gp += "set grid\nset key top left\nset xlabel 'E[T_m]'\nset multiplot layout 1,3\n";
    struct Panel {
        const char* title;
        const char* theory;
        const char* sim;
        const char* se;
    };
    const Panel panels[] = {{"average AoI", "2", "5", "6"},
                            {"average squared AoI", "3", "7", "8"},
                            {"average PAoI", "4", "9", "10"}};
    for (const Panel& p : panels) {
        gp += std::string("set title '") + p.title + "'\nplot \\\n";
        for (std::size_t i = 0; i < files.size(); ++i) {
            const std::string label = files[i].substr(5, files[i].size() - 9);
            gp += "  '" + files[i] + "' using 1:" + p.theory + " with lines title '" + label + " (T)', \\\n";
            gp += "  '" + files[i] + "' using 1:" + p.sim + ":" + p.se + " with yerrorbars pt 6 title '" + label +
                  " (S)'" + (i + 1 < files.size() ? ", \\\n" : "\n");
        }
    }
    gp += "unset multiplot\n";
    emit(c.dir / "fig3.gp", gp);
}

// k-curves and the k*/gain panel for identical geometric and uniform servers.
void fig4(const FigureContext& c) {
    const std::vector<double> curve_means{2, 4, 6, 8, 10, 12};
    const int curve_k_max = 16;
    for (auto family : {dtdq::ServiceFamily::Geometric, dtdq::ServiceFamily::Uniform}) {
        dtdq::CsvWriter csv(c.header, {"mean", "k", "aoi_mean"});
        for (double m : curve_means) {
            const dtdq::OptimalK opt = dtdq::find_optimal_k(identical(family, m, 1), curve_k_max);
            for (const auto& p : opt.curve) csv.row({dtdq::fmt(m), std::to_string(p.k), dtdq::fmt(p.aoi_mean)});
            csv.row({});
        }
        emit(c.dir / (std::string("fig4ab_") + dtdq::to_string(family) + ".csv"), csv.str());
    }
    const dtdq::SweepOptions opt{c.run.k_max > 0 ? c.run.k_max : 16, c.run.baseline_slots, c.run.seed,
                                 dtdq::PriorityPolicy::S1};
    write_sweep(c.dir, "fig4c_geometric", dtdq::sweep_mean(dtdq::ServiceFamily::Geometric, range(1, 12, 0.25), opt),
                c.header, c.config, false);
    write_sweep(c.dir, "fig4c_uniform", dtdq::sweep_mean(dtdq::ServiceFamily::Uniform, range(1, 12, 0.5), opt),
                c.header, c.config, false);
    std::string gp = c.header.comment_block();
    gp += "set datafile separator ','\nset terminal pngcairo size 1500,450\nset output 'fig4.png'\n";
    gp += "set grid\nset multiplot layout 1,3\nset xlabel 'k'\nset ylabel 'E[AoI]'\n";
    gp += "set title '(a) geometric'\nplot 'fig4ab_geometric.csv' using 2:3 with linespoints notitle\n";
    gp += "set title '(b) uniform'\nplot 'fig4ab_uniform.csv' using 2:3 with linespoints notitle\n";
    gp += "set title '(c) k* and gain'\nset xlabel 'E[T_m]'\nset ylabel 'k*'\nset y2label 'gain (%)'\n";
    gp += "set y2tics\nplot 'fig4c_geometric_summary.csv' using 2:15 with steps title 'k* geometric', \\\n";
    gp += "  'fig4c_uniform_summary.csv' using 2:15 with steps title 'k* uniform', \\\n";
    gp += "  'fig4c_geometric_summary.csv' using 2:16 axes x1y2 with lines title 'gain geometric', \\\n";
    gp += "  'fig4c_uniform_summary.csv' using 2:16 axes x1y2 with lines title 'gain uniform'\n";
    gp += "unset multiplot\n";
    emit(c.dir / "fig4.gp", gp);
}

// E[AoI] against the variance of triangular service (mean 13) for several k.
void fig5(const FigureContext& c) {
    const std::vector<int> ks{0, 2, 4, 6, 8, 10};
    dtdq::CsvWriter csv(c.header, {"k", "variance", "aoi_mean", "aoi_mean_se"});
    std::uint64_t index = 0;
    for (int k : ks) {
        for (double v : range(0, 14, 1)) {
            const dtdq::SystemConfig cfg = identical(dtdq::ServiceFamily::Triangular, 13, k, v);
            if (k == 0) {
                const dtdq::SimResult s =
                    dtdq::simulate(cfg, c.run.baseline_slots, dtdq::point_seed(c.run.seed, index++));
                csv.row({"0", dtdq::fmt(v), dtdq::fmt(s.aoi_mean.value), dtdq::fmt(s.aoi_mean.std_error)});
            } else {
                csv.row({std::to_string(k), dtdq::fmt(v), dtdq::fmt(dtdq::aoi_mean(dtdq::build_model(cfg))), "0"});
            }
        }
        csv.row({});
        csv.row({});
    }
    emit(c.dir / "fig5.csv", csv.str());
    std::string gp = c.header.comment_block();
    gp += "set datafile separator ','\nset terminal pngcairo size 800,500\nset output 'fig5.png'\n";
    gp += "set grid\nset xlabel 'Var[T_m]'\nset ylabel 'E[AoI]'\nset key outside right\n";
    gp += "plot ";
    for (std::size_t i = 0; i < ks.size(); ++i) {
        gp += "'fig5.csv' index " + std::to_string(i) + " using 2:3 with linespoints title 'k=" +
              std::to_string(ks[i]) + "'" + (i + 1 < ks.size() ? ", \\\n  " : "\n");
    }
    emit(c.dir / "fig5.gp", gp);
}

// k* and gain against the variance of triangular service.
void fig6(const FigureContext& c) {
    const dtdq::SweepOptions opt{c.run.k_max > 0 ? c.run.k_max : 14, c.run.baseline_slots, c.run.seed,
                                 dtdq::PriorityPolicy::S1};
    for (double mean : {11.0, 13.0}) {
        const std::string stem = "fig6_mean" + std::to_string(static_cast<int>(mean));
        write_sweep(c.dir, stem, dtdq::sweep_variance(dtdq::ServiceFamily::Triangular, mean, range(0, 14, 1), opt),
                    c.header, c.config, false);
    }
    std::string gp = c.header.comment_block();
    gp += "set datafile separator ','\nset terminal pngcairo size 1000,420\nset output 'fig6.png'\n";
    gp += "set grid\nset xlabel 'Var[T_m]'\nset multiplot layout 1,2\n";
    gp += "set title 'k*'\nplot 'fig6_mean11_summary.csv' using 3:15 with steps title 'E[T]=11', "
          "'fig6_mean13_summary.csv' using 3:15 with steps title 'E[T]=13'\n";
    gp += "set title 'gain (%)'\nplot 'fig6_mean11_summary.csv' using 3:16 with linespoints title 'E[T]=11', "
          "'fig6_mean13_summary.csv' using 3:16 with linespoints title 'E[T]=13'\n";
    gp += "unset multiplot\n";
    emit(c.dir / "fig6.gp", gp);
}

void nonidentical_figure(const FigureContext& c, const std::string& stem, dtdq::ServiceFamily family,
                         const std::vector<double>& means, double variance, int default_k_max) {
    const dtdq::SweepOptions opt{c.run.k_max > 0 ? c.run.k_max : default_k_max, c.run.baseline_slots, c.run.seed,
                                 dtdq::PriorityPolicy::S1};
    write_sweep(c.dir, stem, dtdq::sweep_nonidentical(family, means, means, opt, variance), c.header, c.config,
                false);
    std::string gp = c.header.comment_block();
    gp += "set datafile separator ','\nset terminal pngcairo size 800,600\nset output '" + stem + ".png'\n";
    gp += "set xlabel 'E[T1]'\nset ylabel 'E[T2]'\nset zlabel 'gain (%)'\nset dgrid3d " +
          std::to_string(means.size()) + "," + std::to_string(means.size()) + "\nset hidden3d\n";
    gp += "splot '" + stem + "_summary.csv' using 2:4:16 with lines notitle\n";
    emit(c.dir / (stem + ".gp"), gp);
}

// Gain surface over non-identical geometric means (S1 priority).
void fig7(const FigureContext& c) {
    nonidentical_figure(c, "fig7", dtdq::ServiceFamily::Geometric, range(1, 12, 1), 0.0, 0);
}

// Gain surface over non-identical triangular means with variance 0.5.
void fig8(const FigureContext& c) {
    nonidentical_figure(c, "fig8", dtdq::ServiceFamily::Triangular, range(3, 13, 2), 0.5, 14);
}

int cmd_reproduce(const Flags& flags) {
    static const std::map<std::string, std::function<void(const FigureContext&)>> figures{
        {"fig3", fig3}, {"fig4", fig4}, {"fig5", fig5}, {"fig6", fig6}, {"fig7", fig7}, {"fig8", fig8}};
    const auto it = figures.find(flags.figure);
    if (it == figures.end())
        throw UsageError("unknown figure id '" + flags.figure + "' (expected fig3, fig4, fig5, fig6, fig7 or fig8)");
    const dtdq::RunConfig rc = load(flags, false);
    if (rc.system || rc.sweep) throw dtdq::ConfigError("", "reproduce takes only the run and output sections");
    json hashed = rc.effective;
    hashed["figure"] = flags.figure;
    if (hashed.contains("output") && hashed["output"].is_object()) hashed["output"].erase("dir");
    dtdq::RunSettings run = rc.run;
    if (run.baseline_slots == 0) throw dtdq::ConfigError("run.baseline_slots", "figures need a k = 0 baseline");
    const FigureContext ctx{output_dir(flags, rc) / flags.figure,
                            {"reproduce " + flags.figure, dtdq::config_hash(hashed), run.seed}, run, hashed};
    it->second(ctx);
    return kExitOk;
}

// ---- debug dumps -------------------------------------------------------------

int cmd_dump_states(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    const dtdq::SystemConfig& cfg = require_markov_system(rc, "dump-states");
    const dtdq::OutputHeader header{"dump-states", hash_of(rc), rc.run.seed};
    const fs::path dir = output_dir(flags, rc);
    const int n1 = cfg.dph1.order(), n2 = cfg.dph2.order();
    if (flags.chain == "rmc") {
        emit(dir / "rmc_states.csv", dtdq::states_csv(header, dtdq::enumerate_rmc(n1, n2, cfg.k)));
    } else {
        emit(dir / "amc_states.csv", dtdq::states_csv(header, dtdq::enumerate_amc(n1, n2, cfg.k)));
    }
    return kExitOk;
}

int cmd_dump_matrix(const Flags& flags) {
    const dtdq::RunConfig rc = load(flags, true);
    const dtdq::SystemConfig& cfg = require_markov_system(rc, "dump-matrix");
    const dtdq::OutputHeader header{"dump-matrix", hash_of(rc), rc.run.seed};
    const fs::path dir = output_dir(flags, rc);
    dtdq::RmcModel rmc = dtdq::build_rmc(cfg);
    rmc.pi = dtdq::rmc_steady_state(rmc);
    if (flags.chain == "rmc") {
        emit(dir / "rmc_matrix.csv", dtdq::rmc_matrix_csv(header, rmc));
        dtdq::CsvWriter csv(header, {"index", "state", "pi"});
        for (int r = 0; r < rmc.size(); ++r)
            csv.row({std::to_string(r), "\"" + dtdq::to_string(rmc.space.state_of(r)) + "\"", dtdq::fmt(rmc.pi[r])});
        emit(dir / "rmc_pi.csv", csv.str());
    } else {
        dtdq::AmcModel amc = dtdq::build_amc(cfg);
        dtdq::initial_vector(rmc, amc, cfg);
        emit(dir / "amc_matrix.csv", dtdq::amc_matrix_csv(header, amc));
        dtdq::CsvWriter csv(header, {"index", "state", "sigma"});
        for (int r = 0; r < amc.size(); ++r)
            if (amc.sigma[r] != 0.0)
                csv.row({std::to_string(r), "\"" + dtdq::to_string(amc.space.state_of(r)) + "\"",
                         dtdq::fmt(amc.sigma[r])});
        emit(dir / "amc_sigma.csv", csv.str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dtdq: exact AoI analysis of a two-server status-update system with transmission freezing"};
    app.set_version_flag("--version", std::string(dtdq::kToolName) + " " + dtdq::kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    std::uint64_t seed = 0;
    long slots = 0;
    double tail_tol = 0.0;
    int k_max = 0;
    std::string format;
    app.add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", flags.out, "output directory (overrides DTDQ_OUT_DIR and output.dir)");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
    auto* slots_opt = app.add_option("--slots", slots, "measured simulation slots");
    auto* tail_opt = app.add_option("--tail-tol", tail_tol, "PMF truncation tolerance");
    auto* kmax_opt = app.add_option("--k-max", k_max, "largest k in optimizer scans (0 = default)");
    auto* format_opt =
        app.add_option("--format", format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Flags&);
    };
    const std::vector<Command> commands{
        {"analyze", "exact AoI/PAoI distributions and moments (k >= 1)", cmd_analyze},
        {"simulate", "slot-level Monte Carlo simulation (k >= 0)", cmd_simulate},
        {"optimize", "scan k for the AoI-optimal freezing parameter and its gain", cmd_optimize},
        {"sweep", "grid sweep of k* and freezing gain", cmd_sweep},
        {"reproduce", "data and gnuplot script for one of the figures fig3..fig8", cmd_reproduce},
        {"dump-states", "enumerate chain states as CSV", cmd_dump_states},
        {"dump-matrix", "transition triples of a chain as CSV", cmd_dump_matrix},
    };
    std::map<CLI::App*, int (*)(const Flags&)> handlers;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        handlers[sub] = c.run;
        if (std::string(c.name) == "reproduce")
            sub->add_option("figure", flags.figure, "fig3 | fig4 | fig5 | fig6 | fig7 | fig8")->required();
        if (std::string(c.name).rfind("dump-", 0) == 0)
            sub->add_option("--chain", flags.chain, "amc or rmc")->check(CLI::IsMember({"amc", "rmc"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (seed_opt->count()) flags.seed = seed;
    if (slots_opt->count()) flags.slots = slots;
    if (tail_opt->count()) flags.tail_tol = tail_tol;
    if (kmax_opt->count()) flags.k_max = k_max;
    if (format_opt->count()) flags.format = format;

    try {
        for (const auto& [sub, run] : handlers)
            if (sub->parsed()) return run(flags);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dtdq::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dtdq::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
