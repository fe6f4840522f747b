#include <string>

#include <gtest/gtest.h>

#include <dtdq/config.hpp>

namespace dtdq {
namespace {

json parse(const std::string& text) { return parse_config_text(text, "test"); }

// Runs the parser and returns the error message, or "" when it succeeds.
std::string error_of(const std::string& text) {
    try {
        parse_run_config(parse(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const std::string kSystem = R"("system": {"server1": {"kind": "geometric", "p": 0.5},
                                         "server2": {"kind": "geometric", "p": 0.5}, "k": 2})";

TEST(ParseDistribution, EveryKindBuildsTheExpectedLaw) {
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "geometric", "p": 0.25})"), "d"), dph_geometric(0.25));
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "geometric", "mean": 4})"), "d"), dph_geometric(0.25));
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "uniform", "a": 2, "b": 5})"), "d"), dph_uniform(2, 5));
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "deterministic", "value": 7})"), "d"), dph_uniform(7, 7));
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "triangular", "mean": 5, "variance": 1})"), "d"),
              dph_triangular(5, 1));
    EXPECT_EQ(parse_distribution(parse(R"({"kind": "pmf", "pmf": {"1": 0.25, "3": 0.75}})"), "d"),
              dph_from_pmf({{1, 0.25}, {3, 0.75}}));
    const DphDistribution d =
        parse_distribution(parse(R"({"kind": "dph", "alpha": [1, 0], "B": [[0.5, 0.5], [0, 0.25]]})"), "d");
    EXPECT_EQ(d.order(), 2);
    EXPECT_NEAR(d.pmf(1), 0.0, 1e-15);
    EXPECT_NEAR(d.pmf(2), 0.5 * 0.75, 1e-15);
}

TEST(ParseDistribution, ErrorsNameTheOffendingField) {
    auto msg = [](const std::string& text) -> std::string {
        try {
            parse_distribution(parse(text), "system.server1");
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    EXPECT_NE(msg(R"({"kind": "gamma"})").find("system.server1.kind"), std::string::npos);
    EXPECT_NE(msg(R"({"kind": "geometric", "p": 0.5, "mean": 2})").find("exactly one"), std::string::npos);
    EXPECT_NE(msg(R"({"kind": "geometric", "p": 0.5, "extra": 1})").find("system.server1.extra"),
              std::string::npos);
    EXPECT_NE(msg(R"({"kind": "uniform", "a": 3, "b": 2})").find("system.server1"), std::string::npos);
    EXPECT_NE(msg(R"({"kind": "pmf", "pmf": {"x": 1}})").find("system.server1.pmf.x"), std::string::npos);
    EXPECT_NE(msg(R"({"kind": "dph", "alpha": [1], "B": [[0.5], [0.5]]})").find("system.server1.B"),
              std::string::npos);
    EXPECT_NE(msg(R"({"kind": "triangular", "mean": 2, "variance": 5})").find("nearest attainable"),
              std::string::npos);
    EXPECT_NE(msg(R"({"kind": "uniform", "a": 1.5, "b": 2})"), "");
    EXPECT_NE(msg(R"({"kind": "geometric", "p": "half"})"), "");
}

TEST(ParseRunConfig, FullDocument) {
    const RunConfig rc = parse_run_config(parse(R"({
        "system": {"server1": {"kind": "uniform", "a": 1, "b": 3},
                   "server2": {"kind": "geometric", "mean": 2}, "k": 3, "priority": "S2"},
        "run": {"seed": 42, "slots": 20000, "tail_tol": 1e-8, "k_max": 9, "baseline_slots": 0},
        "output": {"dir": "out", "format": "json"}})"));
    ASSERT_TRUE(rc.system);
    EXPECT_TRUE(rc.has_k);
    EXPECT_EQ(rc.system->k, 3);
    EXPECT_EQ(rc.system->priority, PriorityPolicy::S2);
    EXPECT_EQ(rc.system->dph1, dph_uniform(1, 3));
    EXPECT_EQ(rc.run.seed, 42u);
    EXPECT_EQ(rc.run.slots, 20000);
    EXPECT_EQ(rc.run.tail_tol, 1e-8);
    EXPECT_EQ(rc.run.k_max, 9);
    EXPECT_EQ(rc.run.baseline_slots, 0);
    EXPECT_EQ(rc.output.dir, "out");
    EXPECT_EQ(rc.output.format, "json");
    EXPECT_FALSE(rc.sweep);
}

TEST(ParseRunConfig, DefaultsApplyToAbsentSections) {
    const RunConfig rc = parse_run_config(json::object());
    EXPECT_FALSE(rc.system);
    EXPECT_EQ(rc.run.seed, 1u);
    EXPECT_EQ(rc.run.tail_tol, kDefaultTailTol);
    EXPECT_EQ(rc.run.baseline_slots, kMinBaselineSlots);
    EXPECT_EQ(rc.output.format, "csv");
    const RunConfig no_k = parse_run_config(parse(R"({"system": {"server1": {"kind": "deterministic", "value": 2},
                                                                  "server2": {"kind": "deterministic", "value": 2}}})"));
    EXPECT_FALSE(no_k.has_k);
    EXPECT_EQ(no_k.system->priority, PriorityPolicy::S1);
}

TEST(ParseRunConfig, UnknownKeysAreErrorsAtEveryLevel) {
    EXPECT_NE(error_of(R"({"sytem": {}})").find("sytem: unknown key"), std::string::npos);
    EXPECT_NE(error_of("{" + kSystem + R"(, "run": {"seeds": 1}})").find("run.seeds"), std::string::npos);
    EXPECT_NE(error_of(R"({"system": {"server1": {"kind": "geometric", "p": 0.5},
                                       "server2": {"kind": "geometric", "p": 0.5}, "K": 2}})")
                  .find("system.K"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"output": {"fmt": "csv"}})").find("output.fmt"), std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "geometric", "means": [2], "step": 1}})")
                  .find("sweep.step"),
              std::string::npos);
}

TEST(ParseRunConfig, RangeChecks) {
    EXPECT_NE(error_of(R"({"run": {"slots": 9999}})").find("run.slots"), std::string::npos);
    EXPECT_EQ(error_of(R"({"run": {"slots": 10000}})"), "");
    EXPECT_NE(error_of(R"({"run": {"baseline_slots": 999999}})").find("run.baseline_slots"), std::string::npos);
    EXPECT_EQ(error_of(R"({"run": {"baseline_slots": 1000000}})"), "");
    EXPECT_NE(error_of(R"({"run": {"tail_tol": 0}})").find("run.tail_tol"), std::string::npos);
    EXPECT_NE(error_of(R"({"run": {"tail_tol": 1}})").find("run.tail_tol"), std::string::npos);
    EXPECT_NE(error_of(R"({"run": {"k_max": -1}})").find("run.k_max"), std::string::npos);
    EXPECT_NE(error_of(R"({"run": {"seed": -3}})").find("run.seed"), std::string::npos);
    EXPECT_NE(error_of(R"({"run": {"slots": 20000.5}})").find("run.slots"), std::string::npos);
    EXPECT_NE(error_of(R"({"output": {"format": "xml"}})").find("output.format"), std::string::npos);
    EXPECT_NE(error_of(R"({"system": {"server1": {"kind": "geometric", "p": 0.5},
                                       "server2": {"kind": "geometric", "p": 0.5}, "k": -1}})")
                  .find("system.k"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"system": {"server1": {"kind": "geometric", "p": 0.5},
                                       "server2": {"kind": "geometric", "p": 0.5}, "priority": "S3"}})")
                  .find("system.priority"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"system": {"server1": {"kind": "geometric", "p": 0.5}}})").find("system.server2"),
              std::string::npos);
}

TEST(ParseRunConfig, ZeroWaitIsAValidSystem) {
    const RunConfig rc = parse_run_config(parse(R"({"system": {"server1": {"kind": "deterministic", "value": 3},
                                                               "server2": {"kind": "deterministic", "value": 3},
                                                               "k": 0}})"));
    EXPECT_TRUE(rc.has_k);
    EXPECT_EQ(rc.system->k, 0);
}

TEST(ParseSweep, GridsAcceptArraysAndRanges) {
    const RunConfig a =
        parse_run_config(parse(R"({"sweep": {"kind": "mean", "family": "geometric", "means": {"from": 1, "to": 2, "step": 0.25}}})"));
    ASSERT_TRUE(a.sweep);
    EXPECT_EQ(a.sweep->grid, (std::vector<double>{1, 1.25, 1.5, 1.75, 2}));
    EXPECT_EQ(a.sweep->priority, PriorityPolicy::S1);

    const RunConfig b = parse_run_config(parse(
        R"({"sweep": {"kind": "nonidentical", "family": "uniform", "means1": [2, 3], "means2": [4], "priority": "S2"}})"));
    EXPECT_EQ(b.sweep->grid, (std::vector<double>{2, 3}));
    EXPECT_EQ(b.sweep->grid2, (std::vector<double>{4}));
    EXPECT_EQ(b.sweep->family, ServiceFamily::Uniform);
    EXPECT_EQ(b.sweep->priority, PriorityPolicy::S2);

    const RunConfig c = parse_run_config(
        parse(R"({"sweep": {"kind": "variance", "family": "triangular", "mean": 13, "variances": [0, 1, 2]}})"));
    EXPECT_EQ(c.sweep->mean, 13.0);
    EXPECT_EQ(c.sweep->grid.size(), 3u);
}

TEST(ParseSweep, RejectsBadGridsAndUnbuildablePoints) {
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "geometric", "means": []}})").find("sweep.means"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "geometric", "means": {"from": 3, "to": 1, "step": 1}}})")
                  .find("sweep.means"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "geometric", "means": [2, "x"]}})")
                  .find("sweep.means[1]"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "uniform", "means": [2, 2.3]}})").find("sweep.means"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "mean", "family": "gamma", "means": [2]}})").find("sweep.family"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"sweep": {"kind": "median", "family": "geometric"}})").find("sweep.kind"),
              std::string::npos);
}

TEST(ParseConfigText, SyntaxErrorsReportLineAndColumn) {
    try {
        parse_config_text("{\n  \"run\": {\"seed\": 1,}\n}", "bad.json");
        FAIL() << "expected a parse error";
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("bad.json"), std::string::npos) << what;
        EXPECT_NE(what.find("line 2"), std::string::npos) << what;
        EXPECT_NE(what.find("column"), std::string::npos) << what;
    }
    EXPECT_THROW(read_config_file("/nonexistent/dtdq.json"), ConfigError);
}

TEST(ConfigHash, StableAndIndependentOfKeyOrder) {
    const json a = parse(R"({"run": {"seed": 1, "slots": 20000}, "output": {"format": "csv"}})");
    const json b = parse(R"({"output": {"format": "csv"}, "run": {"slots": 20000, "seed": 1}})");
    const json c = parse(R"({"run": {"seed": 2, "slots": 20000}, "output": {"format": "csv"}})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(c));
    EXPECT_EQ(config_hash(a).rfind("fnv1a64:", 0), 0u);
    EXPECT_EQ(config_hash(a).size(), 8u + 16u);
    // FNV-1a of the empty object "{}".
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : std::string("{}")) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char expect[32];
    std::snprintf(expect, sizeof expect, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    EXPECT_EQ(config_hash(json::object()), expect);
}

}  // namespace
}  // namespace dtdq
