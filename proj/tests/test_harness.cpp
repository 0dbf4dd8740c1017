#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gsfde/harness.hpp"

using namespace gsfde;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;

namespace {

const std::filesystem::path kSource = GSFDE_SOURCE_DIR;

Config small(Config c = default_config()) {
    c.horizon = 2.0;
    auto& x = c.experiments;
    x.paths = 200;
    x.checkpoints = {0.5, 1.0, 2.0};
    x.lyapunov_horizon = 2.0;
    x.lyapunov_paths = 50;
    x.nonexplosion_horizon = 1.0;
    x.lemma_trajectories = 4;
    x.lemma_horizon = 0.5;
    x.truncation_seeds = 4;
    x.truncation_horizon = 0.5;
    x.markov_paths = 2000;
    return c;
}

Config with_params(const LinearParams& p) {
    Config c = small();
    c.params = p;
    return c;
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        return e.what();
    }
    FAIL("config accepted: " << text);
    return {};
}

} // namespace

TEST_CASE("bundled config file matches the built-in default", "[harness]") {
    const Config file = load_config(kSource / "configs" / "default.json");
    const Config def = default_config();
    ExperimentSession a(file), b(def);
    CHECK(a.bounds().text() == b.bounds().text());
    CHECK(file.experiments.seed == def.experiments.seed);
    CHECK(file.experiments.paths == def.experiments.paths);
    CHECK(file.experiments.checkpoints == def.experiments.checkpoints);
    CHECK(file.scenarios.size() == def.scenarios.size());
    CHECK(file.experiments.is_enabled("l2_estimate") == def.experiments.is_enabled("l2_estimate"));
    CHECK(a.feasible());
}

TEST_CASE("config diagnostics", "[harness]") {
    CHECK_THAT(config_error("{\n  \"space\": {\"dim\": 1,,}\n}"), ContainsSubstring("line 2"));
    CHECK_THAT(config_error(R"({"space": {"dims": 1}})"), ContainsSubstring("space.dims"));
    CHECK_THAT(config_error(R"({"space": {"dt": 0.01}})"), ContainsSubstring("space.dt"));
    CHECK_THAT(config_error(R"({"measures": {"m": {"atoms": [{"delay": 1, "weight": 0.5}]}}})"),
               ContainsSubstring("measures.m"));
    CHECK_THAT(config_error(R"({"coefficients": {"g": {"a": 1, "measure": "nope"}}})"),
               ContainsSubstring("coefficients.g.measure"));
    CHECK_THAT(config_error(R"({"experiments": {"checkpoints": [0.5, 11]}})"),
               ContainsSubstring("experiments.checkpoints"));
    CHECK_THAT(config_error(R"({"experiments": {"enabled": {"bogus": true}}})"),
               ContainsSubstring("experiments.enabled.bogus"));
}

TEST_CASE("missing fields keep their defaults", "[harness]") {
    const Config c = parse_config(R"({"experiments": {"seed": 5}})");
    CHECK(c.experiments.seed == 5);
    CHECK(c.q == default_config().q);
    CHECK(c.params.a_g == LinearParams{}.a_g);
}

TEST_CASE("an infeasible configuration names the failed condition", "[harness]") {
    const Config c = load_config(kSource / "tests" / "data" / "infeasible.json");
    ExperimentSession s(c);
    CHECK_FALSE(s.feasible());
    const auto v = s.violations();
    REQUIRE_FALSE(v.empty());
    CHECK_THAT(v.front(), ContainsSubstring("mean-square"));
    const Verdict r = s.run("ms_bound");
    CHECK(r.status == Verdict::Status::Fail);
    REQUIRE_FALSE(r.notes.empty());
    CHECK_THAT(r.notes.front(), StartsWith("refused"));
}

TEST_CASE("trivial mean-square cases pass", "[harness]") {
    LinearParams p;
    p.a_g = 1.0;
    Config c = with_params(p);
    c.zeta = InitialData::constant({0.0});
    ExperimentSession s(c);
    REQUIRE(s.feasible());
    const Verdict v = s.run_ms_bound();
    CHECK(v.passed());
    for (const auto& r : v.rows) {
        CHECK(r.empirical == 0.0);
    }
    CHECK(s.run_map_bound().passed());
}

TEST_CASE("equal initial data give exact zero differences", "[harness]") {
    Config c = small();
    c.xi = c.zeta;
    ExperimentSession s(c);
    for (const Verdict& v : {s.run_pair_convergence(), s.run_map_convergence()}) {
        for (const auto& r : v.rows) {
            if (r.label != "decreasing_after_t1") {
                CHECK(r.empirical == 0.0);
                CHECK(r.pass);
            }
        }
    }
}

TEST_CASE("growth envelope with zero coefficients", "[harness]") {
    Config c = with_params(LinearParams{});
    c.zeta = InitialData::constant({0.8});
    c.experiments.enabled["l2_estimate"] = true;
    ExperimentSession s(c);
    const Verdict v = s.run_l2_estimate();
    CHECK(v.passed());
    for (const auto& r : v.rows) {
        CHECK_THAT(r.empirical, Catch::Matchers::WithinAbs(0.64, 1e-12));
    }
}

TEST_CASE("noise-free decay never exits above the initial value", "[harness]") {
    LinearParams p;
    p.a_g = 1.0;
    Config c = with_params(p);
    c.band = {0.0, 0.0};
    c.scenarios = constant_grid(c.band, 1);
    c.experiments.nonexplosion_levels = {1.5, 3.0};
    ExperimentSession s(c);
    const Verdict v = s.run_nonexplosion();
    CHECK(v.passed());
    for (const auto& r : v.rows) {
        if (r.label.find("nonincreasing") == std::string::npos) {
            CHECK(r.empirical == 0.0);
        }
    }
}

TEST_CASE("small run of every experiment", "[harness]") {
    ExperimentSession s(small());
    const auto verdicts = s.run_all();
    REQUIRE(verdicts.size() == experiment_names().size());
    std::set<std::string> names;
    for (const auto& v : verdicts) {
        names.insert(v.name);
        if (v.name == "l2_estimate") {
            CHECK(v.status == Verdict::Status::Skipped);
        } else {
            INFO(v.name);
            CHECK(v.passed());
            CHECK_FALSE(v.rows.empty());
        }
    }
    CHECK(names.size() == experiment_names().size());
    CHECK_THAT(verdict_table(verdicts), ContainsSubstring("ms_bound"));
}

TEST_CASE("outputs are reproducible byte for byte", "[harness]") {
    const auto dir = std::filesystem::temp_directory_path() / "gsfde_unit_outputs";
    std::filesystem::remove_all(dir);
    std::vector<std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
        ExperimentSession s(small());
        const std::vector<Verdict> v = {s.run_ms_bound(), s.run_pair_convergence()};
        const auto out = dir / std::to_string(rep);
        write_outputs(out, s, v);
        s.write_trajectories(out, 2);
        std::vector<std::string> files;
        for (const char* f : {"summary.txt", "bounds.csv", "ms_bound.csv", "pair_convergence.csv",
                              "trajectory_0.csv", "trajectory_1.csv"}) {
            REQUIRE(std::filesystem::exists(out / f));
            files.push_back(read(out / f));
        }
        if (rep == 0) {
            first = files;
            CHECK_THAT(files[2], StartsWith("t,empirical,SE,bound,pass,label\n"));
        } else {
            CHECK(files == first);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("seed changes numbers but not verdicts", "[slow][harness]") {
    std::vector<double> ms_at_1;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        Config c = default_config();
        c.experiments.seed = seed;
        c.experiments.paths = 1000;
        c.experiments.lyapunov_paths = 200;
        c.experiments.lemma_trajectories = 20;
        c.experiments.truncation_seeds = 20;
        c.experiments.markov_paths = 5000;
        ExperimentSession s(c);
        for (const auto& v : s.run_all()) {
            INFO("seed " << seed << " experiment " << v.name);
            if (v.name == "l2_estimate") {
                CHECK(v.status == Verdict::Status::Skipped);
            } else {
                CHECK(v.passed());
            }
            if (v.name == "ms_bound") {
                ms_at_1.push_back(v.rows.at(1).empirical);
            }
        }
    }
    REQUIRE(ms_at_1.size() == 5);
    CHECK(std::set<double>(ms_at_1.begin(), ms_at_1.end()).size() == 5);
}
