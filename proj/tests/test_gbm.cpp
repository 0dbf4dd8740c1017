#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gsfde/error.hpp"
#include "gsfde/gbm.hpp"

using namespace gsfde;
using Catch::Matchers::WithinAbs;

namespace {

ScenarioSet constants(VolatilityBand band, std::initializer_list<double> levels) {
    ScenarioSet s;
    for (double v : levels) {
        s.emplace_back("const_" + std::to_string(v), band, Control::constant(v));
    }
    return s;
}

ScenarioSet mixed_controls(VolatilityBand band) {
    return {Scenario("lo", band, Control::constant(band.sigma_lo)),
            Scenario("hi", band, Control::constant(band.sigma_hi)),
            Scenario("switch", band, Control::switching(band.sigma_lo, band.sigma_hi, 0.1)),
            Scenario("feedback", band, Control::feedback(0.3, band.sigma_hi, band.sigma_lo)),
            Scenario("random", band, Control::random())};
}

double terminal(const GPath& p) { return p.terminal(); }
double terminal_sq(const GPath& p) { return p.terminal() * p.terminal(); }

} // namespace

TEST_CASE("degenerate bands", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-3);
    SECTION("unit band gives the classical clock") {
        const auto path = sample_path(Scenario("c", {1.0, 1.0}, Control::constant(1.0)), mesh, 3);
        for (std::size_t n = 0; n <= mesh.steps; ++n) {
            CHECK_THAT(path.qv[n], WithinAbs(static_cast<double>(n) * 1e-3, 1e-12));
        }
    }
    SECTION("zero band freezes the path") {
        const auto path = sample_path(Scenario("z", {0.0, 0.0}, Control::constant(0.0)), mesh, 3);
        for (std::size_t n = 0; n <= mesh.steps; ++n) {
            CHECK(path.B[n] == 0.0);
            CHECK(path.qv[n] == 0.0);
        }
    }
}

TEST_CASE("mesh and band validation", "[gbm]") {
    CHECK_THROWS_AS(Mesh::from_horizon(1.0, 0.3), Error);
    CHECK_THROWS_AS(VolatilityBand(0.6, 0.3), Error);
    CHECK(VolatilityBand(0.3, 0.6).clamp(0.9) == 0.6);
}

TEST_CASE("constant volatility gives the right variance", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-2);
    const ScenarioSet s = constants({0.5, 0.5}, {0.5});
    const auto v = sample_functional(terminal, s, mesh, 100000, 42)[0];
    const ScenarioStat m = sample_stat(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        sq[i] = (v[i] - m.mean) * (v[i] - m.mean);
    }
    const ScenarioStat var = sample_stat(sq);
    CHECK(std::abs(var.mean - 0.25) <= 3.0 * var.standard_error);
}

TEST_CASE("sublinear expectation over a constant grid", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-2);
    const VolatilityBand band(0.5, 1.0);
    const ScenarioSet s = constants(band, {0.5, 0.75, 1.0});

    const auto k = sublinear_expectation([](const GPath&) { return 3.5; }, s, mesh, 10, 1);
    CHECK(k.estimate == 3.5);
    CHECK(k.standard_error == 0.0);

    const auto up = sublinear_expectation(terminal_sq, s, mesh, 20000, 2);
    CHECK(up.argmax == 2);
    CHECK(std::abs(up.estimate - 1.0) <= 3.0 * up.standard_error);

    const auto down = sublinear_expectation([](const GPath& p) { return -terminal_sq(p); }, s, mesh, 20000, 2);
    CHECK(down.argmax == 0);
    CHECK(std::abs(down.estimate + 0.25) <= 3.0 * down.standard_error);

    try {
        sublinear_expectation(terminal, s, mesh, 1, 2);
        FAIL("accepted a single path");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientSample);
    }
}

TEST_CASE("capacity of simple events", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-2);
    const ScenarioSet unit = constants({1.0, 1.0}, {1.0});
    CHECK(capacity_estimate([](const GPath&) { return false; }, unit, mesh, 100, 1).estimate == 0.0);
    CHECK(capacity_estimate([](const GPath&) { return true; }, unit, mesh, 100, 1).estimate == 1.0);
    const auto tail = capacity_estimate([](const GPath& p) { return std::abs(p.terminal()) > 2.0; }, unit, mesh,
                                        100000, 9);
    CHECK(std::abs(tail.estimate - 0.0455) <= 3.0 * tail.standard_error);
}

TEST_CASE("Markov inequality checks", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-2);
    const ScenarioSet unit = constants({1.0, 1.0}, {1.0});
    const VolatilityBand band(0.5, 1.0);

    CHECK(check_g_markov([](const GPath&) { return 0.0; }, 2.0, 1.0, unit, mesh, 100, 1).holds_printed);

    const auto a = check_g_markov(terminal, 2.0, 2.0, unit, mesh, 20000, 3);
    CHECK(a.holds_printed);
    CHECK(std::abs(a.capacity - 0.0455) <= 3.0 * a.capacity_se + 1e-3);
    CHECK_THAT(a.bound_printed, WithinAbs(0.5, 0.05));

    const auto b = check_g_markov(terminal, 2.0, 0.1, constants(band, {0.5, 0.75, 1.0}), mesh, 20000, 4);
    CHECK(b.holds_printed);
    CHECK(b.slack_printed > 5.0);

    // X = 0.6 surely: capacity 1, E|X|^2 / delta = 0.72, E|X|^2 / delta^2 = 1.44
    const auto c = check_g_markov([](const GPath&) { return 0.6; }, 2.0, 0.5, unit, mesh, 100, 5);
    CHECK(c.capacity == 1.0);
    CHECK_FALSE(c.holds_printed);
    CHECK(c.holds_power);
}

TEST_CASE("quadratic variation stays in the band on every step", "[gbm]") {
    const VolatilityBand band(0.3, 0.6);
    const Mesh mesh = Mesh::from_horizon(2.0, 1e-3);
    std::size_t checked = 0;
    for (const auto& sc : mixed_controls(band)) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto p = sample_path(sc, mesh, derive_seed(77, 0, seed));
            for (std::size_t n = 0; n < mesh.steps; ++n) {
                const bool ok = band.sigma_lo * band.sigma_lo * mesh.dt <= p.dqv[n] &&
                                p.dqv[n] <= band.sigma_hi * band.sigma_hi * mesh.dt;
                if (!ok) {
                    FAIL("step " << n << " of " << sc.name() << " leaves the band");
                }
                ++checked;
            }
        }
    }
    CHECK(checked == 5 * 20 * 2000);
}

TEST_CASE("realized quadratic variation converges to the clock", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-4);
    const ScenarioSet s = constants({0.3, 0.6}, {0.45});
    const auto rel = sample_functional(
        [](const GPath& p) {
            double rq = 0.0;
            for (double d : p.dB) {
                rq += d * d;
            }
            const double e = (rq - p.qv.back()) / p.qv.back();
            return e * e;
        },
        s, mesh, 1000, 8)[0];
    CHECK(std::sqrt(sample_stat(rel).mean) < 0.05);
}

TEST_CASE("paths are reproducible from the seed", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-3);
    const Scenario sc("r", {0.3, 0.6}, Control::random());
    const auto a = sample_path(sc, mesh, 123), b = sample_path(sc, mesh, 123), c = sample_path(sc, mesh, 124);
    CHECK(a.B == b.B);
    CHECK(a.sigma == b.sigma);
    CHECK(a.B != c.B);
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2, 3, 0) != derive_seed(1, 2, 3, 1));
}

TEST_CASE("estimator axioms on a shared sample", "[gbm]") {
    const Mesh mesh = Mesh::from_horizon(1.0, 1e-2);
    const ScenarioSet s = constant_grid({0.5, 1.0}, 5);
    const auto x = sample_functional(terminal_sq, s, mesh, 5000, 10);
    const auto y = sample_functional([](const GPath& p) { return -p.qv.back() + std::abs(p.terminal()); }, s,
                                     mesh, 5000, 10);
    auto combine = [](const auto& u, const auto& v, double a, double b) {
        auto out = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            for (std::size_t k = 0; k < u[i].size(); ++k) {
                out[i][k] = a * u[i][k] + b * v[i][k];
            }
        }
        return out;
    };
    const auto ex = estimate_from_samples(x), ey = estimate_from_samples(y);
    const auto exy = estimate_from_samples(combine(x, y, 1.0, 1.0));
    // subadditivity holds exactly for the max of means
    CHECK(exy.estimate <= ex.estimate + ey.estimate + 1e-12);
    CHECK_THAT(estimate_from_samples(combine(x, y, 2.5, 0.0)).estimate, WithinAbs(2.5 * ex.estimate, 1e-12));
    // monotonicity: x >= x - |y|
    auto smaller = combine(x, y, 1.0, 0.0);
    for (auto& row : smaller) {
        for (double& v : row) {
            v -= 0.1;
        }
    }
    CHECK(estimate_from_samples(smaller).estimate <= ex.estimate);
}
