#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "gsfde/integrator.hpp"

using namespace gsfde;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::StartsWith;

namespace {

SimConfig base(double horizon = 1.0, double dt = 1e-3) {
    SimConfig c;
    c.horizon = horizon;
    c.dt = dt;
    c.buffer_horizon = 3.0;
    return c;
}

CoefficientSet contractive() {
    LinearParams p;
    p.a_g = 2.0;
    p.b_g = 0.5;
    p.a_h = 0.5;
    p.b_h = 0.1;
    p.b_gamma = 0.3;
    p.mu_g = p.mu_h = p.mu_gamma = DelayMeasure::point_mass(0.25);
    return build_linear_set(p);
}

CoefficientSet decay(double rate) {
    LinearParams p;
    p.a_g = rate;
    return build_linear_set(p);
}

const Scenario frozen("frozen", {0.0, 0.0}, Control::constant(0.0));
const Scenario noisy("noisy", {0.3, 0.6}, Control::switching(0.3, 0.6, 0.2));

double deterministic_error(double dt) {
    SimConfig c = base(1.0, dt);
    c.coefficients = decay(1.0);
    const auto r = simulate(c, frozen, 1);
    return std::abs(r.states.back() - std::exp(-1.0));
}

} // namespace

TEST_CASE("single Euler step", "[integrator]") {
    const auto seg = from_initial_data(InitialData::constant({1.0}), 1.0, 1, 1e-2, 1.0);
    CoefficientSet zero;
    CHECK(step(seg, zero, 0.5, 0.3, 0.01)[0] == 1.0);
    CHECK_THAT(step(seg, decay(1.0), 0.0, 0.0, 0.01)[0], WithinAbs(0.99, 1e-15));

    LinearParams p;
    p.c_g = {1e308};
    const auto huge = build_linear_set(p);
    try {
        step(seg, huge, 0.0, 0.0, 10.0, 17);
        FAIL("no blowup reported");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NumericalBlowup);
    }
}

TEST_CASE("deterministic decay matches the closed form", "[integrator]") {
    const double e1 = deterministic_error(1e-3);
    const double e2 = deterministic_error(5e-4);
    CHECK(e1 < 2e-3);
    CHECK(std::abs(e1 / e2 - 2.0) <= 0.4);
}

TEST_CASE("zero coefficients keep the initial value", "[integrator]") {
    SimConfig c = base();
    c.initial = InitialData::constant({0.7});
    c.exit_level = 1.0;
    c.record_stride = 100;
    const auto r = simulate(c, noisy, 3);
    CHECK(r.size() == 11);
    for (std::size_t k = 0; k < r.size(); ++k) {
        CHECK(r.states[k] == 0.7);
    }
    CHECK_FALSE(r.exit_time);
}

TEST_CASE("exit below the initial value triggers at time zero", "[integrator]") {
    SimConfig c = base();
    c.initial = InitialData::constant({1.0});
    c.exit_level = 0.5;
    const auto r = simulate(c, noisy, 3);
    REQUIRE(r.exit_time);
    CHECK(*r.exit_time == 0.0);
}

TEST_CASE("configuration guards", "[integrator]") {
    SimConfig c = base();
    c.dt = 2e-3;
    CHECK_THROWS_AS(validate(c), Error);
    c = base();
    c.coefficients = contractive();
    c.coefficients.drift.measure = DelayMeasure::point_mass(0.2505);
    CHECK_THROWS_AS(validate(c), Error);
    c = base(1.5);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("simulation is a function of the seed", "[integrator]") {
    SimConfig c = base();
    c.coefficients = contractive();
    const auto a = simulate(c, noisy, 7), b = simulate(c, noisy, 7), d = simulate(c, noisy, 8);
    CHECK(a.states == b.states);
    CHECK(a.segment_norms == b.segment_norms);
    CHECK(a.states != d.states);
    CHECK(a.states.front() == 1.0);
}

TEST_CASE("coupled pairs", "[integrator]") {
    SimConfig c = base();
    c.coefficients = contractive();
    SECTION("equal initial data give identical paths") {
        const auto pr = simulate_pair(c, InitialData::constant({1.0}), InitialData::constant({1.0}), noisy, 4);
        CHECK(pr.first.states == pr.second.states);
        for (double d : pr.difference_norms) {
            CHECK(d == 0.0);
        }
    }
    SECTION("zero coefficients keep the initial gap") {
        SimConfig z = base();
        const auto pr = simulate_pair(z, InitialData::constant({1.0}), InitialData::constant({0.25}), noisy, 4);
        for (std::size_t k = 0; k < pr.first.size(); ++k) {
            CHECK(pr.first.states[k] - pr.second.states[k] == 0.75);
        }
    }
    SECTION("contractive set shrinks the gap") {
        c.horizon = 5.0;
        const auto pr = simulate_pair(c, InitialData::constant({1.0}), InitialData::constant({0.0}), noisy, 4);
        const double last = std::abs(pr.first.states.back() - pr.second.states.back());
        CHECK(last < 0.05);
    }
}

TEST_CASE("truncated runs", "[integrator]") {
    SimConfig c = base(2.0);
    c.coefficients = contractive();
    SECTION("never leaving the ball gives identical paths") {
        const auto r = simulate_truncated(c, 100.0, noisy, 5);
        CHECK_FALSE(r.exit_time);
        CHECK(r.untruncated.states == r.truncated.states);
        CHECK(r.max_deviation == 0.0);
    }
    SECTION("a level under the initial norm changes the first step") {
        const auto r = simulate_truncated(c, 0.5, noisy, 5);
        REQUIRE(r.exit_time);
        CHECK(*r.exit_time == 0.0);
        CHECK(r.untruncated.states[1] != r.truncated.states[1]);
    }
}

TEST_CASE("exit times are monotone in the level", "[integrator]") {
    LinearParams p;
    p.b_gamma = 1.5;
    p.c_gamma = {1.0};
    SimConfig c = base(2.0);
    c.coefficients = build_linear_set(p);
    c.initial = InitialData::constant({0.0});
    const Scenario sc("s", {0.5, 1.0}, Control::random());
    std::size_t exits = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        double prev = 0.0;
        for (double m : {0.5, 1.0, 2.0, 4.0}) {
            c.exit_level = m;
            const auto r = simulate(c, sc, seed);
            const double t = r.exit_time.value_or(1e9);
            CHECK(t >= prev);
            prev = t;
            exits += r.exit_time ? 1 : 0;
        }
    }
    CHECK(exits > 0);
}

TEST_CASE("pathwise lemmas on simulated trajectories", "[integrator]") {
    SimConfig c = base(2.0);
    c.coefficients = contractive();
    c.initial = InitialData::exponential_decay({1.5}, 0.5);
    const auto zeta = initial_segment(c, c.initial);
    const DelayMeasure mixed({{0.25, 0.5}}, {{3.0, 0.5}});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = simulate(c, noisy, seed);
        for (double pw : {1.0, 2.0, 4.0}) {
            const auto l3 = check_lemma_lf3(r, zeta.norm(), c.q, pw, 0.5 * pw * c.q);
            CHECK(l3.holds);
            CHECK(l3.min_slack >= -1e-6);
        }
        for (auto v : {Lf2Variant::Plain, Lf2Variant::Exponential}) {
            const auto l2 = check_lemma_lf2(r, zeta, mixed, 2.0, v == Lf2Variant::Plain ? 0.0 : 1.0, v);
            CHECK(l2.holds);
            CHECK(l2.min_slack >= -1e-6);
        }
    }
}

TEST_CASE("trajectory CSV layout", "[integrator]") {
    SimConfig c = base();
    c.record_stride = 500;
    const auto r = simulate(c, noisy, 2);
    std::ostringstream os;
    r.write_csv(os);
    CHECK_THAT(os.str(), StartsWith("t,x0,segment_norm,scenario_id,seed\n"));
    std::ostringstream bin;
    r.write_binary(bin);
    CHECK(!bin.str().empty());
}
