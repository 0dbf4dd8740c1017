#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gsfde/coefficients.hpp"
#include "gsfde/error.hpp"

using namespace gsfde;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

LinearParams contractive() {
    LinearParams p;
    p.a_g = 2.0;
    p.b_g = 0.5;
    p.a_h = 0.5;
    p.b_h = 0.1;
    p.b_gamma = 0.3;
    p.mu_g = p.mu_h = p.mu_gamma = DelayMeasure::point_mass(0.25);
    return p;
}

HistorySegment constant(double c, std::size_t dim = 1) {
    return from_initial_data(InitialData::constant(Vector(dim, c)), 1.0, dim, 1e-2, 3.0);
}

} // namespace

TEST_CASE("linear functional evaluation", "[coefficients]") {
    LinearFunctional f{1.3, -0.7, {0.25, -1.0}, DelayMeasure::exponential(4.0)};
    const Vector z = eval(f, constant(0.0, 2));
    CHECK(z[0] == 0.25);
    CHECK(z[1] == -1.0);

    LinearFunctional head{1.0, 0.0, {}, DelayMeasure()};
    const auto seg = from_initial_data(InitialData::exponential_decay({2.0}, 1.0), 1.0, 1, 1e-2, 3.0);
    CHECK(eval(head, seg)[0] == -2.0);

    LinearFunctional delayed{2.0, 0.5, {}, DelayMeasure::point_mass(1.0)};
    const double c = 1.7;
    const Vector v = eval(delayed, constant(c));
    CHECK_THAT(v[0], WithinAbs((-2.0 + 0.5) * c, 1e-14));
    CHECK_THAT(v[0], WithinAbs(-2.0 * c + 0.5 * integrate_segment(delayed.measure, constant(c))[0], 1e-14));

    LinearFunctional wrong{1.0, 0.0, {1.0, 2.0, 3.0}, DelayMeasure()};
    CHECK_THROWS_AS(eval(wrong, constant(1.0, 2)), Error);
}

TEST_CASE("certificates from the linear builder", "[coefficients]") {
    LinearParams p;
    p.a_g = 2.0;
    p.b_g = 1.0;
    p.b_gamma = 0.3;
    const auto set = build_linear_set(p);
    CHECK(set.certificate.lambda1 == 1.5);
    CHECK(set.certificate.lambda2 == 0.5);
    CHECK_THAT(set.certificate.lambda5, WithinAbs(0.09, 1e-15));

    LinearParams pure;
    pure.a_g = 0.8;
    const auto ps = build_linear_set(pure);
    CHECK(ps.certificate.lambda1 == 0.8);
    CHECK(ps.certificate.lambda2 == 0.0);

    LinearParams bad;
    bad.a_g = 0.4;
    bad.b_g = 1.0;
    try {
        build_linear_set(bad);
        FAIL("accepted a_g <= |b_g|/2");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UncertifiableCoefficients);
    }
    LinearParams head_in_gamma;
    head_in_gamma.a_gamma = 1.0;
    CHECK_THROWS_AS(build_linear_set(head_in_gamma), Error);
}

TEST_CASE("certificate soundness on random pairs", "[coefficients]") {
    std::vector<LinearParams> cases;
    cases.push_back(contractive());
    LinearParams mixed = contractive();
    mixed.dim = 2;
    mixed.mu_g = DelayMeasure({{0.5, 0.5}}, {{3.0, 0.5}});
    mixed.mu_h = DelayMeasure::exponential(2.5);
    mixed.b_g = -1.2;
    mixed.b_h = 0.6;
    mixed.c_g = {0.3, -0.2};
    cases.push_back(mixed);
    for (const auto& p : cases) {
        const auto set = build_linear_set(p);
        const auto rep = verify_a1(set, 1.0, 1e-2, 2000, 99);
        CHECK(rep.pass);
        CHECK(rep.max_c1 <= 1e-8);
        CHECK(rep.max_c2 <= 1e-8);
        CHECK(rep.max_c3 <= 1e-8);
    }
}

TEST_CASE("an inflated certificate is rejected", "[coefficients]") {
    auto set = build_linear_set(contractive());
    set.certificate.lambda1 *= 2.0;
    const auto rep = verify_a1(set, 1.0, 1e-2, 2000, 100);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_c1 > 0.0);
}

TEST_CASE("identical pairs give zero in every condition", "[coefficients]") {
    // psi = phi makes every difference vanish; trials draw distinct pairs, so
    // check the identity directly.
    const auto set = build_linear_set(contractive());
    std::mt19937_64 rng(3);
    const auto psi = random_segment(rng, 1, 1.0, 1e-2, 3.0, {}, {0.25});
    const Vector d = eval(set.drift, psi - psi);
    CHECK(d[0] == 0.0);
}

TEST_CASE("global Lipschitz and growth constants", "[coefficients]") {
    SECTION("zero coefficients") {
        LinearParams p;
        p.c_g = {0.5};
        const auto rep = verify_global_conditions(build_linear_set(p), 1.0, 1e-2, 200, 1);
        CHECK(rep.empirical_L == 0.0);
        CHECK(rep.empirical_K <= 0.25 + 1e-15);
    }
    SECTION("pure head term") {
        LinearParams p;
        p.a_g = 1.0;
        const auto rep = verify_global_conditions(build_linear_set(p), 1.0, 1e-2, 500, 2);
        CHECK(rep.analytic_L == 1.0);
        CHECK(rep.empirical_L <= 1.0 + 1e-12);
        CHECK(rep.empirical_L > 0.5);
    }
    SECTION("delay atom at one") {
        LinearParams p;
        p.b_gamma = 0.4;
        p.mu_gamma = DelayMeasure::point_mass(1.0);
        const auto rep = verify_global_conditions(build_linear_set(p), 1.0, 1e-2, 2000, 3);
        const double analytic = std::exp(2.0) * 0.16;
        CHECK_THAT(rep.analytic_L, WithinRel(analytic, 1e-12));
        CHECK(rep.empirical_L <= analytic * (1 + 1e-12));
        CHECK(rep.empirical_L >= 0.5 * analytic);
    }
}

TEST_CASE("truncation", "[coefficients]") {
    const auto set = build_linear_set(contractive());
    std::mt19937_64 rng(4);
    SECTION("identity on the ball") {
        for (int i = 0; i < 50; ++i) {
            const auto seg = random_segment(rng, 1, 1.0, 1e-2, 3.0, {}, {0.25}, 5.0);
            const double m = seg.norm() * 1.01;
            CHECK(eval_truncated(set.drift, seg, m) == eval(set.drift, seg));
            CHECK(eval_truncated(set.diffusion, seg, m) == eval(set.diffusion, seg));
        }
    }
    SECTION("rescaling outside the ball") {
        LinearFunctional f = set.drift;
        f.offset = {0.3};
        const double m = 0.8;
        const auto phi = constant(2.0 * m);
        CHECK_THAT(eval_truncated(f, phi, m)[0], WithinAbs(eval(f, scaled(phi, m / phi.norm()))[0], 1e-14));
        LinearFunctional g = set.drift;
        CHECK_THAT(eval_truncated(g, phi, m)[0], WithinAbs(eval(g, phi)[0] / 2.0, 1e-14));
    }
    SECTION("outputs stay bounded") {
        const double m = 1.0;
        double sup_ball = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto seg = random_segment(rng, 1, 1.0, 1e-2, 3.0, {}, {0.25}, 50.0);
            const auto inner = scaled(seg, std::min(1.0, m / seg.norm()));
            CHECK(inner.norm() <= m * (1 + 1e-12));
            const double v = std::abs(eval_truncated(set.drift, seg, m)[0]);
            // affine with offset 0: |g(phi)| <= (a + |b| mu^(q)) ||phi||
            sup_ball = std::max(sup_ball, v);
        }
        CHECK(sup_ball <= (2.0 + 0.5 * std::exp(0.25)) * m + 1e-12);
    }
    SECTION("truncated sets are Lipschitz on random pairs") {
        const double m = 2.0;
        const double L = 2.0 + 0.5 * std::exp(0.25);
        for (int i = 0; i < 200; ++i) {
            const auto x = random_segment(rng, 1, 1.0, 1e-2, 3.0, {}, {0.25}, 6.0);
            const auto y = random_segment(rng, 1, 1.0, 1e-2, 3.0, {}, {0.25}, 6.0);
            const double d = std::abs(eval_truncated(set.drift, x, m)[0] - eval_truncated(set.drift, y, m)[0]);
            // radial retraction onto a ball is 2-Lipschitz
            CHECK(d <= 2.0 * L * (x - y).norm() + 1e-12);
        }
    }
    CHECK_THROWS_AS(truncate(set, 0.0), Error);
}

TEST_CASE("streaming evaluator matches direct evaluation", "[coefficients]") {
    LinearParams p = contractive();
    p.mu_h = DelayMeasure({{0.5, 0.5}}, {{2.0, 0.5}});
    p.c_gamma = {0.2};
    const auto set = build_linear_set(p);
    auto seg = from_initial_data(InitialData::exponential_decay({1.0}, 0.5), 1.0, 1, 1e-2, 4.0);
    for (std::optional<double> level : {std::optional<double>{}, std::optional<double>{0.5}}) {
        auto s = seg;
        CoefficientEvaluator ev(set, s, level);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n01;
        Vector g(1), h(1), gm(1), prev(1);
        for (int k = 0; k < 300; ++k) {
            prev[0] = s.head()[0];
            s.advance(std::vector<double>{prev[0] + 0.05 * n01(rng)});
            ev.advance(s, prev);
            ev.evaluate(s, g, h, gm);
            const double m = level.value_or(1e300);
            CHECK_THAT(g[0], WithinAbs(eval_truncated(set.drift, s, m)[0], 1e-9));
            CHECK_THAT(h[0], WithinAbs(eval_truncated(set.qv_drift, s, m)[0], 1e-9));
            CHECK_THAT(gm[0], WithinAbs(eval_truncated(set.diffusion, s, m)[0], 1e-9));
        }
    }
}
