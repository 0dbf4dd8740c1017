// Full-size acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsfde/harness.hpp"
#include "gsfde/parallel.hpp"

using namespace gsfde;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

Outcome from_verdicts(const std::vector<const Verdict*>& vs) {
    Outcome o{true, ""};
    for (const Verdict* v : vs) {
        o.pass = o.pass && v->passed();
        if (!o.detail.empty()) {
            o.detail += "; ";
        }
        const double w = v->worst_ratio();
        o.detail += v->name + " " + v->status_text() + ", " + std::to_string(v->rows.size()) + " rows";
        o.detail += std::isnan(w) ? ", no positive bound" : ", worst empirical/bound " + num(w + 0.0);
        for (const auto& r : v->rows) {
            if (!r.pass) {
                o.detail += " [violated: t=" + num(r.t) + " " + r.label + "]";
            }
        }
        for (const auto& n : v->notes) {
            if (n.rfind("refused", 0) == 0) {
                o.detail += " [" + n + "]";
            }
        }
    }
    return o;
}

LinearParams mixed_params() {
    LinearParams p;
    p.dim = 2;
    p.a_g = 1.5;
    p.b_g = -1.0;
    p.a_h = 0.4;
    p.b_h = 0.3;
    p.b_gamma = 0.5;
    p.mu_g = DelayMeasure({{0.5, 0.5}}, {{3.0, 0.5}});
    p.mu_h = DelayMeasure::exponential(2.5);
    p.mu_gamma = DelayMeasure({{0.25, 0.4}, {1.0, 0.6}}, {});
    p.c_g = {0.2, -0.1};
    return p;
}

Outcome a1_soundness(const Config& def) {
    std::vector<std::pair<std::string, LinearParams>> sets = {{"default", def.params}, {"mixed", mixed_params()}};
    LinearParams decay;
    decay.a_g = 1.0;
    sets.emplace_back("decay", decay);
    LinearParams classical;
    classical.a_g = 1.0;
    classical.c_gamma = {0.5};
    sets.emplace_back("classical", classical);

    Outcome o{true, ""};
    for (const auto& [name, p] : sets) {
        const auto set = build_linear_set(p);
        const auto rep = verify_a1(set, def.q, 1e-2, 10000, 2024);
        const double worst = std::max({rep.max_c1, rep.max_c2, rep.max_c3});
        o.pass = o.pass && rep.pass && worst <= 1e-8;
        o.detail += name + " max violation " + num(worst) + "; ";
    }
    auto broken = build_linear_set(def.params);
    broken.certificate.lambda1 *= 2.0;
    const auto rep = verify_a1(broken, def.q, 1e-2, 10000, 2025);
    o.pass = o.pass && !rep.pass && rep.max_c1 > 0.0;
    o.detail += "inflated lambda1 rejected with violation " + num(rep.max_c1);
    return o;
}

double decay_error(double dt) {
    SimConfig c;
    c.horizon = 1.0;
    c.dt = dt;
    LinearParams p;
    p.a_g = 1.0;
    c.coefficients = build_linear_set(p);
    c.initial = InitialData::constant({1.0});
    const auto r = simulate(c, Scenario("frozen", {0.0, 0.0}, Control::constant(0.0)), 1);
    return std::abs(r.states.back() - std::exp(-1.0));
}

Outcome deterministic_oracle() {
    const double e1 = decay_error(1e-3), e2 = decay_error(5e-4);
    const double ratio = e1 / e2;
    return {e1 < 2e-3 && std::abs(ratio - 2.0) <= 0.4,
            "|X(1) - exp(-1)| = " + num(e1) + " at dt=1e-3, error ratio on halving " + num(ratio)};
}

Outcome classical_limit() {
    const double a = 1.0, g0 = 0.5, x0 = 1.0, sigma = 1.0, dt = 1e-3;
    const std::size_t n = 10000;
    SimConfig c;
    c.horizon = 5.0;
    c.dt = dt;
    c.record_stride = 1000;
    LinearParams p;
    p.a_g = a;
    p.c_gamma = {g0};
    c.coefficients = build_linear_set(p);
    c.initial = InitialData::constant({x0});
    const Scenario sc("classical", {sigma, sigma}, Control::constant(sigma));
    std::vector<double> at1(n), at5(n);
    parallel_for(n, [&](std::size_t i) {
        const auto r = simulate(c, sc, derive_seed(77, 0, i));
        at1[i] = r.states[1] * r.states[1];
        at5[i] = r.states[5] * r.states[5];
    });
    Outcome o{true, ""};
    for (auto [t, v] : {std::pair{1.0, &at1}, std::pair{5.0, &at5}}) {
        const auto st = sample_stat(*v);
        const double exact = std::exp(-2 * a * t) * x0 * x0 +
                             sigma * sigma * g0 * g0 / (2 * a) * (1 - std::exp(-2 * a * t));
        const double tol = 3 * st.standard_error + dt;
        o.pass = o.pass && std::abs(st.mean - exact) <= tol;
        o.detail += "t=" + num(t) + " empirical " + num(st.mean) + " closed form " + num(exact) + " tol " +
                    num(tol) + "; ";
    }
    return o;
}

Outcome bounds_arithmetic() {
    std::vector<std::string> bad;
    auto check = [&](const std::string& what, double got, double want) {
        if (std::abs(got - want) > 1e-12 * std::max(1.0, std::abs(want))) {
            bad.push_back(what + " = " + num(got) + " (want " + num(want) + ")");
        }
    };
    auto blank = [] {
        BoundInputs in;
        in.aux.k1 = in.aux.k2 = in.aux.k3 = 1.0;
        in.aux.T = 1.0;
        return in;
    };
    {
        BoundInputs in = blank();
        in.lambda1 = 1.0;
        in.lambda2 = 0.1;
        in.mu.mu1 = 2.0;
        check("window top", feasibility(in).mean_square.top, 1.6);
        check("K6", k6(in, 1.0), 1.4);
        in.lambda2 = 0.0;
        in.lambda3 = 0.2;
        in.q = 5.0;
        check("delay-free window", feasibility(in).mean_square.top, 2.4);
        BoundInputs off = blank();
        off.lambda2 = 0.3;
        if (feasibility(off).mean_square.feasible) {
            bad.push_back("lambda1 = 0 accepted");
        }
    }
    {
        BoundInputs in = blank();
        in.lambda1 = 1.0;
        in.offsets.g0_sq = 1.0;
        check("K4", k4_k5(in, 0.5, {0.1, 0.1, 0.1}, 0.0, 0.0).K4, 20.0);
        check("K5 zero data", k4_k5(in, 0.5, {0.1, 0.1, 0.1}, 0.0, 0.0).K5, 0.0);
        in.offsets = {};
        check("K4 zero offsets", k4_k5(in, 0.5, {0.1, 0.1, 0.1}, 1.0, 1.0).K4, 0.0);
        check("K7 zero offsets", k7_k8(in, 0.5).K7, 0.0);
        check("K8 no delay", k7_k8(in, 0.5).K8, 3.0);
        check("K9 no delay", k9(in, 0.5), 1.0);
        check("K6 no delay", k6(in, 0.5), 1.0);
    }
    {
        BoundInputs in = blank();
        in.aux.k1 = 2.0;
        in.lambda5 = 0.5;
        in.mu.mu3 = 3.0;
        check("K6 lambda5 only", k6(in, 1.0), 4.0);
        BoundInputs j = blank();
        j.lambda2 = 0.25;
        j.mu.mu1 = 1.0;
        check("K8", k7_k8(j, 1.0).K8, 4.0);
        const auto g = l1_l2_m(blank(), 0.0);
        check("M", g.M, 4.0);
        check("K hat", g.K_hat, 0.0);
        check("L2 - 2M", g.L2 - 2 * g.M, 0.0);
        BoundInputs k = blank();
        k.lambda1 = 1.0;
        check("K3", k1_k2_k3_global(k, 0.0, 0.0).K3, 0.0);
        check("K1", k1_k2_k3_global(k, 0.0, 0.0).K1, 0.0);
        check("K2", k1_k2_k3_global(k, 0.0, 0.0).K2, 0.0);
    }
    // monotonicity probes of K5, K6, K8, K9 in each moment
    BoundInputs ref = blank();
    ref.aux.k1 = 0.36;
    ref.aux.k3 = 1.44;
    ref.lambda1 = 1.75;
    ref.lambda2 = 0.25;
    ref.lambda3 = 0.45;
    ref.lambda4 = 0.05;
    ref.lambda5 = 0.09;
    ref.mu = {1.6, 1.6, 1.6};
    auto constants = [](const BoundInputs& in) {
        return std::vector<double>{k4_k5(in, 0.5, {0.01, 0.01, 0.01}, 1.0, 1.0).K5, k6(in, 0.5),
                                   k7_k8(in, 0.5).K8, k9(in, 0.5)};
    };
    const auto base = constants(ref);
    std::size_t probes = 0;
    for (double Moments::*m : {&Moments::mu1, &Moments::mu2, &Moments::mu3}) {
        for (double step : {1e-3, 0.1, 1.0}) {
            BoundInputs in = ref;
            in.mu.*m += step;
            const auto up = constants(in);
            for (std::size_t i = 0; i < up.size(); ++i, ++probes) {
                if (up[i] < base[i]) {
                    bad.push_back("constant " + std::to_string(i) + " decreases in a moment");
                }
            }
        }
    }
    Outcome o{bad.empty(), std::to_string(probes) + " monotonicity probes"};
    for (const auto& b : bad) {
        o.detail += "; " + b;
    }
    return o;
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    const Config def = load_config(std::filesystem::path(GSFDE_SOURCE_DIR) / "configs" / "default.json");
    ExperimentSession session(def);
    session.log = [](const std::string& m) { std::fprintf(stderr, "[acceptance] %s\n", m.c_str()); };
    if (!session.feasible()) {
        report("default configuration feasible", {false, "bounds engine rejects the bundled config"});
    }

    std::map<std::string, Verdict> v;
    for (const auto& name : experiment_names()) {
        if (def.experiments.is_enabled(name)) {
            v[name] = session.run(name);
        }
    }
    report("E1 mean-square bound", from_verdicts({&v["ms_bound"]}));
    report("E2 two-solution convergence", from_verdicts({&v["pair_convergence"]}));
    report("E3/E4 solution-map bound and convergence", from_verdicts({&v["map_bound"], &v["map_convergence"]}));
    report("E5 exponential estimate", from_verdicts({&v["lyapunov"]}));
    report("E6 non-explosion", from_verdicts({&v["nonexplosion"]}));
    report("pathwise lemma suite", from_verdicts({&v["lemmas"]}));
    report("truncation agreement", from_verdicts({&v["truncation"]}));
    report("coefficient certificate soundness", a1_soundness(def));
    report("deterministic oracle", deterministic_oracle());
    report("classical-limit oracle", classical_limit());
    report("G-Markov and sublinear-expectation axioms", from_verdicts({&v["markov"]}));
    report("bounds-engine arithmetic", bounds_arithmetic());

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d failing criteria, %.0f s\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
