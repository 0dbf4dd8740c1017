#include "gsfde/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "gsfde/parallel.hpp"

namespace gsfde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream ids keep the experiments' random numbers apart under one master seed.
enum Stream : std::uint64_t {
    kMomentSweep = 0,
    kPairSweep = 1,
    kLyapunov = 2,
    kLemmas = 4,
    kTruncation = 5,
    kMarkov = 6,
};

std::string fmt(double v, const char* spec = "%.12g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double sq(double x) { return x * x; }

std::int64_t steps_of(double t, double dt) { return std::llround(t / dt); }

void finish(Verdict& v) {
    const bool ok = !v.rows.empty() && std::all_of(v.rows.begin(), v.rows.end(), [](const VerdictRow& r) {
        return r.pass;
    });
    v.status = ok ? Verdict::Status::Pass : Verdict::Status::Fail;
}

bool within(double empirical, double se, double bound) { return empirical <= bound + 3.0 * se; }

double max_delay(const CoefficientSet& set) {
    return std::max({set.drift.measure.max_atom_delay(), set.qv_drift.measure.max_atom_delay(),
                     set.diffusion.measure.max_atom_delay()});
}

} // namespace

// ------------------------------------------------------------------ Verdict

const char* Verdict::status_text() const noexcept {
    switch (status) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Skipped: return "SKIP";
    }
    return "?";
}

double Verdict::worst_ratio() const {
    double worst = kNaN;
    for (const VerdictRow& r : rows) {
        if (r.bound > 0.0 && std::isfinite(r.bound)) {
            const double ratio = r.empirical / r.bound;
            if (!(worst >= ratio)) {
                worst = ratio;
            }
        }
    }
    return worst;
}

void Verdict::write_csv(std::ostream& os) const {
    os << "t,empirical,SE,bound,pass,label\n";
    for (const VerdictRow& r : rows) {
        os << fmt(r.t) << ',' << fmt(r.empirical) << ',' << fmt(r.standard_error) << ',' << fmt(r.bound) << ','
           << (r.pass ? 1 : 0) << ',' << r.label << '\n';
    }
}

// ------------------------------------------------------------------ Session

ExperimentSession::ExperimentSession(Config config) : config_(std::move(config)) {
    coefficients_ = build_linear_set(config_.params);

    const double horizon = default_buffer_horizon(config_.q, max_delay(coefficients_));
    const HistorySegment zeta = from_initial_data(config_.zeta, config_.q, config_.dim, config_.dt, horizon);
    const HistorySegment xi = from_initial_data(config_.xi, config_.q, config_.dim, config_.dt, horizon);
    zeta_norm_sq_ = sq(zeta.norm());
    x0_sq_ = sq(euclidean_norm(zeta.head()));
    zeta_sup_sq_ = sq(history_sup(zeta));
    try {
        diff_norm_sq_ = sq((zeta - xi).norm());
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, "initial_data: zeta and xi must share a tail family (" + e.detail() + ")");
    }

    std::string moment_problem;
    try {
        inputs_ = BoundInputs::from(coefficients_, config_.q, config_.aux);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotInClass) {
            throw;
        }
        moment_problem = e.what();
        config_.aux.validate();
        const A1Certificate& c = coefficients_.certificate;
        inputs_.lambda1 = c.lambda1;
        inputs_.lambda2 = c.lambda2;
        inputs_.lambda3 = c.lambda3;
        inputs_.lambda4 = c.lambda4;
        inputs_.lambda5 = c.lambda5;
        inputs_.mu = {kNaN, kNaN, kNaN};
        inputs_.offsets = offsets_of(coefficients_);
        inputs_.q = config_.q;
        inputs_.aux = config_.aux;
    }
    report_ = build_report(inputs_, zeta_norm_sq_, x0_sq_);
    if (!moment_problem.empty()) {
        for (Window* w : {&report_.windows.mean_square, &report_.windows.map_bound, &report_.windows.map_convergence}) {
            w->reason = moment_problem;
        }
    }
}

bool ExperimentSession::feasible() const noexcept { return violations().empty(); }

std::vector<std::string> ExperimentSession::violations() const {
    std::vector<std::string> out;
    const Feasibility& f = report_.windows;
    for (const Window* w : {&f.mean_square, &f.map_bound, &f.map_convergence}) {
        if (!w->feasible) {
            out.push_back(w->reason);
        }
    }
    if (f.mean_square.feasible && !report_.eps_error.empty()) {
        out.push_back(report_.eps_error);
    }
    return out;
}

SimConfig ExperimentSession::sim_config(double horizon, std::size_t stride) const {
    SimConfig sc;
    sc.horizon = horizon;
    sc.dt = config_.dt;
    sc.dim = config_.dim;
    sc.q = config_.q;
    sc.coefficients = coefficients_;
    sc.initial = config_.zeta;
    sc.record_stride = stride;
    return sc;
}

void ExperimentSession::say(const std::string& msg) const {
    if (log) {
        log(msg);
    }
}

std::vector<double> ExperimentSession::probe_times() const {
    std::vector<double> t = config_.experiments.checkpoints;
    if (config_.experiments.is_enabled("nonexplosion")) {
        t.push_back(config_.experiments.nonexplosion_horizon);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [this](double a, double b) {
                return steps_of(a, config_.dt) == steps_of(b, config_.dt);
            }),
            t.end());
    return t;
}

namespace {

struct Grid {
    std::size_t stride = 1;
    std::vector<std::size_t> index;  // record index of each probe time
};

Grid grid_for(const std::vector<double>& times, double dt) {
    Grid g;
    std::int64_t d = 0;
    for (double t : times) {
        const std::int64_t s = steps_of(t, dt);
        if (s <= 0 || std::abs(static_cast<double>(s) * dt - t) > 1e-9 * std::max(1.0, t)) {
            throw Error(ErrorCode::ConfigError, "probe time " + fmt(t) + " is not a positive grid time");
        }
        d = std::gcd(d, s);
    }
    g.stride = static_cast<std::size_t>(d);
    for (double t : times) {
        g.index.push_back(static_cast<std::size_t>(steps_of(t, dt) / d));
    }
    return g;
}

using Cube = std::vector<std::vector<std::vector<double>>>;

Cube make_cube(std::size_t scenarios, std::size_t probes, std::size_t paths) {
    return Cube(scenarios, std::vector<std::vector<double>>(probes, std::vector<double>(paths)));
}

std::vector<std::vector<double>> slice(const Cube& c, std::size_t probe) {
    std::vector<std::vector<double>> out;
    for (const auto& per_scenario : c) {
        out.push_back(per_scenario[probe]);
    }
    return out;
}

std::vector<std::string> names_of(const ScenarioSet& set) {
    std::vector<std::string> out;
    for (const Scenario& s : set) {
        out.push_back(s.name());
    }
    return out;
}

} // namespace

const ExperimentSession::ProbeStats& ExperimentSession::moment_sweep() {
    if (moments_) {
        return *moments_;
    }
    ProbeStats ps;
    ps.times = probe_times();
    const Grid g = grid_for(ps.times, config_.dt);
    const SimConfig sc = sim_config(ps.times.back(), g.stride);
    const std::size_t n = config_.experiments.paths, S = config_.scenarios.size(), P = ps.times.size();
    say("moment sweep: " + std::to_string(S) + " scenarios x " + std::to_string(n) + " paths to t = " +
        fmt(ps.times.back()));
    ps.a = make_cube(S, P, n);
    ps.b = make_cube(S, P, n);
    ps.c = make_cube(S, P, n);
    parallel_for(S * n, [&](std::size_t k) {
        const std::size_t s = k / n, i = k % n;
        const TrajectoryRecord rec =
            simulate(sc, config_.scenarios[s], derive_seed(config_.experiments.seed, s, i, kMomentSweep));
        for (std::size_t p = 0; p < P; ++p) {
            const std::size_t r = g.index[p];
            ps.a[s][p][i] = sq(rec.magnitude(r));
            ps.b[s][p][i] = sq(rec.segment_norms[r]);
            ps.c[s][p][i] = sq(rec.running_max[r]);
        }
    });
    moments_ = std::move(ps);
    return *moments_;
}

const ExperimentSession::ProbeStats& ExperimentSession::pair_sweep() {
    if (pairs_) {
        return *pairs_;
    }
    ProbeStats ps;
    ps.times = config_.experiments.checkpoints;
    std::sort(ps.times.begin(), ps.times.end());
    const Grid g = grid_for(ps.times, config_.dt);
    const SimConfig sc = sim_config(ps.times.back(), g.stride);
    const std::size_t n = config_.experiments.paths, S = config_.scenarios.size(), P = ps.times.size();
    say("pair sweep: " + std::to_string(S) + " scenarios x " + std::to_string(n) + " coupled pairs to t = " +
        fmt(ps.times.back()));
    ps.a = make_cube(S, P, n);
    ps.b = make_cube(S, P, n);
    parallel_for(S * n, [&](std::size_t k) {
        const std::size_t s = k / n, i = k % n;
        const PairRecord rec = simulate_pair(sc, config_.zeta, config_.xi, config_.scenarios[s],
                                             derive_seed(config_.experiments.seed, s, i, kPairSweep));
        for (std::size_t p = 0; p < P; ++p) {
            const std::size_t r = g.index[p];
            double d2 = 0.0;
            const auto x = rec.first.state(r), y = rec.second.state(r);
            for (std::size_t j = 0; j < x.size(); ++j) {
                d2 += sq(x[j] - y[j]);
            }
            ps.a[s][p][i] = d2;
            ps.b[s][p][i] = sq(rec.difference_norms[r]);
        }
    });
    pairs_ = std::move(ps);
    return *pairs_;
}

Verdict ExperimentSession::refuse(const std::string& name, const std::string& why) const {
    Verdict v;
    v.name = name;
    v.status = Verdict::Status::Fail;
    v.notes.push_back("refused: " + why);
    return v;
}

namespace {

// Checkpoint rows: scenario-max of the statistic against bound(t).
template <class Bound>
void checkpoint_rows(Verdict& v, const std::vector<double>& probe_times, const std::vector<double>& checkpoints,
                     const std::vector<std::vector<std::vector<double>>>& cube, const ScenarioSet& scenarios,
                     Bound&& bound) {
    for (double t : checkpoints) {
        const auto it = std::find(probe_times.begin(), probe_times.end(), t);
        const std::size_t p = static_cast<std::size_t>(it - probe_times.begin());
        const SublinearEstimate e = estimate_from_samples(slice(cube, p), names_of(scenarios));
        VerdictRow r;
        r.t = t;
        r.empirical = e.estimate;
        r.standard_error = e.standard_error;
        r.bound = bound(t);
        r.pass = within(r.empirical, r.standard_error, r.bound);
        r.label = scenarios[e.argmax].name();
        v.rows.push_back(r);
    }
}

std::vector<double> sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

Verdict ExperimentSession::run_ms_bound() {
    const Window& w = report_.windows.mean_square;
    if (!w.feasible) {
        return refuse("ms_bound", w.reason);
    }
    if (!report_.eps_error.empty()) {
        return refuse("ms_bound", report_.eps_error);
    }
    // (lambda, K4, K5) candidates; the bound holds for each, so take the least.
    std::vector<std::array<double, 3>> cand{
        {report_.lambda_mean_square, report_.mean_square.K4, report_.mean_square.K5}};
    if (config_.aux.scan) {
        for (double l : lambda_grid(w)) {
            try {
                const K4K5 k = k4_k5(inputs_, l, choose_epsilons(inputs_, l), zeta_norm_sq_, x0_sq_);
                cand.push_back({l, k.K4, k.K5});
            } catch (const Error&) {
            }
        }
    }
    const ProbeStats& ps = moment_sweep();
    Verdict v;
    v.name = "ms_bound";
    checkpoint_rows(v, ps.times, sorted(config_.experiments.checkpoints), ps.a, config_.scenarios, [&](double t) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : cand) {
            best = std::min(best, c[1] + c[2] * std::exp(-c[0] * t));
        }
        return best;
    });
    v.notes.push_back("statistic: E|X(t)|^2; bound K4 + K5 exp(-lambda t), lambda = " +
                      fmt(report_.lambda_mean_square) + (config_.aux.scan ? " (with a 10-rate scan)" : ""));
    finish(v);
    return v;
}

Verdict ExperimentSession::run_pair_convergence() {
    const Window& w = report_.windows.mean_square;
    if (!w.feasible) {
        return refuse("pair_convergence", w.reason);
    }
    std::vector<double> rates{report_.lambda_mean_square};
    if (config_.aux.scan) {
        const auto grid = lambda_grid(w);
        rates.insert(rates.end(), grid.begin(), grid.end());
    }
    const ProbeStats& ps = pair_sweep();
    Verdict v;
    v.name = "pair_convergence";
    checkpoint_rows(v, ps.times, sorted(config_.experiments.checkpoints), ps.a, config_.scenarios, [&](double t) {
        double best = std::numeric_limits<double>::infinity();
        for (double l : rates) {
            best = std::min(best, k6(inputs_, l) * diff_norm_sq_ * std::exp(-l * t));
        }
        return best;
    });
    // The curve must decrease across the checkpoints from t = 1 on.
    std::size_t rises = 0;
    const VerdictRow* prev = nullptr;
    for (const VerdictRow& r : v.rows) {
        if (r.t >= 1.0) {
            if (prev && !(r.empirical < prev->empirical)) {
                ++rises;
            }
            prev = &r;
        }
    }
    if (diff_norm_sq_ > 0.0) {
        VerdictRow mono;
        mono.t = v.rows.empty() ? 0.0 : v.rows.back().t;
        mono.empirical = static_cast<double>(rises);
        mono.bound = 0.0;
        mono.pass = rises == 0;
        mono.label = "decreasing_after_t1";
        v.rows.push_back(mono);
    }
    v.notes.push_back("statistic: E|X(t) - Y(t)|^2 with shared noise; bound K6 ||zeta - xi||^2 exp(-lambda t), K6 = " +
                      fmt(report_.K6));
    finish(v);
    return v;
}

Verdict ExperimentSession::run_map_bound() {
    const Window& w = report_.windows.map_bound;
    if (!w.feasible) {
        return refuse("map_bound", w.reason);
    }
    std::vector<double> rates{report_.lambda_map_bound};
    if (config_.aux.scan) {
        const auto grid = lambda_grid(w);
        rates.insert(rates.end(), grid.begin(), grid.end());
    }
    const ProbeStats& ps = moment_sweep();
    Verdict v;
    v.name = "map_bound";
    checkpoint_rows(v, ps.times, sorted(config_.experiments.checkpoints), ps.b, config_.scenarios, [&](double t) {
        double best = std::numeric_limits<double>::infinity();
        for (double l : rates) {
            const K7K8 k = k7_k8(inputs_, l);
            best = std::min(best, k.K7 + k.K8 * zeta_norm_sq_ * std::exp(-l * t));
        }
        return best;
    });
    v.notes.push_back("statistic: E||X_t||_q^2; bound K7 + K8 E||zeta||^2 exp(-lambda t)");
    finish(v);
    return v;
}

Verdict ExperimentSession::run_map_convergence() {
    const Window& w = report_.windows.map_convergence;
    if (!w.feasible) {
        return refuse("map_convergence", w.reason);
    }
    std::vector<double> rates{report_.lambda_map_convergence};
    if (config_.aux.scan) {
        const auto grid = lambda_grid(w);
        rates.insert(rates.end(), grid.begin(), grid.end());
    }
    const ProbeStats& ps = pair_sweep();
    Verdict v;
    v.name = "map_convergence";
    checkpoint_rows(v, ps.times, sorted(config_.experiments.checkpoints), ps.b, config_.scenarios, [&](double t) {
        double best = std::numeric_limits<double>::infinity();
        for (double l : rates) {
            best = std::min(best, k9(inputs_, l) * diff_norm_sq_ * std::exp(-l * t));
        }
        return best;
    });
    v.notes.push_back("statistic: E||X_t - Y_t||_q^2; bound K9 ||zeta - xi||^2 exp(-lambda t) with the theorem's "
                      "lambda (the statement writes lambda-hat)");
    finish(v);
    return v;
}

Verdict ExperimentSession::run_l2_estimate() {
    if (!std::isfinite(zeta_sup_sq_)) {
        return refuse("l2_estimate", "the initial history is unbounded");
    }
    const ProbeStats& ps = moment_sweep();
    Cube sup = ps.c;
    for (auto& per_scenario : sup) {
        for (auto& per_probe : per_scenario) {
            for (double& x : per_probe) {
                x = std::max(x, zeta_sup_sq_);
            }
        }
    }
    const GrowthConstants& g = report_.growth;
    Verdict v;
    v.name = "l2_estimate";
    checkpoint_rows(v, ps.times, sorted(config_.experiments.checkpoints), sup, config_.scenarios,
                    [&](double t) { return (zeta_norm_sq_ + g.L1) * std::exp(g.L2 * t); });
    v.notes.push_back("statistic: E sup_{s<=t}|X(s)|^2 including the initial history; bound (E||zeta||^2 + L1) "
                      "exp(L2 t), L1 = " + fmt(g.L1) + ", L2 = " + fmt(g.L2));
    if (g.L2 < 0.0) {
        v.notes.push_back("L2 < 0: the envelope decays below the initial history sup, so it cannot hold for large t");
    }
    finish(v);
    return v;
}

Verdict ExperimentSession::run_lyapunov() {
    const double T = config_.experiments.lyapunov_horizon;
    const std::size_t n = config_.experiments.lyapunov_paths, S = config_.scenarios.size();
    const std::size_t steps = static_cast<std::size_t>(steps_of(T, config_.dt));
    const SimConfig sc = sim_config(T, steps);
    say("lyapunov: " + std::to_string(S) + " scenarios x " + std::to_string(n) + " paths to t = " + fmt(T));
    std::vector<std::vector<double>> stat(S, std::vector<double>(n));
    parallel_for(S * n, [&](std::size_t k) {
        const std::size_t s = k / n, i = k % n;
        const TrajectoryRecord rec =
            simulate(sc, config_.scenarios[s], derive_seed(config_.experiments.seed, s, i, kLyapunov));
        stat[s][i] = std::log(rec.magnitude(rec.size() - 1)) / T;
    });
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t s = 0; s < S; ++s) {
        for (double x : stat[s]) {
            if (x > worst) {
                worst = x;
                arg = s;
            }
        }
    }
    const double M = report_.growth.M;
    Verdict v;
    v.name = "lyapunov";
    VerdictRow r;
    r.t = T;
    r.empirical = worst;
    r.standard_error = 0.0;
    r.bound = M + 0.1 * std::max(1.0, std::abs(M));
    r.pass = r.empirical <= r.bound;
    r.label = config_.scenarios[arg].name();
    v.rows.push_back(r);
    const SublinearEstimate mean = estimate_from_samples(stat, names_of(config_.scenarios));
    v.notes.push_back("statistic: max over paths of (1/t) log|X(t)|; bound M + 0.1 max(1, |M|), M = " + fmt(M));
    v.notes.push_back("scenario-max mean of (1/t) log|X(t)| = " + fmt(mean.estimate) + " (SE " +
                      fmt(mean.standard_error) + "); a max over paths carries no standard error");
    finish(v);
    return v;
}

Verdict ExperimentSession::run_markov() {
    const Mesh mesh = Mesh::from_horizon(1.0, config_.dt);
    const std::size_t n = config_.experiments.markov_paths, S = config_.scenarios.size();
    const std::uint64_t master = derive_seed(config_.experiments.seed, 0, 0, kMarkov);
    say("markov battery: " + std::to_string(S) + " scenarios x " + std::to_string(n) + " paths of B on [0, 1]");
    std::vector<std::vector<double>> B(S, std::vector<double>(n)), Q(S, std::vector<double>(n));
    parallel_for(S * n, [&](std::size_t k) {
        const std::size_t s = k / n, i = k % n;
        const GPath p = sample_path(config_.scenarios[s], mesh, derive_seed(master, s, i));
        B[s][i] = p.terminal();
        Q[s][i] = p.qv.back();
    });
    auto map = [&](auto&& f) {
        std::vector<std::vector<double>> out(S, std::vector<double>(n));
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                out[s][i] = f(B[s][i], Q[s][i]);
            }
        }
        return out;
    };
    auto E = [&](const std::vector<std::vector<double>>& x) { return estimate_from_samples(x); };
    const double lo2 = sq(config_.band.sigma_lo), hi2 = sq(config_.band.sigma_hi);

    Verdict v;
    v.name = "markov";
    auto row = [&](const std::string& label, double empirical, double se, double bound, bool pass) {
        VerdictRow r;
        r.t = 1.0;
        r.empirical = empirical;
        r.standard_error = se;
        r.bound = bound;
        r.pass = pass;
        r.label = label;
        v.rows.push_back(r);
    };
    auto combined = [](double a, double b) { return std::sqrt(a * a + b * b); };

    const auto absB = map([](double b, double) { return std::abs(b); });
    const auto absBq = map([](double b, double q) { return std::abs(b) + q; });
    const auto b2 = map([](double b, double) { return b * b; });
    const auto bb = map([](double b, double) { return b; });

    {   // monotonicity: |B| + <B> >= |B|
        const auto x = E(absBq), y = E(absB);
        const double se = combined(x.standard_error, y.standard_error);
        row("monotonicity", y.estimate - x.estimate, se, 0.0, within(y.estimate - x.estimate, se, 0.0));
    }
    {   // constant preserving
        const double c = 2.5;
        const auto x = E(map([c](double, double) { return c; }));
        row("constant_preserving", std::abs(x.estimate - c), 0.0, 1e-12, std::abs(x.estimate - c) <= 1e-12);
    }
    {   // subadditivity
        const auto xy = E(map([](double b, double) { return b + b * b; }));
        const auto x = E(bb), y = E(b2);
        const double gap = xy.estimate - x.estimate - y.estimate;
        const double se = std::sqrt(sq(xy.standard_error) + sq(x.standard_error) + sq(y.standard_error));
        row("subadditivity", gap, se, 0.0, within(gap, se, 0.0));
    }
    {   // positive homogeneity
        const double lam = 3.0;
        const auto x = E(map([lam](double b, double) { return lam * b * b; }));
        const auto y = E(b2);
        const double gap = std::abs(x.estimate - lam * y.estimate);
        const double se = combined(x.standard_error, lam * y.standard_error);
        row("positive_homogeneity", gap, se, 0.0, within(gap, se, 0.0));
    }
    {   // variance bounds: E[B^2] = hi^2, -E[-B^2] = lo^2, mean certainty for B
        const auto up = E(b2);
        const auto down = E(map([](double b, double) { return -b * b; }));
        row("upper_variance", std::abs(up.estimate - hi2), up.standard_error, 0.0,
            within(std::abs(up.estimate - hi2), up.standard_error, 0.0));
        row("lower_variance", std::abs(-down.estimate - lo2), down.standard_error, 0.0,
            within(std::abs(-down.estimate - lo2), down.standard_error, 0.0));
        const auto m_up = E(bb);
        const auto m_down = E(map([](double b, double) { return -b; }));
        row("mean_certainty_upper", m_up.estimate, m_up.standard_error, 0.0,
            within(m_up.estimate, m_up.standard_error, 0.0));
        row("mean_certainty_lower", m_down.estimate, m_down.standard_error, 0.0,
            within(m_down.estimate, m_down.standard_error, 0.0));
    }
    {   // quadratic variation stays in the band
        std::size_t bad = 0;
        for (const auto& per : Q) {
            for (double q : per) {
                if (q < lo2 * (1 - 1e-12) || q > hi2 * (1 + 1e-12)) {
                    ++bad;
                }
            }
        }
        row("qv_in_band", static_cast<double>(bad), 0.0, 0.0, bad == 0);
    }
    // Markov inequality on the battery, printed form asserted, power form reported.
    const std::vector<std::pair<std::string, const std::vector<std::vector<double>>*>> battery = {
        {"B", &bb}, {"B^2", &b2}, {"|B|+<B>", &absBq}};
    std::size_t power_fail = 0;
    for (const auto& [name, values] : battery) {
        for (double p : {1.0, 2.0}) {
            for (double delta : {0.25, 0.5, 1.0, 2.0}) {
                const MarkovCheck m = markov_from_samples(*values, p, delta);
                row("markov " + name + " p=" + fmt(p) + " delta=" + fmt(delta), m.capacity, m.margin / 3.0,
                    m.bound_printed, m.holds_printed);
                power_fail += m.holds_power ? 0 : 1;
            }
        }
    }
    v.notes.push_back("Markov rows compare C(|X| > delta) with E|X|^p / delta (printed form); the delta^p form failed "
                      "in " + std::to_string(power_fail) + " of 24 cases");
    finish(v);
    return v;
}

Verdict ExperimentSession::run_lemmas() {
    const ExperimentSettings& x = config_.experiments;
    const VolatilityBand& band = config_.band;
    ScenarioSet scen = config_.scenarios;
    scen.emplace_back("switching", band, Control::switching(band.sigma_lo, band.sigma_hi, 0.1));
    scen.emplace_back("feedback", band, Control::feedback(1.0, band.sigma_lo, band.sigma_hi));
    scen.emplace_back("random", band, Control::random());

    struct LemmaMeasure {
        std::string name;
        DelayMeasure mu;
    };
    std::vector<LemmaMeasure> measures{
        {"mixed", DelayMeasure({Atom{0.25, 0.5}}, {ExpDensity{3.0, 0.5}}, "mixed")}};
    std::vector<std::string> skipped;
    for (const auto& [name, mu] : config_.measures) {
        if (mu.in_class(2.0 * config_.q)) {
            measures.push_back({name, mu});
        } else {
            skipped.push_back(name);
        }
    }
    const std::vector<double> lf3_p = {1.0, 2.0, 4.0};
    const std::size_t N = x.lemma_trajectories;
    const std::size_t n_lf2 = measures.size() * 2;
    // per trajectory: lf3 slacks, lf2 slacks (plain, exp) x measures, lf2 alternates, qv violations
    std::vector<std::vector<double>> slack(N, std::vector<double>(lf3_p.size() + 2 * n_lf2 + 1));
    const double lo2 = sq(band.sigma_lo), hi2 = sq(band.sigma_hi);
    say("lemma suite: " + std::to_string(N) + " trajectories to t = " + fmt(x.lemma_horizon));

    parallel_for(N, [&](std::size_t j) {
        const std::uint64_t seed = derive_seed(x.seed, j, 0, kLemmas);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        Vector c(config_.dim);
        for (double& ci : c) {
            ci = u(rng);
        }
        const double rate = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
        const InitialData data = j % 2 == 0 ? InitialData::constant(c) : InitialData::exponential_decay(c, rate);
        SimConfig sc = sim_config(x.lemma_horizon, 1);
        sc.initial = data;
        sc.record_noise = true;
        const TrajectoryRecord rec = simulate(sc, scen[j % scen.size()], seed);

        const HistorySegment zeta = initial_segment(sc, data);
        std::size_t col = 0;
        for (double p : lf3_p) {
            slack[j][col++] = check_lemma_lf3(rec, zeta.norm(), config_.q, p, 0.5 * p * config_.q).min_slack;
        }
        for (const LemmaMeasure& m : measures) {
            const HistorySegment z = from_initial_data(
                data, config_.q, config_.dim, config_.dt, default_buffer_horizon(config_.q, m.mu.max_atom_delay()));
            const LemmaCheck plain = check_lemma_lf2(rec, z, m.mu, 2.0, 0.0, Lf2Variant::Plain);
            const LemmaCheck expo = check_lemma_lf2(rec, z, m.mu, 2.0, config_.q, Lf2Variant::Exponential);
            slack[j][col] = plain.min_slack;
            slack[j][col + 1] = expo.min_slack;
            slack[j][col + n_lf2] = plain.min_slack_alternate;
            slack[j][col + n_lf2 + 1] = expo.min_slack_alternate;
            col += 2;
        }
        std::size_t bad = 0;
        for (double dqv : rec.qv_increments) {
            if (!(lo2 * sc.dt <= dqv && dqv <= hi2 * sc.dt)) {
                ++bad;
            }
        }
        if (rec.qv_increments.size() != rec.steps_taken) {
            ++bad;
        }
        slack[j].back() = static_cast<double>(bad);
    });

    std::vector<std::string> labels;
    for (double p : lf3_p) {
        labels.push_back("lf3 p=" + fmt(p));
    }
    for (const char* form : {"", " alternate"}) {
        for (const LemmaMeasure& m : measures) {
            labels.push_back("lf2 plain " + m.name + form);
            labels.push_back("lf2 exponential " + m.name + form);
        }
    }
    Verdict v;
    v.name = "lemmas";
    const double tol = 1e-6;
    for (std::size_t col = 0; col + 1 < slack.front().size(); ++col) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& s : slack) {
            worst = std::min(worst, s[col]);
        }
        VerdictRow r;
        r.t = x.lemma_horizon;
        r.empirical = -worst;  // largest violation, LHS - RHS
        r.bound = tol;
        r.pass = -worst <= tol;
        r.label = labels[col];
        v.rows.push_back(r);
    }
    double bad = 0.0;
    for (const auto& s : slack) {
        bad += s.back();
    }
    VerdictRow qv;
    qv.t = x.lemma_horizon;
    qv.empirical = bad;
    qv.bound = 0.0;
    qv.pass = bad == 0.0;
    qv.label = "qv band violations";
    v.rows.push_back(qv);
    v.notes.push_back("empirical = largest LHS - RHS over trajectories (pathwise, no standard error)");
    v.notes.push_back("p = 2 throughout for the delay-integral inequality, where both readings of its constant agree");
    for (const std::string& name : skipped) {
        v.notes.push_back("measure '" + name + "' lacks the 2q moment and was left out");
    }
    finish(v);
    return v;
}

Verdict ExperimentSession::run_truncation() {
    const ExperimentSettings& x = config_.experiments;
    const std::size_t N = x.truncation_seeds;
    std::vector<double> dev(N), dev_small(N);
    std::vector<char> exited(N), small_exited(N);
    say("truncation: " + std::to_string(N) + " coupled runs to t = " + fmt(x.truncation_horizon));
    const SimConfig sc = sim_config(x.truncation_horizon, 1);
    parallel_for(N, [&](std::size_t j) {
        const Scenario& scen = config_.scenarios[j % config_.scenarios.size()];
        const std::uint64_t seed = derive_seed(x.seed, j, 0, kTruncation);
        const TrajectoryRecord plain = simulate(sc, scen, seed);
        const double sup = *std::max_element(plain.segment_norms.begin(), plain.segment_norms.end());
        const TruncationRecord big = simulate_truncated(sc, 10.0 * sup, scen, seed);
        dev[j] = big.max_deviation;
        exited[j] = big.exit_time.has_value();
        // Contrast: a level inside the path's range does bite after the exit.
        const TruncationRecord small = simulate_truncated(sc, 0.5 * sup, scen, seed);
        dev_small[j] = small.max_deviation_before_exit;
        small_exited[j] = small.exit_time.has_value();
    });
    Verdict v;
    v.name = "truncation";
    const double worst = *std::max_element(dev.begin(), dev.end());
    std::size_t nonzero = 0, exits = 0, pre_exit = 0, small_exits = 0;
    for (std::size_t j = 0; j < N; ++j) {
        nonzero += dev[j] != 0.0;
        exits += exited[j] != 0;
        pre_exit += dev_small[j] != 0.0;
        small_exits += small_exited[j] != 0;
    }
    v.rows.push_back({x.truncation_horizon, worst, 0.0, 1e-12, worst <= 1e-12, "max deviation, m = 10 x sup"});
    v.rows.push_back({x.truncation_horizon, static_cast<double>(nonzero + exits), 0.0, 0.0, nonzero + exits == 0,
                      "runs not bitwise identical on the m-ball"});
    v.rows.push_back({x.truncation_horizon, static_cast<double>(pre_exit), 0.0, 0.0, pre_exit == 0,
                      "deviation before exit, m = sup / 2"});
    v.notes.push_back("with m = sup / 2, " + std::to_string(small_exits) + " of " + std::to_string(N) +
                      " runs left the ball");
    finish(v);
    return v;
}

Verdict ExperimentSession::run_nonexplosion() {
    const ExperimentSettings& x = config_.experiments;
    const double T = x.nonexplosion_horizon;
    const ProbeStats& ps = moment_sweep();
    const auto it = std::find_if(ps.times.begin(), ps.times.end(), [&](double t) {
        return steps_of(t, config_.dt) == steps_of(T, config_.dt);
    });
    const std::size_t p = static_cast<std::size_t>(it - ps.times.begin());
    BoundInputs in = inputs_;
    in.aux.T = T;
    const GlobalConstants g = k1_k2_k3_global(in, zeta_norm_sq_, x0_sq_);

    Verdict v;
    v.name = "nonexplosion";
    std::vector<double> levels = x.nonexplosion_levels;
    std::sort(levels.begin(), levels.end());
    double prev = std::numeric_limits<double>::infinity();
    std::size_t rises = 0;
    for (double m : levels) {
        std::vector<std::vector<double>> hit(ps.c.size());
        for (std::size_t s = 0; s < ps.c.size(); ++s) {
            for (double c2 : ps.c[s][p]) {
                hit[s].push_back(c2 > m * m ? 1.0 : 0.0);
            }
        }
        const SublinearEstimate e = estimate_from_samples(hit, names_of(config_.scenarios));
        VerdictRow r;
        r.t = T;
        r.empirical = e.estimate;
        r.standard_error = e.standard_error;
        r.bound = nonexplosion_bound(g, T, m);
        r.pass = within(r.empirical, r.standard_error, r.bound);
        r.label = "m=" + fmt(m);
        v.rows.push_back(r);
        rises += e.estimate > prev;
        prev = e.estimate;
    }
    v.rows.push_back({T, static_cast<double>(rises), 0.0, 0.0, rises == 0, "frequency nonincreasing in m"});
    v.notes.push_back("statistic: scenario-max frequency of {sup_{t<=T}|X(t)| > m}; bound K2 exp(K3 T) / m^2, K2 = " +
                      fmt(g.K2) + ", K3 = " + fmt(g.K3));
    finish(v);
    return v;
}

Verdict ExperimentSession::run(const std::string& name) {
    using Fn = Verdict (ExperimentSession::*)();
    static const std::vector<std::pair<std::string, Fn>> table = {
        {"ms_bound", &ExperimentSession::run_ms_bound},
        {"pair_convergence", &ExperimentSession::run_pair_convergence},
        {"map_bound", &ExperimentSession::run_map_bound},
        {"map_convergence", &ExperimentSession::run_map_convergence},
        {"l2_estimate", &ExperimentSession::run_l2_estimate},
        {"lyapunov", &ExperimentSession::run_lyapunov},
        {"markov", &ExperimentSession::run_markov},
        {"lemmas", &ExperimentSession::run_lemmas},
        {"truncation", &ExperimentSession::run_truncation},
        {"nonexplosion", &ExperimentSession::run_nonexplosion},
    };
    for (const auto& [n, fn] : table) {
        if (n == name) {
            try {
                return (this->*fn)();
            } catch (const Error& e) {
                return refuse(name, e.what());
            }
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown experiment '" + name + "'");
}

std::vector<Verdict> ExperimentSession::run_all() {
    std::vector<Verdict> out;
    for (const std::string& name : experiment_names()) {
        if (!config_.experiments.is_enabled(name)) {
            Verdict v;
            v.name = name;
            v.status = Verdict::Status::Skipped;
            v.notes.push_back("disabled in the configuration");
            out.push_back(v);
            continue;
        }
        say("running " + name);
        out.push_back(run(name));
    }
    return out;
}

void ExperimentSession::write_trajectories(const std::filesystem::path& dir, std::size_t n) const {
    if (n == 0) {
        return;
    }
    std::filesystem::create_directories(dir);
    const std::vector<double> times = probe_times();
    const SimConfig sc = sim_config(times.empty() ? config_.horizon : times.back(), 1);
    for (std::size_t i = 0; i < n; ++i) {
        TrajectoryRecord rec =
            simulate(sc, config_.scenarios[0], derive_seed(config_.experiments.seed, 0, i, kMomentSweep));
        rec.scenario_id = 0;
        std::ofstream os(dir / ("trajectory_" + std::to_string(i) + ".csv"));
        rec.write_csv(os);
    }
}

// ------------------------------------------------------------------ Output

std::string verdict_table(const std::vector<Verdict>& verdicts) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %-6s %6s %14s\n", "experiment", "status", "rows", "max emp/bound");
    os << line;
    for (const Verdict& v : verdicts) {
        const double r = v.worst_ratio();
        std::snprintf(line, sizeof line, "%-18s %-6s %6zu %14s\n", v.name.c_str(), v.status_text(), v.rows.size(),
                      std::isnan(r) ? "-" : fmt(r, "%.4g").c_str());
        os << line;
    }
    return os.str();
}

void write_outputs(const std::filesystem::path& dir, const ExperimentSession& session,
                   const std::vector<Verdict>& verdicts) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "bounds.csv");
        session.bounds().write_csv(os);
    }
    std::ofstream sum(dir / "summary.txt");
    sum << "config: " << session.config().source << "\n";
    sum << "seed: " << session.config().experiments.seed << ", paths per scenario: "
        << session.config().experiments.paths << ", scenarios: " << session.config().scenarios.size() << "\n\n";
    sum << session.bounds().text() << "\n";
    sum << verdict_table(verdicts) << "\n";
    for (const Verdict& v : verdicts) {
        sum << "[" << v.name << "] " << v.status_text() << "\n";
        for (const std::string& n : v.notes) {
            sum << "  " << n << "\n";
        }
        for (const VerdictRow& r : v.rows) {
            sum << "  t=" << fmt(r.t, "%-6g") << " empirical=" << fmt(r.empirical, "%.6g")
                << " se=" << fmt(r.standard_error, "%.3g") << " bound=" << fmt(r.bound, "%.6g") << " "
                << (r.pass ? "ok" : "VIOLATED") << "  " << r.label << "\n";
        }
        if (v.status != Verdict::Status::Skipped) {
            std::ofstream os(dir / (v.name + ".csv"));
            v.write_csv(os);
        }
    }
    const bool all = std::all_of(verdicts.begin(), verdicts.end(),
                                 [](const Verdict& v) { return v.status != Verdict::Status::Fail; });
    sum << "\noverall: " << (all ? "PASS" : "FAIL") << "\n";
}

} // namespace gsfde
