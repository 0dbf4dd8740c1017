#include "gsfde/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gsfde/parallel.hpp"

namespace gsfde {

VolatilityBand::VolatilityBand(double lo, double hi) : sigma_lo(lo), sigma_hi(hi) {
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw Error(ErrorCode::PreconditionViolation, "volatility band needs 0 <= sigma_lo <= sigma_hi");
    }
}

double VolatilityBand::clamp(double sigma) const noexcept {
    return std::clamp(sigma, sigma_lo, sigma_hi);
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t scenario, std::uint64_t path,
                          std::uint64_t stream) noexcept {
    std::uint64_t s = master;
    std::uint64_t k = splitmix64(s);
    s = k ^ (scenario * 0xd1b54a32d192ed03ULL);
    k = splitmix64(s);
    s = k ^ (path * 0xabc98388fb8fac03ULL);
    k = splitmix64(s);
    s = k ^ (stream * 0x8cb92ba72f3d8dd7ULL);
    return splitmix64(s);
}

PathRng::PathRng(std::uint64_t seed) {
    std::uint64_t s = seed;
    noise_.seed(splitmix64(s));
    control_.seed(splitmix64(s));
}

Control Control::constant(double sigma) {
    Control c;
    c.kind = Kind::Constant;
    c.sigma_a = c.sigma_b = sigma;
    return c;
}

Control Control::switching(double sigma_a, double sigma_b, double period) {
    if (!(period > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "switching period must be positive");
    }
    Control c;
    c.kind = Kind::Switching;
    c.sigma_a = sigma_a;
    c.sigma_b = sigma_b;
    c.period = period;
    return c;
}

Control Control::feedback(double threshold, double sigma_below, double sigma_above) {
    Control c;
    c.kind = Kind::Feedback;
    c.threshold = threshold;
    c.sigma_a = sigma_below;
    c.sigma_b = sigma_above;
    return c;
}

Control Control::random() {
    Control c;
    c.kind = Kind::Random;
    return c;
}

Scenario::Scenario(std::string name, VolatilityBand band, Control control)
    : name_(std::move(name)), band_(band), control_(control) {}

double Scenario::sigma(std::size_t step, double dt, double feedback_abs, PathRng& rng) const {
    switch (control_.kind) {
    case Control::Kind::Constant:
        return band_.clamp(control_.sigma_a);
    case Control::Kind::Switching: {
        // Time at the left end of the step decides the level.
        const auto phase = static_cast<std::uint64_t>(std::floor(static_cast<double>(step) * dt / control_.period + 1e-9));
        return band_.clamp(phase % 2 == 0 ? control_.sigma_a : control_.sigma_b);
    }
    case Control::Kind::Feedback:
        return band_.clamp(feedback_abs > control_.threshold ? control_.sigma_b : control_.sigma_a);
    case Control::Kind::Random:
        return band_.clamp(band_.sigma_lo + (band_.sigma_hi - band_.sigma_lo) * rng.uniform());
    }
    return band_.sigma_hi;
}

ScenarioSet constant_grid(const VolatilityBand& band, std::size_t levels) {
    ScenarioSet out;
    if (band.sigma_hi == band.sigma_lo) {
        levels = 1;
    }
    for (std::size_t i = 0; i < std::max<std::size_t>(levels, 1); ++i) {
        const double s = i + 1 >= levels
                             ? band.sigma_hi
                             : band.sigma_lo + (band.sigma_hi - band.sigma_lo) * static_cast<double>(i) /
                                                   static_cast<double>(levels - 1);
        char buf[48];
        std::snprintf(buf, sizeof buf, "const_%.4g", s);
        out.emplace_back(buf, band, Control::constant(s));
    }
    return out;
}

Mesh Mesh::from_horizon(double horizon, double dt) {
    if (!(dt > 0.0) || !(horizon > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "horizon and step must be positive");
    }
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1.0) {
        throw Error(ErrorCode::PreconditionViolation, "step does not divide the horizon");
    }
    return Mesh{dt, static_cast<std::size_t>(rounded)};
}

GPath sample_path(const Scenario& scenario, const Mesh& mesh, std::uint64_t seed) {
    PathRng rng(seed);
    GPath p;
    p.dt = mesh.dt;
    const std::size_t n = mesh.steps;
    p.sigma.resize(n);
    p.dB.resize(n);
    p.dqv.resize(n);
    p.B.assign(n + 1, 0.0);
    p.qv.assign(n + 1, 0.0);
    const double sqdt = std::sqrt(mesh.dt);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = scenario.sigma(k, mesh.dt, std::abs(p.B[k]), rng);
        const double xi = rng.normal();
        p.sigma[k] = s;
        p.dB[k] = s * sqdt * xi;
        p.dqv[k] = s * s * mesh.dt;
        p.B[k + 1] = p.B[k] + p.dB[k];
        p.qv[k + 1] = p.qv[k] + p.dqv[k];
    }
    return p;
}

ScenarioStat sample_stat(const std::vector<double>& values) {
    ScenarioStat s;
    const auto n = static_cast<double>(values.size());
    if (values.size() < 2) {
        throw Error(ErrorCode::InsufficientSample, "need at least two samples");
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    s.mean = mean;
    s.standard_error = std::sqrt(ss / (n - 1.0) / n);
    return s;
}

SublinearEstimate estimate_from_samples(const std::vector<std::vector<double>>& per_scenario,
                                        const std::vector<std::string>& names) {
    if (per_scenario.empty()) {
        throw Error(ErrorCode::PreconditionViolation, "scenario set is empty");
    }
    SublinearEstimate out;
    for (std::size_t s = 0; s < per_scenario.size(); ++s) {
        ScenarioStat st = sample_stat(per_scenario[s]);
        if (s < names.size()) {
            st.name = names[s];
        }
        if (s == 0 || st.mean > out.estimate) {
            out.estimate = st.mean;
            out.standard_error = st.standard_error;
            out.argmax = s;
        }
        out.per_scenario.push_back(std::move(st));
    }
    return out;
}

std::vector<std::vector<double>> sample_functional(const PathFunctional& f, const ScenarioSet& scenarios,
                                                   const Mesh& mesh, std::size_t n_paths, std::uint64_t seed) {
    if (n_paths < 2) {
        throw Error(ErrorCode::InsufficientSample, "n_paths must be at least 2");
    }
    if (scenarios.empty()) {
        throw Error(ErrorCode::PreconditionViolation, "scenario set is empty");
    }
    std::vector<std::vector<double>> out(scenarios.size(), std::vector<double>(n_paths));
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        parallel_for(n_paths, [&](std::size_t i) {
            out[s][i] = f(sample_path(scenarios[s], mesh, derive_seed(seed, s, i)));
        });
    }
    return out;
}

namespace {

std::vector<std::string> names_of(const ScenarioSet& scenarios) {
    std::vector<std::string> names;
    for (const Scenario& s : scenarios) {
        names.push_back(s.name());
    }
    return names;
}

} // namespace

SublinearEstimate sublinear_expectation(const PathFunctional& functional, const ScenarioSet& scenarios,
                                        const Mesh& mesh, std::size_t n_paths, std::uint64_t seed) {
    return estimate_from_samples(sample_functional(functional, scenarios, mesh, n_paths, seed), names_of(scenarios));
}

SublinearEstimate capacity_estimate(const PathEvent& event, const ScenarioSet& scenarios, const Mesh& mesh,
                                    std::size_t n_paths, std::uint64_t seed) {
    return sublinear_expectation([&](const GPath& p) { return event(p) ? 1.0 : 0.0; }, scenarios, mesh, n_paths,
                                 seed);
}

MarkovCheck markov_from_samples(const std::vector<std::vector<double>>& per_scenario, double p, double delta) {
    if (!(delta > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "delta must be positive");
    }
    if (!(p >= 1.0)) {
        throw Error(ErrorCode::PreconditionViolation, "p must be at least 1");
    }
    std::vector<std::vector<double>> hit(per_scenario.size()), power(per_scenario.size());
    for (std::size_t s = 0; s < per_scenario.size(); ++s) {
        for (double x : per_scenario[s]) {
            hit[s].push_back(std::abs(x) > delta ? 1.0 : 0.0);
            power[s].push_back(std::pow(std::abs(x), p));
        }
    }
    const auto cap = estimate_from_samples(hit);
    const auto ex = estimate_from_samples(power);
    MarkovCheck m;
    m.capacity = cap.estimate;
    m.capacity_se = cap.standard_error;
    m.expectation = ex.estimate;
    m.expectation_se = ex.standard_error;
    m.bound_printed = ex.estimate / delta;
    m.bound_power = ex.estimate / std::pow(delta, p);
    const double se_printed = ex.standard_error / delta;
    const double se_power = ex.standard_error / std::pow(delta, p);
    m.margin = 3.0 * std::sqrt(cap.standard_error * cap.standard_error + se_printed * se_printed);
    m.holds_printed = m.capacity <= m.bound_printed + m.margin;
    m.holds_power =
        m.capacity <= m.bound_power + 3.0 * std::sqrt(cap.standard_error * cap.standard_error + se_power * se_power);
    m.slack_printed = m.bound_printed - m.capacity;
    return m;
}

MarkovCheck check_g_markov(const PathFunctional& variable, double p, double delta, const ScenarioSet& scenarios,
                           const Mesh& mesh, std::size_t n_paths, std::uint64_t seed) {
    return markov_from_samples(sample_functional(variable, scenarios, mesh, n_paths, seed), p, delta);
}

} // namespace gsfde
