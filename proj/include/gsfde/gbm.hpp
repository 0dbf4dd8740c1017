#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gsfde/error.hpp"

namespace gsfde {

/// Volatility interval [sigma_lo, sigma_hi] of the driving G-Brownian motion.
struct VolatilityBand {
    double sigma_lo = 0.0;
    double sigma_hi = 1.0;

    VolatilityBand() = default;
    VolatilityBand(double lo, double hi);

    double clamp(double sigma) const noexcept;
    bool contains(double sigma) const noexcept { return sigma >= sigma_lo && sigma <= sigma_hi; }
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;
/// Independent seed for (scenario, path, stream) under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t scenario, std::uint64_t path,
                          std::uint64_t stream = 0) noexcept;

/// Per-path random source: one stream for the Gaussian noise and one for
/// randomized controls, so adding a random control leaves the noise intact.
class PathRng {
public:
    explicit PathRng(std::uint64_t seed);

    double normal() { return normal_(noise_); }
    double uniform() { return uniform_(control_); }

private:
    std::mt19937_64 noise_;
    std::mt19937_64 control_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Adapted volatility rule sigma_n = control(step, state).
struct Control {
    enum class Kind { Constant, Switching, Feedback, Random };

    Kind kind = Kind::Constant;
    double sigma_a = 1.0;    // Constant value; Switching first level; Feedback level at or below threshold
    double sigma_b = 1.0;    // Switching second level; Feedback level above threshold
    double period = 1.0;     // Switching: time spent on each level
    double threshold = 1.0;  // Feedback: switches on |state| > threshold

    static Control constant(double sigma);
    static Control switching(double sigma_a, double sigma_b, double period);
    static Control feedback(double threshold, double sigma_below, double sigma_above);
    static Control random();
};

/// One measure in the family: a band and a control that stays inside it.
class Scenario {
public:
    Scenario(std::string name, VolatilityBand band, Control control);

    const std::string& name() const noexcept { return name_; }
    const VolatilityBand& band() const noexcept { return band_; }
    const Control& control() const noexcept { return control_; }

    /// Volatility for step n of size dt; `feedback_abs` is the observed
    /// magnitude the feedback rule reacts to.
    double sigma(std::size_t step, double dt, double feedback_abs, PathRng& rng) const;

private:
    std::string name_;
    VolatilityBand band_;
    Control control_;
};

using ScenarioSet = std::vector<Scenario>;

/// `levels` constant controls evenly spaced over the band (one if the band is degenerate).
ScenarioSet constant_grid(const VolatilityBand& band, std::size_t levels = 5);

struct Mesh {
    double dt = 1e-3;
    std::size_t steps = 1000;

    /// Throws PreconditionViolation unless dt divides horizon.
    static Mesh from_horizon(double horizon, double dt);
    double horizon() const noexcept { return dt * static_cast<double>(steps); }
};

struct GPath {
    double dt = 0.0;
    std::vector<double> sigma;  // per step
    std::vector<double> dB;     // sigma * sqrt(dt) * xi
    std::vector<double> dqv;    // sigma^2 * dt
    std::vector<double> B;      // steps + 1 entries, B[0] = 0
    std::vector<double> qv;     // steps + 1 entries, qv[0] = 0

    double terminal() const noexcept { return B.back(); }
};

/// Feedback controls react to |B| here since there is no state process.
GPath sample_path(const Scenario& scenario, const Mesh& mesh, std::uint64_t seed);

struct ScenarioStat {
    std::string name;
    double mean = 0.0;
    double standard_error = 0.0;
};

struct SublinearEstimate {
    double estimate = 0.0;        // max over scenarios of the sample mean
    double standard_error = 0.0;  // of the maximizing scenario
    std::size_t argmax = 0;
    std::vector<ScenarioStat> per_scenario;
};

using PathFunctional = std::function<double(const GPath&)>;
using PathEvent = std::function<bool(const GPath&)>;

/// Paths for scenario s, path i use derive_seed(seed, s, i), so two calls
/// with the same seed see the same paths.
SublinearEstimate sublinear_expectation(const PathFunctional& functional, const ScenarioSet& scenarios,
                                        const Mesh& mesh, std::size_t n_paths, std::uint64_t seed);
SublinearEstimate capacity_estimate(const PathEvent& event, const ScenarioSet& scenarios, const Mesh& mesh,
                                    std::size_t n_paths, std::uint64_t seed);

/// values[s][i] = functional of path i under scenario s, seeded as above.
std::vector<std::vector<double>> sample_functional(const PathFunctional& functional, const ScenarioSet& scenarios,
                                                   const Mesh& mesh, std::size_t n_paths, std::uint64_t seed);
/// Max over scenarios of the sample mean of already drawn values.
SublinearEstimate estimate_from_samples(const std::vector<std::vector<double>>& per_scenario,
                                        const std::vector<std::string>& names = {});

/// Mean and standard error of the mean.
ScenarioStat sample_stat(const std::vector<double>& values);

struct MarkovCheck {
    double capacity = 0.0;        // C(|X| > delta)
    double capacity_se = 0.0;
    double expectation = 0.0;     // E[|X|^p]
    double expectation_se = 0.0;
    double bound_printed = 0.0;   // E[|X|^p] / delta
    double bound_power = 0.0;     // E[|X|^p] / delta^p
    double margin = 0.0;          // 3 combined standard errors for the printed form
    bool holds_printed = false;
    bool holds_power = false;     // reported, not asserted
    double slack_printed = 0.0;
};

/// Markov check on values of the variable already drawn per scenario.
MarkovCheck markov_from_samples(const std::vector<std::vector<double>>& per_scenario, double p, double delta);

MarkovCheck check_g_markov(const PathFunctional& variable, double p, double delta, const ScenarioSet& scenarios,
                           const Mesh& mesh, std::size_t n_paths, std::uint64_t seed);

} // namespace gsfde
