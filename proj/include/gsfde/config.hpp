#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gsfde/bounds.hpp"
#include "gsfde/coefficients.hpp"
#include "gsfde/gbm.hpp"
#include "gsfde/phase_space.hpp"

namespace gsfde {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"ms_bound", "pair_convergence", "map_bound", "map_convergence",
                                                   "l2_estimate", "lyapunov", "markov", "lemmas",
                                                   "truncation", "nonexplosion"};
    return names;
}

struct ExperimentSettings {
    std::uint64_t seed = 20240601;
    std::size_t paths = 10000;  // per scenario, for the moment and pair sweeps
    std::vector<double> checkpoints = {0.5, 1.0, 2.0, 5.0, 10.0};
    std::map<std::string, bool> enabled;

    double lyapunov_horizon = 20.0;
    std::size_t lyapunov_paths = 1000;

    std::vector<double> nonexplosion_levels = {2.0, 4.0, 8.0, 16.0};
    double nonexplosion_horizon = 5.0;

    std::size_t lemma_trajectories = 100;
    double lemma_horizon = 2.0;

    std::size_t truncation_seeds = 100;
    double truncation_horizon = 2.0;

    std::size_t markov_paths = 20000;

    std::size_t dump_trajectories = 0;  // CSV dumps of the first paths of scenario 0

    bool is_enabled(const std::string& name) const;
};

struct Config {
    std::size_t dim = 1;
    double q = 1.0;
    double dt = 1e-3;
    double horizon = 10.0;

    std::map<std::string, DelayMeasure> measures;
    LinearParams params;
    InitialData zeta = InitialData::constant({1.0});
    InitialData xi = InitialData::constant({0.0});

    VolatilityBand band{0.3, 0.6};
    ScenarioSet scenarios;

    AuxConstants aux;
    ExperimentSettings experiments;

    std::string source = "<built-in>";
};

/// The bundled configuration, identical to configs/default.json.
Config default_config();

/// Throws ConfigError with line and column for syntax errors and the dotted
/// field path for schema errors. Missing fields keep their defaults.
Config parse_config(const std::string& text, const std::string& source = "<string>");
Config load_config(const std::filesystem::path& path);

} // namespace gsfde
