#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gsfde/bounds.hpp"
#include "gsfde/config.hpp"
#include "gsfde/integrator.hpp"

namespace gsfde {

struct VerdictRow {
    double t = 0.0;
    double empirical = 0.0;
    double standard_error = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::string label;  // scenario or check attaining the row
};

struct Verdict {
    std::string name;
    enum class Status { Pass, Fail, Skipped } status = Status::Skipped;
    std::vector<VerdictRow> rows;
    std::vector<std::string> notes;

    bool passed() const noexcept { return status == Status::Pass; }
    const char* status_text() const noexcept;
    /// Largest empirical / bound over rows with a positive bound.
    double worst_ratio() const;

    /// Columns t, empirical, SE, bound, pass, label.
    void write_csv(std::ostream& os) const;
};

/// Recomputes every verdict from a config. Sweeps shared by several
/// experiments (second moments and segment norms; coupled pairs) run once and
/// are cached.
class ExperimentSession {
public:
    explicit ExperimentSession(Config config);

    const Config& config() const noexcept { return config_; }
    const CoefficientSet& coefficients() const noexcept { return coefficients_; }
    const BoundReport& bounds() const noexcept { return report_; }
    /// True when the mean-square and map windows are all feasible.
    bool feasible() const noexcept;
    /// Names of the violated conditions, empty when feasible.
    std::vector<std::string> violations() const;

    SimConfig sim_config(double horizon, std::size_t stride) const;

    Verdict run(const std::string& name);
    Verdict run_ms_bound();
    Verdict run_pair_convergence();
    Verdict run_map_bound();
    Verdict run_map_convergence();
    Verdict run_l2_estimate();
    Verdict run_lyapunov();
    Verdict run_markov();
    Verdict run_lemmas();
    Verdict run_truncation();
    Verdict run_nonexplosion();

    /// Every enabled experiment in order; disabled ones come back Skipped.
    std::vector<Verdict> run_all();

    /// CSV dumps trajectory_<i>.csv of the first n sweep paths of scenario 0.
    void write_trajectories(const std::filesystem::path& dir, std::size_t n) const;

    /// Optional progress sink (experiment name, message).
    std::function<void(const std::string&)> log;

private:
    struct ProbeStats {
        std::vector<double> times;
        // [scenario][probe] -> per-path values
        std::vector<std::vector<std::vector<double>>> a, b, c;
    };

    const ProbeStats& moment_sweep();
    const ProbeStats& pair_sweep();
    Verdict refuse(const std::string& name, const std::string& why) const;
    void say(const std::string& msg) const;
    std::vector<double> probe_times() const;

    Config config_;
    CoefficientSet coefficients_;
    BoundInputs inputs_;
    BoundReport report_;
    double zeta_norm_sq_ = 0.0;
    double x0_sq_ = 0.0;
    double diff_norm_sq_ = 0.0;  // ||zeta - xi||_q^2
    double zeta_sup_sq_ = 0.0;   // sup over the history of |zeta|^2
    std::optional<ProbeStats> moments_;
    std::optional<ProbeStats> pairs_;
};

/// Writes summary.txt, bounds.csv and one CSV per verdict into `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentSession& session,
                   const std::vector<Verdict>& verdicts);

/// The verdict table as printed in summary.txt.
std::string verdict_table(const std::vector<Verdict>& verdicts);

} // namespace gsfde
