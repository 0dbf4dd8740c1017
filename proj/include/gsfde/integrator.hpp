#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsfde/coefficients.hpp"
#include "gsfde/gbm.hpp"
#include "gsfde/phase_space.hpp"

namespace gsfde {

struct SimConfig {
    double horizon = 1.0;
    double dt = 1e-3;
    std::size_t dim = 1;
    double q = 1.0;
    CoefficientSet coefficients;
    InitialData initial = InitialData::constant({1.0});
    std::optional<double> exit_level;  // halt at the first grid time with |X| > level
    std::size_t record_stride = 1;
    double buffer_horizon = 0.0;       // 0: default_buffer_horizon(q, longest atom delay)
    bool record_noise = false;         // keep per-step sigma and d<B>
};

/// Throws PreconditionViolation when the step is coarser than 1e-3, does not
/// divide the horizon, or some atom delay is not a multiple of it.
void validate(const SimConfig& config);

HistorySegment initial_segment(const SimConfig& config, const InitialData& data);

struct TrajectoryRecord {
    std::size_t dim = 1;
    std::vector<double> times;
    std::vector<double> states;         // flattened, dim per recorded time
    std::vector<double> segment_norms;  // ||X_t||_q at recorded times
    double max_abs = 0.0;               // max over every grid time of |X(t_n)|
    std::vector<double> running_max;    // max of |X| over grid times up to each recorded time
    std::optional<double> exit_time;
    std::size_t steps_taken = 0;
    std::vector<double> sigma;          // per step, with record_noise
    std::vector<double> qv_increments;  // per step, with record_noise
    std::string scenario;
    std::size_t scenario_id = 0;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, dim}; }
    double magnitude(std::size_t k) const { return euclidean_norm(state(k)); }

    /// Columns t, x0..x{d-1}, segment_norm, scenario_id, seed.
    void write_csv(std::ostream& os) const;
    /// Raw little-endian doubles for exact comparison of coupled runs.
    void write_binary(std::ostream& os) const;
};

class BlowupError : public Error {
public:
    BlowupError(std::size_t step, std::shared_ptr<TrajectoryRecord> partial);
    std::size_t step() const noexcept { return step_; }
    const TrajectoryRecord& partial() const noexcept { return *partial_; }

private:
    std::size_t step_;
    std::shared_ptr<TrajectoryRecord> partial_;
};

/// X_next = X(t) + g dt + h sigma^2 dt + gamma dW. Throws BlowupError
/// (without a partial record) when the result is not finite.
Vector step(const HistorySegment& seg, const CoefficientSet& coeffs, double sigma, double dW, double dt,
            std::size_t step_index = 0);

TrajectoryRecord simulate(const SimConfig& config, const Scenario& scenario, std::uint64_t seed);

struct PairRecord {
    TrajectoryRecord first;
    TrajectoryRecord second;
    std::vector<double> difference_norms;  // ||X_t - Y_t||_q at recorded times
};

/// Two solutions from zeta and xi driven by the same sigma_n and xi_n.
/// Feedback controls observe the first solution.
PairRecord simulate_pair(const SimConfig& config, const InitialData& zeta, const InitialData& xi,
                         const Scenario& scenario, std::uint64_t seed);

struct TruncationRecord {
    TrajectoryRecord untruncated;
    TrajectoryRecord truncated;
    std::optional<double> exit_time;       // first grid time with ||X_t||_q > m
    double max_deviation_before_exit = 0.0;
    double max_deviation = 0.0;
};

TruncationRecord simulate_truncated(const SimConfig& config, double m, const Scenario& scenario,
                                    std::uint64_t seed);

LemmaCheck check_lemma_lf3(const TrajectoryRecord& record, double zeta_norm, double q, double p, double lambda,
                           double tolerance = 1e-9);
/// The record must hold every grid step (stride 1) and no exit.
LemmaCheck check_lemma_lf2(const TrajectoryRecord& record, const HistorySegment& zeta, const DelayMeasure& mu,
                           double p, double lambda, Lf2Variant variant, double tolerance = 1e-6);

} // namespace gsfde
