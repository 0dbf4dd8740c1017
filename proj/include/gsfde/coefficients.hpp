#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gsfde/measures.hpp"
#include "gsfde/phase_space.hpp"

namespace gsfde {

/// F(psi) = -a psi(0) + b * integral psi dmu + offset.
struct LinearFunctional {
    double a = 0.0;
    double b = 0.0;
    Vector offset;
    DelayMeasure measure;
};

Vector eval(const LinearFunctional& f, const HistorySegment& seg);

/// Constants of the one-sided conditions on g, h and gamma.
struct A1Certificate {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;
    double lambda5 = 0.0;
    DelayMeasure mu1;
    DelayMeasure mu2;
    DelayMeasure mu3;
};

struct CoefficientSet {
    std::size_t dim = 1;
    LinearFunctional drift;      // g
    LinearFunctional qv_drift;   // h
    LinearFunctional diffusion;  // gamma
    A1Certificate certificate;
};

struct LinearParams {
    std::size_t dim = 1;
    double a_g = 0.0, b_g = 0.0;
    double a_h = 0.0, b_h = 0.0;
    double a_gamma = 0.0, b_gamma = 0.0;
    Vector c_g, c_h, c_gamma;  // empty means zero
    DelayMeasure mu_g, mu_h, mu_gamma;
};

/// Young's inequality gives lambda1 = a_g - |b_g|/2, lambda2 = |b_g|/2 (same
/// for h); Jensen gives lambda5 = b_gamma^2. Rejects negative constants, a
/// head term in gamma, and a_g <= |b_g|/2 with b_g != 0 (same for h).
CoefficientSet build_linear_set(const LinearParams& params);

/// Draws a segment from the verification family: constant + exponential decay
/// + grid noise, optional spikes at `spike_delays`, rescaled to a norm in (0, max_norm].
struct SegmentFamily {
    TailModel::Kind tail = TailModel::Kind::Constant;
    double rate = 1.0;  // exponential tails only
};
HistorySegment random_segment(std::mt19937_64& rng, std::size_t dim, double q, double grid_step, double horizon,
                              const SegmentFamily& family, const std::vector<double>& spike_delays,
                              double max_norm = 10.0);

struct A1Report {
    std::size_t trials = 0;
    double max_c1 = 0.0;  // max of LHS - RHS
    double max_c2 = 0.0;
    double max_c3 = 0.0;
    double tolerance = 1e-8;
    bool pass = false;
};

A1Report verify_a1(const CoefficientSet& set, double q, double grid_step, std::size_t n_trials,
                   std::uint64_t seed, double tolerance = 1e-8);

struct GlobalReport {
    double empirical_L = 0.0;  // max |F(psi)-F(phi)|^2 / ||psi-phi||^2
    double empirical_K = 0.0;  // max |F(phi)|^2 / (1 + ||phi||^2)
    double analytic_L = 0.0;   // max over F of (a + |b| mu^(q))^2
    double analytic_K = 0.0;   // max(2|offset|^2, 2 L)
};

GlobalReport verify_global_conditions(const CoefficientSet& set, double q, double grid_step, std::size_t n_trials,
                                      std::uint64_t seed);

/// F_m(phi) = F(phi) on the m-ball, F(m phi / ||phi||) outside.
Vector eval_truncated(const LinearFunctional& f, const HistorySegment& seg, double m);

/// The truncated coefficients as a set.
struct TruncatedSet {
    CoefficientSet inner;
    double level = 1.0;
};

TruncatedSet truncate(const CoefficientSet& set, double m);

/// Evaluates g, h and gamma along an evolving segment, keeping density
/// integrals current in O(1) per step.
class CoefficientEvaluator {
public:
    CoefficientEvaluator(const CoefficientSet& set, const HistorySegment& initial,
                         std::optional<double> truncation = std::nullopt);

    void advance(const HistorySegment& seg, std::span<const double> previous_head);
    void evaluate(const HistorySegment& seg, std::span<double> g, std::span<double> h, std::span<double> gamma);

private:
    void apply(const LinearFunctional& f, std::size_t slot, const HistorySegment& seg, double scale,
               std::span<double> out);

    const CoefficientSet* set_;
    std::optional<double> truncation_;
    // Functionals sharing a measure share a tracker.
    std::vector<DelayIntegralTracker> trackers_;
    std::size_t slot_[3] = {0, 0, 0};
    std::vector<Vector> integrals_;
    std::vector<char> fresh_;
};

} // namespace gsfde
