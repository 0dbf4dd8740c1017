#pragma once

#include <span>
#include <cstdint>
#include <string>
#include <vector>

#include "gsfde/phase_space.hpp"

namespace gsfde {

/// Mass `weight` at a = -delay.
struct Atom {
    double delay = 0.0;
    double weight = 1.0;
};

/// Density weight * rate * exp(rate * a) on (-inf, 0].
struct ExpDensity {
    double rate = 1.0;
    double weight = 1.0;
};

/// Probability measure on (-inf, 0] made of atoms and exponential densities.
class DelayMeasure {
public:
    DelayMeasure() : DelayMeasure({Atom{0.0, 1.0}}, {}) {}
    DelayMeasure(std::vector<Atom> atoms, std::vector<ExpDensity> densities, std::string name = {});

    static DelayMeasure point_mass(double delay, std::string name = {});
    static DelayMeasure exponential(double rate, std::string name = {});

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const std::vector<ExpDensity>& densities() const noexcept { return densities_; }
    const std::string& name() const noexcept { return name_; }

    double max_atom_delay() const noexcept;
    /// True when every density rate exceeds m.
    bool in_class(double m) const noexcept;
    /// Same atoms and densities, names ignored.
    bool same_law(const DelayMeasure& other) const noexcept;

private:
    std::vector<Atom> atoms_;
    std::vector<ExpDensity> densities_;
    std::string name_;
};

/// mu^(m) = integral of exp(-m a) mu(da). Throws NotInClass when some rate <= m.
double moment(const DelayMeasure& mu, double m);

/// Integral of the segment against mu. Atoms use the nearest grid sample
/// (tail beyond the buffer); densities integrate the piecewise-linear
/// interpolant of the buffer exactly against the kernel, plus the tail in
/// closed form.
Vector integrate_segment(const DelayMeasure& mu, const HistorySegment& seg);
/// Same rule applied to |x(a)|^p.
double integrate_segment_power(const DelayMeasure& mu, const HistorySegment& seg, double p);

/// Running value of the density part of integrate_segment while a segment
/// evolves, in O(1) per step. Atoms are not tracked (they are cheap lookups).
class DelayIntegralTracker {
public:
    enum class Mode { Vector, Power };

    DelayIntegralTracker() = default;
    DelayIntegralTracker(const DelayMeasure& mu, const HistorySegment& seg, Mode mode = Mode::Vector,
                         double p = 2.0);

    /// Call after each evolve with the new segment and the head it replaced.
    void advance(const HistorySegment& seg, std::span<const double> previous_head);

    /// Full integral (atoms + densities) for the current segment.
    void value(const HistorySegment& seg, std::span<double> out) const;
    double power_value(const HistorySegment& seg) const;

    bool has_densities() const noexcept { return !terms_.empty(); }

private:
    struct Term {
        double weight;
        double decay;  // exp(-rate h)
        double left;   // weight of the older endpoint in the newest interval
        double right;  // weight of the newer endpoint
        Vector sum;    // Vector mode: dim entries; Power mode: one entry
    };

    Mode mode_ = Mode::Vector;
    double p_ = 2.0;
    std::vector<Atom> atoms_;
    std::vector<std::int64_t> lags_;  // atom delays in grid steps
    std::vector<Term> terms_;
};

enum class Lf2Variant { Plain, Exponential };

/// Pathwise check of the delay-integral inequality for a trajectory recorded
/// at every grid step from `zeta`. `states` is flattened (n_times x dim), with
/// states[0] = zeta(0). min_slack uses the mu^(pq)/(pq) and mu^(pq)/(pq-lambda)
/// constants; min_slack_alternate uses mu^(2q)/(2q) and mu^(pq)/(2q-lambda).
LemmaCheck check_lemma_lf2(const HistorySegment& zeta, std::span<const double> states, const DelayMeasure& mu,
                           double p, double lambda, Lf2Variant variant, double tolerance = 1e-6);

} // namespace gsfde
