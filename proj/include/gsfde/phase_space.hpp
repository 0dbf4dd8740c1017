#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "gsfde/error.hpp"

namespace gsfde {

using Vector = std::vector<double>;

double euclidean_norm(std::span<const double> x) noexcept;

/// Closed-form description of a history on the part of (-inf, 0] that is not
/// sampled. Coordinates are relative to the tail's own origin: value(a) is
/// `coefficient * exp(rate * a)` for the exponential variant.
class TailModel {
public:
    enum class Kind { Zero, Constant, Exponential };

    TailModel() = default;

    static TailModel zero(std::size_t dim);
    static TailModel constant(Vector value);
    /// c * exp(rate * a). A positive rate decays into the past.
    static TailModel exponential(Vector scale, double rate);

    Kind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return coefficient_.size(); }
    const Vector& coefficient() const noexcept { return coefficient_; }
    double rate() const noexcept { return rate_; }

    void value_at(double a, std::span<double> out) const;
    double magnitude_at(double a) const;

    /// True when exp(q a)|value(a)| stays bounded as a -> -inf.
    bool admissible(double q) const noexcept;

    TailModel scaled(double factor) const;

private:
    Kind kind_ = Kind::Zero;
    Vector coefficient_;
    double rate_ = 0.0;
};

/// Finite encoding of an element of the fading-memory space: uniformly spaced
/// samples on [-span, 0] (most recent last) and a closed-form tail beyond.
///
/// The segment is a value. `evolve` returns the shifted segment; pass it an
/// rvalue to reuse the storage.
class HistorySegment {
public:
    /// `samples` holds `dim` doubles per grid point, oldest first. The tail is
    /// expressed relative to `t_anchor` (its a = 0 is the anchor time).
    /// `horizon` is the span the buffer tries to keep when evolving; 0 keeps
    /// the initial span.
    HistorySegment(std::size_t dim, double q, double grid_step, std::vector<double> samples,
                   TailModel tail, double t_anchor = 0.0, double horizon = 0.0);

    std::size_t dim() const noexcept { return dim_; }
    double q() const noexcept { return q_; }
    double grid_step() const noexcept { return h_; }
    double t_anchor() const noexcept { return origin_ + static_cast<double>(head_) * h_; }
    double horizon() const noexcept { return horizon_; }

    /// Number of buffered grid points.
    std::size_t size() const noexcept { return static_cast<std::size_t>(head_ - first_ + 1); }
    /// Length of the sampled window, (size - 1) * grid_step.
    double span() const noexcept { return static_cast<double>(size() - 1) * h_; }

    /// Sample `lag` grid steps before the anchor (lag 0 is the head X(t)).
    std::span<const double> sample(std::size_t lag) const;
    std::span<const double> head() const { return sample(0); }

    const TailModel& tail() const noexcept { return tail_; }
    /// Tail value at offset a (<= 0) from the current anchor.
    void tail_value(double a, std::span<double> out) const;
    double tail_magnitude(double a) const;

    /// Value at offset -delay: nearest grid point inside the buffer, tail otherwise.
    void value_at_delay(double delay, std::span<double> out) const;
    /// Same, with the lag already rounded to grid steps.
    void value_at_lag(std::int64_t lag, double delay, std::span<double> out) const {
        if (lag <= head_ - first_) {
            const double* x = raw(head_ - lag);
            std::copy(x, x + dim_, out.begin());
        } else {
            tail_value(-delay, out);
        }
    }

    /// sup over buffer grid points of exp(q a)|x(a)|.
    double buffer_weighted_sup() const;
    /// Closed-form sup over the tail region.
    double tail_weighted_sup() const;
    double norm() const;

    /// In-place form of evolve, for hot loops that own the segment.
    void advance(std::span<const double> new_value);

private:
    double time_of(std::int64_t index) const noexcept { return origin_ + static_cast<double>(index) * h_; }
    const double* raw(std::int64_t index) const noexcept {
        return data_.data() + offset_ + static_cast<std::size_t>(index - first_) * dim_;
    }
    double key_of(std::int64_t index) const;
    void rebuild_max_index();
    void absorb_expired();

    std::size_t dim_ = 1;
    double q_ = 1.0;
    double h_ = 1e-3;
    double horizon_ = 0.0;

    // Sample with absolute index k sits at time origin_ + k * h_.
    double origin_ = 0.0;
    std::int64_t first_ = 0;
    std::int64_t head_ = 0;
    std::vector<double> data_;
    std::size_t offset_ = 0;

    TailModel tail_;
    double tail_origin_ = 0.0;  // absolute time of the tail's a = 0

    // Indices with strictly decreasing weighted magnitude; front is the sup.
    std::deque<std::pair<std::int64_t, double>> max_index_;
};

double segment_norm(const HistorySegment& seg);

HistorySegment evolve(HistorySegment seg, std::span<const double> new_value);

/// a*x + b*y for segments on the same grid, anchor and tail family.
HistorySegment combine(const HistorySegment& x, double a, const HistorySegment& y, double b);
HistorySegment scaled(const HistorySegment& seg, double factor);
HistorySegment operator+(const HistorySegment& x, const HistorySegment& y);
HistorySegment operator-(const HistorySegment& x, const HistorySegment& y);

/// Parametric initial histories accepted by the simulator.
struct InitialData {
    enum class Kind { Constant, ExponentialDecay, Samples };

    Kind kind = Kind::Constant;
    Vector value;               // constant value, or scale of c*exp(rate*a)
    double rate = 0.0;          // ExponentialDecay only, must be > 0
    std::vector<double> samples; // Samples: flattened, oldest first, ending at a = 0
    TailModel tail;             // Samples: history older than the oldest sample

    static InitialData constant(Vector value);
    static InitialData exponential_decay(Vector scale, double rate);
    static InitialData from_samples(std::vector<double> samples, TailModel tail);
};

/// Larger of the longest atom delay and the lag at which exp(-q lag) < 1e-12.
double default_buffer_horizon(double q, double max_delay = 0.0);

/// `horizon` is the span kept while evolving. `initial_span` (default: the
/// horizon) is how much of the history is sampled up front; the tail covers
/// the rest exactly for every supported form.
HistorySegment from_initial_data(const InitialData& spec, double q, std::size_t dim, double grid_step,
                                 double horizon = 0.0, double initial_span = -1.0);

/// Sup over (-inf, 0] of |zeta(a)| (unweighted); +inf when the tail grows into the past.
double history_sup(const HistorySegment& seg);

struct LemmaCheck {
    bool holds = true;
    double min_slack = 0.0;          // min over grid times of RHS - LHS
    std::size_t worst_index = 0;
    double min_slack_alternate = 0.0; // variant with the printed statement's constants, when one exists
};

/// Pathwise check of ||X_t||^p <= exp(-lambda t)||zeta||^p + sup_{0<s<=t}|X(s)|^p.
/// times[0] must be 0; state_magnitudes and segment_norms are |X(t_n)| and ||X_{t_n}||.
LemmaCheck check_lemma_lf3(std::span<const double> times, std::span<const double> state_magnitudes,
                           std::span<const double> segment_norms, double zeta_norm, double q, double p,
                           double lambda, double tolerance = 1e-9);

} // namespace gsfde
