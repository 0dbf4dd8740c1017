#include "gsfde/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsfde {

namespace {

constexpr double kAbsorbTolerance = 1e-14;

void require(bool ok, ErrorCode code, const char* what) {
    if (!ok) {
        throw Error(code, what);
    }
}

} // namespace

double euclidean_norm(std::span<const double> x) noexcept {
    if (x.size() == 1) {
        return std::abs(x[0]);
    }
    double sum = 0.0;
    for (double v : x) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

// ---------------------------------------------------------------- TailModel

TailModel TailModel::zero(std::size_t dim) {
    TailModel t;
    t.kind_ = Kind::Zero;
    t.coefficient_.assign(dim, 0.0);
    return t;
}

TailModel TailModel::constant(Vector value) {
    TailModel t;
    t.kind_ = Kind::Constant;
    t.coefficient_ = std::move(value);
    return t;
}

TailModel TailModel::exponential(Vector scale, double rate) {
    require(std::isfinite(rate), ErrorCode::InvalidSegment, "tail rate must be finite");
    TailModel t;
    t.kind_ = Kind::Exponential;
    t.coefficient_ = std::move(scale);
    t.rate_ = rate;
    return t;
}

void TailModel::value_at(double a, std::span<double> out) const {
    switch (kind_) {
    case Kind::Zero:
        std::fill(out.begin(), out.end(), 0.0);
        return;
    case Kind::Constant:
        std::copy(coefficient_.begin(), coefficient_.end(), out.begin());
        return;
    case Kind::Exponential: {
        const double f = std::exp(rate_ * a);
        for (std::size_t i = 0; i < coefficient_.size(); ++i) {
            out[i] = coefficient_[i] * f;
        }
        return;
    }
    }
}

double TailModel::magnitude_at(double a) const {
    switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return euclidean_norm(coefficient_);
    case Kind::Exponential: return euclidean_norm(coefficient_) * std::exp(rate_ * a);
    }
    return 0.0;
}

bool TailModel::admissible(double q) const noexcept {
    return kind_ != Kind::Exponential || q + rate_ >= 0.0;
}

TailModel TailModel::scaled(double factor) const {
    TailModel t = *this;
    for (double& c : t.coefficient_) {
        c *= factor;
    }
    return t;
}

// ----------------------------------------------------------- HistorySegment

HistorySegment::HistorySegment(std::size_t dim, double q, double grid_step, std::vector<double> samples,
                               TailModel tail, double t_anchor, double horizon)
    : dim_(dim), q_(q), h_(grid_step), data_(std::move(samples)), tail_(std::move(tail)) {
    require(dim_ > 0, ErrorCode::InvalidSegment, "dimension must be positive");
    require(q_ > 0.0 && std::isfinite(q_), ErrorCode::InvalidSegment, "fading rate q must be positive");
    require(h_ > 0.0 && std::isfinite(h_), ErrorCode::InvalidSegment, "grid step must be positive");
    require(!data_.empty(), ErrorCode::InvalidSegment, "empty buffer");
    require(data_.size() % dim_ == 0, ErrorCode::InvalidSegment, "buffer length is not a multiple of the dimension");
    require(std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); }),
            ErrorCode::InvalidSegment, "buffer holds non-finite samples");
    if (tail_.dim() == 0 && tail_.kind() == TailModel::Kind::Zero) {
        tail_ = TailModel::zero(dim_);
    }
    require(tail_.dim() == dim_, ErrorCode::DimensionMismatch, "tail dimension differs from segment dimension");
    require(tail_.admissible(q_), ErrorCode::InvalidSegment,
            "tail grows faster than exp(-q a) into the past; weighted sup is infinite");

    const auto n = static_cast<std::int64_t>(data_.size() / dim_);
    first_ = 0;
    head_ = n - 1;
    origin_ = t_anchor - static_cast<double>(head_) * h_;
    tail_origin_ = t_anchor;
    horizon_ = horizon > 0.0 ? std::max(horizon, span()) : span();
    rebuild_max_index();
}

std::span<const double> HistorySegment::sample(std::size_t lag) const {
    require(lag < size(), ErrorCode::InvalidSegment, "lag outside the buffered window");
    return {raw(head_ - static_cast<std::int64_t>(lag)), dim_};
}

void HistorySegment::tail_value(double a, std::span<double> out) const {
    tail_.value_at(t_anchor() + a - tail_origin_, out);
}

double HistorySegment::tail_magnitude(double a) const {
    return tail_.magnitude_at(t_anchor() + a - tail_origin_);
}

void HistorySegment::value_at_delay(double delay, std::span<double> out) const {
    const auto lag = static_cast<std::int64_t>(delay / h_ + 0.5);
    if (lag <= head_ - first_) {
        const double* x = raw(head_ - lag);
        std::copy(x, x + dim_, out.begin());
    } else {
        tail_value(-delay, out);
    }
}

double HistorySegment::key_of(std::int64_t index) const {
    const double m = euclidean_norm({raw(index), dim_});
    return q_ * static_cast<double>(index) * h_ + std::log(m);
}

void HistorySegment::rebuild_max_index() {
    max_index_.clear();
    for (std::int64_t k = first_; k <= head_; ++k) {
        const double key = key_of(k);
        while (!max_index_.empty() && max_index_.back().second <= key) {
            max_index_.pop_back();
        }
        max_index_.emplace_back(k, key);
    }
}

double HistorySegment::buffer_weighted_sup() const {
    const std::int64_t k = max_index_.front().first;
    return std::exp(-q_ * static_cast<double>(head_ - k) * h_) * euclidean_norm({raw(k), dim_});
}

double HistorySegment::tail_weighted_sup() const {
    // exp(q a)|tail(a)| is nondecreasing in a for admissible tails, so the sup
    // sits at the boundary with the buffer.
    const double boundary = -span();
    return std::exp(q_ * boundary) * tail_magnitude(boundary);
}

double HistorySegment::norm() const {
    return std::max(buffer_weighted_sup(), tail_weighted_sup());
}

void HistorySegment::advance(std::span<const double> value) {
    require(value.size() == dim_, ErrorCode::DimensionMismatch, "evolve value has wrong dimension");
    data_.insert(data_.end(), value.begin(), value.end());
    ++head_;
    const double key = key_of(head_);
    while (!max_index_.empty() && max_index_.back().second <= key) {
        max_index_.pop_back();
    }
    max_index_.emplace_back(head_, key);
    absorb_expired();
}

void HistorySegment::absorb_expired() {
    if (span() <= horizon_ + 0.5 * h_) {
        return;
    }
    Vector tail_at(dim_);
    auto on_tail = [&](std::int64_t k) {
        tail_.value_at(time_of(k) - tail_origin_, tail_at);
        const double* x = raw(k);
        double diff = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double d = x[i] - tail_at[i];
            diff += d * d;
        }
        return diff == 0.0 ||
               std::exp(q_ * (time_of(k) - t_anchor())) * std::sqrt(diff) <= kAbsorbTolerance * norm();
    };
    while (span() > horizon_ + 0.5 * h_ && size() > 1) {
        const std::int64_t k = first_;
        // The interval up to the next sample must also be tail, otherwise
        // dropping k would swap its interpolant for the tail formula.
        if (!on_tail(k) || !on_tail(k + 1)) {
            break;  // keep exact samples; the window grows
        }
        if (max_index_.front().first == k) {
            max_index_.pop_front();
        }
        ++first_;
        offset_ += dim_;
    }
    if (offset_ >= 4096 && offset_ * 2 > data_.size()) {
        data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(offset_));
        offset_ = 0;
    }
}

HistorySegment evolve(HistorySegment seg, std::span<const double> new_value) {
    seg.advance(new_value);
    return seg;
}

double segment_norm(const HistorySegment& seg) {
    return seg.norm();
}

namespace {

// Tail re-expressed relative to the segment's current anchor.
TailModel anchored_tail(const HistorySegment& seg) {
    const TailModel& t = seg.tail();
    if (t.kind() != TailModel::Kind::Exponential) {
        return t;
    }
    Vector c(seg.dim());
    seg.tail_value(0.0, c);
    return TailModel::exponential(std::move(c), t.rate());
}

} // namespace

HistorySegment combine(const HistorySegment& x, double a, const HistorySegment& y, double b) {
    require(x.dim() == y.dim(), ErrorCode::DimensionMismatch, "segments differ in dimension");
    require(x.q() == y.q() && x.grid_step() == y.grid_step(), ErrorCode::InvalidSegment,
            "segments live on different grids");
    require(std::abs(x.t_anchor() - y.t_anchor()) <= 1e-9 * x.grid_step(), ErrorCode::InvalidSegment,
            "segments are anchored at different times");

    const TailModel tx = anchored_tail(x);
    const TailModel ty = anchored_tail(y);
    using Kind = TailModel::Kind;
    const std::size_t d = x.dim();
    TailModel tail;
    if (tx.kind() == Kind::Zero || a == 0.0) {
        tail = ty.scaled(b);
    } else if (ty.kind() == Kind::Zero || b == 0.0) {
        tail = tx.scaled(a);
    } else if (tx.kind() == ty.kind() && tx.rate() == ty.rate()) {
        Vector c(d);
        for (std::size_t i = 0; i < d; ++i) {
            c[i] = a * tx.coefficient()[i] + b * ty.coefficient()[i];
        }
        tail = tx.kind() == Kind::Constant ? TailModel::constant(std::move(c))
                                           : TailModel::exponential(std::move(c), tx.rate());
    } else {
        throw Error(ErrorCode::InvalidSegment, "tails from different families cannot be combined");
    }

    const std::size_t n = std::max(x.size(), y.size());
    std::vector<double> samples(n * d);
    Vector vx(d), vy(d);
    for (std::size_t lag = 0; lag < n; ++lag) {
        const double alpha = -static_cast<double>(lag) * x.grid_step();
        if (lag < x.size()) {
            std::copy_n(x.sample(lag).begin(), d, vx.begin());
        } else {
            x.tail_value(alpha, vx);
        }
        if (lag < y.size()) {
            std::copy_n(y.sample(lag).begin(), d, vy.begin());
        } else {
            y.tail_value(alpha, vy);
        }
        double* out = samples.data() + (n - 1 - lag) * d;
        for (std::size_t i = 0; i < d; ++i) {
            out[i] = a * vx[i] + b * vy[i];
        }
    }
    return HistorySegment(d, x.q(), x.grid_step(), std::move(samples), std::move(tail), x.t_anchor(),
                          std::max(x.horizon(), y.horizon()));
}

HistorySegment scaled(const HistorySegment& seg, double factor) {
    return combine(seg, factor, seg, 0.0);
}

HistorySegment operator+(const HistorySegment& x, const HistorySegment& y) {
    return combine(x, 1.0, y, 1.0);
}

HistorySegment operator-(const HistorySegment& x, const HistorySegment& y) {
    return combine(x, 1.0, y, -1.0);
}

// -------------------------------------------------------------- initial data

InitialData InitialData::constant(Vector value) {
    InitialData d;
    d.kind = Kind::Constant;
    d.value = std::move(value);
    return d;
}

InitialData InitialData::exponential_decay(Vector scale, double rate) {
    InitialData d;
    d.kind = Kind::ExponentialDecay;
    d.value = std::move(scale);
    d.rate = rate;
    return d;
}

InitialData InitialData::from_samples(std::vector<double> samples, TailModel tail) {
    InitialData d;
    d.kind = Kind::Samples;
    d.samples = std::move(samples);
    d.tail = std::move(tail);
    return d;
}

double default_buffer_horizon(double q, double max_delay) {
    require(q > 0.0, ErrorCode::PreconditionViolation, "q must be positive");
    return std::max(max_delay, std::log(1e12) / q);
}

HistorySegment from_initial_data(const InitialData& spec, double q, std::size_t dim, double grid_step,
                                 double horizon, double initial_span) {
    require(dim > 0, ErrorCode::InvalidInitialData, "dimension must be positive");
    require(grid_step > 0.0, ErrorCode::InvalidInitialData, "grid step must be positive");
    const double span = horizon > 0.0 ? horizon : default_buffer_horizon(q);
    const double sampled = initial_span >= 0.0 ? std::min(initial_span, span) : span;
    std::size_t n = static_cast<std::size_t>(std::ceil(sampled / grid_step - 1e-9)) + 1;

    auto broadcast = [dim](const Vector& v) {
        require(v.size() == dim || v.size() == 1, ErrorCode::InvalidInitialData,
                "initial value has wrong dimension");
        return v.size() == dim ? v : Vector(dim, v[0]);
    };

    TailModel tail;
    std::vector<double> samples;
    switch (spec.kind) {
    case InitialData::Kind::Constant: {
        const Vector c = broadcast(spec.value);
        tail = TailModel::constant(c);
        samples.resize(n * dim);
        for (std::size_t k = 0; k < n; ++k) {
            std::copy(c.begin(), c.end(), samples.begin() + static_cast<std::ptrdiff_t>(k * dim));
        }
        break;
    }
    case InitialData::Kind::ExponentialDecay: {
        require(spec.rate > 0.0 && std::isfinite(spec.rate), ErrorCode::InvalidInitialData,
                "exp_decay rate must be positive");
        tail = TailModel::exponential(broadcast(spec.value), spec.rate);
        samples.resize(n * dim);
        for (std::size_t lag = 0; lag < n; ++lag) {
            tail.value_at(-static_cast<double>(lag) * grid_step,
                          std::span<double>(samples.data() + (n - 1 - lag) * dim, dim));
        }
        break;
    }
    case InitialData::Kind::Samples: {
        require(!spec.samples.empty() && spec.samples.size() % dim == 0, ErrorCode::InvalidInitialData,
                "sample list must hold a positive multiple of the dimension");
        tail = spec.tail.dim() == 0 ? TailModel::zero(dim) : spec.tail;
        require(tail.dim() == dim, ErrorCode::InvalidInitialData, "tail dimension mismatch");
        if (tail.kind() == TailModel::Kind::Exponential) {
            require(tail.rate() > 0.0, ErrorCode::InvalidInitialData, "exp_decay rate must be positive");
        }
        const std::size_t m = spec.samples.size() / dim;
        n = std::max(n, m);
        samples.resize(n * dim);
        for (std::size_t lag = 0; lag < n; ++lag) {
            double* out = samples.data() + (n - 1 - lag) * dim;
            if (lag < m) {
                const double* in = spec.samples.data() + (m - 1 - lag) * dim;
                std::copy(in, in + dim, out);
            } else {
                tail.value_at(-static_cast<double>(lag) * grid_step, std::span<double>(out, dim));
            }
        }
        break;
    }
    }
    return HistorySegment(dim, q, grid_step, std::move(samples), std::move(tail), 0.0, span);
}

double history_sup(const HistorySegment& seg) {
    double sup = 0.0;
    for (std::size_t lag = 0; lag < seg.size(); ++lag) {
        sup = std::max(sup, euclidean_norm(seg.sample(lag)));
    }
    const TailModel& t = seg.tail();
    if (t.kind() == TailModel::Kind::Exponential && t.rate() < 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::max(sup, seg.tail_magnitude(-seg.span()));
}

LemmaCheck check_lemma_lf3(std::span<const double> times, std::span<const double> state_magnitudes,
                           std::span<const double> segment_norms, double zeta_norm, double q, double p,
                           double lambda, double tolerance) {
    require(p >= 1.0, ErrorCode::PreconditionViolation, "p must be at least 1");
    require(lambda < p * q, ErrorCode::PreconditionViolation, "lambda must be below p*q");
    require(times.size() == state_magnitudes.size() && times.size() == segment_norms.size(),
            ErrorCode::PreconditionViolation, "trajectory arrays differ in length");

    LemmaCheck out;
    out.min_slack = std::numeric_limits<double>::infinity();
    out.min_slack_alternate = std::numeric_limits<double>::quiet_NaN();
    const double zeta_p = std::pow(zeta_norm, p);
    double running_sup = 0.0;  // sup over 0 < s <= t
    for (std::size_t n = 0; n < times.size(); ++n) {
        if (n > 0) {
            running_sup = std::max(running_sup, std::pow(state_magnitudes[n], p));
        }
        const double lhs = std::pow(segment_norms[n], p);
        const double rhs = std::exp(-lambda * times[n]) * zeta_p + running_sup;
        const double slack = rhs - lhs;
        if (slack < out.min_slack) {
            out.min_slack = slack;
            out.worst_index = n;
        }
        if (slack < -tolerance * std::max(1.0, rhs)) {
            out.holds = false;
        }
    }
    return out;
}

} // namespace gsfde
