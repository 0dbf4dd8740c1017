#include "gsfde/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gsfde {

namespace {

constexpr double kMassTolerance = 1e-12;

std::string describe(const char* kind, std::size_t index, const std::string& measure) {
    std::ostringstream os;
    os << kind << "[" << index << "]";
    if (!measure.empty()) {
        os << " of measure '" << measure << "'";
    }
    return os.str();
}

// Weights of the older (left) and newer (right) endpoint when a linear
// interpolant on an interval of length h is integrated against rate*exp(rate*u),
// u in [0, h].
struct IntervalWeights {
    double left;
    double right;
};

IntervalWeights interval_weights(double rate, double h) {
    const double x = rate * h;
    const double e = std::expm1(x);
    const double ratio = e / x;
    return {ratio - 1.0, (1.0 + e) - ratio};
}

// Buffer part of the density integral; f(lag, out) fills the integrand at a
// grid lag (out has `width` entries).
template <class F>
void buffer_integral(const HistorySegment& seg, double rate, std::size_t width, F&& f, std::span<double> acc) {
    const double h = seg.grid_step();
    const auto [left, right] = interval_weights(rate, h);
    const double step_decay = std::exp(-rate * h);
    Vector newer(width), older(width);
    f(0, std::span<double>(newer));
    double decay = step_decay;
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
        f(i + 1, std::span<double>(older));
        for (std::size_t j = 0; j < width; ++j) {
            acc[j] += decay * (left * older[j] + right * newer[j]);
        }
        std::swap(newer, older);
        decay *= step_decay;
    }
}

// Integral over a <= -span of tail(a)^p * rate*exp(rate*a), p = 1 for the
// vector version.
double tail_factor(const HistorySegment& seg, double rate, double p) {
    const TailModel& tail = seg.tail();
    const double a_b = -seg.span();
    const double base = std::exp(rate * a_b);
    switch (tail.kind()) {
    case TailModel::Kind::Zero: return 0.0;
    case TailModel::Kind::Constant: return base;
    case TailModel::Kind::Exponential: {
        const double denom = rate + p * tail.rate();
        if (denom <= 0.0) {
            throw Error(ErrorCode::NotInClass, "density rate too small for the segment's tail growth");
        }
        return base * rate / denom;
    }
    }
    return 0.0;
}

} // namespace

DelayMeasure::DelayMeasure(std::vector<Atom> atoms, std::vector<ExpDensity> densities, std::string name)
    : atoms_(std::move(atoms)), densities_(std::move(densities)), name_(std::move(name)) {
    if (atoms_.empty() && densities_.empty()) {
        throw Error(ErrorCode::InvalidMeasure, "measure has no atoms and no densities");
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const Atom& a = atoms_[i];
        if (!(a.delay >= 0.0) || !std::isfinite(a.delay)) {
            throw Error(ErrorCode::InvalidMeasure, describe("atom", i, name_) + " has negative or non-finite tau");
        }
        if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
            throw Error(ErrorCode::InvalidMeasure, describe("atom", i, name_) + " has non-positive weight");
        }
        mass += a.weight;
    }
    for (std::size_t i = 0; i < densities_.size(); ++i) {
        const ExpDensity& d = densities_[i];
        if (!(d.rate > 0.0) || !std::isfinite(d.rate)) {
            throw Error(ErrorCode::InvalidMeasure, describe("density", i, name_) + " has non-positive rho");
        }
        if (!(d.weight > 0.0) || !std::isfinite(d.weight)) {
            throw Error(ErrorCode::InvalidMeasure, describe("density", i, name_) + " has non-positive weight");
        }
        mass += d.weight;
    }
    if (std::abs(mass - 1.0) > kMassTolerance) {
        std::ostringstream os;
        os << "total mass " << mass << " is not 1";
        if (!name_.empty()) {
            os << " for measure '" << name_ << "'";
        }
        throw Error(ErrorCode::InvalidMeasure, os.str());
    }
}

DelayMeasure DelayMeasure::point_mass(double delay, std::string name) {
    return DelayMeasure({Atom{delay, 1.0}}, {}, std::move(name));
}

DelayMeasure DelayMeasure::exponential(double rate, std::string name) {
    return DelayMeasure({}, {ExpDensity{rate, 1.0}}, std::move(name));
}

double DelayMeasure::max_atom_delay() const noexcept {
    double m = 0.0;
    for (const Atom& a : atoms_) {
        m = std::max(m, a.delay);
    }
    return m;
}

bool DelayMeasure::in_class(double m) const noexcept {
    for (const ExpDensity& d : densities_) {
        if (d.rate <= m) {
            return false;
        }
    }
    return true;
}

bool DelayMeasure::same_law(const DelayMeasure& other) const noexcept {
    auto atoms_eq = [](const Atom& a, const Atom& b) { return a.delay == b.delay && a.weight == b.weight; };
    auto dens_eq = [](const ExpDensity& a, const ExpDensity& b) { return a.rate == b.rate && a.weight == b.weight; };
    return std::equal(atoms_.begin(), atoms_.end(), other.atoms_.begin(), other.atoms_.end(), atoms_eq) &&
           std::equal(densities_.begin(), densities_.end(), other.densities_.begin(), other.densities_.end(),
                      dens_eq);
}

double moment(const DelayMeasure& mu, double m) {
    if (!(m >= 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "moment order must be nonnegative");
    }
    double total = 0.0;
    for (const Atom& a : mu.atoms()) {
        total += a.weight * std::exp(m * a.delay);
    }
    for (std::size_t i = 0; i < mu.densities().size(); ++i) {
        const ExpDensity& d = mu.densities()[i];
        if (d.rate <= m) {
            std::ostringstream os;
            os << describe("density", i, mu.name()) << " has rho = " << d.rate << " <= m = " << m;
            throw Error(ErrorCode::NotInClass, os.str());
        }
        total += d.weight * d.rate / (d.rate - m);
    }
    return total;
}

Vector integrate_segment(const DelayMeasure& mu, const HistorySegment& seg) {
    const std::size_t dim = seg.dim();
    Vector out(dim, 0.0), tmp(dim);
    for (const Atom& a : mu.atoms()) {
        seg.value_at_delay(a.delay, tmp);
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] += a.weight * tmp[j];
        }
    }
    for (const ExpDensity& d : mu.densities()) {
        Vector acc(dim, 0.0);
        buffer_integral(seg, d.rate, dim,
                        [&](std::size_t lag, std::span<double> v) {
                            const auto s = seg.sample(lag);
                            std::copy(s.begin(), s.end(), v.begin());
                        },
                        acc);
        const double tf = tail_factor(seg, d.rate, 1.0);
        if (tf != 0.0) {
            seg.tail_value(-seg.span(), tmp);
            for (std::size_t j = 0; j < dim; ++j) {
                acc[j] += tf * tmp[j];
            }
        }
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] += d.weight * acc[j];
        }
    }
    return out;
}

double integrate_segment_power(const DelayMeasure& mu, const HistorySegment& seg, double p) {
    const std::size_t dim = seg.dim();
    double out = 0.0;
    Vector tmp(dim);
    for (const Atom& a : mu.atoms()) {
        seg.value_at_delay(a.delay, tmp);
        out += a.weight * std::pow(euclidean_norm(tmp), p);
    }
    for (const ExpDensity& d : mu.densities()) {
        double acc = 0.0;
        buffer_integral(seg, d.rate, 1,
                        [&](std::size_t lag, std::span<double> v) {
                            v[0] = std::pow(euclidean_norm(seg.sample(lag)), p);
                        },
                        std::span<double>(&acc, 1));
        const double tf = tail_factor(seg, d.rate, p);
        if (tf != 0.0) {
            acc += tf * std::pow(seg.tail_magnitude(-seg.span()), p);
        }
        out += d.weight * acc;
    }
    return out;
}

// ------------------------------------------------------ DelayIntegralTracker

DelayIntegralTracker::DelayIntegralTracker(const DelayMeasure& mu, const HistorySegment& seg, Mode mode, double p)
    : mode_(mode), p_(p), atoms_(mu.atoms()) {
    for (const Atom& a : atoms_) {
        lags_.push_back(static_cast<std::int64_t>(a.delay / seg.grid_step() + 0.5));
    }
    for (const ExpDensity& d : mu.densities()) {
        const DelayMeasure single({}, {ExpDensity{d.rate, 1.0}});
        const auto [left, right] = interval_weights(d.rate, seg.grid_step());
        Term t{d.weight, std::exp(-d.rate * seg.grid_step()), left, right, {}};
        if (mode_ == Mode::Vector) {
            t.sum = integrate_segment(single, seg);
        } else {
            t.sum = {integrate_segment_power(single, seg, p_)};
        }
        terms_.push_back(std::move(t));
    }
}

void DelayIntegralTracker::advance(const HistorySegment& seg, std::span<const double> previous_head) {
    if (terms_.empty()) {
        return;
    }
    const auto head = seg.head();
    if (mode_ == Mode::Vector) {
        for (Term& t : terms_) {
            for (std::size_t j = 0; j < t.sum.size(); ++j) {
                t.sum[j] = t.decay * (t.sum[j] + t.left * previous_head[j] + t.right * head[j]);
            }
        }
    } else {
        const double older = std::pow(euclidean_norm(previous_head), p_);
        const double newer = std::pow(euclidean_norm(head), p_);
        for (Term& t : terms_) {
            t.sum[0] = t.decay * (t.sum[0] + t.left * older + t.right * newer);
        }
    }
}

void DelayIntegralTracker::value(const HistorySegment& seg, std::span<double> out) const {
    const std::size_t dim = seg.dim();
    std::fill(out.begin(), out.end(), 0.0);
    double tmp_small[4];
    Vector tmp_large;
    std::span<double> tmp;
    if (dim <= 4) {
        tmp = std::span<double>(tmp_small, dim);
    } else {
        tmp_large.resize(dim);
        tmp = tmp_large;
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        seg.value_at_lag(lags_[i], atoms_[i].delay, tmp);
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] += atoms_[i].weight * tmp[j];
        }
    }
    for (const Term& t : terms_) {
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] += t.weight * t.sum[j];
        }
    }
}

double DelayIntegralTracker::power_value(const HistorySegment& seg) const {
    double out = 0.0;
    Vector tmp(seg.dim());
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        seg.value_at_lag(lags_[i], atoms_[i].delay, tmp);
        out += atoms_[i].weight * std::pow(euclidean_norm(tmp), p_);
    }
    for (const Term& t : terms_) {
        out += t.weight * t.sum[0];
    }
    return out;
}

// ------------------------------------------------------------------- Lf2

LemmaCheck check_lemma_lf2(const HistorySegment& zeta, std::span<const double> states, const DelayMeasure& mu,
                           double p, double lambda, Lf2Variant variant, double tolerance) {
    const double q = zeta.q();
    if (p < 2.0) {
        throw Error(ErrorCode::PreconditionViolation, "p must be at least 2");
    }
    if (lambda >= p * q) {
        throw Error(ErrorCode::PreconditionViolation, "lambda must be below p*q");
    }
    const std::size_t dim = zeta.dim();
    if (states.empty() || states.size() % dim != 0) {
        throw Error(ErrorCode::DimensionMismatch, "state array is not a multiple of the dimension");
    }
    const std::size_t n = states.size() / dim;
    const double h = zeta.grid_step();
    const double mu_pq = moment(mu, p * q);
    const double mu_2q = moment(mu, 2.0 * q);
    const double zeta_p = std::pow(zeta.norm(), p);
    const bool weighted = variant == Lf2Variant::Exponential;

    double c_proof = 0.0, c_stmt = 0.0, integral_factor = 1.0;
    if (weighted) {
        c_proof = mu_pq / (p * q - lambda);
        c_stmt = lambda < 2.0 * q ? mu_pq / (2.0 * q - lambda) : std::numeric_limits<double>::quiet_NaN();
        integral_factor = mu_pq;
    } else {
        c_proof = mu_pq / (p * q);
        c_stmt = mu_2q / (2.0 * q);
    }

    DelayIntegralTracker tracker(mu, zeta, DelayIntegralTracker::Mode::Power, p);
    HistorySegment seg = zeta;
    Vector prev(dim);

    LemmaCheck out;
    out.min_slack = std::numeric_limits<double>::infinity();
    out.min_slack_alternate = std::numeric_limits<double>::infinity();
    double lhs = 0.0, rhs_int = 0.0;
    double prev_inner = 0.0, prev_state = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::span<const double> x = states.subspan(k * dim, dim);
        if (k > 0) {
            std::copy_n(seg.head().begin(), dim, prev.begin());
            seg.advance(x);
            tracker.advance(seg, prev);
        }
        const double t = static_cast<double>(k) * h;
        const double w = weighted ? std::exp(lambda * t) : 1.0;
        const double inner = w * tracker.power_value(seg);
        const double state = w * std::pow(euclidean_norm(x), p);
        if (k > 0) {
            lhs += 0.5 * h * (prev_inner + inner);
            rhs_int += 0.5 * h * (prev_state + state);
        }
        prev_inner = inner;
        prev_state = state;

        const double rhs = c_proof * zeta_p + integral_factor * rhs_int;
        const double slack = rhs - lhs;
        if (slack < out.min_slack) {
            out.min_slack = slack;
            out.worst_index = k;
        }
        if (slack < -tolerance * std::max(1.0, rhs)) {
            out.holds = false;
        }
        const double alt = c_stmt * zeta_p + integral_factor * rhs_int - lhs;
        out.min_slack_alternate = std::min(out.min_slack_alternate, alt);
    }
    if (std::isnan(c_stmt)) {
        out.min_slack_alternate = c_stmt;
    }
    return out;
}

} // namespace gsfde
