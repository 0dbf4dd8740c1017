#include "gsfde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gsfde {

namespace {

double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

double squared(std::span<const double> x) {
    return dot(x, x);
}

Vector difference(const Vector& x, const Vector& y) {
    Vector d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        d[i] = x[i] - y[i];
    }
    return d;
}

Vector offset_or_zero(const Vector& v, std::size_t dim, const char* which) {
    if (v.empty()) {
        return Vector(dim, 0.0);
    }
    if (v.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch, std::string("offset of ") + which + " has wrong dimension");
    }
    return v;
}

void certify_pair(double a, double b, const char* which, double& one_sided, double& delay) {
    one_sided = a - std::abs(b) / 2.0;
    delay = std::abs(b) / 2.0;
    if (one_sided < 0.0 || (one_sided == 0.0 && b != 0.0)) {
        std::ostringstream os;
        os << which << ": a = " << a << " must exceed |b|/2 = " << std::abs(b) / 2.0;
        throw Error(ErrorCode::UncertifiableCoefficients, os.str());
    }
}

double max_delay(const CoefficientSet& set) {
    return std::max({set.drift.measure.max_atom_delay(), set.qv_drift.measure.max_atom_delay(),
                     set.diffusion.measure.max_atom_delay()});
}

std::vector<double> atom_delays(const CoefficientSet& set) {
    std::vector<double> out;
    for (const LinearFunctional* f : {&set.drift, &set.qv_drift, &set.diffusion}) {
        for (const Atom& a : f->measure.atoms()) {
            if (a.delay > 0.0) {
                out.push_back(a.delay);
            }
        }
    }
    return out;
}

SegmentFamily draw_family(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_real_distribution<double> rate(0.25, 3.0);
    SegmentFamily f;
    switch (pick(rng)) {
    case 0: f.tail = TailModel::Kind::Zero; break;
    case 1: f.tail = TailModel::Kind::Constant; break;
    default: f.tail = TailModel::Kind::Exponential; break;
    }
    f.rate = rate(rng);
    return f;
}

} // namespace

Vector eval(const LinearFunctional& f, const HistorySegment& seg) {
    const std::size_t dim = seg.dim();
    if (!f.offset.empty() && f.offset.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "functional offset and segment differ in dimension");
    }
    Vector out(dim, 0.0);
    const auto head = seg.head();
    Vector integral = f.b != 0.0 ? integrate_segment(f.measure, seg) : Vector(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        out[i] = -f.a * head[i] + f.b * integral[i] + (f.offset.empty() ? 0.0 : f.offset[i]);
    }
    return out;
}

CoefficientSet build_linear_set(const LinearParams& p) {
    if (p.dim == 0) {
        throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
    }
    if (p.a_gamma != 0.0) {
        throw Error(ErrorCode::UncertifiableCoefficients,
                    "diffusion must not depend on psi(0); its bound is a pure delay integral");
    }
    CoefficientSet set;
    set.dim = p.dim;
    set.drift = {p.a_g, p.b_g, offset_or_zero(p.c_g, p.dim, "g"), p.mu_g};
    set.qv_drift = {p.a_h, p.b_h, offset_or_zero(p.c_h, p.dim, "h"), p.mu_h};
    set.diffusion = {0.0, p.b_gamma, offset_or_zero(p.c_gamma, p.dim, "gamma"), p.mu_gamma};

    A1Certificate& c = set.certificate;
    certify_pair(p.a_g, p.b_g, "uncertifiable-drift", c.lambda1, c.lambda2);
    certify_pair(p.a_h, p.b_h, "uncertifiable-qv-drift", c.lambda3, c.lambda4);
    c.lambda5 = p.b_gamma * p.b_gamma;
    c.mu1 = p.mu_g;
    c.mu2 = p.mu_h;
    c.mu3 = p.mu_gamma;
    return set;
}

HistorySegment random_segment(std::mt19937_64& rng, std::size_t dim, double q, double grid_step, double horizon,
                              const SegmentFamily& family, const std::vector<double>& spike_delays,
                              double max_norm) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto n = static_cast<std::size_t>(std::ceil(horizon / grid_step - 1e-9)) + 1;
    Vector c(dim), e(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        c[i] = unit(rng);
        e[i] = unit(rng);
    }
    const double noise = 0.5 * pos(rng);
    const double r = family.rate;

    std::vector<double> samples(n * dim);
    for (std::size_t lag = 0; lag < n; ++lag) {
        const double alpha = -static_cast<double>(lag) * grid_step;
        double* x = samples.data() + (n - 1 - lag) * dim;
        for (std::size_t i = 0; i < dim; ++i) {
            const double base = family.tail == TailModel::Kind::Constant ? c[i] : 0.0;
            x[i] = base + e[i] * std::exp(r * alpha) + noise * normal(rng);
        }
    }
    for (double tau : spike_delays) {
        const auto lag = static_cast<std::size_t>(std::llround(tau / grid_step));
        if (lag < n && pos(rng) < 0.5) {
            double* x = samples.data() + (n - 1 - lag) * dim;
            const double size = 2.0 * std::exp(q * tau) * pos(rng);
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] += size * unit(rng);
            }
        }
    }
    TailModel tail;
    switch (family.tail) {
    case TailModel::Kind::Zero: tail = TailModel::zero(dim); break;
    case TailModel::Kind::Constant: tail = TailModel::constant(c); break;
    case TailModel::Kind::Exponential: tail = TailModel::exponential(e, r); break;
    }
    HistorySegment seg(dim, q, grid_step, std::move(samples), std::move(tail), 0.0, horizon);
    const double norm = seg.norm();
    if (norm == 0.0) {
        return seg;
    }
    return scaled(seg, max_norm * (1.0 - pos(rng)) / norm);
}

A1Report verify_a1(const CoefficientSet& set, double q, double grid_step, std::size_t n_trials, std::uint64_t seed,
                   double tolerance) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    const double horizon = std::max(2.0, max_delay(set) + 1.0);
    const auto spikes = atom_delays(set);
    const A1Certificate& cert = set.certificate;

    A1Report rep;
    rep.trials = n_trials;
    rep.tolerance = tolerance;
    rep.max_c1 = rep.max_c2 = rep.max_c3 = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n_trials; ++t) {
        const SegmentFamily family = draw_family(rng);
        const HistorySegment psi = random_segment(rng, set.dim, q, grid_step, horizon, family, spikes);
        const HistorySegment phi =
            pos(rng) < 0.05 ? psi : random_segment(rng, set.dim, q, grid_step, horizon, family, spikes);
        const HistorySegment delta = psi - phi;
        const auto d0 = delta.head();

        const Vector dg = difference(eval(set.drift, psi), eval(set.drift, phi));
        const Vector dh = difference(eval(set.qv_drift, psi), eval(set.qv_drift, phi));
        const Vector dgamma = difference(eval(set.diffusion, psi), eval(set.diffusion, phi));
        const double head_sq = squared(d0);

        const double c1 = dot(d0, dg) + cert.lambda1 * head_sq -
                          cert.lambda2 * integrate_segment_power(cert.mu1, delta, 2.0);
        const double c2 = dot(d0, dh) + cert.lambda3 * head_sq -
                          cert.lambda4 * integrate_segment_power(cert.mu2, delta, 2.0);
        const double c3 = squared(dgamma) - cert.lambda5 * integrate_segment_power(cert.mu3, delta, 2.0);
        rep.max_c1 = std::max(rep.max_c1, c1);
        rep.max_c2 = std::max(rep.max_c2, c2);
        rep.max_c3 = std::max(rep.max_c3, c3);
    }
    rep.pass = n_trials > 0 && rep.max_c1 <= tolerance && rep.max_c2 <= tolerance && rep.max_c3 <= tolerance;
    return rep;
}

GlobalReport verify_global_conditions(const CoefficientSet& set, double q, double grid_step, std::size_t n_trials,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double horizon = std::max(2.0, max_delay(set) + 1.0);
    const auto spikes = atom_delays(set);
    GlobalReport rep;
    for (const LinearFunctional* f : {&set.drift, &set.qv_drift, &set.diffusion}) {
        const double lip = f->a + std::abs(f->b) * moment(f->measure, q);
        rep.analytic_L = std::max(rep.analytic_L, lip * lip);
        const double off = f->offset.empty() ? 0.0 : squared(f->offset);
        rep.analytic_K = std::max(rep.analytic_K, 2.0 * off);
    }
    rep.analytic_K = std::max(rep.analytic_K, 2.0 * rep.analytic_L);

    for (std::size_t t = 0; t < n_trials; ++t) {
        const SegmentFamily family = draw_family(rng);
        const HistorySegment psi = random_segment(rng, set.dim, q, grid_step, horizon, family, spikes);
        const HistorySegment phi = random_segment(rng, set.dim, q, grid_step, horizon, family, spikes);
        const double dn = (psi - phi).norm();
        const double pn = phi.norm();
        for (const LinearFunctional* f : {&set.drift, &set.qv_drift, &set.diffusion}) {
            const Vector fp = eval(*f, phi);
            if (dn > 0.0) {
                rep.empirical_L = std::max(rep.empirical_L, squared(difference(eval(*f, psi), fp)) / (dn * dn));
            }
            rep.empirical_K = std::max(rep.empirical_K, squared(fp) / (1.0 + pn * pn));
        }
    }
    return rep;
}

Vector eval_truncated(const LinearFunctional& f, const HistorySegment& seg, double m) {
    if (!(m > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "truncation level must be positive");
    }
    const double norm = seg.norm();
    if (norm <= m) {
        return eval(f, seg);
    }
    // The functional is affine, so F(s phi) = s (F(phi) - offset) + offset.
    const double s = m / norm;
    Vector out = eval(f, seg);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double c = f.offset.empty() ? 0.0 : f.offset[i];
        out[i] = s * (out[i] - c) + c;
    }
    return out;
}

TruncatedSet truncate(const CoefficientSet& set, double m) {
    if (!(m > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "truncation level must be positive");
    }
    return TruncatedSet{set, m};
}

// ---------------------------------------------------- CoefficientEvaluator

CoefficientEvaluator::CoefficientEvaluator(const CoefficientSet& set, const HistorySegment& initial,
                                           std::optional<double> truncation)
    : set_(&set), truncation_(truncation) {
    if (initial.dim() != set.dim) {
        throw Error(ErrorCode::DimensionMismatch, "initial segment and coefficients differ in dimension");
    }
    if (truncation_ && !(*truncation_ > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "truncation level must be positive");
    }
    const LinearFunctional* fs[3] = {&set.drift, &set.qv_drift, &set.diffusion};
    std::vector<const DelayMeasure*> seen;
    for (int i = 0; i < 3; ++i) {
        std::size_t s = 0;
        while (s < seen.size() && !seen[s]->same_law(fs[i]->measure)) {
            ++s;
        }
        if (s == seen.size()) {
            seen.push_back(&fs[i]->measure);
            trackers_.emplace_back(fs[i]->measure, initial);
        }
        slot_[i] = s;
    }
    integrals_.assign(trackers_.size(), Vector(set.dim));
    fresh_.assign(trackers_.size(), 0);
}

void CoefficientEvaluator::advance(const HistorySegment& seg, std::span<const double> previous_head) {
    for (DelayIntegralTracker& t : trackers_) {
        t.advance(seg, previous_head);
    }
}

void CoefficientEvaluator::apply(const LinearFunctional& f, std::size_t slot, const HistorySegment& seg,
                                 double scale, std::span<double> out) {
    const auto head = seg.head();
    const std::size_t dim = seg.dim();
    const Vector& integral = integrals_[slot];
    if (f.b != 0.0 && !fresh_[slot]) {
        trackers_[slot].value(seg, integrals_[slot]);
        fresh_[slot] = 1;
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const double linear = -f.a * head[i] + (f.b != 0.0 ? f.b * integral[i] : 0.0);
        const double c = f.offset.empty() ? 0.0 : f.offset[i];
        out[i] = scale == 1.0 ? linear + c : scale * linear + c;
    }
}

void CoefficientEvaluator::evaluate(const HistorySegment& seg, std::span<double> g, std::span<double> h,
                                    std::span<double> gamma) {
    double scale = 1.0;
    if (truncation_) {
        const double norm = seg.norm();
        if (norm > *truncation_) {
            scale = *truncation_ / norm;
        }
    }
    std::fill(fresh_.begin(), fresh_.end(), 0);
    apply(set_->drift, slot_[0], seg, scale, g);
    apply(set_->qv_drift, slot_[1], seg, scale, h);
    apply(set_->diffusion, slot_[2], seg, scale, gamma);
}

} // namespace gsfde
