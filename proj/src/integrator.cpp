#include "gsfde/integrator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace gsfde {

namespace {

double longest_delay(const CoefficientSet& set) {
    return std::max({set.drift.measure.max_atom_delay(), set.qv_drift.measure.max_atom_delay(),
                     set.diffusion.measure.max_atom_delay()});
}

bool commensurate(double value, double dt) {
    const double r = value / dt;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

// One solution advancing under the shared noise.
struct Lane {
    Lane(const SimConfig& config, const InitialData& data, std::optional<double> truncation)
        : seg(initial_segment(config, data)),
          eval(config.coefficients, seg, truncation),
          g(config.dim), h(config.dim), gamma(config.dim), next(config.dim), prev(config.dim) {
        rec.dim = config.dim;
    }

    HistorySegment seg;
    CoefficientEvaluator eval;
    TrajectoryRecord rec;
    Vector g, h, gamma, next, prev;
    bool halted = false;

    double head_abs() const { return euclidean_norm(seg.head()); }

    void record(double t) {
        rec.times.push_back(t);
        const auto x = seg.head();
        rec.states.insert(rec.states.end(), x.begin(), x.end());
        rec.segment_norms.push_back(seg.norm());
        rec.running_max.push_back(rec.max_abs);
    }

    void advance(std::size_t n, double dt, double dqv, double dW) {
        eval.evaluate(seg, g, h, gamma);
        const auto x = seg.head();
        bool finite = true;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = x[i] + g[i] * dt + h[i] * dqv + gamma[i] * dW;
            finite = finite && std::isfinite(next[i]);
        }
        if (!finite) {
            throw BlowupError(n, std::make_shared<TrajectoryRecord>(rec));
        }
        std::copy(x.begin(), x.end(), prev.begin());
        seg.advance(next);
        eval.advance(seg, prev);
        ++rec.steps_taken;
        rec.max_abs = std::max(rec.max_abs, euclidean_norm(next));
    }
};

// Steps every lane with one (sigma_n, xi_n) sequence. after_step(n, recorded)
// runs after step n moved the lanes to t_{n+1}.
template <class Hook>
void drive(const SimConfig& config, std::vector<Lane*>& lanes, const Scenario& scenario, std::uint64_t seed,
           Hook&& after_step) {
    const Mesh mesh = Mesh::from_horizon(config.horizon, config.dt);
    const double dt = mesh.dt;
    const double sqdt = std::sqrt(dt);
    const std::size_t stride = std::max<std::size_t>(1, config.record_stride);
    PathRng rng(seed);

    for (Lane* lane : lanes) {
        lane->rec.seed = seed;
        lane->rec.scenario = scenario.name();
        lane->rec.max_abs = lane->head_abs();
        lane->record(0.0);
        if (config.exit_level && lane->head_abs() > *config.exit_level) {
            lane->rec.exit_time = 0.0;
            lane->halted = true;
        }
    }
    for (std::size_t n = 0; n < mesh.steps; ++n) {
        if (lanes.front()->halted) {
            break;
        }
        const double sigma = scenario.sigma(n, dt, lanes.front()->head_abs(), rng);
        const double xi = rng.normal();
        const double dW = sigma * sqdt * xi;
        const double dqv = sigma * sigma * dt;
        const double t = static_cast<double>(n + 1) * dt;
        const bool on_grid = (n + 1) % stride == 0 || n + 1 == mesh.steps;
        for (Lane* lane : lanes) {
            if (lane->halted) {
                continue;
            }
            lane->advance(n, dt, dqv, dW);
            if (config.record_noise) {
                lane->rec.sigma.push_back(sigma);
                lane->rec.qv_increments.push_back(dqv);
            }
            const bool exited = config.exit_level && lane->head_abs() > *config.exit_level;
            if (on_grid || exited) {
                lane->record(t);
            }
            if (exited) {
                lane->rec.exit_time = t;
                lane->halted = true;
            }
        }
        after_step(n, on_grid);
    }
}

void write_number(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

void validate(const SimConfig& config) {
    if (!(config.dt > 0.0) || config.dt > 1e-3 * (1.0 + 1e-12)) {
        throw Error(ErrorCode::PreconditionViolation, "step must lie in (0, 1e-3]");
    }
    (void)Mesh::from_horizon(config.horizon, config.dt);
    if (config.dim != config.coefficients.dim) {
        throw Error(ErrorCode::DimensionMismatch, "state dimension differs from the coefficient set");
    }
    if (!(config.q > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "q must be positive");
    }
    for (const LinearFunctional* f :
         {&config.coefficients.drift, &config.coefficients.qv_drift, &config.coefficients.diffusion}) {
        for (const Atom& a : f->measure.atoms()) {
            if (!commensurate(a.delay, config.dt)) {
                std::ostringstream os;
                os << "atom delay " << a.delay << " is not a multiple of the step " << config.dt;
                throw Error(ErrorCode::PreconditionViolation, os.str());
            }
        }
    }
}

HistorySegment initial_segment(const SimConfig& config, const InitialData& data) {
    const double horizon = config.buffer_horizon > 0.0
                               ? config.buffer_horizon
                               : default_buffer_horizon(config.q, longest_delay(config.coefficients));
    return from_initial_data(data, config.q, config.dim, config.dt, horizon,
                             longest_delay(config.coefficients));
}

void TrajectoryRecord::write_csv(std::ostream& os) const {
    os << "t";
    for (std::size_t i = 0; i < dim; ++i) {
        os << ",x" << i;
    }
    os << ",segment_norm,scenario_id,seed\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
        write_number(os, times[k]);
        for (double x : state(k)) {
            os << ',';
            write_number(os, x);
        }
        os << ',';
        write_number(os, segment_norms[k]);
        os << ',' << scenario_id << ',' << seed << '\n';
    }
}

void TrajectoryRecord::write_binary(std::ostream& os) const {
    const std::uint64_t header[2] = {dim, times.size()};
    os.write(reinterpret_cast<const char*>(header), sizeof header);
    auto dump = [&os](const std::vector<double>& v) {
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    dump(times);
    dump(states);
    dump(segment_norms);
}

BlowupError::BlowupError(std::size_t step, std::shared_ptr<TrajectoryRecord> partial)
    : Error(ErrorCode::NumericalBlowup, "non-finite state at step " + std::to_string(step)),
      step_(step),
      partial_(partial ? std::move(partial) : std::make_shared<TrajectoryRecord>()) {}

Vector step(const HistorySegment& seg, const CoefficientSet& coeffs, double sigma, double dW, double dt,
            std::size_t step_index) {
    if (seg.dim() != coeffs.dim) {
        throw Error(ErrorCode::DimensionMismatch, "segment and coefficients differ in dimension");
    }
    const Vector g = eval(coeffs.drift, seg);
    const Vector h = eval(coeffs.qv_drift, seg);
    const Vector gamma = eval(coeffs.diffusion, seg);
    const auto x = seg.head();
    const double dqv = sigma * sigma * dt;
    Vector out(seg.dim());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] + g[i] * dt + h[i] * dqv + gamma[i] * dW;
        if (!std::isfinite(out[i])) {
            throw BlowupError(step_index, nullptr);
        }
    }
    return out;
}

TrajectoryRecord simulate(const SimConfig& config, const Scenario& scenario, std::uint64_t seed) {
    validate(config);
    Lane lane(config, config.initial, std::nullopt);
    std::vector<Lane*> lanes{&lane};
    drive(config, lanes, scenario, seed, [](std::size_t, bool) {});
    return std::move(lane.rec);
}

PairRecord simulate_pair(const SimConfig& config, const InitialData& zeta, const InitialData& xi,
                         const Scenario& scenario, std::uint64_t seed) {
    validate(config);
    SimConfig cfg = config;
    cfg.exit_level.reset();
    Lane a(cfg, zeta, std::nullopt);
    Lane b(cfg, xi, std::nullopt);
    HistorySegment diff = a.seg - b.seg;
    PairRecord out;
    out.difference_norms.push_back(diff.norm());
    Vector d(cfg.dim);
    std::vector<Lane*> lanes{&a, &b};
    drive(cfg, lanes, scenario, seed, [&](std::size_t, bool recorded) {
        const auto x = a.seg.head();
        const auto y = b.seg.head();
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = x[i] - y[i];
        }
        diff.advance(d);
        if (recorded) {
            out.difference_norms.push_back(diff.norm());
        }
    });
    out.first = std::move(a.rec);
    out.second = std::move(b.rec);
    return out;
}

TruncationRecord simulate_truncated(const SimConfig& config, double m, const Scenario& scenario,
                                    std::uint64_t seed) {
    if (!(m > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "truncation level must be positive");
    }
    validate(config);
    Lane plain(config, config.initial, std::nullopt);
    Lane cut(config, config.initial, m);
    TruncationRecord out;
    if (plain.seg.norm() > m) {
        out.exit_time = 0.0;
    }
    std::vector<Lane*> lanes{&plain, &cut};
    drive(config, lanes, scenario, seed, [&](std::size_t n, bool) {
        if (plain.halted || cut.halted) {
            return;
        }
        const auto x = plain.seg.head();
        const auto y = cut.seg.head();
        double dev = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dev = std::max(dev, std::abs(x[i] - y[i]));
        }
        out.max_deviation = std::max(out.max_deviation, dev);
        if (!out.exit_time) {
            out.max_deviation_before_exit = std::max(out.max_deviation_before_exit, dev);
            if (plain.seg.norm() > m) {
                out.exit_time = static_cast<double>(n + 1) * config.dt;
            }
        }
    });
    out.untruncated = std::move(plain.rec);
    out.truncated = std::move(cut.rec);
    return out;
}

LemmaCheck check_lemma_lf3(const TrajectoryRecord& record, double zeta_norm, double q, double p, double lambda,
                           double tolerance) {
    std::vector<double> mags(record.size());
    for (std::size_t k = 0; k < record.size(); ++k) {
        mags[k] = record.magnitude(k);
    }
    return check_lemma_lf3(record.times, mags, record.segment_norms, zeta_norm, q, p, lambda, tolerance);
}

LemmaCheck check_lemma_lf2(const TrajectoryRecord& record, const HistorySegment& zeta, const DelayMeasure& mu,
                           double p, double lambda, Lf2Variant variant, double tolerance) {
    const double h = zeta.grid_step();
    for (std::size_t k = 1; k < record.size(); ++k) {
        if (std::abs(record.times[k] - record.times[k - 1] - h) > 1e-9 * h) {
            throw Error(ErrorCode::PreconditionViolation, "the record must hold every grid step");
        }
    }
    return check_lemma_lf2(zeta, record.states, mu, p, lambda, variant, tolerance);
}

} // namespace gsfde
