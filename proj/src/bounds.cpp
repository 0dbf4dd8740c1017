#include "gsfde/bounds.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace gsfde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double squared(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

void require_below_2q(const BoundInputs& in, double lambda) {
    if (!(lambda < 2.0 * in.q)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " must be below 2q = " << 2.0 * in.q;
        throw Error(ErrorCode::DivisionDomain, os.str());
    }
}

Window make_window(double surplus, double q, const char* what) {
    Window w;
    w.surplus = surplus;
    if (!std::isfinite(surplus)) {
        w.reason = std::string(what) + ": condition is not finite";
    } else if (surplus > 0.0) {
        w.feasible = true;
        w.top = std::min(surplus, 2.0 * q);
    } else {
        std::ostringstream os;
        os << what << ": strict condition fails (LHS - RHS = " << surplus << ")";
        w.reason = os.str();
    }
    return w;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

AuxConstants AuxConstants::from_band(double sigma_hi, double T) {
    AuxConstants a;
    a.k1 = sigma_hi * sigma_hi;
    a.k2 = 2.0 * sigma_hi;
    a.k3 = a.k2 * a.k2;
    a.T = T;
    return a;
}

void AuxConstants::validate() const {
    if (!(k1 > 0.0) || !(k2 > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "k1 and k2 must be positive");
    }
    if (std::abs(k3 - k2 * k2) > 1e-12 * std::max(1.0, k2 * k2)) {
        throw Error(ErrorCode::PreconditionViolation, "k3 must equal k2^2");
    }
    for (double e : {eps, eps1, eps2}) {
        if (e < 0.0 || e >= 1.0) {
            throw Error(ErrorCode::PreconditionViolation, "epsilons must lie in (0, 1), or 0 for automatic");
        }
    }
    if (!(T > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "T must be positive");
    }
    if (!(p >= 2.0)) {
        throw Error(ErrorCode::PreconditionViolation, "p must be at least 2");
    }
    if (lambda && !(*lambda > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "a fixed lambda must be positive");
    }
}

Offsets offsets_of(const CoefficientSet& set) {
    return {squared(set.drift.offset), squared(set.qv_drift.offset), squared(set.diffusion.offset)};
}

BoundInputs BoundInputs::from(const CoefficientSet& set, double q, const AuxConstants& aux) {
    aux.validate();
    const A1Certificate& c = set.certificate;
    BoundInputs in;
    in.lambda1 = c.lambda1;
    in.lambda2 = c.lambda2;
    in.lambda3 = c.lambda3;
    in.lambda4 = c.lambda4;
    in.lambda5 = c.lambda5;
    in.mu = {moment(c.mu1, 2.0 * q), moment(c.mu2, 2.0 * q), moment(c.mu3, 2.0 * q)};
    in.offsets = offsets_of(set);
    in.q = q;
    in.aux = aux;
    return in;
}

Feasibility feasibility(const BoundInputs& in) {
    const double k1 = in.aux.k1, k3 = in.aux.k3;
    const double m1 = in.mu.mu1, m2 = in.mu.mu2, m3 = in.mu.mu3;
    const double l1 = in.lambda1, l2 = in.lambda2, l3 = in.lambda3, l4 = in.lambda4, l5 = in.lambda5;

    const double s4 = 2 * l1 + 2 * k1 * l3 - 2 * l2 * m1 - 2 * k1 * l4 * m2 - k1 * l5 * m3;
    const double s7 = 2 * l1 - 2 * l2 * m1 - 1 - 2 * k1 * l4 * m2 + 2 * k1 * l3 - k1 - 2 * (k1 * m2 + 2 * k3 * m3) * l5;
    const double s9 = 2 * l1 - 2 * l2 * m1 + 2 * k1 * l3 - 2 * k1 * l4 * m2 - (k1 + 2 * k3) * m3 * l5;

    Feasibility f;
    f.mean_square = make_window(s4, in.q, "mean-square bound");
    f.map_bound = make_window(s7, in.q, "solution-map bound");
    f.map_convergence = make_window(s9, in.q, "solution-map convergence");
    return f;
}

Feasibility feasibility(const CoefficientSet& set, double q, const AuxConstants& aux) {
    try {
        return feasibility(BoundInputs::from(set, q, aux));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotInClass) {
            throw;
        }
        Feasibility f;
        for (Window* w : {&f.mean_square, &f.map_bound, &f.map_convergence}) {
            w->surplus = kNaN;
            w->reason = e.what();
        }
        return f;
    }
}

double mean_square_residual(const BoundInputs& in, double lambda, const EpsilonTriple& e) {
    const double k1 = in.aux.k1;
    return 2 * in.lambda1 - e.eps - lambda - k1 * e.eps1 + 2 * k1 * in.lambda3 - 2 * in.lambda2 * in.mu.mu1 -
           2 * k1 * in.lambda4 * in.mu.mu2 - k1 * in.lambda5 * in.mu.mu3 / (1.0 - e.eps2);
}

EpsilonTriple choose_epsilons(const BoundInputs& in, double lambda) {
    const AuxConstants& a = in.aux;
    const Window w = feasibility(in).mean_square;
    const double base = 0.05 * (w.surplus - lambda);
    if (!(base > 0.0) && (a.eps == 0.0 || a.eps1 == 0.0 || a.eps2 == 0.0)) {
        throw Error(ErrorCode::InfeasibleEpsilon, "lambda leaves no room for an epsilon triple");
    }
    EpsilonTriple e{a.eps > 0 ? a.eps : base, a.eps1 > 0 ? a.eps1 : base, a.eps2 > 0 ? a.eps2 : std::min(base, 0.5)};
    for (int i = 0; i < 60; ++i) {
        if (mean_square_residual(in, lambda, e) > 0.0) {
            return e;
        }
        if (a.eps > 0 && a.eps1 > 0 && a.eps2 > 0) {
            break;
        }
        if (a.eps == 0.0) e.eps *= 0.5;
        if (a.eps1 == 0.0) e.eps1 *= 0.5;
        if (a.eps2 == 0.0) e.eps2 *= 0.5;
    }
    std::ostringstream os;
    os << "no epsilon triple makes the residual positive at lambda = " << lambda
       << " (residual " << mean_square_residual(in, lambda, e) << ")";
    throw Error(ErrorCode::InfeasibleEpsilon, os.str());
}

double choose_lambda(const Window& w, const AuxConstants& aux) {
    if (!w.feasible) {
        throw Error(ErrorCode::InfeasibleConfiguration, w.reason);
    }
    if (aux.lambda) {
        if (!w.admits(*aux.lambda)) {
            std::ostringstream os;
            os << "fixed lambda " << *aux.lambda << " lies outside (0, " << w.top << ")";
            throw Error(ErrorCode::InfeasibleConfiguration, os.str());
        }
        return *aux.lambda;
    }
    return 0.9 * w.top;
}

std::vector<double> lambda_grid(const Window& w) {
    std::vector<double> out;
    if (!w.feasible) {
        return out;
    }
    for (int k = 1; k <= 10; ++k) {
        out.push_back(w.top * (k - 0.5) / 10.0);
    }
    return out;
}

K4K5 k4_k5(const BoundInputs& in, double lambda, const EpsilonTriple& e, double zeta_norm_sq, double x0_sq) {
    require_below_2q(in, lambda);
    if (!(lambda > 0.0)) {
        throw Error(ErrorCode::DivisionDomain, "lambda must be positive");
    }
    if (!(e.eps > 0 && e.eps1 > 0 && e.eps2 > 0 && e.eps2 < 1)) {
        throw Error(ErrorCode::InfeasibleEpsilon, "epsilons must be positive and eps2 < 1");
    }
    const double r = mean_square_residual(in, lambda, e);
    if (!(r > 0.0)) {
        throw Error(ErrorCode::InfeasibleEpsilon, "residual " + fmt(r) + " is not positive");
    }
    const double k1 = in.aux.k1;
    const Offsets& o = in.offsets;
    K4K5 out;
    out.K4 = (o.g0_sq / e.eps + k1 * o.h0_sq / e.eps1 + k1 * o.gamma0_sq / e.eps2) / lambda;
    const double d = 2.0 * in.q - lambda;
    out.K5 = x0_sq + (2 * in.lambda2 * in.mu.mu1 + 2 * k1 * in.lambda4 * in.mu.mu2 +
                      k1 * in.lambda5 * in.mu.mu3 / (1.0 - e.eps2)) *
                         zeta_norm_sq / d;
    return out;
}

double k6(const BoundInputs& in, double lambda) {
    require_below_2q(in, lambda);
    const double k1 = in.aux.k1;
    return 1.0 + (2 * in.lambda2 * in.mu.mu1 + 2 * k1 * in.lambda4 * in.mu.mu2 + k1 * in.lambda5 * in.mu.mu3) /
                     (2.0 * in.q - lambda);
}

K7K8 k7_k8(const BoundInputs& in, double lambda) {
    require_below_2q(in, lambda);
    if (!(lambda > 0.0)) {
        throw Error(ErrorCode::DivisionDomain, "lambda must be positive");
    }
    const double k1 = in.aux.k1, k3 = in.aux.k3;
    const Offsets& o = in.offsets;
    K7K8 out;
    out.K7 = 2.0 / lambda * (o.g0_sq + k1 * o.h0_sq + 2 * (k1 + 2 * k3) * o.gamma0_sq);
    out.K8 = 3.0 + 4.0 / (2.0 * in.q - lambda) *
                       (in.lambda2 * in.mu.mu1 + k1 * (in.lambda4 + in.lambda5) * in.mu.mu2 +
                        2 * k3 * in.lambda5 * in.mu.mu3);
    return out;
}

double k9(const BoundInputs& in, double lambda) {
    require_below_2q(in, lambda);
    const double k1 = in.aux.k1, k3 = in.aux.k3;
    return 1.0 + 4.0 / (2.0 * in.q - lambda) *
                     (in.lambda2 * in.mu.mu1 + k1 * (2 * in.lambda4 * in.mu.mu2 + in.lambda5 * in.mu.mu3) +
                      k3 * in.lambda5 * in.mu.mu3);
}

GrowthConstants l1_l2_m(const BoundInputs& in, double zeta_norm_sq) {
    const double k1 = in.aux.k1, k3 = in.aux.k3, T = in.aux.T;
    if (!(T > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "T must be positive");
    }
    const Offsets& o = in.offsets;
    GrowthConstants c;
    c.M = 2 * in.lambda2 - 2 * in.lambda1 + 1 + k1 * (2 * in.lambda5 - 2 * in.lambda3 + 3) + 4 * k3 * in.lambda5;
    c.L2 = 2.0 * c.M;
    c.K_hat = 2.0 * (o.g0_sq + k1 * (o.h0_sq + 2 * o.gamma0_sq) + 4 * k3 * o.gamma0_sq) * T;
    c.L1 = c.K_hat + 2.0 / in.q *
                         (in.q + in.lambda2 * in.mu.mu1 + k1 * (in.lambda5 * in.mu.mu3 + in.mu.mu2) +
                          2 * k3 * in.lambda5 * in.mu.mu3) *
                         zeta_norm_sq;
    return c;
}

GlobalConstants k1_k2_k3_global(const BoundInputs& in, double zeta_norm_sq, double x0_sq) {
    const double k1 = in.aux.k1, T = in.aux.T;
    const Offsets& o = in.offsets;
    GlobalConstants c;
    c.K1 = x0_sq + (o.g0_sq + k1 * o.h0_sq + 2 * k1 * o.gamma0_sq) * T;
    c.K2 = c.K1 + (in.lambda2 * in.mu.mu1 + k1 * in.lambda4 * in.mu.mu2 + k1 * in.lambda5 * in.mu.mu3) *
                      zeta_norm_sq / in.q;
    c.K3 = k1 + 1 - 2 * in.lambda1 + 2 * in.lambda2 - 2 * k1 * in.lambda3 + 2 * k1 * in.lambda4 +
           2 * k1 * in.lambda5;
    return c;
}

double nonexplosion_bound(const GlobalConstants& c, double T, double m) {
    if (!(m > 0.0)) {
        throw Error(ErrorCode::PreconditionViolation, "level m must be positive");
    }
    return c.K2 * std::exp(c.K3 * T) / (m * m);
}

BoundReport build_report(const BoundInputs& in, double zeta_norm_sq, double x0_sq) {
    BoundReport r;
    r.inputs = in;
    r.windows = feasibility(in);
    r.zeta_norm_sq = zeta_norm_sq;
    r.x0_sq = x0_sq;
    r.lambda_mean_square = r.lambda_map_bound = r.lambda_map_convergence = kNaN;
    r.mean_square = {kNaN, kNaN};
    r.K6 = r.K9 = kNaN;
    r.map_bound = {kNaN, kNaN};

    if (r.windows.mean_square.feasible) {
        r.lambda_mean_square = choose_lambda(r.windows.mean_square, in.aux);
        r.K6 = k6(in, r.lambda_mean_square);
        try {
            r.eps = choose_epsilons(in, r.lambda_mean_square);
            r.mean_square = k4_k5(in, r.lambda_mean_square, r.eps, zeta_norm_sq, x0_sq);
        } catch (const Error& e) {
            r.eps_error = e.what();
        }
    }
    if (r.windows.map_bound.feasible) {
        r.lambda_map_bound = choose_lambda(r.windows.map_bound, in.aux);
        r.map_bound = k7_k8(in, r.lambda_map_bound);
    }
    if (r.windows.map_convergence.feasible) {
        r.lambda_map_convergence = choose_lambda(r.windows.map_convergence, in.aux);
        r.K9 = k9(in, r.lambda_map_convergence);
    }
    r.growth = l1_l2_m(in, zeta_norm_sq);
    r.global = k1_k2_k3_global(in, zeta_norm_sq, x0_sq);

    r.notes.push_back("K5 takes E|X(0)|^2 and E||zeta||_q^2 separately although X(0) = zeta(0)");
    r.notes.push_back("K8 multiplies E||zeta||_q^2 in the bound K7 + K8 E||zeta||_q^2 e^{-lambda t}");
    r.notes.push_back("map convergence decays at the theorem's lambda; the statement writes lambda-hat");
    r.notes.push_back("mean-square feasibility uses the epsilon-free condition; the residual keeps the 1/(1-eps2) factor");
    if (in.aux.p != 2.0) {
        r.notes.push_back("the delay-integral inequality reads mu^(pq)/(2q-lambda) or mu^(2q)/(pq-lambda); both "
                          "coincide only at p = 2");
    }
    return r;
}

std::string BoundReport::text() const {
    std::ostringstream os;
    const BoundInputs& in = inputs;
    os << "Bound report\n";
    os << "  q = " << fmt(in.q) << ", T = " << fmt(in.aux.T) << "\n";
    os << "  lambda1..5 = " << fmt(in.lambda1) << ", " << fmt(in.lambda2) << ", " << fmt(in.lambda3) << ", "
       << fmt(in.lambda4) << ", " << fmt(in.lambda5) << "\n";
    os << "  mu^(2q) = " << fmt(in.mu.mu1) << ", " << fmt(in.mu.mu2) << ", " << fmt(in.mu.mu3) << "\n";
    os << "  k1 = " << fmt(in.aux.k1) << ", k2 = " << fmt(in.aux.k2) << ", k3 = " << fmt(in.aux.k3) << "\n";
    os << "  |g(0)|^2 = " << fmt(in.offsets.g0_sq) << ", |h(0)|^2 = " << fmt(in.offsets.h0_sq)
       << ", |gamma(0)|^2 = " << fmt(in.offsets.gamma0_sq) << "\n";
    os << "  E||zeta||^2 = " << fmt(zeta_norm_sq) << ", E|X(0)|^2 = " << fmt(x0_sq) << "\n\n";

    auto window = [&os](const char* name, const Window& w, double lambda) {
        os << "  " << name << ": ";
        if (w.feasible) {
            os << "feasible, surplus " << fmt(w.surplus) << ", window (0, " << fmt(w.top) << "), lambda "
               << fmt(lambda) << "\n";
        } else {
            os << "INFEASIBLE (" << w.reason << ")\n";
        }
    };
    window("mean-square", windows.mean_square, lambda_mean_square);
    window("map bound", windows.map_bound, lambda_map_bound);
    window("map convergence", windows.map_convergence, lambda_map_convergence);
    os << "\n";
    if (!eps_error.empty()) {
        os << "  epsilon triple: " << eps_error << "\n";
    } else if (windows.mean_square.feasible) {
        os << "  eps, eps1, eps2 = " << fmt(eps.eps) << ", " << fmt(eps.eps1) << ", " << fmt(eps.eps2) << "\n";
    }
    os << "  K1 = " << fmt(global.K1) << ", K2 = " << fmt(global.K2) << ", K3 = " << fmt(global.K3) << "\n";
    os << "  K4 = " << fmt(mean_square.K4) << ", K5 = " << fmt(mean_square.K5) << "\n";
    os << "  K6 = " << fmt(K6) << "\n";
    os << "  K7 = " << fmt(map_bound.K7) << ", K8 = " << fmt(map_bound.K8) << "\n";
    os << "  K9 = " << fmt(K9) << "\n";
    os << "  K_hat = " << fmt(growth.K_hat) << ", L1 = " << fmt(growth.L1) << ", L2 = " << fmt(growth.L2)
       << ", M = " << fmt(growth.M) << "\n";
    if (!notes.empty()) {
        os << "\n  notes:\n";
        for (const std::string& n : notes) {
            os << "   - " << n << "\n";
        }
    }
    return os.str();
}

void BoundReport::write_csv(std::ostream& os) const {
    os << "theorem,feasible,lambda,window_top,c1,c2,note\n";
    auto row = [&os](const char* name, bool ok, double lambda, double top, double c1, double c2,
                     const std::string& note) {
        os << name << ',' << (ok ? 1 : 0) << ',' << fmt(lambda) << ',' << fmt(top) << ',' << fmt(c1) << ','
           << fmt(c2) << ",\"" << note << "\"\n";
    };
    row("global_existence", true, kNaN, kNaN, global.K2, global.K3, "c1=K2 c2=K3");
    row("mean_square", mean_square_ok(), lambda_mean_square, windows.mean_square.top, mean_square.K4,
        mean_square.K5, eps_error.empty() ? windows.mean_square.reason : eps_error);
    row("pair_convergence", windows.mean_square.feasible, lambda_mean_square, windows.mean_square.top, K6, kNaN,
        windows.mean_square.reason);
    row("map_bound", windows.map_bound.feasible, lambda_map_bound, windows.map_bound.top, map_bound.K7,
        map_bound.K8, windows.map_bound.reason);
    row("map_convergence", windows.map_convergence.feasible, lambda_map_convergence, windows.map_convergence.top,
        K9, kNaN, windows.map_convergence.reason);
    row("l2_estimate", true, kNaN, kNaN, growth.L1, growth.L2, "c1=L1 c2=L2");
    row("lyapunov", true, kNaN, kNaN, growth.M, kNaN, "c1=M");
}

} // namespace gsfde
