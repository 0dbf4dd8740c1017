#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gsfde/coefficients.hpp"

namespace gsfde {

/// Constants the theorems leave as "some positive constant", plus the decay
/// rate and the epsilon triple of the mean-square theorem.
struct AuxConstants {
    double k1 = 0.36;
    double k2 = 1.2;
    double k3 = 1.44;  // must equal k2^2
    double T = 10.0;   // horizon for the T-dependent constants
    // 0 means "choose automatically" for each of these.
    double eps = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double p = 2.0;
    std::optional<double> lambda;  // fixed decay rate for every theorem
    bool scan = false;             // also try 10 rates across each window

    /// k1 = hi^2, k2 = 2 hi, k3 = k2^2.
    static AuxConstants from_band(double sigma_hi, double T = 10.0);
    void validate() const;
};

/// mu_i^(2q) for the measures of the certificate.
struct Moments {
    double mu1 = 1.0;
    double mu2 = 1.0;
    double mu3 = 1.0;
};

/// |g(0)|^2, |h(0)|^2, |gamma(0)|^2.
struct Offsets {
    double g0_sq = 0.0;
    double h0_sq = 0.0;
    double gamma0_sq = 0.0;
};

struct BoundInputs {
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, lambda4 = 0.0, lambda5 = 0.0;
    Moments mu;
    Offsets offsets;
    double q = 1.0;
    AuxConstants aux;

    /// Throws NotInClass when some certificate measure lacks mu^(2q).
    static BoundInputs from(const CoefficientSet& set, double q, const AuxConstants& aux);
};

Offsets offsets_of(const CoefficientSet& set);

/// Admissible decay rates (0, top) with top = min(surplus, 2q).
struct Window {
    bool feasible = false;
    double surplus = 0.0;  // LHS - RHS of the strict condition
    double top = 0.0;
    std::string reason;    // why infeasible

    bool admits(double lambda) const noexcept { return feasible && lambda > 0.0 && lambda < top; }
};

struct Feasibility {
    Window mean_square;      // K4/K5 and K6
    Window map_bound;        // K7/K8
    Window map_convergence;  // K9
};

Feasibility feasibility(const BoundInputs& in);
/// Same, but a certificate measure outside N_2q makes every window infeasible
/// with the reason instead of throwing.
Feasibility feasibility(const CoefficientSet& set, double q, const AuxConstants& aux);

struct EpsilonTriple {
    double eps = 0.0, eps1 = 0.0, eps2 = 0.0;
};

/// 2l1 - e - lambda - k1 e1 + 2k1 l3 - 2 l2 m1 - 2k1 l4 m2 - k1 l5 m3/(1-e2).
double mean_square_residual(const BoundInputs& in, double lambda, const EpsilonTriple& e);

/// Fixed values from aux when given; otherwise all three start at
/// 0.05 (surplus - lambda) and halve until the residual is positive.
/// Throws InfeasibleEpsilon when that never happens.
EpsilonTriple choose_epsilons(const BoundInputs& in, double lambda);

/// 0.9 * top, or the fixed aux rate when it lies in the window.
double choose_lambda(const Window& w, const AuxConstants& aux);
/// 10 evenly spaced rates strictly inside the window.
std::vector<double> lambda_grid(const Window& w);

struct K4K5 {
    double K4 = 0.0;
    double K5 = 0.0;
};
/// Throws InfeasibleEpsilon when the triple leaves the residual nonpositive,
/// DivisionDomain when lambda >= 2q.
K4K5 k4_k5(const BoundInputs& in, double lambda, const EpsilonTriple& e, double zeta_norm_sq, double x0_sq);

double k6(const BoundInputs& in, double lambda);

struct K7K8 {
    double K7 = 0.0;
    double K8 = 0.0;
};
K7K8 k7_k8(const BoundInputs& in, double lambda);
double k9(const BoundInputs& in, double lambda);

struct GrowthConstants {
    double K_hat = 0.0;
    double L1 = 0.0;
    double L2 = 0.0;
    double M = 0.0;
};
GrowthConstants l1_l2_m(const BoundInputs& in, double zeta_norm_sq);

struct GlobalConstants {
    double K1 = 0.0;
    double K2 = 0.0;
    double K3 = 0.0;
};
GlobalConstants k1_k2_k3_global(const BoundInputs& in, double zeta_norm_sq, double x0_sq);

/// K2 e^{K3 T} / m^2.
double nonexplosion_bound(const GlobalConstants& c, double T, double m);

struct BoundReport {
    BoundInputs inputs;
    Feasibility windows;
    double zeta_norm_sq = 0.0;
    double x0_sq = 0.0;

    // NaN where the theorem is infeasible.
    double lambda_mean_square = 0.0;
    double lambda_map_bound = 0.0;
    double lambda_map_convergence = 0.0;
    EpsilonTriple eps;
    std::string eps_error;  // set when no epsilon triple works

    K4K5 mean_square;
    double K6 = 0.0;
    K7K8 map_bound;
    double K9 = 0.0;
    GrowthConstants growth;
    GlobalConstants global;
    std::vector<std::string> notes;

    bool mean_square_ok() const noexcept { return windows.mean_square.feasible && eps_error.empty(); }

    std::string text() const;
    /// One row per theorem: theorem,feasible,lambda,window_top,c1,c2,note.
    void write_csv(std::ostream& os) const;
};

BoundReport build_report(const BoundInputs& in, double zeta_norm_sq, double x0_sq);

} // namespace gsfde
