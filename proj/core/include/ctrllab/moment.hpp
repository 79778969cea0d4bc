#pragma once

#include "ctrllab/control.hpp"
#include "ctrllab/simulate.hpp"
#include "ctrllab/spectral.hpp"

#include <complex>
#include <string>
#include <vector>

namespace ctrllab {

// int_0^T w(s) s^order exp(-lambda s) ds = rhs, with u(t) = w(T - t).
struct MomentEntry {
    double lambda = 0.0;
    int order = 0;
    double rhs = 0.0;
    int group = 0;
    Branch branch = Branch::Fast;
    int index = 0; // branch index of the eigenfunction
};

enum class Grouping { Singletons, Triples, RationalPairs };
std::string to_string(Grouping g);

struct MomentSystem {
    std::vector<MomentEntry> entries;
    Grouping grouping = Grouping::Singletons;
    double T = 1.0;
    int K = 0;
    Regime regime = Regime::IrrationalGt1;

    // entries of one group, in insertion order
    std::vector<int> group_members(int group) const;
    int group_count() const;
    void validate() const;
};

// One equation per eigenvalue of the table; merged rational eigenvalues add an order-1 equation.
MomentSystem moments_from_initial(const VectorField2& y0, const SpectrumTable& table, double T);

// Blaschke grouping for irrational sqrt(nu): (i_hat_k^2, i_k^2, nu k^2) for sqrt(nu) > 1 and
// (k^2, nu j_k^2, nu j_hat_k^2) for sqrt(nu) < 1, k = 1..K.
MomentSystem moments_grouped(const VectorField2& y0, const ProblemData& p, int K, double T);

struct BlaschkeProduct {
    int excluded_group = 0;
    std::vector<double> excluded; // the group's own eigenvalues
    std::vector<double> zeros;    // retained eigenvalues of other groups, each a zero of the product
    std::vector<int> excluded_fast, excluded_slow; // branch indices of the group
    double nu = 1.0;
    int J_trunc = 0;              // explicit factors for branch indices <= J_trunc
    int prefactor_power = 3;
    double tail_log_bound = 0.0;  // bound on the log error of the analytic tail at |lambda| <= lambda_ref
    double lambda_ref = 0.0;
};

// L_k for the group: (1 + lambda)^-3 times (1 - lambda/a) / (1 + lambda/a) over every eigenvalue a
// of the spectrum except the group's own. Factors with index > J_trunc enter through an analytic tail.
BlaschkeProduct make_blaschke(const MomentSystem& ms, int group, const ProblemData& p, double lambda_ref,
                              double tail_tolerance);
std::complex<double> blaschke_eval(const BlaschkeProduct& b, std::complex<double> lambda);

struct MomentCoefficients {
    int group = 0;
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0; // paired with alpha, beta, gamma
    double L1 = 0.0, L2 = 0.0, L3 = 0.0;                // L_k at the three eigenvalues
    double solve_residual = 0.0;                        // relative
    // polynomial P(lambda) = p2 lambda^2 + p1 lambda + p0 with J_k = P L_k
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
};

// J_k(lambda_i) = rhs_i for the three eigenvalues of the group.
MomentCoefficients coefficients(const MomentSystem& ms, int group, const BlaschkeProduct& b, int bits = 53);
std::complex<double> interpolant_eval(const MomentCoefficients& c, const BlaschkeProduct& b,
                                      std::complex<double> lambda);
// ||q~_k||^2 on (0, infinity) by Parseval: (3 p0^2 - 2 p0 p2 + 3 p2^2 + p1^2) / 16.
double interpolant_norm_sq(const MomentCoefficients& c);
// ||q~_k||^2 <= (9/4) Lmax^4 {(alpha+beta)^2 + beta^2 (l2-l1)^2 + gamma^2}, Lmax the largest group
// eigenvalue; the group constant rescales this to the (l1 l2 l3)^2 form.
inline constexpr double kNormBoundConstant = 9.0 / 4.0;
double norm_bound_constant(const MomentCoefficients& c);
// C (l1 l2 l3)^2 {(alpha+beta)^2 + beta^2 (l2-l1)^2 + gamma^2}
double norm_bound(const MomentCoefficients& c);

enum class SynthesisMethod { BlaschkeFourier, GramSolve };
std::string to_string(SynthesisMethod m);

struct BiorthAtom {
    int group = 0;
    SynthesisMethod method = SynthesisMethod::GramSolve;
    std::vector<double> t, samples;
    std::vector<ExpTerm> exp_sum; // Gram atoms only
    double residual_on = 0.0;     // max |moment - rhs| over the group's entries
    double residual_off = 0.0;    // max |moment| over the other retained entries
    double residual = 0.0;        // max of both
    double norm_l2 = 0.0;
    double threshold = 0.0;
    bool accepted = false;
    std::string diagnostic;
    // Blaschke atoms
    double tau_max = 0.0, dtau = 0.0;
    bool tau_capped = false;
    double norm_sq_infinite = 0.0; // Parseval norm on (0, infinity)
    double norm_bound = 0.0;
};

struct MomentOptions {
    int grid_points = 2049;
    int bits = 256;
    double regularization = 0.0;
    double tail_tolerance = 1e-12;
    double tau_cap = 4000.0;
    double atom_threshold_blaschke = 1e-4;
    double atom_threshold_gram = 1e-6;
    int quad_panels = 64;
};

BiorthAtom synthesize_atom_blaschke(const MomentSystem& ms, int group, const ProblemData& p,
                                    const MomentOptions& opt = {});
BiorthAtom synthesize_atom_gram(const MomentSystem& ms, int group, const MomentOptions& opt = {});

// Moments int_0^T atom(s) s^a exp(-lambda s) ds measured by composite Gauss quadrature.
std::vector<double> measure_moments(const std::function<double(double)>& w, const MomentSystem& ms, int panels);

struct GramSolution {
    std::vector<double> z;      // coefficients of s^a exp(-lambda s)
    double residual = 0.0;      // max |G z - m|, evaluated at extra precision
    double relative_residual = 0.0;
    double pivot_ratio = 0.0;   // max pivot / min pivot of the Cholesky factor
    int bits = 53;
    double regularization = 0.0;
};

// Minimal-norm solve in the span of the retained exponentials.
GramSolution gram_solve(const MomentSystem& ms, int bits, double regularization = 0.0);
ControlSignal gram_moment_solve(const MomentSystem& ms, const PrecisionContext& ctx, const MomentOptions& opt = {});

enum class ControlMethod { Gram, Blaschke, Hum };
std::string to_string(ControlMethod m);
ControlMethod control_method_from_string(const std::string& s);

// Assemble u(t) = sum_k q_k(T - t). The Blaschke method needs the problem data for L_k.
ControlSignal control_series(const MomentSystem& ms, ControlMethod method, const ProblemData& p,
                             const MomentOptions& opt = {});

struct HumOptions {
    int steps = 2048;
    double gradient_tolerance = 1e-8;
    int max_iterations = 0; // 0: 50 times the state dimension
};

struct HumReport {
    ControlSignal u;
    double terminal_hm1 = 0.0;
    double relative_gradient = 0.0;
    int iterations = 0;
    double bound_constant = 0.0; // (||u||^2 + (2/eps) ||y(T)||^2) / ||y0||^2
    std::vector<double> residual_history;
};

// Penalized HUM: minimize 0.5 ||u||^2 + (0.5/eps) ||y(T)||^2_{H^-1} over piecewise-linear u.
HumReport hum_control(const VectorField2& y0, double T, double epsilon, const GalerkinModel& sim,
                      const HumOptions& opt = {});

} // namespace ctrllab
