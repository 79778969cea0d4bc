#pragma once

#include "ctrllab/coupling.hpp"
#include "ctrllab/fnspace.hpp"
#include "ctrllab/precision.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ctrllab {

struct LiouvilleSpec;

enum class NuKind { Rational, Real, Liouville };
enum class Regime { IrrationalGt1, IrrationalLt1, Rational };

struct NuValue {
    NuKind kind = NuKind::Rational;
    int i0 = 1, j0 = 1;
    HP sqrt_nu;
    HP nu;
    HP error_bound;
    int bits = 53;
    double sqrt_nu_d = 1.0;
    double nu_d = 1.0;
    std::shared_ptr<const LiouvilleSpec> liouville;

    static NuValue rational(int i0, int j0, int bits = 128);
    // Decimal string for nu; a value whose square root is a small-denominator
    // rational is stored in rational form.
    static NuValue real(const std::string& nu_decimal, int bits);
    static NuValue from_sqrt(const HP& sqrt_nu, const HP& error_bound, int bits);

    Regime regime() const;
    bool is_rational() const { return kind == NuKind::Rational; }
    std::string describe() const;
};

struct ProblemData {
    NuValue nu;
    Coupling q;
    int K = 8;
    PrecisionContext ctx;
};

enum class Branch { Fast, Slow };
enum class LambdaTag { Irrational, L1, L2, L3 };
enum class Classification { Simple, Double, GeneralizedChain };

std::string to_string(Branch b);
std::string to_string(LambdaTag t);
std::string to_string(Classification c);
std::string to_string(Regime r);

struct EigenPair {
    double lambda = 0.0;
    Branch branch = Branch::Fast;
    int k = 0;             // branch index: lambda = k^2 (fast) or nu k^2 (slow)
    int partner_k = 0;     // fast index i0 l of a merged rational eigenvalue
    Classification classification = Classification::Simple;
    LambdaTag tag = LambdaTag::Irrational;
    VectorField2 eigfn;
    std::optional<VectorField2> generalized_partner;
    double observation = 0.0;
    double observation_error = 0.0;
    double coupling_integral = 0.0; // I(zeta) when defined, else NaN
    double chain_coefficient = 0.0; // <q phi_{i0 l}, phi_{j0 l}> for merged eigenvalues
    double psi_prime_zero = 0.0;
    std::optional<double> alpha_l;
    bool has_coupling = false;
};

struct IndexMaps {
    std::vector<int> i_k; // i_k[k-1]
    std::vector<int> j_k;
    std::vector<int> i_hat;
    std::vector<int> j_hat;
};

struct SpectrumTable {
    std::vector<EigenPair> entries;
    Regime regime = Regime::IrrationalGt1;
    int K = 0;
    double complete_below = 0.0; // sigma(L*) is complete below this value

    void write_csv(std::ostream& os) const;
};

struct PsiResult {
    SineSeries psi;
    double psi_prime_zero = 0.0;
    double tail_bound = 0.0;
    double quad_error = 0.0;
};

struct PsiHat {
    SineSeries psi_hat;
    SineSeries beta;
    double alpha = 0.0;
    double psi_prime_zero = 0.0;
    double beta_prime_zero = 0.0;
    double coupling_integral = 0.0; // I(i0^2 l^2)
    double chain_coefficient = 0.0; // (L* - gamma) Phi_hat = chain_coefficient * (0, phi_{j0 l})
    double quad_error = 0.0;
    bool is_double = false;
};

struct ControllabilityReport {
    bool controllable = true;
    std::vector<double> failing_lambdas;
    int K = 0;
    std::string statement;
};

// Conversion between the integral convention I(zeta) and the L^2 coupling of the chain:
// <q phi_{i0 l}, phi_{j0 l}> = (2/pi) (-1)^{j0 l + 1} I(i0^2 l^2).
double chain_from_integral(double I, int j0l);

SpectrumTable spectrum(const ProblemData& p);
PsiResult psi_closed_form(const ProblemData& p, int k);
PsiResult psi_series(const ProblemData& p, int k);
PsiResult psi_tilde(const ProblemData& p, int k);
PsiHat psi_hat(const ProblemData& p, int l);
QuadResult coupling_integral(const ProblemData& p, double zeta);
HP coupling_integral_hp(const ProblemData& p, int k);
IndexMaps index_maps(const NuValue& nu, int K_range);
double observation(const EigenPair& e);
VectorField2 normalize_by_observation(const EigenPair& e);
ControllabilityReport approx_controllability_check(const ProblemData& p);
PsiResult ode_oracle_psi(const ProblemData& p, int k);

// Spectral residuals, L^2 norm of the truncated sine representation.
double eigen_residual(const ProblemData& p, const EigenPair& e);
double chain_residual(const ProblemData& p, const EigenPair& e);

// Fast eigenpair Phi*_{1,k} = (phi_k, psi_k), irrational or Lambda_2.
EigenPair fast_eigenpair(const ProblemData& p, int k);
// Slow eigenpair Phi*_{2,k} = (0, phi_k).
EigenPair slow_eigenpair(const ProblemData& p, int k);
// Merged rational eigenvalue i0^2 l^2 with its chain partner.
EigenPair chain_eigenpair(const ProblemData& p, int l);

// Q(n-1, m-1) = <q phi_m, phi_n>.
Eigen::MatrixXd coupling_matrix(const Coupling& q, int N, const PrecisionContext& ctx);

struct GapReport {
    double lambda_max = 0.0;
    std::size_t count = 0;      // distinct eigenvalues <= lambda_max
    std::size_t pairs = 0;      // distinct pairs examined
    double min_gap = 0.0;
    double gap_lo = 0.0, gap_hi = 0.0; // the closest pair
    double lower_bound = 0.0;   // 1/j0^2 for rational sqrt(nu) = i0/j0, else 0
    bool holds = false;         // min_gap > lower_bound
};

// Pairwise distances over {k^2} u {nu j^2} below lambda_max; exact integer arithmetic for rational
// sqrt(nu) (values scaled by j0^2).
GapReport gap_condition(const NuValue& nu, double lambda_max);

// Apply L* = (-d_xx, q * . - nu d_xx) to a sine-represented field.
VectorField2 apply_adjoint_operator(const ProblemData& p, const VectorField2& f);

} // namespace ctrllab
