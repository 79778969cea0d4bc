#pragma once

#include "ctrllab/spectral.hpp"

#include <boost/multiprecision/gmp.hpp>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ctrllab {

using BigInt = boost::multiprecision::mpz_int;

enum class EstimateKind { T1, T2Tilde, T2Hat, T0Tilde, T0Hat, T0Rational, Dolecki };
std::string to_string(EstimateKind k);

struct Partial {
    int k = 0;               // index used by the window rule
    double index = 0.0;      // k, or zeta for the rational estimator
    double value = 0.0;      // inner quotient
    double alt_value = 0.0;  // alternative denominator (T2 kinds), NaN otherwise
    bool excluded = false;   // log 0, kept out of every sup
    std::string group;       // sub-estimator the partial belongs to
};

struct TimeEstimate {
    EstimateKind kind = EstimateKind::T1;
    int K = 0;
    std::vector<Partial> partials;
    // (K', sup of partials with index in [K', K]) for K' = 1..K
    std::vector<std::pair<int, double>> running_sup_tail;
    double estimate_at_K = 0.0;
    bool infinite = false;
    // named constituents: T1/T2 for T0 kinds, T0_1/T0_2 for the rational estimator
    std::vector<std::pair<std::string, double>> components;
    std::vector<int> skipped; // indices dropped because the quotient is undefined

    void write_csv(std::ostream& os) const;
};

// Window rule: max of the non-excluded partials whose k lies in [ceil(K/2), K].
double window_max(const std::vector<Partial>& partials, int K, const std::string& group = {});

TimeEstimate estimate_T1(const ProblemData& p, int K);
// T2-tilde (sqrt(nu) > 1, pairs (i_k, k)) or T2-hat (sqrt(nu) < 1, pairs (k, j_k)).
TimeEstimate estimate_T2(const ProblemData& p, int K);
// max(T1, T2) for the irrational regime.
TimeEstimate estimate_T0_irrational(const ProblemData& p, int K);
// -log|I(zeta)| / zeta over Lambda2 (T0_1) and Lambda3 (T0_2), zeta <= K^2.
TimeEstimate estimate_T0_rational(const ProblemData& p, int K);
// -log|phi_k(x0)| / k^2 with x0 = pi * x0_over_pi.
TimeEstimate estimate_dolecki(const HP& x0_over_pi, int K, int bits = 128);

// Fast mode (phi_k, psi_k) in high precision: sine coefficients b_n of psi_k for n <= N and the
// exact observation nu psi_k'(0).
struct FastModeHP {
    std::vector<HP> b;
    HP obs;
};
FastModeHP fast_mode_hp(const ProblemData& p, int k, int N, int bits);

enum class Parity { Even, Odd };

struct LiouvilleSpec {
    double sigma = 1.0;
    Parity parity = Parity::Even;
    std::vector<std::pair<BigInt, BigInt>> convergents; // (k_p, j_p)
    // natural log of the bound on |sqrt(nu) - k_p / j_p|
    std::vector<HP> log_tail_bound;
    std::vector<bool> verified;
    HP sqrt_nu_partial; // k_P / j_P
    HP C = 1;           // |j_p sqrt(nu) - k_p| <= C k_p exp(-k_p^(2+sigma))
    int bits = 256;
    // bits needed to resolve |k_P - sqrt(nu) j_P| directly
    double required_bits_direct = 0.0;
    // bits used to build the last convergent
    int required_bits_construction = 0;

    int size() const { return static_cast<int>(convergents.size()); }
};

// Greedy construction of sqrt(nu) = lim k_p / j_p with constant parity of k_p + j_p.
// Seeds: (1, 3) for even parity, (2, 1) for odd parity.
std::pair<LiouvilleSpec, NuValue> liouville_nu(double sigma, int P, Parity parity, int bits = 256);
// Required bits for the step after (k, j): log2(e) k^(2+sigma) plus a guard.
int liouville_step_bits(const BigInt& k, const BigInt& j, double sigma);

struct GramRecord {
    long long k = 0, j = 0;
    double det = 1.0;         // direct inner-product value (or the bound)
    double det_formula = 1.0; // 1 - 1 / (1 + U (k^2 + V))
    double log10_det = 0.0;
    bool det_is_upper_bound = false;
    bool has_U = false;
    double U = 0.0;
    double log10_U = 0.0;
    double log10_k2U = 0.0;
    double V = 0.0;
    double coupling = 0.0; // <q phi_k, phi_j>
    int bits_used = 53;
    int p = 0;
};

// det of the normalized H^1_0 Gram matrix of (Phi_{1,k}, Phi_{2,j}), two ways.
GramRecord gram_det(const ProblemData& p, int k, int j);

// <sin(m x) phi_k, phi_n> for m in {1, 2}, exact in high precision.
HP sine_mode_coupling(int m, const BigInt& k, const BigInt& n);
// Closed forms along constant-parity pairs: m = 1 with k + j even, m = 2 with k + j odd.
HP parity_coupling_closed_form(int m, const BigInt& k, const BigInt& j);

// Gram records along the convergents; q = sin x (even) or sin 2x (odd).
std::vector<GramRecord> riesz_degeneracy_scan(const LiouvilleSpec& spec, int window = 64);
void write_gram_csv(std::ostream& os, const std::vector<GramRecord>& recs);

} // namespace ctrllab
