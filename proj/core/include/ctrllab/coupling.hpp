#pragma once

#include "ctrllab/fnspace.hpp"
#include "ctrllab/precision.hpp"
#include "ctrllab/trig.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace ctrllab {

// The coupling coefficient q(x) on (0, pi): either a finite trigonometric series
// c0 + sum_m s_m sin(m x) + sum_m c_m cos(m x), or uniform samples.
class Coupling {
public:
    static Coupling zero();
    static Coupling constant(double c0);
    static Coupling sine_series(std::vector<double> s);
    static Coupling trig_series(double c0, std::vector<double> s, std::vector<double> c);
    // High-precision coefficients (kept at the precision they were created with).
    static Coupling trig_series_hp(HP c0, std::vector<HP> s, std::vector<HP> c);
    static Coupling sampled(SampledFunction f);

    // Cosine series with |I(i0^2 l^2)| = exp(-tau i0^2 l^2) for l <= L, built at `bits` precision.
    static Coupling synthetic_rational(int i0, int j0, double tau, int L, int bits);

    bool is_trig() const { return !samples_; }
    bool is_zero() const;
    double operator()(double x) const;
    double sup_bound() const;
    // Largest frequency present (trig) or sample Nyquist estimate.
    double bandwidth() const;

    const TrigPoly& trig() const;
    const std::vector<double>& sin_coeffs() const { return s_; }
    const std::vector<double>& cos_coeffs() const { return c_; }
    double c0() const { return c0_; }

    // <q phi_k, phi_n> in L^2(0, pi)
    QuadResult inner_phi(int k, int n, const PrecisionContext& ctx) const;
    // int_0^pi q(s) phi_k(s) sin(omega (pi - s)) ds; I(zeta) is sqrt(pi/2) times this
    QuadResult i_integral(int k, double omega, const PrecisionContext& ctx) const;

    // Exact high-precision versions for trig series; frequencies must be rational.
    HP inner_phi_hp(int k, int n) const;
    // omega = num / den, exact
    HP i_integral_hp(int k, long num, long den) const;
    HP i_integral_hp(int k, const HP& omega) const;

    // q * phi_k as a trig polynomial (trig kind only)
    TrigPoly times_phi(int k) const;

    // sine-series projection of q (used by the Galerkin solvers)
    SineSeries projected(std::size_t n, const PrecisionContext& ctx) const;

private:
    double c0_ = 0.0;
    std::vector<double> s_, c_;
    HP c0_hp_;
    std::vector<HP> s_hp_, c_hp_;
    bool has_hp_ = false;
    TrigPoly poly_;
    std::shared_ptr<SampledFunction> samples_;

    void build_poly();
    std::vector<HP> hp_coefficients(HP& c0, std::vector<HP>& c) const;
    HP i_integral_hp_impl(int k, const HP& omega, long num, long den) const;
};

} // namespace ctrllab
