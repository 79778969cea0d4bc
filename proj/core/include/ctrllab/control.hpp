#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ctrllab {

// coeff * s^power * exp(-lambda s) evaluated at s = T - t
struct ExpTerm {
    double coeff = 0.0;
    double lambda = 0.0;
    int power = 0;
    // full-precision decimal form of coeff; the sums cancel far below double resolution
    std::string coeff_exact;
};

struct ControlSignal {
    double T = 1.0;
    int K = 0;
    std::string method;
    std::vector<double> t; // uniform grid over [0, T]
    std::vector<double> u;
    bool piecewise_linear = false; // linear between samples instead of the cubic spline
    double norm_l2 = 0.0;  // trapezoid norm of the samples
    std::vector<ExpTerm> exp_sum; // closed form when available
    bool has_exp_sum = false;

    double moment_residual = 0.0;    // max |achieved - target| over retained moments
    double regularization = 0.0;
    int bits_used = 53;
    std::vector<std::pair<int, double>> group_norms; // (group, ||q_k||_{L^2(0,T)})
    std::vector<double> series_U;                    // partial sums
    std::vector<double> series_V;
    std::vector<std::pair<std::string, double>> diagnostics;

    static ControlSignal zero(double T, int points = 2049);
    // Samples on the uniform grid; norm_l2 is recomputed.
    static ControlSignal from_samples(double T, std::vector<double> u);
    static ControlSignal read_csv(const std::string& path);

    // Grid nodes return the stored sample; elsewhere a cubic spline of the samples, or the linear
    // interpolant when piecewise_linear is set.
    double operator()(double time) const;
    double step() const { return t.size() > 1 ? T / double(t.size() - 1) : T; }
    // Recompute norm_l2 and the interpolant after editing the samples.
    void finalize();
    void write_csv(std::ostream& os) const;

private:
    std::shared_ptr<const std::function<double(double)>> spline_;
};

double trapezoid_l2_norm(const std::vector<double>& u, double T);
std::vector<double> uniform_grid(double T, int points);

} // namespace ctrllab
