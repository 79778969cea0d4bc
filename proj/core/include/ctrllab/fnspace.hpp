#pragma once

#include "ctrllab/precision.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ctrllab {

inline constexpr double kPi = 3.14159265358979323846;
// sqrt(2/pi): normalization of phi_n(x) = sqrt(2/pi) sin(n x)
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
inline constexpr double kSqrtPiOver2 = 1.25331413731550025121;

enum class Space { L2, H10, Hm1 };

// Coefficients a_n of phi_n, n = 1..N (stored zero based).
class SineSeries {
public:
    SineSeries() = default;
    explicit SineSeries(std::size_t n) : a_(n, 0.0) {}
    explicit SineSeries(std::vector<double> a);

    static SineSeries mode(std::size_t n, std::size_t cutoff, double amp = 1.0);

    std::size_t size() const { return a_.size(); }
    double operator[](std::size_t n) const { return n >= 1 && n <= a_.size() ? a_[n - 1] : 0.0; }
    double& at(std::size_t n) { return a_.at(n - 1); }
    const std::vector<double>& coeffs() const { return a_; }

    SineSeries resized(std::size_t n) const;

    double operator()(double x) const;
    // Termwise derivative at 0; converges slowly for generic H^1_0 data.
    double derivative_at_zero() const;

    double norm(Space s) const;
    double norm_sq(Space s) const;

    SineSeries operator+(const SineSeries& o) const;
    SineSeries operator-(const SineSeries& o) const;
    SineSeries operator*(double s) const;

private:
    std::vector<double> a_;
};

struct VectorField2 {
    SineSeries first;
    SineSeries second;

    VectorField2() = default;
    VectorField2(SineSeries a, SineSeries b);

    std::size_t size() const { return first.size(); }
    double norm_sq(Space s) const { return first.norm_sq(s) + second.norm_sq(s); }
    double norm(Space s) const;
    VectorField2 operator+(const VectorField2& o) const;
    VectorField2 operator-(const VectorField2& o) const;
    VectorField2 operator*(double s) const;
};

double inner(const SineSeries& f, const SineSeries& g, Space s);
double inner(const VectorField2& f, const VectorField2& g, Space s);

// Uniform samples on [0, pi]; evaluation uses a cubic B-spline.
class SampledFunction {
public:
    SampledFunction(std::vector<double> x, std::vector<double> f);

    static SampledFunction from_function(const std::function<double(double)>& f, std::size_t points);
    static SampledFunction read_csv(const std::string& path);
    void write_csv(std::ostream& os) const;

    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& values() const { return f_; }
    double operator()(double x) const;
    double sup_norm() const;

private:
    std::vector<double> x_, f_;
    std::function<double(double)> spline_;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool warning = false;
    int panels = 0;
};

// int_0^pi factor(x) * (sin|cos)(omega x + phase) dx.
struct OscillatoryIntegrand {
    std::function<double(double)> factor;
    double factor_bandwidth = 0.0; // oscillations of the factor per unit length / (2 pi)
    double omega = 0.0;
    double phase = 0.0;
    bool use_cos = false;
};

QuadResult quad_oscillatory(const OscillatoryIntegrand& in, const PrecisionContext& ctx);

// Composite Gauss-Legendre over [a, b] with the given number of panels.
double gauss_composite(const std::function<double(double)>& f, double a, double b, int panels);

SineSeries project(const std::function<double(double)>& f, std::size_t n, const PrecisionContext& ctx,
                   double bandwidth = 0.0);
SineSeries project(const SampledFunction& f, std::size_t n, const PrecisionContext& ctx);

} // namespace ctrllab
