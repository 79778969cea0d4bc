#pragma once

#include <vector>

namespace ctrllab {

// amp * x^xpow * (sin|cos)(freq * x), freq >= 0, xpow in {0, 1}.
struct TrigTerm {
    double amp = 0.0;
    double freq = 0.0;
    bool is_sin = true;
    int xpow = 0;
};

// Exact integrals over [0, pi]; small frequencies fall back to Taylor series.
double int_xp_cos(double mu, int xpow);
double int_xp_sin(double mu, int xpow);

// Finite sum of TrigTerm with exact calculus on [0, pi].
class TrigPoly {
public:
    TrigPoly() = default;
    explicit TrigPoly(std::vector<TrigTerm> terms);

    static TrigPoly sine(double freq, double amp = 1.0);
    static TrigPoly cosine(double freq, double amp = 1.0);

    const std::vector<TrigTerm>& terms() const { return terms_; }

    TrigPoly& add(const TrigTerm& t);
    TrigPoly& operator+=(const TrigPoly& o);
    TrigPoly operator+(const TrigPoly& o) const;
    TrigPoly operator*(double s) const;

    // Product with a single sin/cos factor (product-to-sum).
    TrigPoly times_sin(double freq) const;
    TrigPoly times_cos(double freq) const;
    TrigPoly operator*(const TrigPoly& o) const;

    double operator()(double x) const;
    double integral() const;
    // integral over [0, pi] of this * sin(n x)
    double sine_moment(double n) const;

    // D[f](x) = int_0^x sin(omega (x - s)) f(s) ds, only defined for xpow = 0 terms.
    TrigPoly duhamel(double omega) const;

    // Derivative at x = 0.
    double derivative_at_zero() const;

    // Merge terms with equal (freq, kind, xpow).
    TrigPoly simplified() const;

private:
    std::vector<TrigTerm> terms_;
};

} // namespace ctrllab
