#include "ctrllab/trig.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/special_functions/sin_pi.hpp>
#include <boost/math/special_functions/cos_pi.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace ctrllab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTaylorCut = 0.2;
constexpr double kResonance = 1e-12;

// sum_j (-1)^j mu^(2j+o) pi^(2j+o+p+1) / ((2j+o)! (2j+o+p+1)), o = 0 for cos, 1 for sin
double taylor_moment(double mu, int xpow, int odd) {
    double sum = 0.0;
    double mu_pow = odd ? mu : 1.0;
    double pi_pow = std::pow(kPi, odd + xpow + 1);
    double fact = 1.0;
    for (int j = 0; j < 30; ++j) {
        int m = 2 * j + odd;
        if (j > 0) fact *= static_cast<double>((m - 1) * m);
        double term = mu_pow * pi_pow / (fact * (m + xpow + 1));
        sum += (j % 2 == 0) ? term : -term;
        if (std::abs(term) < 1e-19 * std::abs(sum)) break;
        mu_pow *= mu * mu;
        pi_pow *= kPi * kPi;
    }
    return sum;
}

} // namespace

double int_xp_cos(double mu, int xpow) {
    if (std::abs(mu) < kTaylorCut) return taylor_moment(mu, xpow, 0);
    double s = boost::math::sin_pi(mu), c = boost::math::cos_pi(mu);
    if (xpow == 0) return s / mu;
    return kPi * s / mu + (c - 1.0) / (mu * mu);
}

double int_xp_sin(double mu, int xpow) {
    if (std::abs(mu) < kTaylorCut) return taylor_moment(mu, xpow, 1);
    double s = boost::math::sin_pi(mu), c = boost::math::cos_pi(mu);
    if (xpow == 0) return (1.0 - c) / mu;
    return -kPi * c / mu + s / (mu * mu);
}

TrigPoly::TrigPoly(std::vector<TrigTerm> terms) {
    for (const auto& t : terms) add(t);
}

TrigPoly TrigPoly::sine(double freq, double amp) { return TrigPoly({{amp, freq, true, 0}}); }

TrigPoly TrigPoly::cosine(double freq, double amp) { return TrigPoly({{amp, freq, false, 0}}); }

TrigPoly& TrigPoly::add(const TrigTerm& t) {
    if (t.amp == 0.0) return *this;
    TrigTerm u = t;
    if (u.freq < 0.0) {
        u.freq = -u.freq;
        if (u.is_sin) u.amp = -u.amp;
    }
    if (u.is_sin && u.freq == 0.0) return *this;
    terms_.push_back(u);
    return *this;
}

TrigPoly& TrigPoly::operator+=(const TrigPoly& o) {
    for (const auto& t : o.terms_) add(t);
    return *this;
}

TrigPoly TrigPoly::operator+(const TrigPoly& o) const {
    TrigPoly r = *this;
    r += o;
    return r;
}

TrigPoly TrigPoly::operator*(double s) const {
    TrigPoly r;
    for (auto t : terms_) {
        t.amp *= s;
        r.add(t);
    }
    return r;
}

TrigPoly TrigPoly::times_sin(double a) const {
    TrigPoly r;
    for (const auto& t : terms_) {
        double h = 0.5 * t.amp;
        if (t.is_sin) {
            // sin(r x) sin(a x) = (cos((r-a)x) - cos((r+a)x)) / 2
            r.add({h, t.freq - a, false, t.xpow});
            r.add({-h, t.freq + a, false, t.xpow});
        } else {
            // cos(r x) sin(a x) = (sin((a+r)x) + sin((a-r)x)) / 2
            r.add({h, a + t.freq, true, t.xpow});
            r.add({h, a - t.freq, true, t.xpow});
        }
    }
    return r;
}

TrigPoly TrigPoly::times_cos(double a) const {
    TrigPoly r;
    for (const auto& t : terms_) {
        double h = 0.5 * t.amp;
        if (t.is_sin) {
            // sin(r x) cos(a x) = (sin((r+a)x) + sin((r-a)x)) / 2
            r.add({h, t.freq + a, true, t.xpow});
            r.add({h, t.freq - a, true, t.xpow});
        } else {
            r.add({h, t.freq - a, false, t.xpow});
            r.add({h, t.freq + a, false, t.xpow});
        }
    }
    return r;
}

TrigPoly TrigPoly::operator*(const TrigPoly& o) const {
    TrigPoly r;
    for (const auto& t : o.terms_) {
        if (t.xpow != 0) throw DomainError("TrigPoly product supports only xpow = 0 factors");
        r += (t.is_sin ? times_sin(t.freq) : times_cos(t.freq)) * t.amp;
    }
    return r;
}

double TrigPoly::operator()(double x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
        double v = t.is_sin ? std::sin(t.freq * x) : std::cos(t.freq * x);
        if (t.xpow == 1) v *= x;
        s += t.amp * v;
    }
    return s;
}

double TrigPoly::integral() const {
    double s = 0.0;
    for (const auto& t : terms_)
        s += t.amp * (t.is_sin ? int_xp_sin(t.freq, t.xpow) : int_xp_cos(t.freq, t.xpow));
    return s;
}

double TrigPoly::sine_moment(double n) const { return times_sin(n).integral(); }

TrigPoly TrigPoly::duhamel(double w) const {
    if (!(w > 0.0)) throw DomainError("Duhamel frequency must be positive");
    TrigPoly r;
    for (const auto& t : terms_) {
        if (t.xpow != 0) throw DomainError("Duhamel transform needs xpow = 0 terms");
        double rho = t.freq, a = t.amp;
        if (std::abs(rho - w) <= kResonance * w) {
            if (t.is_sin) {
                // (sin wx - w x cos wx) / (2w)
                r.add({a / (2 * w), w, true, 0});
                r.add({-a / 2, w, false, 1});
            } else {
                r.add({a / 2, w, true, 1});
            }
            continue;
        }
        double den = (w - rho) * (w + rho);
        if (t.is_sin) {
            r.add({a * w / den, rho, true, 0});
            r.add({-a * rho / den, w, true, 0});
        } else {
            r.add({a * w / den, rho, false, 0});
            r.add({-a * w / den, w, false, 0});
        }
    }
    return r;
}

double TrigPoly::derivative_at_zero() const {
    double s = 0.0;
    for (const auto& t : terms_) {
        if (t.xpow == 0) {
            if (t.is_sin) s += t.amp * t.freq;
        } else if (!t.is_sin) {
            s += t.amp; // d/dx [x cos] at 0
        }
    }
    return s;
}

TrigPoly TrigPoly::simplified() const {
    std::map<std::tuple<double, bool, int>, double> acc;
    for (const auto& t : terms_) acc[{t.freq, t.is_sin, t.xpow}] += t.amp;
    TrigPoly r;
    for (const auto& [key, amp] : acc) r.add({amp, std::get<0>(key), std::get<1>(key), std::get<2>(key)});
    return r;
}

} // namespace ctrllab
