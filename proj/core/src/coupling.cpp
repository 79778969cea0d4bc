#include "ctrllab/coupling.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/special_functions/cos_pi.hpp>
#include <boost/math/special_functions/sin_pi.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctrllab {

namespace {

// Trig term amp * trig((inum + wsign * omega) s); omega is either the exact
// rational num/den or an arbitrary high-precision value.
struct RTerm {
    HP amp;
    long inum;
    int wsign;
    bool is_sin;
};

struct Omega {
    HP value;
    long num = 0;
    long den = 0; // den > 0: exact rational

    bool exact() const { return den > 0; }
};

long pos_mod(long a, long m) {
    long r = a % m;
    return r < 0 ? r + m : r;
}

HP sin_pi_rational(long a, long d) {
    long r = pos_mod(a, 2 * d);
    if (r % d == 0) return HP(0);
    return boost::multiprecision::sin(hp_pi() * HP(r) / HP(d));
}

HP cos_pi_rational(long a, long d) {
    long r = pos_mod(a, 2 * d);
    if (r % d == 0) return HP((r / d) % 2 == 0 ? 1 : -1);
    return boost::multiprecision::cos(hp_pi() * HP(r) / HP(d));
}

// int_0^pi trig(mu s) ds
HP integrate_term(const RTerm& t, const Omega& w) {
    HP mu, s, c;
    bool zero;
    if (w.exact() || t.wsign == 0) {
        long d = w.exact() ? w.den : 1;
        long a = t.inum * d + t.wsign * w.num;
        zero = (a == 0);
        mu = HP(a) / HP(d);
        s = sin_pi_rational(a, d);
        c = cos_pi_rational(a, d);
    } else {
        mu = HP(t.inum) + HP(t.wsign) * w.value;
        zero = (mu == 0);
        HP arg = hp_pi() * mu;
        s = boost::multiprecision::sin(arg);
        c = boost::multiprecision::cos(arg);
    }
    if (zero) return t.is_sin ? HP(0) : HP(t.amp * hp_pi());
    if (t.is_sin) return t.amp * (HP(1) - c) / mu;
    return t.amp * s / mu;
}

// multiply by trig((a + b omega) s)
std::vector<RTerm> times(const std::vector<RTerm>& in, long a, int b, bool by_sin) {
    std::vector<RTerm> out;
    out.reserve(2 * in.size());
    for (const auto& t : in) {
        HP h = t.amp / 2;
        long ip = t.inum + a, im = t.inum - a;
        int wp = t.wsign + b, wm = t.wsign - b;
        if (by_sin) {
            if (t.is_sin) {
                out.push_back({h, im, wm, false});
                out.push_back({-h, ip, wp, false});
            } else {
                out.push_back({h, ip, wp, true});
                out.push_back({-h, im, wm, true});
            }
        } else {
            if (t.is_sin) {
                out.push_back({h, ip, wp, true});
                out.push_back({h, im, wm, true});
            } else {
                out.push_back({h, im, wm, false});
                out.push_back({h, ip, wp, false});
            }
        }
    }
    return out;
}

HP integrate_all(const std::vector<RTerm>& ts, const Omega& w) {
    HP s = 0;
    for (const auto& t : ts) s += integrate_term(t, w);
    return s;
}

std::vector<RTerm> hp_terms(const HP& c0, const std::vector<HP>& s, const std::vector<HP>& c) {
    std::vector<RTerm> t;
    if (c0 != 0) t.push_back({c0, 0, 0, false});
    for (std::size_t m = 0; m < s.size(); ++m)
        if (s[m] != 0) t.push_back({s[m], long(m + 1), 0, true});
    for (std::size_t m = 0; m < c.size(); ++m)
        if (c[m] != 0) t.push_back({c[m], long(m + 1), 0, false});
    return t;
}

} // namespace

Coupling Coupling::zero() { return trig_series(0.0, {}, {}); }

Coupling Coupling::constant(double c0) { return trig_series(c0, {}, {}); }

Coupling Coupling::sine_series(std::vector<double> s) { return trig_series(0.0, std::move(s), {}); }

Coupling Coupling::trig_series(double c0, std::vector<double> s, std::vector<double> c) {
    Coupling q;
    q.c0_ = c0;
    q.s_ = std::move(s);
    q.c_ = std::move(c);
    auto check = [](double v) {
        if (!std::isfinite(v)) throw InputError("coupling: non-finite coefficient");
    };
    check(q.c0_);
    std::for_each(q.s_.begin(), q.s_.end(), check);
    std::for_each(q.c_.begin(), q.c_.end(), check);
    q.build_poly();
    return q;
}

Coupling Coupling::trig_series_hp(HP c0, std::vector<HP> s, std::vector<HP> c) {
    std::vector<double> sd, cd;
    for (const auto& v : s) sd.push_back(to_double(v));
    for (const auto& v : c) cd.push_back(to_double(v));
    Coupling q = trig_series(to_double(c0), std::move(sd), std::move(cd));
    q.c0_hp_ = std::move(c0);
    q.s_hp_ = std::move(s);
    q.c_hp_ = std::move(c);
    q.has_hp_ = true;
    return q;
}

Coupling Coupling::sampled(SampledFunction f) {
    Coupling q;
    q.samples_ = std::make_shared<SampledFunction>(std::move(f));
    return q;
}

Coupling Coupling::synthetic_rational(int i0, int j0, double tau, int L, int bits) {
    if (i0 < 1 || j0 < 1 || std::gcd(i0, j0) != 1) throw InputError("synthetic coupling: i0, j0 must be coprime");
    if (!(tau > 0.0) || L < 1) throw InputError("synthetic coupling: need tau > 0 and L >= 1");
    ScopedBits guard(bits);
    const int d = std::abs(i0 - j0), s = i0 + j0;
    const int top = std::max(d, 2) * L;
    std::vector<HP> c(static_cast<std::size_t>(top), HP(0));
    // scale so that |I(i0^2 l^2)| = exp(-tau i0^2 l^2)
    const HP scale = HP(4) / hp_pi();
    auto target = [&](int l) {
        return scale * boost::multiprecision::exp(-HP(tau) * HP(i0) * HP(i0) * HP(l) * HP(l));
    };
    if (d == 0) {
        for (int l = 1; l <= L; ++l) c[2 * l - 1] = -target(l);
    } else {
        for (int l = L; l >= 1; --l) {
            HP upper = (s * l <= top) ? c[s * l - 1] : HP(0);
            c[d * l - 1] = target(l) + upper;
        }
    }
    return trig_series_hp(HP(0), {}, std::move(c));
}

void Coupling::build_poly() {
    poly_ = TrigPoly();
    if (c0_ != 0.0) poly_.add({c0_, 0.0, false, 0});
    for (std::size_t m = 0; m < s_.size(); ++m) poly_.add({s_[m], double(m + 1), true, 0});
    for (std::size_t m = 0; m < c_.size(); ++m) poly_.add({c_[m], double(m + 1), false, 0});
}

bool Coupling::is_zero() const {
    if (samples_) return samples_->sup_norm() == 0.0;
    return poly_.terms().empty() && !has_hp_;
}

double Coupling::operator()(double x) const { return samples_ ? (*samples_)(x) : poly_(x); }

double Coupling::sup_bound() const {
    if (samples_) return samples_->sup_norm();
    double b = std::abs(c0_);
    for (double v : s_) b += std::abs(v);
    for (double v : c_) b += std::abs(v);
    return b;
}

double Coupling::bandwidth() const {
    if (samples_) return 0.5 * static_cast<double>(samples_->x().size());
    return static_cast<double>(std::max(s_.size(), c_.size()));
}

const TrigPoly& Coupling::trig() const {
    if (samples_) throw DomainError("coupling is sampled, not a trigonometric series");
    return poly_;
}

TrigPoly Coupling::times_phi(int k) const { return trig().times_sin(k) * kSqrt2OverPi; }

QuadResult Coupling::inner_phi(int k, int n, const PrecisionContext& ctx) const {
    if (!samples_) {
        QuadResult r;
        r.value = kSqrt2OverPi * kSqrt2OverPi * poly_.times_sin(k).sine_moment(n);
        r.error = 1e-15 * (1.0 + sup_bound());
        return r;
    }
    OscillatoryIntegrand in;
    const auto& f = *samples_;
    in.factor = [&f, k](double x) { return (2.0 / kPi) * f(x) * std::sin(k * x); };
    in.factor_bandwidth = k;
    in.omega = n;
    return quad_oscillatory(in, ctx);
}

QuadResult Coupling::i_integral(int k, double omega, const PrecisionContext& ctx) const {
    if (!samples_) {
        TrigPoly f = times_phi(k);
        double sw = boost::math::sin_pi(omega), cw = boost::math::cos_pi(omega);
        QuadResult r;
        r.value = sw * f.times_cos(omega).integral() - cw * f.times_sin(omega).integral();
        r.error = 1e-15 * (1.0 + sup_bound());
        return r;
    }
    OscillatoryIntegrand in;
    const auto& f = *samples_;
    in.factor = [&f, k](double x) { return f(x) * kSqrt2OverPi * std::sin(k * x); };
    in.factor_bandwidth = k;
    in.omega = -omega;
    in.phase = omega * kPi;
    return quad_oscillatory(in, ctx);
}


std::vector<HP> Coupling::hp_coefficients(HP& c0, std::vector<HP>& c) const {
    if (samples_) throw DomainError("high-precision couplings need a trigonometric series q");
    std::vector<HP> s;
    c.clear();
    if (has_hp_) {
        for (const HP& v : s_hp_) s.push_back(at_current(v));
        for (const HP& v : c_hp_) c.push_back(at_current(v));
        c0 = at_current(c0_hp_);
    } else {
        for (double v : s_) s.emplace_back(v);
        for (double v : c_) c.emplace_back(v);
        c0 = c0_;
    }
    return s;
}

HP Coupling::inner_phi_hp(int k, int n) const {
    HP c0;
    std::vector<HP> c;
    auto s = hp_coefficients(c0, c);
    auto t = times(times(hp_terms(c0, s, c), k, 0, true), n, 0, true);
    return HP(2) / hp_pi() * integrate_all(t, Omega{});
}

HP Coupling::i_integral_hp(int k, long num, long den) const {
    if (den <= 0) throw DomainError("frequency denominator must be positive");
    Omega w{HP(num) / HP(den), num, den};
    return i_integral_hp_impl(k, w.value, num, den);
}

HP Coupling::i_integral_hp(int k, const HP& omega) const { return i_integral_hp_impl(k, omega, 0, 0); }

HP Coupling::i_integral_hp_impl(int k, const HP& omega_in, long num, long den) const {
    const HP omega = at_current(omega_in);
    HP c0;
    std::vector<HP> c;
    auto s = hp_coefficients(c0, c);
    Omega w{omega, num, den};
    auto base = times(hp_terms(c0, s, c), k, 0, true);
    // sin(w (pi - s)) = sin(w pi) cos(w s) - cos(w pi) sin(w s)
    HP a = integrate_all(times(base, 0, 1, false), w);
    HP b = integrate_all(times(base, 0, 1, true), w);
    HP sw, cw;
    if (w.exact()) {
        sw = sin_pi_rational(num, den);
        cw = cos_pi_rational(num, den);
    } else {
        sw = boost::multiprecision::sin(hp_pi() * omega);
        cw = boost::multiprecision::cos(hp_pi() * omega);
    }
    return boost::multiprecision::sqrt(HP(2) / hp_pi()) * (sw * a - cw * b);
}

SineSeries Coupling::projected(std::size_t n, const PrecisionContext& ctx) const {
    if (!samples_) {
        SineSeries r(n);
        for (std::size_t m = 1; m <= n; ++m) r.at(m) = kSqrt2OverPi * poly_.sine_moment(double(m));
        return r;
    }
    return project(*samples_, n, ctx);
}

} // namespace ctrllab
