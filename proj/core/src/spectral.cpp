#include "ctrllab/spectral.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/special_functions/sin_pi.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace ctrllab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// below this |sin(pi k / sqrt(nu))| the 53-bit closed form is not trusted
constexpr double kSinFloor = 1e-8;

int bits_for(double tiny) { return 53 + static_cast<int>(std::ceil(-std::log2(std::max(tiny, 1e-300)))); }

double omega_of(const ProblemData& p, int k) {
    if (p.nu.is_rational()) return static_cast<double>(k) * p.nu.j0 / p.nu.i0;
    return static_cast<double>(k) / p.nu.sqrt_nu_d;
}

double tail_bound_for(const ProblemData& p, int k, std::size_t n) {
    double m = static_cast<double>(n + 1);
    double gap = p.nu.nu_d * m * m - static_cast<double>(k) * k;
    if (gap <= 0) return std::numeric_limits<double>::infinity();
    return p.q.sup_bound() * m / gap;
}

// (1/omega) int_0^x sin(omega (x - s)) f(s) ds by composite Gauss-Legendre
double duhamel_numeric(const std::function<double(double)>& f, double omega, double x, double bw, int ppp) {
    if (x <= 0) return 0.0;
    int panels = ppp * std::max(1, static_cast<int>(std::ceil((omega + bw) * x / (2 * kPi)))) + 2;
    return gauss_composite([&](double s) { return std::sin(omega * (x - s)) * f(s); }, 0.0, x, panels) / omega;
}

PsiResult closed_form_impl(const ProblemData& p, int k) {
    PsiResult r;
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    const double nu = p.nu.nu_d;
    const double w = omega_of(p, k);
    const double s = boost::math::sin_pi(w);
    if (std::abs(s) < kSinFloor)
        throw PrecisionEscalation("closed-form psi_" + std::to_string(k) + ": sin(k pi / sqrt(nu)) below the floor",
                                  bits_for(std::abs(s)));
    QuadResult I = p.q.i_integral(k, w, p.ctx);
    const double a = -I.value / (nu * s);
    r.psi_prime_zero = a;
    r.quad_error = I.error / (nu * std::abs(s));
    r.tail_bound = tail_bound_for(p, k, N);
    r.psi = SineSeries(N);
    if (p.q.is_zero()) return r;
    if (p.q.is_trig()) {
        TrigPoly f = p.q.times_phi(k) * (1.0 / nu);
        TrigPoly P = f.duhamel(w).simplified();
        TrigPoly hom = TrigPoly::sine(w, a / w);
        for (std::size_t n = 1; n <= N; ++n)
            r.psi.at(n) = kSqrt2OverPi * (hom.sine_moment(double(n)) + P.sine_moment(double(n)) / w);
        return r;
    }
    const Coupling& q = p.q;
    auto f = [&q, k, nu](double x) { return q(x) * kSqrt2OverPi * std::sin(k * x) / nu; };
    const double bw = k + q.bandwidth();
    const int ppp = p.ctx.quad_panels_per_period;
    r.psi = project(
        [&](double x) { return a * std::sin(w * x) / w + duhamel_numeric(f, w, x, bw, ppp); }, N, p.ctx, bw);
    return r;
}

} // namespace

std::string to_string(Branch b) { return b == Branch::Fast ? "fast" : "slow"; }

std::string to_string(LambdaTag t) {
    switch (t) {
    case LambdaTag::Irrational: return "irrational";
    case LambdaTag::L1: return "Lambda1";
    case LambdaTag::L2: return "Lambda2";
    case LambdaTag::L3: return "Lambda3";
    }
    return "?";
}

std::string to_string(Classification c) {
    switch (c) {
    case Classification::Simple: return "simple";
    case Classification::Double: return "double";
    case Classification::GeneralizedChain: return "generalized-chain";
    }
    return "?";
}

std::string to_string(Regime r) {
    switch (r) {
    case Regime::IrrationalGt1: return "irrational_gt1";
    case Regime::IrrationalLt1: return "irrational_lt1";
    case Regime::Rational: return "rational";
    }
    return "?";
}

NuValue NuValue::rational(int i0, int j0, int bits) {
    if (i0 < 1 || j0 < 1) throw InputError("rational nu needs positive i0, j0");
    if (std::gcd(i0, j0) != 1)
        throw InputError("rational nu: i0 and j0 must be coprime, got " + std::to_string(i0) + "/" +
                         std::to_string(j0));
    ScopedBits g(bits);
    NuValue v;
    v.kind = NuKind::Rational;
    v.i0 = i0;
    v.j0 = j0;
    v.bits = bits;
    v.sqrt_nu = HP(i0) / HP(j0);
    v.nu = v.sqrt_nu * v.sqrt_nu;
    v.error_bound = 0;
    v.sqrt_nu_d = static_cast<double>(i0) / j0;
    v.nu_d = static_cast<double>(i0) * i0 / (static_cast<double>(j0) * j0);
    return v;
}

NuValue NuValue::real(const std::string& text, int bits) {
    if (bits < 53) throw InputError("precision below 53 bits");
    ScopedBits g(bits);
    HP nu;
    try {
        nu = HP(text);
    } catch (const std::exception&) {
        throw InputError("nu: cannot parse '" + text + "' as a decimal number");
    }
    if (!(nu > 0)) throw InputError("nu must be positive");
    HP s = boost::multiprecision::sqrt(nu);
    const HP tol = boost::multiprecision::ldexp(HP(1), -bits / 2);
    for (int j = 1; j <= 1000; ++j) {
        HP x = s * j;
        HP i = boost::multiprecision::round(x);
        if (i > 0 && boost::multiprecision::abs(x - i) < tol * j) {
            long ii = i.convert_to<long>();
            int g2 = std::gcd(static_cast<int>(ii), j);
            return rational(static_cast<int>(ii) / g2, j / g2, bits);
        }
    }
    return from_sqrt(s, s * boost::multiprecision::ldexp(HP(1), 2 - bits), bits);
}

NuValue NuValue::from_sqrt(const HP& s, const HP& err, int bits) {
    ScopedBits g(bits);
    NuValue v;
    v.kind = NuKind::Real;
    v.bits = bits;
    v.sqrt_nu = s;
    v.nu = s * s;
    v.error_bound = err;
    v.sqrt_nu_d = to_double(s);
    v.nu_d = to_double(v.nu);
    v.i0 = v.j0 = 0;
    return v;
}

Regime NuValue::regime() const {
    if (kind == NuKind::Rational) return Regime::Rational;
    return sqrt_nu_d > 1.0 ? Regime::IrrationalGt1 : Regime::IrrationalLt1;
}

std::string NuValue::describe() const {
    std::ostringstream os;
    if (kind == NuKind::Rational) {
        os << "sqrt(nu) = " << i0 << "/" << j0;
    } else {
        os.precision(20);
        os << (kind == NuKind::Liouville ? "liouville " : "real ") << "sqrt(nu) = " << sqrt_nu_d;
    }
    return os.str();
}

double chain_from_integral(double I, int j0l) { return 2.0 / kPi * ((j0l % 2 == 1) ? 1.0 : -1.0) * I; }

PsiResult psi_closed_form(const ProblemData& p, int k) {
    if (k < 1) throw DomainError("psi index must be positive");
    if (p.nu.is_rational()) throw DomainError("psi_closed_form needs an irrational sqrt(nu); use psi_tilde");
    return closed_form_impl(p, k);
}

PsiResult psi_tilde(const ProblemData& p, int k) {
    if (!p.nu.is_rational()) throw DomainError("psi_tilde needs a rational sqrt(nu)");
    if (k < 1 || k % p.nu.i0 == 0)
        throw DomainError("psi_tilde: k = " + std::to_string(k) + " is a multiple of i0 = " + std::to_string(p.nu.i0));
    return closed_form_impl(p, k);
}

PsiResult psi_series(const ProblemData& p, int k) {
    if (k < 1) throw DomainError("psi index must be positive");
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    PsiResult r;
    r.psi = SineSeries(N);
    const double k2 = static_cast<double>(k) * k;
    for (std::size_t n = 1; n <= N; ++n) {
        double den;
        if (p.nu.is_rational()) {
            long lhs = static_cast<long>(k) * k * p.nu.j0 * p.nu.j0;
            long rhs = static_cast<long>(n) * n * p.nu.i0 * p.nu.i0;
            if (lhs == rhs) throw DomainError("psi_series: k^2 = nu n^2 at n = " + std::to_string(n));
            den = static_cast<double>(lhs - rhs) / (static_cast<double>(p.nu.j0) * p.nu.j0);
        } else {
            den = k2 - p.nu.nu_d * static_cast<double>(n) * n;
            if (std::abs(den) < 1e-8 * k2)
                throw PrecisionEscalation("psi_series: k^2 - nu n^2 underflows at n = " + std::to_string(n),
                                          bits_for(std::abs(den) / k2));
        }
        QuadResult c = p.q.inner_phi(k, static_cast<int>(n), p.ctx);
        r.psi.at(n) = c.value / den;
        r.quad_error = std::max(r.quad_error, c.error / std::abs(den));
    }
    r.psi_prime_zero = r.psi.derivative_at_zero();
    r.tail_bound = tail_bound_for(p, k, N);
    return r;
}

PsiResult ode_oracle_psi(const ProblemData& p, int k) {
    if (k < 1) throw DomainError("psi index must be positive");
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    const double nu = p.nu.nu_d;
    const double lam = static_cast<double>(k) * k / nu;
    const double w = std::sqrt(lam);
    const double sw = std::sin(w * kPi);
    if (std::abs(sw) < kSinFloor)
        throw PrecisionEscalation("ODE oracle: resonant shooting at k = " + std::to_string(k), bits_for(std::abs(sw)));
    const Coupling& q = p.q;
    auto f = [&q, k, nu](double s) { return q(s) * kSqrt2OverPi * std::sin(k * s) / nu; };
    const double bw = k + q.bandwidth();
    const int ppp = std::max(8, p.ctx.quad_panels_per_period);
    const int panels = ppp * std::max(1, static_cast<int>(std::ceil((w + bw) / 2))) + 2;
    // y(x) = a sin(w x)/w + (1/w) int_0^x sin(w (x - s)) f(s) ds, y(pi) = 0
    const double a =
        -gauss_composite([&](double s) { return f(s) * std::sin(w * (kPi - s)); }, 0.0, kPi, panels) / sw;
    PsiResult r;
    r.psi_prime_zero = a;
    r.tail_bound = tail_bound_for(p, k, N);
    r.psi = project([&](double x) { return a * std::sin(w * x) / w + duhamel_numeric(f, w, x, bw, ppp); }, N,
                    p.ctx, bw);
    return r;
}

PsiHat psi_hat(const ProblemData& p, int l) {
    if (!p.nu.is_rational()) throw DomainError("psi_hat needs a rational sqrt(nu)");
    if (l < 1) throw DomainError("psi_hat: l must be positive");
    const int i0 = p.nu.i0, j0 = p.nu.j0;
    const int k = i0 * l, w = j0 * l;
    const double nu = p.nu.nu_d;
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    PsiHat h;
    QuadResult I = p.q.i_integral(k, static_cast<double>(w), p.ctx);
    QuadResult chain = p.q.inner_phi(k, w, p.ctx);
    h.coupling_integral = kSqrtPiOver2 * I.value;
    h.quad_error = std::max(I.error, chain.error);
    h.is_double = std::abs(I.value) < 10.0 * I.error;
    h.chain_coefficient = h.is_double ? 0.0 : chain.value;
    h.beta = SineSeries(N);
    const double wd = static_cast<double>(w);
    if (p.q.is_trig()) {
        TrigPoly F = (p.q.times_phi(k) + TrigPoly::sine(wd, -h.chain_coefficient * kSqrt2OverPi)) * (1.0 / nu);
        TrigPoly P = F.duhamel(wd).simplified() * (1.0 / wd);
        for (std::size_t n = 1; n <= N; ++n) h.beta.at(n) = kSqrt2OverPi * P.sine_moment(double(n));
        h.beta_prime_zero = P.derivative_at_zero();
        h.alpha = -kSqrt2OverPi * P.sine_moment(wd);
    } else {
        const Coupling& q = p.q;
        const double cc = h.chain_coefficient;
        auto F = [&q, k, w, nu, cc](double s) {
            return (q(s) * std::sin(k * s) - cc * std::sin(w * s)) * kSqrt2OverPi / nu;
        };
        const double bw = k + q.bandwidth();
        const int ppp = p.ctx.quad_panels_per_period;
        auto beta = [&](double x) { return duhamel_numeric(F, wd, x, bw, ppp); };
        h.beta = project(beta, N, p.ctx, bw);
        // derivative of the Duhamel integral at 0 vanishes identically
        h.beta_prime_zero = 0.0;
        const int panels = ppp * std::max(1, static_cast<int>(std::ceil((wd + bw) / 2))) + 2;
        h.alpha = -gauss_composite([&](double x) { return beta(x) * kSqrt2OverPi * std::sin(wd * x); }, 0.0, kPi,
                                   panels);
    }
    h.psi_hat = h.beta + SineSeries::mode(static_cast<std::size_t>(w), N, h.alpha).resized(N);
    h.psi_prime_zero = h.alpha * wd * kSqrt2OverPi + h.beta_prime_zero;
    return h;
}

QuadResult coupling_integral(const ProblemData& p, double zeta) {
    if (!p.nu.is_rational()) throw DomainError("coupling_integral is defined in the rational regime");
    const double r = std::round(std::sqrt(zeta));
    if (!(zeta > 0) || std::abs(r * r - zeta) > 1e-9 * zeta)
        throw DomainError("coupling_integral: zeta = " + std::to_string(zeta) + " is not in Lambda2 or Lambda3");
    const int k = static_cast<int>(r);
    QuadResult I = p.q.i_integral(k, omega_of(p, k), p.ctx);
    I.value *= kSqrtPiOver2;
    I.error *= kSqrtPiOver2;
    return I;
}

HP coupling_integral_hp(const ProblemData& p, int k) {
    const HP w = boost::multiprecision::sqrt(hp_pi() / 2);
    if (!p.nu.is_rational()) return w * p.q.i_integral_hp(k, HP(k) / p.nu.sqrt_nu);
    return w * p.q.i_integral_hp(k, static_cast<long>(k) * p.nu.j0, p.nu.i0);
}

EigenPair fast_eigenpair(const ProblemData& p, int k) {
    EigenPair e;
    e.lambda = static_cast<double>(k) * k;
    e.branch = Branch::Fast;
    e.k = k;
    e.tag = p.nu.is_rational() ? LambdaTag::L2 : LambdaTag::Irrational;
    PsiResult r = p.nu.is_rational() ? psi_tilde(p, k) : psi_closed_form(p, k);
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    e.eigfn = VectorField2(SineSeries::mode(static_cast<std::size_t>(k), N).resized(N), r.psi);
    e.psi_prime_zero = r.psi_prime_zero;
    e.observation = p.nu.nu_d * r.psi_prime_zero;
    e.observation_error = p.nu.nu_d * r.quad_error;
    QuadResult I = p.q.i_integral(k, omega_of(p, k), p.ctx);
    e.coupling_integral = kSqrtPiOver2 * I.value;
    e.has_coupling = true;
    return e;
}

EigenPair slow_eigenpair(const ProblemData& p, int k) {
    if (p.nu.is_rational() && k % p.nu.j0 == 0)
        throw DomainError("slow index " + std::to_string(k) + " belongs to a merged eigenvalue");
    EigenPair e;
    e.lambda = p.nu.nu_d * k * k;
    e.branch = Branch::Slow;
    e.k = k;
    e.tag = p.nu.is_rational() ? LambdaTag::L1 : LambdaTag::Irrational;
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    e.eigfn = VectorField2(SineSeries(N), SineSeries::mode(static_cast<std::size_t>(k), N).resized(N));
    e.observation = p.nu.nu_d * k * kSqrt2OverPi;
    e.coupling_integral = kNaN;
    return e;
}

EigenPair chain_eigenpair(const ProblemData& p, int l) {
    PsiHat h = psi_hat(p, l);
    const int i0 = p.nu.i0, j0 = p.nu.j0;
    const std::size_t N = static_cast<std::size_t>(p.ctx.n_max);
    EigenPair e;
    e.lambda = static_cast<double>(i0) * i0 * l * l;
    e.branch = Branch::Slow;
    e.k = j0 * l;
    e.partner_k = i0 * l;
    e.tag = LambdaTag::L3;
    e.classification = h.is_double ? Classification::Double : Classification::GeneralizedChain;
    e.eigfn = VectorField2(SineSeries(N), SineSeries::mode(static_cast<std::size_t>(j0 * l), N).resized(N));
    e.generalized_partner = VectorField2(SineSeries::mode(static_cast<std::size_t>(i0 * l), N).resized(N), h.psi_hat);
    e.observation = p.nu.nu_d * j0 * l * kSqrt2OverPi;
    e.coupling_integral = h.coupling_integral;
    e.chain_coefficient = h.chain_coefficient;
    e.psi_prime_zero = h.psi_prime_zero;
    e.alpha_l = h.alpha;
    e.has_coupling = true;
    e.observation_error = h.quad_error;
    return e;
}

SpectrumTable spectrum(const ProblemData& p) {
    if (p.K < 1) throw InputError("spectrum: K must be at least 1");
    p.ctx.validate();
    SpectrumTable t;
    t.K = p.K;
    t.regime = p.nu.regime();
    t.complete_below = std::min(double(p.K) * p.K, p.nu.nu_d * p.K * p.K);
    if (!p.nu.is_rational()) {
        for (int k = 1; k <= p.K; ++k) {
            t.entries.push_back(fast_eigenpair(p, k));
            t.entries.push_back(slow_eigenpair(p, k));
        }
    } else {
        const int i0 = p.nu.i0, j0 = p.nu.j0;
        std::set<int> chains;
        for (int k = 1; k <= p.K; ++k) {
            if (k % i0 == 0)
                chains.insert(k / i0);
            else
                t.entries.push_back(fast_eigenpair(p, k));
            if (k % j0 == 0)
                chains.insert(k / j0);
            else
                t.entries.push_back(slow_eigenpair(p, k));
        }
        for (int l : chains) t.entries.push_back(chain_eigenpair(p, l));
    }
    std::stable_sort(t.entries.begin(), t.entries.end(),
                     [](const EigenPair& a, const EigenPair& b) { return a.lambda < b.lambda; });
    return t;
}

void SpectrumTable::write_csv(std::ostream& os) const {
    os << "lambda,branch,k,Lambda_tag,observation,coupling_integral,double_flag\n";
    os.precision(17);
    for (const auto& e : entries) {
        os << e.lambda << ',' << to_string(e.branch) << ',' << e.k << ',' << to_string(e.tag) << ','
           << e.observation << ',';
        if (e.has_coupling)
            os << e.coupling_integral;
        else
            os << "nan";
        os << ',' << (e.classification == Classification::Double ? 1 : 0) << '\n';
    }
}

GapReport gap_condition(const NuValue& nu, double lambda_max) {
    if (!(lambda_max > 0.0)) throw InputError("gap condition: lambda_max must be positive");
    GapReport r;
    r.lambda_max = lambda_max;
    if (nu.is_rational()) {
        // scaled values k^2 j0^2 and i0^2 j^2 are integers
        const long long J2 = static_cast<long long>(nu.j0) * nu.j0;
        const long long I2 = static_cast<long long>(nu.i0) * nu.i0;
        const long double cap = static_cast<long double>(lambda_max) * J2;
        std::vector<long long> v;
        for (long long k = 1; static_cast<long double>(k * k * J2) <= cap; ++k) v.push_back(k * k * J2);
        for (long long j = 1; static_cast<long double>(I2 * j * j) <= cap; ++j) v.push_back(I2 * j * j);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        r.count = v.size();
        long long best = std::numeric_limits<long long>::max(), lo = 0, hi = 0;
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) {
                ++r.pairs;
                if (v[b] - v[a] < best) {
                    best = v[b] - v[a];
                    lo = v[a];
                    hi = v[b];
                }
            }
        if (r.pairs) {
            r.min_gap = double(best) / double(J2);
            r.gap_lo = double(lo) / double(J2);
            r.gap_hi = double(hi) / double(J2);
        }
        r.lower_bound = 1.0 / double(J2);
    } else {
        std::vector<double> v;
        for (int k = 1; double(k) * k <= lambda_max; ++k) v.push_back(double(k) * k);
        for (int j = 1; nu.nu_d * j * j <= lambda_max; ++j) v.push_back(nu.nu_d * j * j);
        std::sort(v.begin(), v.end());
        r.count = v.size();
        r.min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) {
                ++r.pairs;
                if (v[b] - v[a] < r.min_gap) {
                    r.min_gap = v[b] - v[a];
                    r.gap_lo = v[a];
                    r.gap_hi = v[b];
                }
            }
    }
    r.holds = r.pairs == 0 || r.min_gap > r.lower_bound;
    return r;
}

IndexMaps index_maps(const NuValue& nu, int K_range) {
    if (nu.is_rational()) throw DomainError("index_maps is defined for irrational sqrt(nu)");
    if (K_range < 1) throw InputError("index_maps: range must be positive");
    ScopedBits g(std::max(nu.bits, 64));
    IndexMaps m;
    const HP half(0.5);
    const HP tie_tol = boost::multiprecision::ldexp(HP(1), -nu.bits / 2);
    auto nearest = [&](const HP& x, int k) {
        HP fl = boost::multiprecision::floor(x);
        HP frac = x - fl;
        if (boost::multiprecision::abs(frac - half) < tie_tol)
            throw PrecisionEscalation("index_maps: near tie at k = " + std::to_string(k), 2 * nu.bits);
        return static_cast<int>((frac < half ? fl : fl + 1).convert_to<long>());
    };
    for (int k = 1; k <= K_range; ++k) {
        m.i_k.push_back(nearest(nu.sqrt_nu * k, k));
        m.j_k.push_back(nearest(HP(k) / nu.sqrt_nu, k));
    }
    auto complement = [](const std::vector<int>& img) {
        std::set<int> s(img.begin(), img.end());
        std::vector<int> out;
        int top = *std::max_element(img.begin(), img.end());
        for (int n = 1; n <= top; ++n)
            if (!s.count(n)) out.push_back(n);
        return out;
    };
    m.i_hat = complement(m.i_k);
    m.j_hat = complement(m.j_k);
    const auto& inj = nu.sqrt_nu_d > 1.0 ? m.i_k : m.j_k;
    if (std::set<int>(inj.begin(), inj.end()).size() != inj.size())
        throw DomainError("index_maps: expected injective nearest-integer map is not injective");
    return m;
}

double observation(const EigenPair& e) { return e.observation; }

VectorField2 normalize_by_observation(const EigenPair& e) {
    if (e.observation == 0.0 || std::abs(e.observation) <= 10.0 * e.observation_error)
        throw NormalizationError("zero boundary observation at lambda = " + std::to_string(e.lambda), e.lambda);
    return e.eigfn * (1.0 / e.observation);
}

ControllabilityReport approx_controllability_check(const ProblemData& p) {
    SpectrumTable t = spectrum(p);
    ControllabilityReport r;
    r.K = p.K;
    for (const auto& e : t.entries) {
        bool fail = false;
        if (e.tag == LambdaTag::L3)
            fail = e.classification == Classification::Double;
        else if (e.branch == Branch::Fast)
            fail = e.observation == 0.0 || std::abs(e.observation) <= 10.0 * e.observation_error;
        if (fail) r.failing_lambdas.push_back(e.lambda);
    }
    r.controllable = r.failing_lambdas.empty();
    std::ostringstream os;
    os << (r.controllable ? "approximately controllable" : "not approximately controllable")
       << " (checked eigenvalues of fast and slow index <= " << p.K << ")";
    r.statement = os.str();
    return r;
}

Eigen::MatrixXd coupling_matrix(const Coupling& q, int N, const PrecisionContext& ctx) {
    Eigen::MatrixXd Q(N, N);
    for (int n = 1; n <= N; ++n)
        for (int m = n; m <= N; ++m) {
            double v = q.inner_phi(m, n, ctx).value;
            Q(n - 1, m - 1) = v;
            Q(m - 1, n - 1) = v;
        }
    return Q;
}

VectorField2 apply_adjoint_operator(const ProblemData& p, const VectorField2& f) {
    const int N = static_cast<int>(f.size());
    Eigen::MatrixXd Q = coupling_matrix(p.q, N, p.ctx);
    SineSeries a(N), b(N);
    for (int n = 1; n <= N; ++n) {
        double n2 = double(n) * n;
        a.at(n) = n2 * f.first[n];
        double s = 0.0;
        for (int m = 1; m <= N; ++m) s += Q(n - 1, m - 1) * f.first[m];
        b.at(n) = s + p.nu.nu_d * n2 * f.second[n];
    }
    return {a, b};
}

double eigen_residual(const ProblemData& p, const EigenPair& e) {
    VectorField2 r = apply_adjoint_operator(p, e.eigfn) - e.eigfn * e.lambda;
    return r.norm(Space::L2);
}

double chain_residual(const ProblemData& p, const EigenPair& e) {
    if (!e.generalized_partner) throw DomainError("eigenpair carries no generalized partner");
    const VectorField2& h = *e.generalized_partner;
    VectorField2 r = apply_adjoint_operator(p, h) - h * e.lambda - e.eigfn * e.chain_coefficient;
    return r.norm(Space::L2);
}

} // namespace ctrllab
