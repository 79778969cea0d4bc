#include "ctrllab/condensation.hpp"

#include "ctrllab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

namespace ctrllab {

namespace bmp = boost::multiprecision;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// guard bits kept above the magnitude of any cancellation we resolve
constexpr int kGuardBits = 32;

int estimator_bits(const ProblemData& p) { return std::max({p.ctx.working_bits, p.nu.bits, 128}); }

HP hp_of(const BigInt& z) { return HP(z.str()); }

// Fast mode (phi_k, psi_k) in sine coefficients plus its exact observation nu psi_k'(0).
struct HpFast {
    std::vector<HP> b; // b[n-1], n = 1..N
    HP obs;
};

HP coupling_hp(const ProblemData& p, int k, int n) {
    if (p.q.is_trig()) return p.q.inner_phi_hp(k, n);
    return HP(p.q.inner_phi(k, n, p.ctx).value);
}

HP i_integral_any(const ProblemData& p, int k) {
    if (p.q.is_trig()) {
        if (p.nu.is_rational()) return p.q.i_integral_hp(k, static_cast<long>(k) * p.nu.j0, p.nu.i0);
        return p.q.i_integral_hp(k, HP(k) / at_current(p.nu.sqrt_nu));
    }
    double w = p.nu.is_rational() ? double(k) * p.nu.j0 / p.nu.i0 : k / p.nu.sqrt_nu_d;
    return HP(p.q.i_integral(k, w, p.ctx).value);
}

HpFast hp_fast(const ProblemData& p, int k, int N, int bits) {
    HpFast r;
    const HP nu = at_current(p.nu.nu);
    const HP k2 = HP(k) * k;
    const HP floor_rel = bmp::ldexp(HP(1), -(bits - kGuardBits));
    r.b.reserve(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        HP den = k2 - nu * n * n;
        if (p.nu.is_rational() && static_cast<long>(k) * k * p.nu.j0 * p.nu.j0 ==
                                      static_cast<long>(n) * n * p.nu.i0 * p.nu.i0)
            throw DomainError("fast mode " + std::to_string(k) + " is resonant with slow mode " + std::to_string(n));
        if (bmp::abs(den) < floor_rel * k2)
            throw PrecisionEscalation("k^2 - nu n^2 below working precision at k = " + std::to_string(k),
                                      bits + static_cast<int>(-to_double(bmp::log2(bmp::abs(den) / k2))));
        r.b.push_back(coupling_hp(p, k, n) / den);
    }
    HP w = p.nu.is_rational() ? HP(k) * p.nu.j0 / p.nu.i0 : HP(k) / at_current(p.nu.sqrt_nu);
    HP s = bmp::sin(hp_pi() * w);
    if (bmp::abs(s) < floor_rel)
        throw PrecisionEscalation("sin(k pi / sqrt(nu)) below working precision at k = " + std::to_string(k),
                                  bits + static_cast<int>(-to_double(bmp::log2(bmp::abs(s) + bmp::ldexp(HP(1), -4 * bits)))));
    r.obs = -i_integral_any(p, k) / s;
    return r;
}

int series_cutoff(const ProblemData& p, int k) { return std::max(p.ctx.n_max, 2 * k + 32); }

void finish(TimeEstimate& t) {
    for (int Kp = 1; Kp <= t.K; ++Kp) {
        double sup = kNegInf;
        for (const auto& q : t.partials)
            if (!q.excluded && q.k >= Kp && q.k <= t.K) sup = std::max(sup, q.value);
        t.running_sup_tail.emplace_back(Kp, sup);
    }
}

HP log_abs(const HP& x) { return bmp::log(bmp::abs(x)); }

} // namespace

FastModeHP fast_mode_hp(const ProblemData& p, int k, int N, int bits) {
    ScopedBits g(bits);
    HpFast f = hp_fast(p, k, N, bits);
    return FastModeHP{std::move(f.b), std::move(f.obs)};
}

std::string to_string(EstimateKind k) {
    switch (k) {
    case EstimateKind::T1: return "T1";
    case EstimateKind::T2Tilde: return "T2_tilde";
    case EstimateKind::T2Hat: return "T2_hat";
    case EstimateKind::T0Tilde: return "T0_tilde";
    case EstimateKind::T0Hat: return "T0_hat";
    case EstimateKind::T0Rational: return "T0_rational";
    case EstimateKind::Dolecki: return "dolecki";
    }
    return "?";
}

double window_max(const std::vector<Partial>& partials, int K, const std::string& group) {
    const int lo = (K + 1) / 2;
    double m = kNegInf;
    for (const auto& q : partials) {
        if (q.excluded || q.k < lo || q.k > K) continue;
        if (!group.empty() && q.group != group) continue;
        m = std::max(m, q.value);
    }
    return m;
}

void TimeEstimate::write_csv(std::ostream& os) const {
    os << "kind,k,partial,window_estimate\n";
    os.precision(17);
    for (const auto& q : partials) {
        os << (q.group.empty() ? to_string(kind) : q.group) << ',' << q.index << ',';
        if (q.excluded)
            os << "-inf";
        else
            os << q.value;
        os << ',' << estimate_at_K << '\n';
    }
}

TimeEstimate estimate_T1(const ProblemData& p, int K) {
    if (p.nu.is_rational()) throw DomainError("estimate_T1 is defined in the irrational regime");
    if (K < 2) throw InputError("estimate_T1: K must be at least 2");
    const int bits = estimator_bits(p);
    ScopedBits g(bits);
    TimeEstimate t;
    t.kind = EstimateKind::T1;
    t.K = K;
    for (int k = 1; k <= K; ++k) {
        HpFast f = hp_fast(p, k, series_cutoff(p, k), bits);
        if (f.obs == 0)
            throw ControllabilityError("zero boundary observation at fast index k = " + std::to_string(k), double(k) * k);
        HP nsq = HP(k) * k;
        for (std::size_t n = 1; n <= f.b.size(); ++n) nsq += HP(n * n) * f.b[n - 1] * f.b[n - 1];
        HP norm = bmp::sqrt(nsq) / bmp::abs(f.obs);
        Partial q;
        q.k = k;
        q.index = k;
        q.value = to_double(bmp::log(norm) / (HP(k) * k));
        q.alt_value = kNaN;
        q.group = "T1";
        t.partials.push_back(q);
    }
    t.estimate_at_K = window_max(t.partials, K);
    finish(t);
    return t;
}

TimeEstimate estimate_T2(const ProblemData& p, int K) {
    if (p.nu.is_rational()) throw DomainError("estimate_T2 is defined in the irrational regime");
    if (K < 2) throw InputError("estimate_T2: K must be at least 2");
    const bool gt1 = p.nu.regime() == Regime::IrrationalGt1;
    IndexMaps maps = index_maps(p.nu, K);
    const int bits = estimator_bits(p);
    ScopedBits g(bits);
    const HP nu = at_current(p.nu.nu);
    const HP sqrt2pi = bmp::sqrt(HP(2) / hp_pi());
    TimeEstimate t;
    t.kind = gt1 ? EstimateKind::T2Tilde : EstimateKind::T2Hat;
    t.K = K;
    for (int k = 1; k <= K; ++k) {
        // fast index a, slow index b of the near-resonant pair
        const int a = gt1 ? maps.i_k[k - 1] : k;
        const int b = gt1 ? k : maps.j_k[k - 1];
        const int N = std::max(series_cutoff(p, a), b + 32);
        HpFast f = hp_fast(p, a, N, bits);
        if (f.obs == 0)
            throw ControllabilityError("zero boundary observation at fast index k = " + std::to_string(a), double(a) * a);
        const HP slow_obs = nu * b * sqrt2pi;
        // psi_{1,a} - psi_{2,b} in H^1_0
        HP nsq = HP(a) * a / (f.obs * f.obs);
        for (int n = 1; n <= N; ++n) {
            HP c = f.b[n - 1] / f.obs;
            if (n == b) c -= HP(1) / slow_obs;
            nsq += HP(n) * n * c * c;
        }
        const HP den = bmp::abs(HP(a) * a - nu * b * b);
        Partial q;
        q.k = k;
        q.index = k;
        q.group = gt1 ? "T2_tilde" : "T2_hat";
        if (nsq == 0) {
            q.excluded = true;
            q.value = q.alt_value = kNegInf;
        } else {
            HP lq = bmp::log(bmp::sqrt(nsq) / den);
            const HP d_main = gt1 ? nu * b * b : HP(a) * a;
            const HP d_alt = gt1 ? HP(a) * a : nu * b * b;
            q.value = to_double(lq / d_main);
            q.alt_value = to_double(lq / d_alt);
        }
        t.partials.push_back(q);
    }
    t.estimate_at_K = window_max(t.partials, K);
    finish(t);
    return t;
}

TimeEstimate estimate_T0_irrational(const ProblemData& p, int K) {
    TimeEstimate t1 = estimate_T1(p, K);
    TimeEstimate t2 = estimate_T2(p, K);
    TimeEstimate t;
    t.kind = t2.kind == EstimateKind::T2Tilde ? EstimateKind::T0Tilde : EstimateKind::T0Hat;
    t.K = K;
    t.partials = t1.partials;
    t.partials.insert(t.partials.end(), t2.partials.begin(), t2.partials.end());
    t.components = {{"T1", t1.estimate_at_K}, {to_string(t2.kind), t2.estimate_at_K}};
    t.estimate_at_K = std::max(t1.estimate_at_K, t2.estimate_at_K);
    finish(t);
    return t;
}

TimeEstimate estimate_T0_rational(const ProblemData& p, int K) {
    if (!p.nu.is_rational()) throw DomainError("estimate_T0_rational needs a rational sqrt(nu)");
    if (K < 2) throw InputError("estimate_T0_rational: K must be at least 2");
    const int bits = estimator_bits(p);
    ScopedBits g(bits);
    TimeEstimate t;
    t.kind = EstimateKind::T0Rational;
    t.K = K;
    for (int k = 1; k <= K; ++k) {
        const double zeta = double(k) * k;
        HP I;
        if (p.q.is_trig()) {
            I = bmp::sqrt(hp_pi() / 2) * p.q.i_integral_hp(k, static_cast<long>(k) * p.nu.j0, p.nu.i0);
        } else {
            QuadResult r = p.q.i_integral(k, double(k) * p.nu.j0 / p.nu.i0, p.ctx);
            if (std::abs(r.value) <= 10.0 * r.error) I = 0;
            else I = kSqrtPiOver2 * r.value;
        }
        if (I == 0)
            throw ControllabilityError("I(" + std::to_string(static_cast<long long>(zeta)) +
                                           ") = 0: approximate controllability fails",
                                       zeta);
        Partial q;
        q.k = k;
        q.index = zeta;
        q.value = to_double(-log_abs(I) / HP(k * k));
        q.alt_value = kNaN;
        q.group = (k % p.nu.i0 == 0) ? "T0_2" : "T0_1";
        t.partials.push_back(q);
    }
    const double t01 = window_max(t.partials, K, "T0_1");
    const double t02 = window_max(t.partials, K, "T0_2");
    t.components = {{"T0_1", t01}, {"T0_2", t02}};
    t.estimate_at_K = std::max(t01, t02);
    finish(t);
    return t;
}

TimeEstimate estimate_dolecki(const HP& x0_over_pi, int K, int bits) {
    if (K < 2) throw InputError("estimate_dolecki: K must be at least 2");
    ScopedBits g(bits);
    const HP r = at_current(x0_over_pi);
    if (!(r > 0 && r < 1)) throw InputError("estimate_dolecki: x0 must lie in (0, pi)");
    const HP sqrt2pi = bmp::sqrt(HP(2) / hp_pi());
    TimeEstimate t;
    t.kind = EstimateKind::Dolecki;
    t.K = K;
    for (int k = 1; k <= K; ++k) {
        HP v = r * k;
        HP frac = v - bmp::floor(v);
        Partial q;
        q.k = k;
        q.index = k;
        q.alt_value = kNaN;
        if (frac == 0) {
            q.excluded = true;
            q.value = kNegInf;
            t.skipped.push_back(k);
        } else {
            HP phi = sqrt2pi * bmp::sin(hp_pi() * frac);
            q.value = to_double(-log_abs(phi) / HP(k * k));
        }
        t.partials.push_back(q);
    }
    t.estimate_at_K = window_max(t.partials, K);
    finish(t);
    return t;
}

// ---------------------------------------------------------------- Liouville

int liouville_step_bits(const BigInt& k, const BigInt& j, double sigma) {
    (void)j;
    const double kd = k.convert_to<double>();
    const double e = std::pow(kd, 2.0 + sigma) * 1.4426950408889634;
    if (!std::isfinite(e) || e > 1e9) return std::numeric_limits<int>::max();
    return static_cast<int>(std::ceil(e)) + 64;
}

namespace {

// a * jp - b * kp = 1
void bezout(const BigInt& kp, const BigInt& jp, BigInt& a, BigInt& b) {
    BigInt r0 = jp, r1 = kp, s0 = 1, s1 = 0, t0 = 0, t1 = 1;
    while (r1 != 0) {
        BigInt qq = r0 / r1;
        BigInt r2 = r0 - qq * r1, s2 = s0 - qq * s1, t2 = t0 - qq * t1;
        r0 = r1, r1 = r2, s0 = s1, s1 = s2, t0 = t1, t1 = t2;
    }
    // s0 * jp + t0 * kp = gcd = 1
    a = s0;
    b = -t0;
}

BigInt floor_big(const HP& x) {
    HP f = bmp::floor(x);
    std::string s = f.str(0, std::ios_base::fixed);
    auto dot = s.find('.');
    if (dot != std::string::npos) s = s.substr(0, dot);
    return BigInt(s);
}

BigInt ceil_div(const BigInt& a, const BigInt& b) {
    BigInt q = a / b;
    if (q * b < a) q += 1;
    if (q * b < a) q += 1;
    return q;
}

std::pair<BigInt, BigInt> next_convergent(const BigInt& kp, const BigInt& jp, double sigma, Parity parity) {
    // |kp/jp - k/j| = d / (j jp) < exp(-kp^(2+sigma)) / (2 jp)  <=>  j > 2 d exp(kp^(2+sigma))
    const HP growth = bmp::exp(bmp::pow(hp_of(kp), HP(2.0 + sigma)));
    BigInt a, b;
    bezout(kp, jp, a, b);
    BigInt best_k = -1, best_j = -1;
    for (int d = 1; d <= 16; ++d) {
        const BigInt jfloor = floor_big(HP(2 * d) * growth);
        for (int s : {1, -1}) {
            BigInt k0 = a * s * d, j0 = b * s * d;
            BigInt t = ceil_div(jfloor + 1 - j0, jp);
            for (int step = 0; step < 64; ++step, t += 1) {
                BigInt k = k0 + t * kp, j = j0 + t * jp;
                if (k <= kp || j <= jp) continue;
                bool even = ((k + j) % 2) == 0;
                if (even != (parity == Parity::Even)) continue;
                if (bmp::gcd(k, j) != 1) continue;
                if (best_k < 0 || k < best_k || (k == best_k && j < best_j)) {
                    best_k = k;
                    best_j = j;
                }
                break;
            }
        }
    }
    if (best_k < 0) throw ConvergenceError("no admissible next convergent found");
    return {best_k, best_j};
}

} // namespace

std::pair<LiouvilleSpec, NuValue> liouville_nu(double sigma, int P, Parity parity, int bits) {
    if (!(sigma > 0)) throw InputError("liouville_nu: sigma must be positive");
    if (P < 2) throw InputError("liouville_nu: need at least two convergents");
    LiouvilleSpec spec;
    spec.sigma = sigma;
    spec.parity = parity;
    spec.bits = bits;
    BigInt k = parity == Parity::Even ? 1 : 2;
    BigInt j = parity == Parity::Even ? 3 : 1;
    spec.convergents.emplace_back(k, j);
    for (int p = 1; p < P; ++p) {
        const int need = liouville_step_bits(k, j, sigma);
        spec.required_bits_construction = need;
        if (need > bits)
            throw PrecisionEscalation("convergent " + std::to_string(p + 1) + " needs " +
                                          (need == std::numeric_limits<int>::max() ? std::string("more than 1e9")
                                                                                   : std::to_string(need)) +
                                          " bits",
                                      need);
        ScopedBits g(bits);
        std::tie(k, j) = next_convergent(k, j, sigma, parity);
        spec.convergents.emplace_back(k, j);
    }
    ScopedBits g(bits);
    const BigInt& kP = spec.convergents.back().first;
    const BigInt& jP = spec.convergents.back().second;
    spec.sqrt_nu_partial = hp_of(kP) / hp_of(jP);
    spec.C = 1;
    const HP ex(2.0 + sigma);
    for (const auto& [kp, jp] : spec.convergents)
        spec.log_tail_bound.push_back(-bmp::pow(hp_of(kp), ex) - bmp::log(hp_of(jp)));
    const HP logtailP = spec.log_tail_bound.back();
    for (int p = 0; p < spec.size(); ++p) {
        const auto& [kp, jp] = spec.convergents[p];
        HP rhs = bmp::log(spec.C * hp_of(kp)) - bmp::pow(hp_of(kp), ex);
        HP lhs;
        if (p + 1 == spec.size()) {
            lhs = bmp::log(hp_of(jp)) + logtailP;
        } else {
            BigInt num = jp * kP - kp * jP;
            HP base = bmp::log(bmp::abs(hp_of(num)) / hp_of(jP));
            HP extra = bmp::log(hp_of(jp)) + logtailP - base;
            lhs = base + bmp::log1p(bmp::exp(extra));
        }
        spec.verified.push_back(lhs <= rhs);
    }
    spec.required_bits_direct = bmp::pow(hp_of(kP), ex).convert_to<double>() * 1.4426950408889634;
    NuValue nu = NuValue::from_sqrt(spec.sqrt_nu_partial, bmp::exp(logtailP), bits);
    nu.kind = NuKind::Liouville;
    nu.liouville = std::make_shared<LiouvilleSpec>(spec);
    return {spec, nu};
}

// ---------------------------------------------------------------- Gram determinants

HP sine_mode_coupling(int m, const BigInt& k, const BigInt& n) {
    if (m != 1 && m != 2) throw InputError("sine_mode_coupling: m must be 1 or 2");
    auto h = [m](const BigInt& a) -> HP {
        const bool odd = (bmp::abs(a) % 2) == 1;
        HP a2 = hp_of(a) * hp_of(a);
        if (m == 1) return odd ? HP(0) : HP(2) / (HP(1) - a2);
        if (!odd) return HP(0);
        return HP(4) / (HP(4) - a2);
    };
    return (h(k - n) - h(k + n)) / hp_pi();
}

HP parity_coupling_closed_form(int m, const BigInt& k, const BigInt& j) {
    HP kj = hp_of(k) * hp_of(j);
    HP dm = hp_of(j - k), dp = hp_of(j + k);
    if (m == 1) {
        if (((k + j) % 2) != 0) return HP(0);
        return HP(2) / hp_pi() * 4 * kj / ((dm * dm - 1) * (dp * dp - 1));
    }
    if (m == 2) {
        if (((k + j) % 2) == 0) return HP(0);
        return -HP(16) / hp_pi() * kj / ((HP(4) - dm * dm) * (HP(4) - dp * dp));
    }
    throw InputError("parity_coupling_closed_form: m must be 1 or 2");
}

GramRecord gram_det(const ProblemData& p, int k, int j) {
    if (p.nu.is_rational()) throw DomainError("gram_det is defined in the irrational regime");
    if (k < 1 || j < 1) throw InputError("gram_det: indices must be positive");
    const int bits = estimator_bits(p);
    ScopedBits g(bits);
    const HP nu = at_current(p.nu.nu);
    const HP k2 = HP(k) * k;
    const HP gap = k2 - nu * j * j;
    if (gap == 0) throw DomainError("gram_det: k^2 = nu j^2, equal eigenvalues");
    const int N = std::max({p.ctx.n_max, 2 * k + 32, j + 32});
    std::vector<HP> c(N + 1), b(N + 1);
    for (int n = 1; n <= N; ++n) {
        c[n] = coupling_hp(p, k, n);
        b[n] = c[n] / (k2 - nu * n * n);
    }
    GramRecord r;
    r.k = k;
    r.j = j;
    r.bits_used = bits;
    r.coupling = to_double(c[j]);
    HP psi_sq = 0;
    for (int n = 1; n <= N; ++n) psi_sq += HP(n) * n * b[n] * b[n];
    const HP j2 = HP(j) * j;
    const HP inner = j2 * b[j];
    const HP norm1 = k2 + psi_sq;
    const HP det_direct = HP(1) - inner * inner / (norm1 * j2);
    r.det = to_double(det_direct);
    if (c[j] != 0) {
        HP U = gap * gap / (j2 * c[j] * c[j]);
        HP V = 0;
        for (int n = 1; n <= N; ++n)
            if (n != j) V += HP(n) * n * c[n] * c[n] / ((k2 - nu * n * n) * (k2 - nu * n * n));
        HP x = U * (k2 + V);
        HP det_f = x / (1 + x);
        r.has_U = true;
        r.U = to_double(U);
        r.log10_U = to_double(bmp::log10(U));
        r.log10_k2U = to_double(bmp::log10(k2 * U));
        r.V = to_double(V);
        r.det_formula = to_double(det_f);
        r.log10_det = to_double(bmp::log10(det_f));
    } else {
        r.det_formula = 1.0;
        r.log10_det = 0.0;
        r.log10_U = std::numeric_limits<double>::infinity();
    }
    return r;
}

std::vector<GramRecord> riesz_degeneracy_scan(const LiouvilleSpec& spec, int window) {
    if (spec.size() < 1) throw InputError("riesz_degeneracy_scan: empty convergent list");
    const int m = spec.parity == Parity::Even ? 1 : 2;
    ScopedBits g(spec.bits);
    const HP sq = at_current(spec.sqrt_nu_partial);
    const HP nu = sq * sq;
    const HP ex(2.0 + spec.sigma);
    const BigInt& kP = spec.convergents.back().first;
    const BigInt& jP = spec.convergents.back().second;
    std::vector<GramRecord> out;
    for (int p = 0; p < spec.size(); ++p) {
        const BigInt& k = spec.convergents[p].first;
        const BigInt& j = spec.convergents[p].second;
        const HP kh = hp_of(k), jh = hp_of(j);
        const HP k2 = kh * kh, j2 = jh * jh;
        GramRecord r;
        r.p = p + 1;
        r.k = k.convert_to<long long>();
        r.j = j.convert_to<long long>();
        r.bits_used = spec.bits;
        const HP c = sine_mode_coupling(m, k, j);
        r.coupling = to_double(c);
        // window of retained modes n != j around 1, k and j with nonzero coupling
        std::set<BigInt> ns;
        auto add_range = [&](const BigInt& centre) {
            for (int d = -window; d <= window; ++d) {
                BigInt n = centre + d;
                if (n >= 1) ns.insert(n);
            }
        };
        add_range(BigInt(window + 1));
        add_range(k);
        add_range(j);
        HP V = 0, psi_sq = 0;
        for (const BigInt& n : ns) {
            if (n == j) continue;
            HP cn = sine_mode_coupling(m, k, n);
            if (cn == 0) continue;
            HP nh = hp_of(n);
            HP den = k2 - nu * nh * nh;
            HP t = nh * nh * cn * cn / (den * den);
            V += t;
            psi_sq += t;
        }
        r.V = to_double(V);
        const bool last = (p + 1 == spec.size());
        // |k - sqrt(nu) j| from exact integer arithmetic, or the tail bound at the last convergent
        HP log_delta;
        if (!last) {
            BigInt num = j * kP - k * jP;
            log_delta = bmp::log(bmp::abs(hp_of(num)) / hp_of(jP));
        } else {
            log_delta = bmp::log(spec.C * kh) - bmp::pow(kh, ex);
        }
        const HP log_gap = log_delta + bmp::log(kh + sq * jh);
        const HP log_U = 2 * log_gap - bmp::log(j2) - 2 * log_abs(c);
        const HP log_x = log_U + bmp::log(k2 + V);
        r.has_U = true;
        r.log10_U = to_double(log_U / bmp::log(HP(10)));
        r.log10_k2U = to_double((log_U + bmp::log(k2)) / bmp::log(HP(10)));
        r.U = std::exp(r.log10_U * std::log(10.0));
        if (!last) {
            HP x = bmp::exp(log_x);
            HP det_f = x / (1 + x);
            r.det_formula = to_double(det_f);
            r.log10_det = to_double(bmp::log10(det_f));
            // direct path: 1 - <Phi1, Phi2>^2 / (|Phi1|^2 |Phi2|^2) with b_j = c / (k^2 - nu j^2)
            BigInt num = j * kP - k * jP;
            HP gap = -(hp_of(num) / hp_of(jP)) * (kh + sq * jh);
            HP bj = c / gap;
            HP norm1 = k2 + psi_sq + j2 * bj * bj;
            HP inner = j2 * bj;
            r.det = to_double(HP(1) - inner * inner / (norm1 * j2));
        } else {
            // det = x / (1 + x) <= x
            r.det_is_upper_bound = true;
            r.log10_det = to_double(log_x / bmp::log(HP(10)));
            r.det_formula = std::exp(r.log10_det * std::log(10.0));
            r.det = r.det_formula;
        }
        out.push_back(r);
    }
    return out;
}

void write_gram_csv(std::ostream& os, const std::vector<GramRecord>& recs) {
    os << "p,k_p,j_p,coupling,U,det,bits_used,log10_det,det_is_upper_bound\n";
    os.precision(17);
    for (const auto& r : recs)
        os << r.p << ',' << r.k << ',' << r.j << ',' << r.coupling << ',' << r.U << ',' << r.det << ',' << r.bits_used
           << ',' << r.log10_det << ',' << (r.det_is_upper_bound ? 1 : 0) << '\n';
}

} // namespace ctrllab
