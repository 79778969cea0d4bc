#include "ctrllab/moment.hpp"

#include "ctrllab/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace ctrllab {

namespace bmp = boost::multiprecision;
using cd = std::complex<double>;

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

double rhs_for(const VectorField2& y0, const EigenPair& e, double T) {
    if (e.observation == 0.0 || std::abs(e.observation) <= 10.0 * e.observation_error)
        throw ControllabilityError("zero boundary observation at lambda = " + std::to_string(e.lambda), e.lambda);
    return -std::exp(-e.lambda * T) * inner(y0, e.eigfn, Space::L2) / e.observation;
}

MomentEntry entry_for(const VectorField2& y0, const EigenPair& e, double T, int group) {
    MomentEntry m;
    m.lambda = e.lambda;
    m.order = 0;
    m.rhs = rhs_for(y0, e, T);
    m.group = group;
    m.branch = e.branch;
    m.index = e.k;
    return m;
}

// int_0^T s^p exp(-mu s) ds, p <= 2
HP exp_moment(int p, const HP& mu, const HP& T) {
    if (mu == 0) return bmp::pow(T, p + 1) / (p + 1);
    HP e = bmp::exp(-mu * T);
    HP x = mu * T;
    switch (p) {
    case 0: return -bmp::expm1(-x) / mu;
    case 1: return (HP(1) - e * (HP(1) + x)) / (mu * mu);
    case 2: return (HP(2) - e * (HP(2) + 2 * x + x * x)) / (mu * mu * mu);
    default: throw DomainError("exp_moment: order above 2");
    }
}

// sum_{n > J} n^-s by Euler-Maclaurin
double zeta_tail(int s, int J) {
    const double x = J;
    const double f = std::pow(x, -s);
    double r = std::pow(x, 1 - s) / (s - 1) + 0.5 * f + s * f / (12.0 * x) -
               double(s) * (s + 1) * (s + 2) * f / (720.0 * x * x * x) +
               double(s) * (s + 1) * (s + 2) * (s + 3) * (s + 4) * f / (30240.0 * std::pow(x, 5));
    return r - f;
}

constexpr int kAtanhTerms = 8;

// log prod_{n > J} (1 - z/n^2) / (1 + z/n^2) for z = lambda / c
cd log_tail(cd z, int J) {
    cd acc = 0.0;
    cd zp = z;
    const cd z2 = z * z;
    for (int p = 0; p < kAtanhTerms; ++p) {
        const int m = 2 * p + 1;
        acc += zp / double(m) * zeta_tail(2 * m, J);
        zp *= z2;
    }
    return -2.0 * acc;
}

struct GaussRule {
    std::vector<double> x, w;
};

GaussRule gauss_rule(double T, int panels) {
    using Q = boost::math::quadrature::gauss<double, 10>;
    const auto& ab = Q::abscissa();
    const auto& wt = Q::weights();
    GaussRule g;
    const double h = T / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = h * (p + 0.5), half = 0.5 * h;
        for (std::size_t i = 0; i < ab.size(); ++i) {
            if (ab[i] == 0.0) {
                g.x.push_back(mid);
                g.w.push_back(half * wt[i]);
            } else {
                g.x.push_back(mid - half * ab[i]);
                g.w.push_back(half * wt[i]);
                g.x.push_back(mid + half * ab[i]);
                g.w.push_back(half * wt[i]);
            }
        }
    }
    return g;
}

std::vector<double> moments_of_values(const GaussRule& g, const std::vector<double>& vals, const MomentSystem& ms) {
    std::vector<double> out;
    for (const auto& e : ms.entries) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i)
            s += g.w[i] * vals[i] * (e.order ? g.x[i] : 1.0) * std::exp(-e.lambda * g.x[i]);
        out.push_back(s);
    }
    return out;
}

void residuals(BiorthAtom& a, const MomentSystem& ms, const std::vector<double>& mom, int group) {
    a.residual_on = a.residual_off = 0.0;
    for (std::size_t i = 0; i < ms.entries.size(); ++i) {
        const auto& e = ms.entries[i];
        if (e.group == group)
            a.residual_on = std::max(a.residual_on, std::abs(mom[i] - e.rhs));
        else
            a.residual_off = std::max(a.residual_off, std::abs(mom[i]));
    }
    a.residual = std::max(a.residual_on, a.residual_off);
}

// Cholesky solve of the Gram system in the current precision.
struct HpGram {
    std::vector<std::vector<HP>> G, L;
    std::vector<HP> z;
    double pivot_ratio = 0.0;
};

std::vector<std::vector<HP>> gram_matrix(const MomentSystem& ms, double regularization) {
    const std::size_t n = ms.entries.size();
    const HP T(ms.T);
    std::vector<std::vector<HP>> G(n, std::vector<HP>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const auto& a = ms.entries[i];
            const auto& b = ms.entries[j];
            G[i][j] = exp_moment(a.order + b.order, HP(a.lambda) + HP(b.lambda), T);
            if (i == j) G[i][j] += HP(regularization);
            G[j][i] = G[i][j];
        }
    return G;
}

HpGram cholesky(std::vector<std::vector<HP>> G, int bits) {
    const std::size_t n = G.size();
    HpGram r;
    r.L.assign(n, std::vector<HP>(n, HP(0)));
    HP dmax = 0, dmin = -1;
    for (std::size_t j = 0; j < n; ++j) {
        HP d = G[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= r.L[j][k] * r.L[j][k];
        if (d <= 0) throw PrecisionEscalation("Gram matrix is not numerically positive definite", 2 * bits);
        dmax = bmp::max(dmax, d);
        dmin = dmin < 0 ? d : bmp::min(dmin, d);
        r.L[j][j] = bmp::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            HP s = G[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= r.L[i][k] * r.L[j][k];
            r.L[i][j] = s / r.L[j][j];
        }
    }
    r.pivot_ratio = n ? to_double(dmax / dmin) : 1.0;
    const double log2_ratio = std::log2(std::max(r.pivot_ratio, 1.0));
    if (log2_ratio > bits - 20)
        throw PrecisionEscalation("Gram condition (pivot ratio 2^" + std::to_string(int(log2_ratio)) +
                                      ") beyond the precision budget",
                                  static_cast<int>(log2_ratio) + 64);
    r.G = std::move(G);
    return r;
}

std::vector<HP> chol_solve(const HpGram& c, const std::vector<HP>& m) {
    const std::size_t n = m.size();
    std::vector<HP> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        HP s = m[i];
        for (std::size_t k = 0; k < i; ++k) s -= c.L[i][k] * y[k];
        y[i] = s / c.L[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        HP s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= c.L[k][i] * x[k];
        x[i] = s / c.L[i][i];
    }
    return x;
}

HP eval_exp_sum(const MomentSystem& ms, const std::vector<HP>& z, const HP& s) {
    HP r = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const auto& e = ms.entries[j];
        HP term = z[j] * bmp::exp(-HP(e.lambda) * s);
        if (e.order) term *= s;
        r += term;
    }
    return r;
}

// values of the exp-sum at the Gauss nodes and on the uniform grid in s
void sample_exp_sum(const MomentSystem& ms, const std::vector<HP>& z, const GaussRule& g,
                    const std::vector<double>& grid, std::vector<double>& at_gauss, std::vector<double>& at_grid) {
    at_gauss.clear();
    at_grid.clear();
    for (double x : g.x) at_gauss.push_back(to_double(eval_exp_sum(ms, z, HP(x))));
    for (double s : grid) at_grid.push_back(to_double(eval_exp_sum(ms, z, HP(s))));
}

HP quad_form(const std::vector<std::vector<HP>>& G, const std::vector<HP>& z) {
    HP s = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j) s += z[i] * G[i][j] * z[j];
    return s;
}

struct GramCore {
    HpGram chol;
    std::vector<HP> z;
    GramSolution sol;
};

GramCore gram_core(const MomentSystem& ms, int bits, double regularization) {
    ms.validate();
    GramCore c;
    c.chol = cholesky(gram_matrix(ms, regularization), bits);
    std::vector<HP> m;
    for (const auto& e : ms.entries) m.emplace_back(e.rhs);
    c.z = chol_solve(c.chol, m);
    c.sol.bits = bits;
    c.sol.regularization = regularization;
    c.sol.pivot_ratio = c.chol.pivot_ratio;
    for (const auto& v : c.z) c.sol.z.push_back(to_double(v));
    {
        // residual at extra precision against the unregularized Gram matrix
        ScopedBits g(bits + 64);
        auto G = gram_matrix(ms, 0.0);
        HP rmax = 0, mmax = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            HP s = -HP(ms.entries[i].rhs);
            for (std::size_t j = 0; j < m.size(); ++j) s += G[i][j] * at_current(c.z[j]);
            rmax = bmp::max(rmax, bmp::abs(s));
            mmax = bmp::max(mmax, bmp::abs(HP(ms.entries[i].rhs)));
        }
        c.sol.residual = to_double(rmax);
        c.sol.relative_residual = mmax > 0 ? to_double(rmax / mmax) : to_double(rmax);
    }
    return c;
}

std::vector<double> reversed(std::vector<double> v) {
    std::reverse(v.begin(), v.end());
    return v;
}

} // namespace

std::string to_string(Grouping g) {
    switch (g) {
    case Grouping::Singletons: return "singletons";
    case Grouping::Triples: return "triples";
    case Grouping::RationalPairs: return "rational_pairs";
    }
    return "?";
}

std::vector<int> MomentSystem::group_members(int group) const {
    std::vector<int> r;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].group == group) r.push_back(static_cast<int>(i));
    return r;
}

int MomentSystem::group_count() const {
    int g = 0;
    for (const auto& e : entries) g = std::max(g, e.group);
    return g;
}

void MomentSystem::validate() const {
    if (!(T > 0.0)) throw InputError("moment system: T must be positive");
    std::set<double> order0;
    for (const auto& e : entries) {
        if (!std::isfinite(e.rhs) || !std::isfinite(e.lambda)) throw InputError("moment system: non-finite entry");
        if (e.order == 0 && !order0.insert(e.lambda).second)
            throw DomainError("moment system: repeated eigenvalue " + std::to_string(e.lambda));
        if (e.order == 1 && regime != Regime::Rational)
            throw DomainError("moment system: order-1 entries occur only for merged rational eigenvalues");
        if (e.order < 0 || e.order > 1) throw DomainError("moment system: order must be 0 or 1");
    }
}

MomentSystem moments_from_initial(const VectorField2& y0, const SpectrumTable& table, double T) {
    if (!(T > 0.0)) throw InputError("moments: T must be positive");
    MomentSystem ms;
    ms.T = T;
    ms.K = table.K;
    ms.regime = table.regime;
    ms.grouping = table.regime == Regime::Rational ? Grouping::RationalPairs : Grouping::Singletons;
    int g = 0;
    for (const auto& e : table.entries) {
        ++g;
        if (e.tag != LambdaTag::L3) {
            ms.entries.push_back(entry_for(y0, e, T, g));
            continue;
        }
        if (e.classification == Classification::Double || e.chain_coefficient == 0.0)
            throw ControllabilityError("merged eigenvalue " + std::to_string(e.lambda) +
                                           " is double: approximate controllability fails",
                                       e.lambda);
        const double obs2 = e.observation;
        if (obs2 == 0.0) throw ControllabilityError("zero boundary observation", e.lambda);
        const double c = e.chain_coefficient;
        const double obs_hat = obs2 * e.psi_prime_zero / (double(e.k) * kSqrt2OverPi);
        const double decay = std::exp(-e.lambda * T);
        const VectorField2& Phi2 = e.eigfn;
        const VectorField2& Phih = *e.generalized_partner;
        const double m0 = -decay * inner(y0, Phi2, Space::L2) / obs2;
        const double m1 = (obs_hat * m0 + decay * inner(y0, Phih - Phi2 * (T * c), Space::L2)) / (c * obs2);
        MomentEntry a{e.lambda, 0, m0, g, e.branch, e.k};
        MomentEntry b{e.lambda, 1, m1, g, e.branch, e.k};
        ms.entries.push_back(a);
        ms.entries.push_back(b);
    }
    return ms;
}

MomentSystem moments_grouped(const VectorField2& y0, const ProblemData& p, int K, double T) {
    if (p.nu.is_rational()) throw DomainError("Blaschke grouping needs irrational sqrt(nu)");
    if (K < 1) throw InputError("moments: K must be positive");
    const bool gt1 = p.nu.sqrt_nu_d > 1.0;
    int range = K + 2;
    IndexMaps im;
    for (;;) {
        im = index_maps(p.nu, range);
        const auto& img = gt1 ? im.i_k : im.j_k;
        const auto& hat = gt1 ? im.i_hat : im.j_hat;
        if (static_cast<int>(hat.size()) >= K && hat[static_cast<std::size_t>(K - 1)] < img.back()) break;
        range *= 2;
        if (range > 1 << 22) throw DomainError("moments: complement index set is too sparse");
    }
    MomentSystem ms;
    ms.T = T;
    ms.K = K;
    ms.regime = p.nu.regime();
    ms.grouping = Grouping::Triples;
    for (int k = 1; k <= K; ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        if (gt1) {
            ms.entries.push_back(entry_for(y0, slow_eigenpair(p, k), T, k));
            ms.entries.push_back(entry_for(y0, fast_eigenpair(p, im.i_k[i]), T, k));
            ms.entries.push_back(entry_for(y0, fast_eigenpair(p, im.i_hat[i]), T, k));
        } else {
            ms.entries.push_back(entry_for(y0, fast_eigenpair(p, k), T, k));
            ms.entries.push_back(entry_for(y0, slow_eigenpair(p, im.j_k[i]), T, k));
            ms.entries.push_back(entry_for(y0, slow_eigenpair(p, im.j_hat[i]), T, k));
        }
    }
    ms.validate();
    return ms;
}

BlaschkeProduct make_blaschke(const MomentSystem& ms, int group, const ProblemData& p, double lambda_ref,
                              double tail_tolerance) {
    if (p.nu.is_rational()) throw DomainError("Blaschke products are built for irrational sqrt(nu)");
    BlaschkeProduct b;
    b.excluded_group = group;
    b.nu = p.nu.nu_d;
    int top = 0;
    for (const auto& e : ms.entries) {
        top = std::max(top, e.index);
        if (e.group == group) {
            b.excluded.push_back(e.lambda);
            (e.branch == Branch::Fast ? b.excluded_fast : b.excluded_slow).push_back(e.index);
        } else {
            b.zeros.push_back(e.lambda);
        }
    }
    if (b.excluded.empty()) throw InputError("Blaschke product: group " + std::to_string(group) + " is empty");
    double ref = lambda_ref;
    for (double l : b.excluded) ref = std::max(ref, l);
    b.lambda_ref = ref;
    const double cmin = std::min(1.0, b.nu);
    int J = std::max({64, top + 1, static_cast<int>(std::ceil(8.0 * std::sqrt(ref / cmin)))});
    // remainder of the analytic tail: first neglected atanh term plus the Euler-Maclaurin remainder
    auto remainder = [&](int Jt) {
        double r = 0.0;
        for (double c : {1.0, b.nu}) {
            const double z = ref / (c * Jt * double(Jt));
            const int m = 2 * kAtanhTerms + 1;
            r += 2.0 * std::pow(z, m) * Jt / (2.0 * m - 1.0) / m;
            r += 2.0 * (ref / c) * 2.0 * 3 * 4 * 5 * 6 * 7 * 8 / 1209600.0 * std::pow(double(Jt), -9);
        }
        return r;
    };
    while (remainder(J) > tail_tolerance && J < (1 << 20)) J *= 2;
    b.J_trunc = J;
    b.tail_log_bound = remainder(J);
    return b;
}

cd blaschke_eval(const BlaschkeProduct& b, cd lambda) {
    const cd one(1.0, 0.0);
    if (std::abs(lambda + one) == 0.0) throw DomainError("Blaschke product: lambda at the pole -1");
    cd v = one / ((one + lambda) * (one + lambda) * (one + lambda));
    auto family = [&](double c, const std::vector<int>& skip) {
        for (int n = 1; n <= b.J_trunc; ++n) {
            if (std::find(skip.begin(), skip.end(), n) != skip.end()) continue;
            const double a = c * n * n;
            const cd den = a + lambda;
            if (std::abs(den) <= 1e-300 * a) throw DomainError("Blaschke product: lambda at a pole");
            v *= (a - lambda) / den;
        }
        v *= std::exp(log_tail(lambda / c, b.J_trunc));
    };
    family(1.0, b.excluded_fast);
    family(b.nu, b.excluded_slow);
    return v;
}

MomentCoefficients coefficients(const MomentSystem& ms, int group, const BlaschkeProduct& b, int bits) {
    auto mem = ms.group_members(group);
    if (mem.size() != 3) throw DomainError("coefficients: group must hold three eigenvalues");
    MomentCoefficients c;
    c.group = group;
    const auto& e1 = ms.entries[static_cast<std::size_t>(mem[0])];
    const auto& e2 = ms.entries[static_cast<std::size_t>(mem[1])];
    const auto& e3 = ms.entries[static_cast<std::size_t>(mem[2])];
    c.lambda1 = e1.lambda;
    c.lambda2 = e2.lambda;
    c.lambda3 = e3.lambda;
    const double l1 = c.lambda1, l2 = c.lambda2, l3 = c.lambda3;
    const double lmax = std::max({l1, l2, l3});
    const double gmin = std::min({std::abs(l1 - l2), std::abs(l1 - l3), std::abs(l2 - l3)});
    const double need = std::log2(lmax / std::max(gmin, kTiny)) + 24;
    if (gmin == 0.0 || need > bits)
        throw PrecisionEscalation("coefficients: condensed eigenvalues in group " + std::to_string(group),
                                  static_cast<int>(need) + 32);
    c.L1 = blaschke_eval(b, l1).real();
    c.L2 = blaschke_eval(b, l2).real();
    c.L3 = blaschke_eval(b, l3).real();
    c.alpha = e1.rhs / ((l1 - l2) * (l1 - l3) * c.L1);
    c.beta = e2.rhs / ((l2 - l1) * (l2 - l3) * c.L2);
    c.gamma = e3.rhs / ((l3 - l1) * (l3 - l2) * c.L3);
    c.p2 = c.alpha + c.beta + c.gamma;
    c.p1 = -(c.alpha * (l2 + l3) + c.beta * (l1 + l3) + c.gamma * (l1 + l2));
    c.p0 = c.alpha * l2 * l3 + c.beta * l1 * l3 + c.gamma * l1 * l2;
    double rmax = 0.0, scale = kTiny;
    const double Ls[3] = {c.L1, c.L2, c.L3}, ls[3] = {l1, l2, l3}, rs[3] = {e1.rhs, e2.rhs, e3.rhs};
    for (int i = 0; i < 3; ++i) {
        const double P = (c.p2 * ls[i] + c.p1) * ls[i] + c.p0;
        rmax = std::max(rmax, std::abs(P * Ls[i] - rs[i]));
        scale = std::max(scale, std::abs(rs[i]));
    }
    c.solve_residual = rmax / scale;
    return c;
}

cd interpolant_eval(const MomentCoefficients& c, const BlaschkeProduct& b, cd lambda) {
    return ((c.p2 * lambda + c.p1) * lambda + c.p0) * blaschke_eval(b, lambda);
}

double interpolant_norm_sq(const MomentCoefficients& c) {
    return (3 * c.p0 * c.p0 - 2 * c.p0 * c.p2 + 3 * c.p2 * c.p2 + c.p1 * c.p1) / 16.0;
}

double norm_bound_constant(const MomentCoefficients& c) {
    const double lmax = std::max({c.lambda1, c.lambda2, c.lambda3});
    const double prod = c.lambda1 * c.lambda2 * c.lambda3;
    return kNormBoundConstant * std::max(1.0, std::pow(lmax, 4) / (prod * prod));
}

double norm_bound(const MomentCoefficients& c) {
    const double prod = c.lambda1 * c.lambda2 * c.lambda3;
    const double ab = c.alpha + c.beta;
    const double d = c.lambda2 - c.lambda1;
    return norm_bound_constant(c) * prod * prod * (ab * ab + c.beta * c.beta * d * d + c.gamma * c.gamma);
}

std::string to_string(SynthesisMethod m) {
    return m == SynthesisMethod::BlaschkeFourier ? "blaschke_fourier" : "gram_solve";
}

std::vector<double> measure_moments(const std::function<double(double)>& w, const MomentSystem& ms, int panels) {
    GaussRule g = gauss_rule(ms.T, panels);
    std::vector<double> vals;
    for (double x : g.x) vals.push_back(w(x));
    return moments_of_values(g, vals, ms);
}

BiorthAtom synthesize_atom_blaschke(const MomentSystem& ms, int group, const ProblemData& p, const MomentOptions& opt) {
    BiorthAtom a;
    a.group = group;
    a.method = SynthesisMethod::BlaschkeFourier;
    a.threshold = opt.atom_threshold_blaschke;
    a.t = uniform_grid(ms.T, opt.grid_points);
    const GaussRule g = gauss_rule(ms.T, opt.quad_panels);
    bool all_zero = true;
    for (int i : ms.group_members(group)) all_zero = all_zero && ms.entries[static_cast<std::size_t>(i)].rhs == 0.0;
    if (all_zero) {
        a.samples.assign(a.t.size(), 0.0);
        a.accepted = true;
        a.diagnostic = "zero targets";
        return a;
    }
    BlaschkeProduct b = make_blaschke(ms, group, p, opt.tau_cap, opt.tail_tolerance);
    MomentCoefficients c = coefficients(ms, group, b);
    // |J(i tau)| = |P(i tau)| (1 + tau^2)^(-3/2) exactly
    auto envelope = [&](double tau) {
        const cd P = (c.p2 * cd(0, tau) + c.p1) * cd(0, tau) + c.p0;
        return std::abs(P) * std::pow(1.0 + tau * tau, -1.5);
    };
    double tau_max = 1.0;
    while (tau_max < opt.tau_cap && envelope(tau_max) > opt.tail_tolerance) tau_max *= 1.25;
    a.tau_capped = tau_max >= opt.tau_cap;
    a.tau_max = std::min(tau_max, opt.tau_cap);
    // spacing <= pi / (4T); finer when needed to push the aliased copy of q~ (period 2 pi / dtau) past 40
    a.dtau = std::min(kPi / (4.0 * ms.T), 2.0 * kPi / 40.0);
    const int M = static_cast<int>(std::ceil(a.tau_max / a.dtau));
    std::vector<cd> J(static_cast<std::size_t>(M) + 1);
    for (int m = 0; m <= M; ++m) J[static_cast<std::size_t>(m)] = interpolant_eval(c, b, cd(0.0, m * a.dtau));
    // q~(t) = (1/pi) int_0^tau_max Re(J(i tau) e^{i tau t}) d tau, trapezoid rule
    auto qtilde = [&](double t) {
        const cd step = std::exp(cd(0.0, a.dtau * t));
        cd ph(1.0, 0.0);
        double s = 0.5 * J[0].real();
        for (int m = 1; m <= M; ++m) {
            ph *= step;
            const double w = (m == M) ? 0.5 : 1.0;
            s += w * (J[static_cast<std::size_t>(m)] * ph).real();
        }
        return s * a.dtau / kPi;
    };
    for (double t : a.t) a.samples.push_back(qtilde(t));
    std::vector<double> at_gauss;
    for (double x : g.x) at_gauss.push_back(qtilde(x));
    auto mom = moments_of_values(g, at_gauss, ms);
    residuals(a, ms, mom, group);
    double n2 = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) n2 += g.w[i] * at_gauss[i] * at_gauss[i];
    a.norm_l2 = std::sqrt(n2);
    a.norm_sq_infinite = interpolant_norm_sq(c);
    a.norm_bound = norm_bound(c);
    a.accepted = a.residual <= a.threshold;
    std::ostringstream os;
    os << "group " << group << ": on-target residual " << a.residual_on << ", off-target residual " << a.residual_off
       << ", threshold " << a.threshold << ", tau_max " << a.tau_max << (a.tau_capped ? " (capped)" : "")
       << ", J_trunc " << b.J_trunc << (a.accepted ? "; accepted" : "; rejected: restriction to (0,T) breaks the moments");
    a.diagnostic = os.str();
    return a;
}

BiorthAtom synthesize_atom_gram(const MomentSystem& ms, int group, const MomentOptions& opt) {
    BiorthAtom a;
    a.group = group;
    a.method = SynthesisMethod::GramSolve;
    a.threshold = opt.atom_threshold_gram;
    a.t = uniform_grid(ms.T, opt.grid_points);
    MomentSystem target = ms;
    for (auto& e : target.entries)
        if (e.group != group) e.rhs = 0.0;
    ScopedBits guard(opt.bits);
    GramCore core = gram_core(target, opt.bits, opt.regularization);
    const GaussRule g = gauss_rule(ms.T, opt.quad_panels);
    std::vector<double> at_gauss;
    sample_exp_sum(target, core.z, g, a.t, at_gauss, a.samples);
    auto mom = moments_of_values(g, at_gauss, ms);
    residuals(a, ms, mom, group);
    for (std::size_t j = 0; j < core.z.size(); ++j)
        a.exp_sum.push_back({to_double(core.z[j]), ms.entries[j].lambda, ms.entries[j].order,
                             core.z[j].str(static_cast<std::streamsize>(digits10_for_bits(opt.bits)),
                                           std::ios_base::scientific)});
    a.norm_l2 = std::sqrt(std::max(0.0, to_double(quad_form(core.chol.G, core.z))));
    a.accepted = a.residual <= a.threshold;
    std::ostringstream os;
    os << "group " << group << ": on-target residual " << a.residual_on << ", off-target residual " << a.residual_off
       << ", pivot ratio " << core.sol.pivot_ratio << ", bits " << opt.bits << (a.accepted ? "; accepted" : "; rejected");
    a.diagnostic = os.str();
    return a;
}

GramSolution gram_solve(const MomentSystem& ms, int bits, double regularization) {
    ScopedBits guard(bits);
    return gram_core(ms, bits, regularization).sol;
}

namespace {

// U_k and V_k partial sums for a triple grouping
void series_diagnostics(const MomentSystem& ms, const ProblemData& p, const MomentOptions& opt, ControlSignal& u) {
    if (ms.grouping != Grouping::Triples) return;
    double U = 0.0, V = 0.0;
    for (int k = 1; k <= ms.group_count(); ++k) {
        BlaschkeProduct b = make_blaschke(ms, k, p, 0.0, opt.tail_tolerance);
        MomentCoefficients c = coefficients(ms, k, b);
        auto mem = ms.group_members(k);
        double idx = 1.0;
        for (int i : mem) idx *= ms.entries[static_cast<std::size_t>(i)].index;
        const double w = std::pow(idx, 4);
        const double ab = c.alpha + c.beta, d = c.lambda2 - c.lambda1;
        U += w * ab * ab;
        V += w * (c.beta * c.beta * d * d + c.gamma * c.gamma);
        u.series_U.push_back(U);
        u.series_V.push_back(V);
    }
}

} // namespace

ControlSignal gram_moment_solve(const MomentSystem& ms, const PrecisionContext& ctx, const MomentOptions& opt) {
    const int bits = std::max(ctx.working_bits, opt.bits);
    ScopedBits guard(bits);
    GramCore core = gram_core(ms, bits, opt.regularization);
    const GaussRule g = gauss_rule(ms.T, opt.quad_panels);
    const auto grid = uniform_grid(ms.T, opt.grid_points);
    std::vector<double> at_gauss, w_grid;
    sample_exp_sum(ms, core.z, g, grid, at_gauss, w_grid);
    // u(t_i) = w(T - t_i); the grid is symmetric
    ControlSignal u = ControlSignal::from_samples(ms.T, reversed(w_grid));
    u.method = "gram";
    u.K = ms.K;
    u.bits_used = bits;
    u.regularization = opt.regularization;
    u.has_exp_sum = true;
    for (std::size_t j = 0; j < core.z.size(); ++j)
        u.exp_sum.push_back({to_double(core.z[j]), ms.entries[j].lambda, ms.entries[j].order,
                             core.z[j].str(static_cast<std::streamsize>(digits10_for_bits(bits)),
                                           std::ios_base::scientific)});
    auto mom = moments_of_values(g, at_gauss, ms);
    for (std::size_t i = 0; i < mom.size(); ++i)
        u.moment_residual = std::max(u.moment_residual, std::abs(mom[i] - ms.entries[i].rhs));
    // per-group atoms share the Cholesky factor
    for (int k = 1; k <= ms.group_count(); ++k) {
        auto mem = ms.group_members(k);
        if (mem.empty()) continue;
        std::vector<HP> m(ms.entries.size(), HP(0));
        for (int i : mem) m[static_cast<std::size_t>(i)] = HP(ms.entries[static_cast<std::size_t>(i)].rhs);
        auto zk = chol_solve(core.chol, m);
        u.group_norms.emplace_back(k, std::sqrt(std::max(0.0, to_double(quad_form(core.chol.G, zk)))));
    }
    u.diagnostics = {{"gram_residual", core.sol.residual},
                     {"gram_relative_residual", core.sol.relative_residual},
                     {"gram_pivot_ratio", core.sol.pivot_ratio},
                     {"moment_residual_quadrature", u.moment_residual}};
    return u;
}

std::string to_string(ControlMethod m) {
    switch (m) {
    case ControlMethod::Gram: return "gram";
    case ControlMethod::Blaschke: return "blaschke";
    case ControlMethod::Hum: return "hum";
    }
    return "?";
}

ControlMethod control_method_from_string(const std::string& s) {
    if (s == "gram") return ControlMethod::Gram;
    if (s == "blaschke") return ControlMethod::Blaschke;
    if (s == "hum") return ControlMethod::Hum;
    throw InputError("unknown control method '" + s + "' (expected gram, blaschke or hum)");
}

ControlSignal control_series(const MomentSystem& ms, ControlMethod method, const ProblemData& p,
                             const MomentOptions& opt) {
    ms.validate();
    bool all_zero = std::all_of(ms.entries.begin(), ms.entries.end(), [](const MomentEntry& e) { return e.rhs == 0.0; });
    if (all_zero) {
        ControlSignal u = ControlSignal::zero(ms.T, opt.grid_points);
        u.method = to_string(method);
        u.K = ms.K;
        return u;
    }
    if (method == ControlMethod::Gram) {
        ControlSignal u = gram_moment_solve(ms, p.ctx, opt);
        series_diagnostics(ms, p, opt, u);
        return u;
    }
    if (method == ControlMethod::Hum) throw DomainError("control_series: HUM controls come from hum_control");
    std::vector<BiorthAtom> atoms;
    std::vector<int> rejected;
    std::ostringstream why;
    for (int k = 1; k <= ms.group_count(); ++k) {
        atoms.push_back(synthesize_atom_blaschke(ms, k, p, opt));
        if (!atoms.back().accepted) {
            rejected.push_back(k);
            why << "\n  " << atoms.back().diagnostic;
        }
    }
    if (!rejected.empty()) {
        std::ostringstream os;
        os << "Blaschke assembly failed: " << rejected.size() << " atom(s) rejected" << why.str();
        throw AssemblyError(os.str(), rejected);
    }
    std::vector<double> w(atoms.front().samples.size(), 0.0);
    std::vector<std::pair<int, double>> norms;
    for (const auto& a : atoms) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += a.samples[i];
        norms.emplace_back(a.group, a.norm_l2);
    }
    ControlSignal u = ControlSignal::from_samples(ms.T, reversed(w));
    u.method = "blaschke";
    u.K = ms.K;
    u.group_norms = std::move(norms);
    const auto mom = measure_moments([&](double s) { return u(ms.T - s); }, ms, opt.quad_panels);
    for (std::size_t i = 0; i < mom.size(); ++i)
        u.moment_residual = std::max(u.moment_residual, std::abs(mom[i] - ms.entries[i].rhs));
    series_diagnostics(ms, p, opt, u);
    return u;
}

HumReport hum_control(const VectorField2& y0, double T, double epsilon, const GalerkinModel& sim,
                      const HumOptions& opt) {
    if (!(epsilon > 0.0)) throw InputError("HUM: epsilon must be positive");
    if (!(T > 0.0)) throw InputError("HUM: T must be positive");
    const int M = opt.steps;
    if (M < 2) throw InputError("HUM: need at least two time steps");
    const int d = 2 * sim.N;
    const double h = T / M;
    const Propagator P = make_propagator(sim, h);
    HumReport rep;

    Eigen::VectorXd Sy0 = sim.pack(y0);
    for (int i = 0; i < M; ++i) Sy0 = P.Phi * Sy0;
    const Eigen::VectorXd R = sim.hm1_weights();
    const double y0n = std::sqrt(sim.pack(y0).dot(R.cwiseProduct(sim.pack(y0))));
    if (Sy0.norm() == 0.0) {
        rep.u = ControlSignal::zero(T, M + 1);
        rep.u.piecewise_linear = true;
        rep.u.finalize();
        rep.u.method = "hum";
        return rep;
    }
    // rows of the control-to-state map for piecewise-linear u: LT.row(j) = Phi^{M-1-j} G0 + Phi^{M-j} G1
    Eigen::MatrixXd LT = Eigen::MatrixXd::Zero(M + 1, d);
    Eigen::VectorXd v = P.G0, w = P.G1;
    for (int m = M - 1; m >= 0; --m) {
        LT.row(m) += v.transpose();
        LT.row(m + 1) += w.transpose();
        v = P.Phi * v;
        w = P.Phi * w;
    }
    // P1 mass matrix, tridiagonal solve per column
    Eigen::MatrixXd X = LT;
    {
        std::vector<double> diag(static_cast<std::size_t>(M) + 1, 2.0 * h / 3.0), off(static_cast<std::size_t>(M), h / 6.0);
        diag.front() = diag.back() = h / 3.0;
        std::vector<double> cp(static_cast<std::size_t>(M) + 1), dp(static_cast<std::size_t>(M) + 1);
        cp[0] = off[0] / diag[0];
        for (int i = 1; i <= M; ++i) {
            const double den = diag[static_cast<std::size_t>(i)] - off[static_cast<std::size_t>(i) - 1] * cp[static_cast<std::size_t>(i) - 1];
            cp[static_cast<std::size_t>(i)] = i < M ? off[static_cast<std::size_t>(i)] / den : 0.0;
            dp[static_cast<std::size_t>(i)] = den;
        }
        for (int col = 0; col < d; ++col) {
            auto x = X.col(col);
            x(0) /= diag[0];
            for (int i = 1; i <= M; ++i)
                x(i) = (x(i) - off[static_cast<std::size_t>(i) - 1] * x(i - 1)) / dp[static_cast<std::size_t>(i)];
            for (int i = M - 1; i >= 0; --i) x(i) -= cp[static_cast<std::size_t>(i)] * x(i + 1);
        }
    }
    Eigen::MatrixXd W = LT.transpose() * X;
    W = 0.5 * (W + W.transpose());
    // (eps R^-1 + W) phi = -S y0, preconditioned conjugate gradients
    Eigen::VectorXd Rinv = R.cwiseInverse();
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return epsilon * Rinv.cwiseProduct(x) + W * x; };
    Eigen::VectorXd Dinv = (epsilon * Rinv + W.diagonal()).cwiseInverse();
    auto grad_norm = [&](const Eigen::VectorXd& r) {
        Eigen::VectorXd Rr = R.cwiseProduct(r);
        return std::sqrt(std::max(0.0, Rr.dot(W * Rr))) / epsilon;
    };
    const double g0 = grad_norm(Sy0);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd r = -Sy0; // b - A x with b = -S y0
    Eigen::VectorXd z = Dinv.cwiseProduct(r), pdir = z;
    double rz = r.dot(z);
    const int cap = opt.max_iterations > 0 ? opt.max_iterations : 50 * d;
    double rel = g0 > 0 ? 1.0 : 0.0;
    int it = 0;
    for (; it < cap && rel > opt.gradient_tolerance; ++it) {
        Eigen::VectorXd Ap = apply(pdir);
        const double alpha = rz / pdir.dot(Ap);
        phi += alpha * pdir;
        r -= alpha * Ap;
        if (it % 25 == 24) r = -Sy0 - apply(phi); // refresh the recursive residual
        rel = g0 > 0 ? grad_norm(r) / g0 : 0.0;
        rep.residual_history.push_back(rel);
        z = Dinv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        pdir = z + (rz_new / rz) * pdir;
        rz = rz_new;
    }
    rel = g0 > 0 ? grad_norm(-Sy0 - apply(phi)) / g0 : 0.0;
    rep.iterations = it;
    rep.relative_gradient = rel;
    if (rel > opt.gradient_tolerance) {
        std::ostringstream os;
        os << "HUM: conjugate gradients stopped after " << it << " iterations at relative gradient " << rel;
        if (!rep.residual_history.empty()) {
            os << "; last residuals:";
            for (std::size_t i = rep.residual_history.size() >= 5 ? rep.residual_history.size() - 5 : 0;
                 i < rep.residual_history.size(); ++i)
                os << ' ' << rep.residual_history[i];
        }
        throw ConvergenceError(os.str());
    }
    Eigen::VectorXd u = X * phi;
    Eigen::VectorXd yT = Sy0 + W * phi;
    rep.u = ControlSignal::from_samples(T, std::vector<double>(u.data(), u.data() + u.size()));
    rep.u.piecewise_linear = true;
    rep.u.finalize();
    rep.u.method = "hum";
    rep.terminal_hm1 = std::sqrt(yT.dot(R.cwiseProduct(yT)));
    // ||u||^2 in the P1 mass norm equals phi^T W phi
    const double unorm2 = phi.dot(W * phi);
    rep.bound_constant = y0n > 0 ? (unorm2 + 2.0 / epsilon * rep.terminal_hm1 * rep.terminal_hm1) / (y0n * y0n) : 0.0;
    rep.u.diagnostics = {{"epsilon", epsilon},
                         {"terminal_hm1", rep.terminal_hm1},
                         {"relative_gradient", rel},
                         {"iterations", double(it)},
                         {"bound_constant", rep.bound_constant}};
    return rep;
}

} // namespace ctrllab
