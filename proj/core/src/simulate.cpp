#include "ctrllab/simulate.hpp"

#include "ctrllab/condensation.hpp"
#include "ctrllab/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace ctrllab {

namespace bmp = boost::multiprecision;

namespace {

constexpr int kClosedFormBits = 256;
constexpr int kDualityPanels = 4096;

void check_steps(int steps) {
    if (steps < 1) throw InputError("simulation needs at least one time step");
}

// int_0^T s^p exp(-mu s) ds for p in {0, 1, 2}
HP exp_moment(int p, const HP& mu, const HP& T) {
    if (mu == 0) return bmp::pow(T, p + 1) / (p + 1);
    HP e = bmp::exp(-mu * T);
    HP x = mu * T;
    switch (p) {
    case 0: return (HP(1) - e) / mu;
    case 1: return (HP(1) - e * (HP(1) + x)) / (mu * mu);
    case 2: return (HP(2) - e * (HP(2) + 2 * x + x * x)) / (mu * mu * mu);
    default: throw DomainError("exp_moment: order above 2");
    }
}

double hp_log10(const HP& x) { return to_double(bmp::log10(x)); }

// observation of the generalized partner Phi_hat of a merged eigenvalue, nu psi_hat'(0)
double partner_observation(const EigenPair& e) {
    return e.observation * e.psi_prime_zero / (double(e.k) * kSqrt2OverPi);
}

void record(Trajectory& tr, double t, VectorField2 s) {
    tr.t.push_back(t);
    tr.norm_hm1.push_back(s.norm(Space::Hm1));
    tr.norm_l2.push_back(s.norm(Space::L2));
    tr.states.push_back(std::move(s));
}


// Right eigenvectors of A = [[D, Q], [0, nu D]]: e_n for n^2 and (X e_m, e_m) for nu m^2 with
// X(n, m) = -Q(n, m) / (n^2 - nu m^2); available when the two branches do not collide.
bool eigen_split(const GalerkinModel& m, Eigen::MatrixXd& X) {
    const int N = m.N;
    X = Eigen::MatrixXd::Zero(N, N);
    for (int n = 1; n <= N; ++n)
        for (int k = 1; k <= N; ++k) {
            const double q = m.A(n - 1, N + k - 1);
            if (q == 0.0) continue;
            const double a = double(n) * n, b = m.nu * k * k;
            if (std::abs(a - b) < 1e-6 * (a + b)) return false;
            X(n - 1, k - 1) = -q / (a - b);
        }
    return true;
}

bool exact_exp_sum_ok(const ControlSignal& u, const GalerkinModel& m) {
    for (const auto& e : u.exp_sum)
        if (e.coeff_exact.empty() || e.power < 0 || e.power > 1) return false;
    Eigen::MatrixXd X;
    return eigen_split(m, X);
}

// Exact Duhamel integrals of the exp-sum in eigen-coordinates, summed over the terms at full
// precision; only the per-step increments are rounded.
void forward_exp_sum_hp(const VectorField2& y0, const ControlSignal& u, const GalerkinModel& m, int steps,
                        Trajectory& tr) {
    const int N = m.N, d = 2 * N;
    const double T = u.T, h = T / steps;
    Eigen::MatrixXd X;
    eigen_split(m, X);
    Eigen::VectorXd mu(d), g(d);
    for (int n = 1; n <= N; ++n) {
        mu(n - 1) = double(n) * n;
        mu(N + n - 1) = m.nu * n * n;
    }
    const Eigen::VectorXd c2 = m.c.tail(N);
    g.head(N) = -X * c2;
    g.tail(N) = c2;
    const Eigen::VectorXd y = m.pack(y0);
    Eigen::VectorXd eta(d);
    eta.tail(N) = y.tail(N);
    eta.head(N) = y.head(N) - X * y.tail(N);
    Eigen::VectorXd decay = (-mu * h).array().exp();

    ScopedBits guard(std::max(u.bits_used, 128));
    const std::size_t J = u.exp_sum.size();
    std::vector<HP> z(J), lam(J);
    for (std::size_t j = 0; j < J; ++j) {
        z[j] = HP(u.exp_sum[j].coeff_exact);
        lam[j] = HP(u.exp_sum[j].lambda);
    }
    // a_ij = int_0^h e^{-kappa r} dr, b_ij = int_0^h r e^{-kappa r} dr, kappa = mu_i + lambda_j
    std::vector<HP> a(static_cast<std::size_t>(d) * J), b(a.size());
    const HP H(h);
    for (int i = 0; i < d; ++i)
        for (std::size_t j = 0; j < J; ++j) {
            const HP kap = HP(mu(i)) + lam[j];
            const HP e = bmp::exp(-kap * H);
            HP& ai = a[static_cast<std::size_t>(i) * J + j];
            HP& bi = b[static_cast<std::size_t>(i) * J + j];
            if (kap == 0) {
                ai = H;
                bi = H * H / 2;
            } else {
                ai = -bmp::expm1(-kap * H) / kap;
                bi = (ai - H * e) / kap;
            }
        }
    std::vector<HP> w(J);
    for (int step = 0; step < steps; ++step) {
        const HP s1 = HP(T) - HP(h) * (step + 1);
        for (std::size_t j = 0; j < J; ++j) w[j] = z[j] * bmp::exp(-lam[j] * s1);
        Eigen::VectorXd f(d);
        for (int i = 0; i < d; ++i) {
            HP acc = 0;
            for (std::size_t j = 0; j < J; ++j) {
                const std::size_t ij = static_cast<std::size_t>(i) * J + j;
                if (u.exp_sum[j].power == 0)
                    acc += w[j] * a[ij];
                else
                    acc += w[j] * (s1 * a[ij] + b[ij]);
            }
            f(i) = g(i) * to_double(acc);
        }
        eta = decay.cwiseProduct(eta) + f;
        Eigen::VectorXd state(d);
        state.tail(N) = eta.tail(N);
        state.head(N) = eta.head(N) + X * eta.tail(N);
        record(tr, h * (step + 1), m.unpack(state));
    }
}

} // namespace

GalerkinModel GalerkinModel::build(const ProblemData& p, int N) {
    if (N < 1) throw InputError("simulation cutoff must be positive");
    GalerkinModel m;
    m.N = N;
    m.nu = p.nu.nu_d;
    m.A = Eigen::MatrixXd::Zero(2 * N, 2 * N);
    m.c = Eigen::VectorXd::Zero(2 * N);
    m.A.block(0, N, N, N) = coupling_matrix(p.q, N, p.ctx);
    for (int n = 1; n <= N; ++n) {
        m.A(n - 1, n - 1) = double(n) * n;
        m.A(N + n - 1, N + n - 1) = m.nu * n * n;
        m.c(N + n - 1) = m.nu * n * kSqrt2OverPi;
    }
    return m;
}

Eigen::VectorXd GalerkinModel::pack(const VectorField2& f) const {
    Eigen::VectorXd v(2 * N);
    for (int n = 1; n <= N; ++n) {
        v(n - 1) = f.first[static_cast<std::size_t>(n)];
        v(N + n - 1) = f.second[static_cast<std::size_t>(n)];
    }
    return v;
}

VectorField2 GalerkinModel::unpack(const Eigen::VectorXd& v) const {
    std::vector<double> a(static_cast<std::size_t>(N)), b(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        a[static_cast<std::size_t>(n)] = v(n);
        b[static_cast<std::size_t>(n)] = v(N + n);
    }
    return VectorField2(SineSeries(std::move(a)), SineSeries(std::move(b)));
}

Eigen::VectorXd GalerkinModel::hm1_weights() const {
    Eigen::VectorXd w(2 * N);
    for (int n = 1; n <= N; ++n) w(n - 1) = w(N + n - 1) = 1.0 / (double(n) * n);
    return w;
}

Propagator make_propagator(const GalerkinModel& m, double h) {
    const int d = 2 * m.N;
    // Van Loan augmentation: column d + m holds int_0^1 exp(-A h (1 - r)) c h r^m / m! dr
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d + 3, d + 3);
    Z.topLeftCorner(d, d) = -m.A * h;
    Z.block(0, d, d, 1) = m.c * h;
    Z(d, d + 1) = 1.0;
    Z(d + 1, d + 2) = 1.0;
    Eigen::MatrixXd E = Z.exp();
    Propagator P;
    P.h = h;
    P.Phi = E.topLeftCorner(d, d);
    const Eigen::VectorXd I0 = E.block(0, d, d, 1), I1 = E.block(0, d + 1, d, 1), I2 = 2.0 * E.block(0, d + 2, d, 1);
    P.G0 = I0 - I1;
    P.G1 = I1;
    // u(r) = u0 + (-3 u0 + 4 um - u1) r + (2 u0 - 4 um + 2 u1) r^2
    P.Q0 = I0 - 3.0 * I1 + 2.0 * I2;
    P.Qm = 4.0 * I1 - 4.0 * I2;
    P.Q1 = 2.0 * I2 - I1;
    return P;
}

void Trajectory::write_csv(std::ostream& os, bool modes) const {
    os << "t,norm_Hm1,norm_L2";
    const std::size_t N = static_cast<std::size_t>(N_sim);
    if (modes) {
        for (std::size_t n = 1; n <= N; ++n) os << ",a" << n;
        for (std::size_t n = 1; n <= N; ++n) os << ",b" << n;
    }
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << t[i] << ',' << norm_hm1[i] << ',' << norm_l2[i];
        if (modes) {
            for (std::size_t n = 1; n <= N; ++n) os << ',' << states[i].first[n];
            for (std::size_t n = 1; n <= N; ++n) os << ',' << states[i].second[n];
        }
        os << '\n';
    }
}

Trajectory forward(const VectorField2& y0, const ControlSignal& u, const ProblemData& p, int N_sim, int steps) {
    return forward(y0, u, GalerkinModel::build(p, N_sim), steps);
}

Trajectory forward(const VectorField2& y0, const ControlSignal& u, const GalerkinModel& m, int steps) {
    check_steps(steps);
    const double T = u.T;
    const double h = T / steps;
    const Propagator P = make_propagator(m, h);
    const int d = 2 * m.N;
    Trajectory tr;
    tr.N_sim = m.N;
    Eigen::VectorXd y = m.pack(y0);
    record(tr, 0.0, m.unpack(y));

    if (u.has_exp_sum && exact_exp_sum_ok(u, m)) {
        forward_exp_sum_hp(y0, u, m, steps, tr);
        return tr;
    }
    struct TermData {
        ExpTerm term;
        Eigen::VectorXd G, H;
    };
    std::vector<TermData> terms;
    if (u.has_exp_sum) {
        for (const auto& e : u.exp_sum) {
            Eigen::MatrixXd B = m.A + e.lambda * Eigen::MatrixXd::Identity(d, d);
            Eigen::VectorXd Ec = std::exp(-e.lambda * h) * (P.Phi * m.c);
            auto tri = B.triangularView<Eigen::Upper>();
            Eigen::VectorXd G = tri.solve(m.c - Ec);
            Eigen::VectorXd H = tri.solve(G - h * Ec);
            terms.push_back({e, std::move(G), std::move(H)});
        }
    }
    std::vector<double> un(2 * static_cast<std::size_t>(steps) + 1);
    if (!u.has_exp_sum)
        for (int i = 0; i <= 2 * steps; ++i) un[static_cast<std::size_t>(i)] = u(0.5 * h * i);

    for (int i = 0; i < steps; ++i) {
        Eigen::VectorXd next = P.Phi * y;
        if (u.has_exp_sum) {
            const double s1 = T - h * (i + 1);
            for (const auto& td : terms) {
                const double w = td.term.coeff * std::exp(-td.term.lambda * s1);
                if (td.term.power == 0)
                    next += w * td.G;
                else if (td.term.power == 1)
                    next += w * (s1 * td.G + td.H);
                else
                    throw DomainError("forward: exponential terms of power above 1 are not supported");
            }
        } else {
            const std::size_t j = 2 * static_cast<std::size_t>(i);
            next += P.Q0 * un[j] + P.Qm * un[j + 1] + P.Q1 * un[j + 2];
        }
        y = std::move(next);
        record(tr, h * (i + 1), m.unpack(y));
    }
    return tr;
}

AdjointInput AdjointInput::from_field(VectorField2 f) {
    AdjointInput a;
    a.field = std::move(f);
    return a;
}

AdjointInput AdjointInput::eigen(const EigenPair& e, double coeff, bool generalized) {
    AdjointInput a;
    a.add(e, coeff, generalized);
    return a;
}

AdjointInput& AdjointInput::add(const EigenPair& e, double coeff, bool generalized) {
    if (field) throw DomainError("adjoint input: cannot mix a sine field with eigen terms");
    if (generalized && !e.generalized_partner)
        throw DomainError("adjoint input: eigenvalue " + std::to_string(e.lambda) + " has no chain partner");
    terms.push_back({coeff, e, generalized});
    return *this;
}

VectorField2 AdjointInput::theta_at(double s) const {
    if (field) throw DomainError("theta_at needs an eigen-descriptor input");
    VectorField2 r;
    for (const auto& t : terms) {
        const double w = t.coeff * std::exp(-t.pair.lambda * s);
        if (t.generalized)
            r = r + (*t.pair.generalized_partner - t.pair.eigfn * (s * t.pair.chain_coefficient)) * w;
        else
            r = r + t.pair.eigfn * w;
    }
    return r;
}

double AdjointInput::trace_at(double s) const {
    if (field) throw DomainError("trace_at needs an eigen-descriptor input");
    double r = 0.0;
    for (const auto& t : terms) {
        const double w = t.coeff * std::exp(-t.pair.lambda * s);
        if (t.generalized)
            r += w * (partner_observation(t.pair) - s * t.pair.chain_coefficient * t.pair.observation);
        else
            r += w * t.pair.observation;
    }
    return r;
}

VectorField2 AdjointInput::dtheta_dt_at(double s) const {
    if (field) throw DomainError("dtheta_dt_at needs an eigen-descriptor input");
    // d/dt = -d/ds
    VectorField2 r;
    for (const auto& t : terms) {
        const double w = t.coeff * std::exp(-t.pair.lambda * s);
        const double lam = t.pair.lambda;
        if (t.generalized) {
            VectorField2 f = *t.pair.generalized_partner - t.pair.eigfn * (s * t.pair.chain_coefficient);
            r = r + (f * lam + t.pair.eigfn * t.pair.chain_coefficient) * w;
        } else {
            r = r + t.pair.eigfn * (lam * w);
        }
    }
    return r;
}

AdjointTrajectory adjoint(const AdjointInput& theta0, const ProblemData& p, double T, int N_sim, int steps) {
    if (theta0.closed_form()) {
        check_steps(steps);
        AdjointTrajectory a;
        a.closed_form = true;
        a.traj.N_sim = N_sim;
        const double h = T / steps;
        for (int i = 0; i <= steps; ++i) {
            const double t = h * i;
            record(a.traj, t, theta0.theta_at(T - t));
            a.trace.push_back(theta0.trace_at(T - t));
        }
        for (const auto& t : theta0.terms) a.trace_error = std::max(a.trace_error, std::abs(t.coeff) * t.pair.observation_error);
        return a;
    }
    return adjoint(theta0, GalerkinModel::build(p, N_sim), T, steps);
}

AdjointTrajectory adjoint(const AdjointInput& theta0, const GalerkinModel& m, double T, int steps) {
    check_steps(steps);
    if (!theta0.field) throw DomainError("Galerkin adjoint needs a sine-field input");
    const double h = T / steps;
    const Propagator P = make_propagator(m, h);
    const Eigen::MatrixXd PhiT = P.Phi.transpose();
    // Richardson-type check: trace from the lower half of the modes
    Eigen::VectorXd c_half = m.c;
    for (int n = m.N / 2 + 1; n <= m.N; ++n) c_half(m.N + n - 1) = 0.0;

    std::vector<Eigen::VectorXd> th(static_cast<std::size_t>(steps) + 1);
    th[static_cast<std::size_t>(steps)] = m.pack(*theta0.field);
    for (int i = steps - 1; i >= 0; --i) th[static_cast<std::size_t>(i)] = PhiT * th[static_cast<std::size_t>(i) + 1];
    AdjointTrajectory a;
    a.traj.N_sim = m.N;
    for (int i = 0; i <= steps; ++i) {
        const auto& v = th[static_cast<std::size_t>(i)];
        record(a.traj, h * i, m.unpack(v));
        const double tr = m.c.dot(v);
        a.trace.push_back(tr);
        if (i < steps) a.trace_error = std::max(a.trace_error, std::abs(tr - c_half.dot(v)));
    }
    return a;
}

double adjoint_pde_residual(const AdjointInput& theta0, const ProblemData& p, double s) {
    VectorField2 th = theta0.theta_at(s);
    VectorField2 r = theta0.dtheta_dt_at(s) - apply_adjoint_operator(p, th);
    return r.norm(Space::L2) / (1.0 + th.norm(Space::L2));
}

DualityReport duality_residual(const VectorField2& y0, const ControlSignal& u, const AdjointInput& theta0,
                               const ProblemData& p, double T, int N_sim, int steps) {
    if (std::abs(u.T - T) > 1e-12 * T) throw InputError("duality: control horizon differs from T");
    const GalerkinModel m = GalerkinModel::build(p, N_sim);
    const Trajectory y = forward(y0, u, m, steps);
    const AdjointTrajectory th = theta0.closed_form() ? adjoint(theta0, p, T, N_sim, steps)
                                                      : adjoint(theta0, m, T, steps);
    const double h = T / steps;
    DualityReport r;
    // exact trace against the interpolated control; the forward solver's source treatment is then
    // the only discretization error
    Eigen::MatrixXd X;
    if (theta0.closed_form()) {
        r.control_term = gauss_composite([&](double t) { return u(t) * theta0.trace_at(T - t); }, 0.0, T, kDualityPanels);
    } else if (eigen_split(m, X)) {
        const int N = m.N;
        const Eigen::VectorXd v = m.pack(*theta0.field);
        const Eigen::VectorXd c2 = m.c.tail(N);
        Eigen::VectorXd g(2 * N), coord(2 * N), mu(2 * N);
        g.head(N) = -X * c2;
        g.tail(N) = c2;
        coord.head(N) = v.head(N);
        coord.tail(N) = X.transpose() * v.head(N) + v.tail(N);
        for (int n = 1; n <= N; ++n) {
            mu(n - 1) = double(n) * n;
            mu(N + n - 1) = m.nu * n * n;
        }
        const Eigen::VectorXd gc = g.cwiseProduct(coord);
        r.control_term = gauss_composite(
            [&](double t) { return u(t) * gc.dot((-mu * (T - t)).array().exp().matrix()); }, 0.0, T, kDualityPanels);
    } else {
        for (int i = 0; i <= steps; ++i) {
            const double w = (i == 0 || i == steps) ? 0.5 * h : h;
            r.control_term += w * u(h * i) * th.trace[static_cast<std::size_t>(i)];
        }
    }
    VectorField2 theta_T = theta0.closed_form() ? theta0.theta_at(0.0) : *theta0.field;
    r.terminal_term = inner(y.terminal(), theta_T, Space::L2);
    const std::size_t n = static_cast<std::size_t>(N_sim);
    r.initial_term = inner(VectorField2(y0.first.resized(n), y0.second.resized(n)), th.traj.states.front(), Space::L2);
    const double scale = std::max({std::abs(r.control_term), std::abs(r.terminal_term), std::abs(r.initial_term),
                                   std::numeric_limits<double>::min()});
    r.residual = std::abs(r.control_term - r.terminal_term + r.initial_term) / scale;
    return r;
}

ObservabilityReport observability_ratio(const AdjointInput& theta0, const ProblemData& p, double T, int N_sim,
                                        int steps) {
    ObservabilityReport r;
    if (theta0.closed_form()) {
        r.closed_form = true;
        r.theta0 = "eigen combination of " + std::to_string(theta0.terms.size()) + " terms";
        ScopedBits g(kClosedFormBits);
        // trace(s) = sum_i exp(-lambda_i s) (a_i + b_i s)
        struct Lin {
            HP lam, a, b;
        };
        std::vector<Lin> L;
        for (const auto& t : theta0.terms) {
            if (t.generalized)
                L.push_back({HP(t.pair.lambda), HP(t.coeff) * partner_observation(t.pair),
                             -HP(t.coeff) * t.pair.chain_coefficient * t.pair.observation});
            else
                L.push_back({HP(t.pair.lambda), HP(t.coeff) * t.pair.observation, HP(0)});
        }
        const HP Th(T);
        HP den = 0;
        for (const auto& x : L)
            for (const auto& y : L) {
                HP mu = x.lam + y.lam;
                den += x.a * y.a * exp_moment(0, mu, Th) + (x.a * y.b + x.b * y.a) * exp_moment(1, mu, Th) +
                       x.b * y.b * exp_moment(2, mu, Th);
            }
        HP num = HP(theta0.theta_at(T).norm_sq(Space::H10));
        r.numerator = to_double(num);
        r.denominator = std::max(0.0, to_double(den));
        if (den <= 0 || num == 0) {
            r.infinite = den <= 0;
            r.ratio = r.infinite ? std::numeric_limits<double>::infinity() : 0.0;
            r.log10_ratio = r.infinite ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
        } else {
            r.ratio = to_double(num / den);
            r.log10_ratio = hp_log10(num / den);
        }
        return r;
    }
    if (N_sim <= 0) N_sim = static_cast<int>(theta0.field->size());
    r.theta0 = "sine field with " + std::to_string(N_sim) + " modes";
    AdjointTrajectory a = adjoint(theta0, p, T, N_sim, steps);
    const double h = T / steps;
    // composite Simpson when the step count is even, else trapezoid
    double den = 0.0;
    for (int i = 0; i <= steps; ++i) {
        double w;
        if (steps % 2 == 0)
            w = (i == 0 || i == steps) ? h / 3 : (i % 2 ? 4 * h / 3 : 2 * h / 3);
        else
            w = (i == 0 || i == steps) ? h / 2 : h;
        den += w * a.trace[static_cast<std::size_t>(i)] * a.trace[static_cast<std::size_t>(i)];
    }
    r.numerator = a.traj.states.front().norm_sq(Space::H10);
    r.denominator = den;
    const double floor = 1e-300;
    if (den <= floor) {
        r.infinite = true;
        r.ratio = std::numeric_limits<double>::infinity();
        r.log10_ratio = r.ratio;
    } else {
        r.ratio = r.numerator / den;
        r.log10_ratio = std::log10(r.ratio);
    }
    return r;
}

std::string to_string(Witness w) {
    switch (w) {
    case Witness::Fast: return "fast";
    case Witness::PairDifference: return "pair_difference";
    case Witness::RationalChain: return "rational_chain";
    }
    return "?";
}

namespace {

// psi_{1,k} - psi_{2,j} in high precision; lambda_2 = nu j^2 is kept exact.
ObservabilityReport pair_witness(const ProblemData& p, double T, long k, long j, int index) {
    const int bits = std::max({p.ctx.working_bits, p.nu.bits, kClosedFormBits});
    ScopedBits g(bits);
    const int N = std::max<int>(p.ctx.n_max, static_cast<int>(2 * std::max(k, j) + 32));
    FastModeHP f = fast_mode_hp(p, static_cast<int>(k), N, bits);
    const HP nu = at_current(p.nu.nu);
    const HP l1 = HP(k) * k, l2 = nu * j * j;
    const HP Th(T);
    const HP s2pi = bmp::sqrt(HP(2) / hp_pi());
    const HP obs2 = nu * j * s2pi;
    const HP e1 = bmp::exp(-l1 * Th), e2 = bmp::exp(-l2 * Th);
    // theta(0) = e1 psi_1 - e2 psi_2, H^1_0 norm
    HP num = HP(k) * k * bmp::pow(e1 / at_current(f.obs), 2);
    for (int n = 1; n <= N; ++n) {
        HP c = e1 * at_current(f.b[static_cast<std::size_t>(n - 1)]) / at_current(f.obs);
        if (n == j) c -= e2 / obs2;
        num += HP(n) * n * c * c;
    }
    // normalized traces are exp(-l1 s) and exp(-l2 s)
    HP den = exp_moment(0, 2 * l1, Th) - 2 * exp_moment(0, l1 + l2, Th) + exp_moment(0, 2 * l2, Th);
    ObservabilityReport r;
    r.closed_form = true;
    r.index = index;
    r.theta0 = "psi_1," + std::to_string(k) + " - psi_2," + std::to_string(j);
    r.numerator = to_double(num);
    r.denominator = to_double(den);
    if (den <= 0) {
        r.infinite = true;
        r.ratio = r.log10_ratio = std::numeric_limits<double>::infinity();
    } else {
        r.ratio = to_double(num / den);
        r.log10_ratio = hp_log10(num / den);
    }
    return r;
}

} // namespace

std::vector<ObservabilityReport> blowup_experiment(const ProblemData& p, double T, const WitnessSequence& seq) {
    if (!(T > 0.0)) throw InputError("blowup experiment: T must be positive");
    std::vector<ObservabilityReport> out;
    switch (seq.kind) {
    case Witness::Fast: {
        if (p.q.is_zero()) throw DomainError("witness psi_1,k is undefined for q = 0 (zero observation)");
        for (int k : seq.indices) {
            EigenPair e = fast_eigenpair(p, k);
            if (e.observation == 0.0) throw DomainError("witness psi_1," + std::to_string(k) + " has zero observation");
            ObservabilityReport r = observability_ratio(AdjointInput::eigen(e, 1.0 / e.observation), p, T);
            r.index = k;
            r.theta0 = "psi_1," + std::to_string(k);
            out.push_back(r);
        }
        break;
    }
    case Witness::PairDifference: {
        if (p.q.is_zero()) throw DomainError("pair witness is undefined for q = 0 (zero observation)");
        if (p.nu.is_rational()) throw DomainError("pair witness needs irrational sqrt(nu)");
        if (p.nu.kind == NuKind::Liouville) {
            if (!p.nu.liouville) throw DomainError("Liouville value without its construction");
            const auto& spec = *p.nu.liouville;
            for (int idx : seq.indices) {
                if (idx < 1 || idx > spec.size()) throw InputError("convergent index out of range");
                const auto& [kp, jp] = spec.convergents[static_cast<std::size_t>(idx - 1)];
                if (kp > 100000 || jp > 100000)
                    throw PrecisionEscalation("witness at convergent " + std::to_string(idx) +
                                                  " needs the eigenvalue gap resolved",
                                              static_cast<int>(std::min(spec.required_bits_direct, 1e9)));
                out.push_back(pair_witness(p, T, kp.convert_to<long>(), jp.convert_to<long>(), idx));
            }
        } else {
            int top = 1;
            for (int k : seq.indices) top = std::max(top, k);
            IndexMaps im = index_maps(p.nu, top);
            const bool gt1 = p.nu.sqrt_nu_d > 1.0;
            for (int k : seq.indices) {
                if (gt1)
                    out.push_back(pair_witness(p, T, im.i_k[static_cast<std::size_t>(k - 1)], k, k));
                else
                    out.push_back(pair_witness(p, T, k, im.j_k[static_cast<std::size_t>(k - 1)], k));
            }
        }
        break;
    }
    case Witness::RationalChain: {
        if (!p.nu.is_rational()) throw DomainError("chain witness needs rational sqrt(nu)");
        for (int l : seq.indices) {
            EigenPair e = chain_eigenpair(p, l);
            ScopedBits g(std::max({p.ctx.working_bits, p.nu.bits, kClosedFormBits}));
            const HP I = coupling_integral_hp(p, p.nu.i0 * l);
            if (I == 0) throw ControllabilityError("chain witness: coupling integral vanishes", e.lambda);
            const HP c = HP(2) / hp_pi() * HP(chain_from_integral(1.0, e.k) * kPi / 2) * I;
            e.coupling_integral = to_double(I);
            e.chain_coefficient = to_double(c);
            // a Phi_hat + b Phi_2 scaled by 1/a, with b chosen so the trace vanishes at t = T; the trace is
            // then exactly -c obs_2 s exp(-gamma s), s = T - t
            const double b = -e.psi_prime_zero / (double(e.k) * kSqrt2OverPi);
            const HP gam(e.lambda), Th(T);
            const HP den = c * c * HP(e.observation) * HP(e.observation) * exp_moment(2, 2 * gam, Th);
            const VectorField2 shape = *e.generalized_partner + e.eigfn * (b - T * e.chain_coefficient);
            const HP num = bmp::exp(-2 * gam * Th) * HP(shape.norm_sq(Space::H10));
            ObservabilityReport r;
            r.closed_form = true;
            r.numerator = to_double(num);
            r.denominator = to_double(den);
            r.ratio = to_double(num / den);
            r.log10_ratio = hp_log10(num / den);
            r.index = l;
            r.theta0 = "Phi_hat + b Phi_2 at l = " + std::to_string(l);
            out.push_back(r);
        }
        break;
    }
    }
    return out;
}

NullControlReport verify_null_control(const VectorField2& y0, const ControlSignal& u, const ProblemData& p, double T,
                                      int N_sim, int steps) {
    if (std::abs(u.T - T) > 1e-12 * T) throw InputError("verify: control horizon differs from T");
    Trajectory tr = forward(y0, u, p, N_sim, steps);
    NullControlReport r;
    r.K = u.K;
    r.N_sim = N_sim;
    const VectorField2& yT = tr.terminal();
    r.norm_y0 = y0.norm(Space::Hm1);
    r.norm_yT = yT.norm(Space::Hm1);
    r.relative_residual = r.norm_y0 > 0 ? r.norm_yT / r.norm_y0 : r.norm_yT;
    double lo = 0.0, hi = 0.0;
    for (int n = 1; n <= N_sim; ++n) {
        const double a = yT.first[static_cast<std::size_t>(n)], b = yT.second[static_cast<std::size_t>(n)];
        r.terminal_first.push_back(a);
        r.terminal_second.push_back(b);
        const double w = (a * a + b * b) / (double(n) * n);
        (n <= u.K ? lo : hi) += w;
    }
    r.controlled_residual = std::sqrt(lo);
    r.tail_residual = std::sqrt(hi);
    const double k1 = u.K + 1.0;
    r.tail_decay = std::exp(-std::min(1.0, p.nu.nu_d) * k1 * k1 * T);
    if (u.K > 0 && r.norm_y0 > 0) {
        ProblemData pk = p;
        pk.K = u.K;
        for (const auto& e : spectrum(pk).entries) {
            double v = std::abs(inner(yT, e.eigfn, Space::L2)) / e.eigfn.norm(Space::L2);
            if (e.generalized_partner)
                v = std::max(v, std::abs(inner(yT, *e.generalized_partner, Space::L2)) /
                                    e.generalized_partner->norm(Space::L2));
            r.eigen_residual = std::max(r.eigen_residual, v / y0.norm(Space::L2));
        }
    }
    return r;
}

} // namespace ctrllab
