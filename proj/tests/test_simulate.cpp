#include "ctrllab/condensation.hpp"
#include "ctrllab/errors.hpp"
#include "ctrllab/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace ctrllab;

namespace {

ProblemData make(NuValue nu, Coupling q, int K = 8) {
    ProblemData p;
    p.nu = std::move(nu);
    p.q = std::move(q);
    p.K = K;
    return p;
}

VectorField2 modes(std::size_t a, std::size_t b, std::size_t n = 16) {
    return VectorField2(a ? SineSeries::mode(a, n) : SineSeries(n), b ? SineSeries::mode(b, n) : SineSeries(n));
}

const EigenPair& find_pair(const SpectrumTable& t, Branch b, int k) {
    for (const auto& e : t.entries)
        if (e.branch == b && e.k == k) return e;
    throw std::runtime_error("eigenpair not in table");
}

VectorField2 random_field(std::mt19937_64& rng, std::size_t n, double decay) {
    std::normal_distribution<double> nd;
    SineSeries a(n), b(n);
    for (std::size_t m = 1; m <= n; ++m) {
        a.at(m) = nd(rng) / std::pow(double(m), decay);
        b.at(m) = nd(rng) / std::pow(double(m), decay);
    }
    return VectorField2(a, b);
}

} // namespace

TEST(Forward, UncoupledSlowMode) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero());
    const Trajectory y = forward(modes(0, 1), ControlSignal::zero(1.0), p, 16);
    EXPECT_NEAR(y.terminal().second[1], std::exp(-2.0), 1e-12);
    EXPECT_NEAR(y.terminal().first.norm(Space::L2), 0.0, 1e-14);
}

TEST(Forward, ConstantCouplingCascade) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::constant(1.0));
    const Trajectory y = forward(modes(0, 1), ControlSignal::zero(1.0), p, 16);
    EXPECT_NEAR(y.terminal().first[1], std::exp(-2.0) - std::exp(-1.0), 1e-12);
    EXPECT_NEAR(y.terminal().second[1], std::exp(-2.0), 1e-12);
}

TEST(Forward, FastModeIsUntouchedByCoupling) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::constant(1.0));
    const Trajectory y = forward(modes(1, 0), ControlSignal::zero(1.0), p, 16);
    EXPECT_NEAR(y.terminal().first[1], std::exp(-1.0), 1e-12);
    EXPECT_NEAR(y.terminal().second.norm(Space::L2), 0.0, 1e-14);
}

TEST(Property, ForwardIsLinear) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    const GalerkinModel m = GalerkinModel::build(p, 12);
    for (int trial = 0; trial < 5; ++trial) {
        const VectorField2 y1 = random_field(rng, 12, 1.0), y2 = random_field(rng, 12, 1.0);
        std::vector<double> s1, s2, s12;
        const double c1 = nd(rng), c2 = nd(rng), a = nd(rng), b = nd(rng);
        for (double t : uniform_grid(1.0, 2049)) {
            s1.push_back(c1 * std::cos(3.0 * t));
            s2.push_back(c2 * t * t);
            s12.push_back(a * s1.back() + b * s2.back());
        }
        const auto r1 = forward(y1, ControlSignal::from_samples(1.0, s1), m, 256).terminal();
        const auto r2 = forward(y2, ControlSignal::from_samples(1.0, s2), m, 256).terminal();
        const auto r12 = forward(y1 * a + y2 * b, ControlSignal::from_samples(1.0, s12), m, 256).terminal();
        const VectorField2 diff = r12 - (r1 * a + r2 * b);
        EXPECT_LE(diff.norm(Space::L2), 1e-11 * (1.0 + r12.norm(Space::L2)));
    }
}

TEST(Property, UncontrolledEnergyDecays) {
    // with q = 0 each component decays at least like exp(-min(1, nu) t)
    const ProblemData p = make(NuValue::real("0.5", 128), Coupling::zero());
    std::mt19937_64 rng(3);
    const VectorField2 y0 = random_field(rng, 12, 0.0);
    const Trajectory y = forward(y0, ControlSignal::zero(2.0), p, 12, 64);
    for (std::size_t i = 1; i < y.t.size(); ++i) {
        EXPECT_LE(y.norm_l2[i], y.norm_l2[i - 1] * (1.0 + 1e-14));
        EXPECT_LE(y.norm_l2[i], std::exp(-0.5 * y.t[i]) * y.norm_l2[0] * (1.0 + 1e-12));
    }
}

TEST(Adjoint, EigenflowSatisfiesAdjointEquation) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    const SpectrumTable t = spectrum(p);
    for (const auto& e : t.entries)
        for (double s : {0.0, 0.3, 1.0}) EXPECT_LE(adjoint_pde_residual(AdjointInput::eigen(e), p, s), 1e-8) << e.lambda;
}

TEST(Adjoint, ChainSatisfiesAdjointEquation) {
    const ProblemData p = make(NuValue::rational(1, 2, 128), Coupling::synthetic_rational(1, 2, 1.0, 16, 256), 6);
    const SpectrumTable t = spectrum(p);
    int chains = 0;
    for (const auto& e : t.entries) {
        if (!e.generalized_partner) continue;
        ++chains;
        for (double s : {0.1, 0.5, 1.0})
            EXPECT_LE(adjoint_pde_residual(AdjointInput::eigen(e, 1.0, true), p, s), 1e-8) << e.lambda;
    }
    EXPECT_GT(chains, 0);
}

TEST(Adjoint, GalerkinMatchesClosedForm) {
    // constant coupling keeps the eigenfunctions inside the first N modes
    const ProblemData p = make(NuValue::real("2", 128), Coupling::constant(1.0), 4);
    const SpectrumTable t = spectrum(p);
    const double T = 0.7;
    for (const auto& e : t.entries) {
        const AdjointInput closed = AdjointInput::eigen(e);
        const AdjointInput field = AdjointInput::from_field(
            VectorField2(e.eigfn.first.resized(16), e.eigfn.second.resized(16)));
        const AdjointTrajectory a = adjoint(field, p, T, 16, 512);
        const VectorField2 d = a.traj.states.front() - closed.theta_at(T);
        EXPECT_LE(d.norm(Space::L2), 1e-10 * (1.0 + e.eigfn.norm(Space::L2))) << e.lambda;
        EXPECT_NEAR(a.trace.front(), closed.trace_at(T), 1e-9 * (1.0 + std::abs(closed.trace_at(T))));
    }
}

TEST(Duality, UncontrolledIdentityClosedForm) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    const SpectrumTable t = spectrum(p);
    std::mt19937_64 rng(21);
    const VectorField2 y0 = random_field(rng, 16, 2.0);
    const DualityReport r = duality_residual(y0, ControlSignal::zero(1.0), AdjointInput::eigen(t.entries[2]), p, 1.0, 32);
    EXPECT_LE(r.residual, 1e-8);
    EXPECT_EQ(r.control_term, 0.0);
}

TEST(Duality, ControlledIdentityGalerkin) {
    const ProblemData p = make(NuValue::real("3", 128), Coupling::sine_series({0.5, 1.0}));
    std::mt19937_64 rng(8);
    std::vector<double> uv;
    for (double t : uniform_grid(1.0, 4097)) uv.push_back(std::sin(4.0 * t) + 0.3);
    const DualityReport r = duality_residual(random_field(rng, 12, 1.0), ControlSignal::from_samples(1.0, uv),
                                             AdjointInput::from_field(random_field(rng, 12, 2.0)), p, 1.0, 12);
    EXPECT_LE(r.residual, 1e-6);
    EXPECT_NE(r.control_term, 0.0);
}

TEST(Observability, SlowModeClosedForm) {
    const double nu = 2.0, T = 0.4;
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero(), 6);
    const SpectrumTable t = spectrum(p);
    for (int k = 1; k <= 3; ++k) {
        const EigenPair& e = find_pair(t, Branch::Slow, k);
        const ObservabilityReport r = observability_ratio(AdjointInput::eigen(e), p, T);
        const double x = std::exp(-2.0 * nu * k * k * T);
        const double want = kPi * k * k * x / (nu * (1.0 - x));
        EXPECT_NEAR(r.ratio / want, 1.0, 1e-10) << "k " << k;
    }
}

TEST(Property, ObservabilityRatioIsScaleInvariant) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 6);
    const SpectrumTable t = spectrum(p);
    for (const auto& e : t.entries) {
        const double r1 = observability_ratio(AdjointInput::eigen(e, 1.0), p, 0.5).ratio;
        const double r3 = observability_ratio(AdjointInput::eigen(e, -3.0), p, 0.5).ratio;
        EXPECT_NEAR(r3 / r1, 1.0, 1e-12) << e.lambda;
    }
}

TEST(Observability, ZeroObservationIsInfinite) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero(), 4);
    const ObservabilityReport r = observability_ratio(AdjointInput::eigen(find_pair(spectrum(p), Branch::Fast, 1)), p, 1.0);
    EXPECT_TRUE(r.infinite);
}

TEST(Witness, FastNeedsCoupling) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero(), 4);
    EXPECT_THROW(blowup_experiment(p, 1.0, {Witness::Fast, {1, 2}}), DomainError);
    EXPECT_THROW(blowup_experiment(p, 1.0, {Witness::PairDifference, {1}}), DomainError);
}

TEST(Witness, ChainNeedsRationalNu) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 4);
    EXPECT_THROW(blowup_experiment(p, 1.0, {Witness::RationalChain, {1}}), DomainError);
}

TEST(Witness, PairDifferenceStaysFiniteForQuadraticIrrational) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 12);
    const auto r = blowup_experiment(p, 0.5, {Witness::PairDifference, {1, 2, 4, 8}});
    ASSERT_EQ(r.size(), 4u);
    for (const auto& x : r) {
        EXPECT_FALSE(x.infinite);
        EXPECT_TRUE(std::isfinite(x.log10_ratio));
    }
}

TEST(Witness, LiouvillePairsBlowUp) {
    auto [spec, nu] = liouville_nu(1.0, 3, Parity::Even, 256);
    const ProblemData p = make(nu, Coupling::sine_series({1.0, 1.0}), 8);
    const auto r = blowup_experiment(p, 0.1, {Witness::PairDifference, {1, 2}});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_GE(r[1].log10_ratio - r[0].log10_ratio, 1.0);
}

TEST(NullControl, ZeroControlReportsFreeDecay) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 4);
    const NullControlReport r = verify_null_control(modes(1, 0), ControlSignal::zero(5.0), p, 5.0, 16);
    EXPECT_NEAR(r.relative_residual, std::exp(-5.0), 1e-10);
    // the zero control carries K = 0, so every mode counts as tail
    EXPECT_EQ(r.K, 0);
    EXPECT_EQ(r.controlled_residual, 0.0);
    EXPECT_NEAR(r.tail_residual, r.norm_yT, 1e-14);
}

TEST(NullControl, RejectsMismatchedHorizon) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 4);
    EXPECT_THROW(duality_residual(modes(1, 0), ControlSignal::zero(2.0), AdjointInput::from_field(modes(1, 1)), p, 1.0, 8),
                 InputError);
}

TEST(Trajectory, CsvHasHeaderAndRows) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 4);
    const Trajectory y = forward(modes(1, 2), ControlSignal::zero(1.0), p, 8, 16);
    std::ostringstream os;
    y.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 18);
    EXPECT_EQ(s.rfind("t,", 0), 0u);
}

TEST(Property, SampledSourceConvergesAtFourthOrder) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero());
    std::vector<double> uv;
    for (double t : uniform_grid(1.0, 4097)) uv.push_back(std::sin(3.0 * t) + t * t);
    const ControlSignal u = ControlSignal::from_samples(1.0, uv);
    const GalerkinModel m = GalerkinModel::build(p, 4);
    // slow mode n: b' = -2 n^2 b + c_n u
    auto exact = [&](int n) {
        const double lam = 2.0 * n * n;
        return m.c(4 + n - 1) * gauss_composite([&](double s) { return std::exp(-lam * (1.0 - s)) * u(s); }, 0.0, 1.0, 512);
    };
    double prev = 0.0;
    for (int steps : {32, 64, 128}) {
        const VectorField2 yT = forward(VectorField2(SineSeries(4), SineSeries(4)), u, m, steps).terminal();
        double err = 0.0;
        for (int n = 1; n <= 4; ++n) err = std::max(err, std::abs(yT.second[n] - exact(n)));
        if (prev > 0.0) {
            EXPECT_GE(prev / err, 12.0) << "steps " << steps;
        }
        prev = err;
    }
}

TEST(Forward, PiecewiseLinearControlIsExactOnItsGrid) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::constant(0.5));
    ControlSignal u = ControlSignal::from_samples(1.0, {0.0, 1.0, -1.0, 2.0, 0.5});
    u.piecewise_linear = true;
    u.finalize();
    const GalerkinModel m = GalerkinModel::build(p, 4);
    const Propagator P = make_propagator(m, 0.25);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(8);
    for (int i = 0; i < 4; ++i) y = P.Phi * y + P.G0 * u.u[i] + P.G1 * u.u[i + 1];
    const Eigen::VectorXd f = m.pack(forward(VectorField2(SineSeries(4), SineSeries(4)), u, m, 4).terminal());
    EXPECT_LE((f - y).norm(), 1e-13 * (1.0 + y.norm()));
}
