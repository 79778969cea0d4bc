#include "ctrllab/errors.hpp"
#include "ctrllab/moment.hpp"
#include "ctrllab/precision.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <random>

using namespace ctrllab;

namespace {

ProblemData make(NuValue nu, Coupling q, int K = 8) {
    ProblemData p;
    p.nu = std::move(nu);
    p.q = std::move(q);
    p.K = K;
    return p;
}

ProblemData nu2(int K = 8) { return make(NuValue::real("2", 128), Coupling::sine_series({1.0}), K); }

VectorField2 band_limited(std::size_t n = 64) {
    SineSeries a(n), b(n);
    for (std::size_t m = 1; m <= 6; ++m) {
        a.at(m) = 1.0 / double(m);
        b.at(m) = (m % 2 ? -1.0 : 1.0) / double(m * m);
    }
    return VectorField2(a, b);
}

MomentSystem explicit_system(const std::vector<double>& lambdas, const std::vector<double>& rhs, double T) {
    MomentSystem ms;
    ms.T = T;
    ms.K = static_cast<int>(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        ms.entries.push_back({lambdas[i], 0, rhs[i], static_cast<int>(i) + 1, Branch::Fast, static_cast<int>(i) + 1});
    return ms;
}

double inner_exp(double a, double b, double T) { return (1.0 - std::exp(-(a + b) * T)) / (a + b); }

// w(s) from the stored exp sum in extended precision; the terms cancel far below double resolution
double eval_hp(const std::vector<ExpTerm>& es, double s) {
    ScopedBits bits(256);
    HP v = 0, x = s;
    for (const auto& t : es) {
        const HP c = t.coeff_exact.empty() ? HP(t.coeff) : HP(t.coeff_exact);
        v += c * pow(x, t.power) * exp(-HP(t.lambda) * x);
    }
    return to_double(v);
}

} // namespace

TEST(Moments, ZeroInitialStateGivesZeroTargets) {
    const ProblemData p = nu2(4);
    const MomentSystem ms = moments_from_initial(VectorField2(SineSeries(64), SineSeries(64)), spectrum(p), 1.0);
    ASSERT_EQ(ms.entries.size(), 8u);
    for (const auto& e : ms.entries) EXPECT_EQ(e.rhs, 0.0);
}

TEST(Moments, SingleSlowModeHitsOneEquation) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero(), 4);
    // with q = 0 the fast eigenfunctions are (phi_k, 0), so (0, phi_2) only meets the slow mode 2
    const VectorField2 y0(SineSeries(64), SineSeries::mode(2, 64));
    int nonzero = 0;
    for (const auto& e : spectrum(p).entries) {
        const double v = inner(y0, e.eigfn, Space::L2);
        nonzero += v != 0.0;
    }
    EXPECT_EQ(nonzero, 1);
}

TEST(Moments, RationalTargetsAgainstQuadrature) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::sine_series({1.0, 1.0}), 4);
    const VectorField2 y0(SineSeries::mode(1, 64), SineSeries(64));
    const SpectrumTable t = spectrum(p);
    const MomentSystem ms = moments_from_initial(y0, t, 1.0);
    for (const auto& e : t.entries) {
        if (e.tag == LambdaTag::L3) continue;
        const double q = gauss_composite([&](double x) { return y0.first(x) * e.eigfn.first(x) + y0.second(x) * e.eigfn.second(x); },
                                         0.0, kPi, 64);
        const double want = -std::exp(-e.lambda) * q / e.observation;
        bool found = false;
        for (const auto& m : ms.entries)
            if (m.lambda == e.lambda && m.order == 0) {
                EXPECT_NEAR(m.rhs, want, 1e-12 * (1.0 + std::abs(want))) << "lambda " << e.lambda;
                found = true;
            }
        EXPECT_TRUE(found);
    }
    int merged = 0;
    for (const auto& m : ms.entries) merged += m.order == 1;
    EXPECT_EQ(merged, 4); // lambda = 4, 16, 36, 64
}

TEST(Moments, DoubleEigenvalueIsReported) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::sine_series({1.0}), 3);
    EXPECT_THROW(moments_from_initial(band_limited(), spectrum(p), 1.0), ControllabilityError);
}

TEST(Moments, GroupedTriplesForSqrtTwo) {
    const MomentSystem ms = moments_grouped(band_limited(), nu2(), 4, 1.0);
    ASSERT_EQ(ms.group_count(), 4);
    const int ik[] = {1, 3, 4, 6}, ihat[] = {2, 5, 9, 12};
    for (int k = 1; k <= 4; ++k) {
        const auto mem = ms.group_members(k);
        ASSERT_EQ(mem.size(), 3u);
        EXPECT_NEAR(ms.entries[mem[0]].lambda, 2.0 * k * k, 1e-12);
        EXPECT_EQ(ms.entries[mem[1]].lambda, double(ik[k - 1] * ik[k - 1]));
        EXPECT_EQ(ms.entries[mem[2]].lambda, double(ihat[k - 1] * ihat[k - 1]));
    }
}

TEST(Blaschke, ZerosAndModulus) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 4, 1.0);
    const BlaschkeProduct b = make_blaschke(ms, 1, p, 100.0, 1e-12);
    for (int j = 2; j <= 6; ++j) EXPECT_EQ(std::abs(blaschke_eval(b, 2.0 * j * j)), 0.0) << "j " << j;
    EXPECT_NEAR(std::abs(blaschke_eval(b, {0.0, 3.0})), std::sqrt(1e-3), 1e-10);
}

TEST(Property, BlaschkeModulusLawOnImaginaryAxis) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 8, 1.0);
    const BlaschkeProduct b = make_blaschke(ms, 3, p, 4000.0, 1e-12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> tau(-50.0, 50.0);
    for (int i = 0; i < 20; ++i) {
        const double t = tau(rng);
        const double v = std::norm(blaschke_eval(b, {0.0, t})) * std::pow(1.0 + t * t, 3);
        EXPECT_NEAR(v, 1.0, 2.0 * b.tail_log_bound + 1e-12) << "tau " << t;
    }
}

TEST(Property, BlaschkeBoundedInRightHalfPlane) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 4, 1.0);
    const BlaschkeProduct b = make_blaschke(ms, 2, p, 100.0, 1e-12);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> re(1e-3, 200.0), im(-200.0, 200.0);
    for (int i = 0; i < 50; ++i) EXPECT_LT(std::abs(blaschke_eval(b, {re(rng), im(rng)})), 1.0);
}

TEST(Coefficients, ZeroTargetsAndReconstruction) {
    const ProblemData p = nu2();
    MomentSystem ms = moments_grouped(band_limited(), p, 4, 1.0);
    const BlaschkeProduct b = make_blaschke(ms, 2, p, 100.0, 1e-12);
    MomentSystem zero = ms;
    for (auto& e : zero.entries) e.rhs = 0.0;
    const MomentCoefficients z = coefficients(zero, 2, b);
    EXPECT_EQ(z.alpha, 0.0);
    EXPECT_EQ(z.beta, 0.0);
    EXPECT_EQ(z.gamma, 0.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (auto& e : ms.entries) e.rhs = nd(rng);
    const MomentCoefficients c = coefficients(ms, 2, b);
    const auto mem = ms.group_members(2);
    for (int i : mem) {
        const double l = ms.entries[i].lambda;
        EXPECT_NEAR(interpolant_eval(c, b, l).real(), ms.entries[i].rhs, 1e-8 * (1.0 + std::abs(ms.entries[i].rhs)));
    }
    const double m1 = ms.entries[mem[0]].rhs, m2 = ms.entries[mem[1]].rhs;
    const double sum = (m1 / ((c.lambda1 - c.lambda3) * c.L1) - m2 / ((c.lambda2 - c.lambda3) * c.L2)) /
                       (c.lambda1 - c.lambda2);
    EXPECT_NEAR(c.alpha + c.beta, sum, 1e-8 * (1.0 + std::abs(sum)));
}

TEST(BlaschkeAtom, ZeroTargetsGiveZeroAtom) {
    const ProblemData p = nu2();
    MomentSystem ms = moments_grouped(band_limited(), p, 4, 1.0);
    for (auto& e : ms.entries) e.rhs = 0.0;
    const BiorthAtom a = synthesize_atom_blaschke(ms, 1, p);
    EXPECT_TRUE(a.accepted);
    EXPECT_EQ(a.residual, 0.0);
    for (double v : a.samples) EXPECT_EQ(v, 0.0);
}

TEST(BlaschkeAtom, OffGroupMomentsSmall) {
    const ProblemData p = nu2(4);
    MomentSystem ms = moments_grouped(band_limited(), p, 4, 1.0);
    const BiorthAtom a = synthesize_atom_blaschke(ms, 1, p);
    EXPECT_LE(a.residual_off, 1e-6) << a.diagnostic;
}

TEST(Property, BlaschkeAtomsNeverSilentlyAccepted) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 8, 1.0);
    for (int g = 1; g <= ms.group_count(); ++g) {
        const BiorthAtom a = synthesize_atom_blaschke(ms, g, p);
        EXPECT_EQ(a.accepted, a.residual <= a.threshold) << a.diagnostic;
        EXPECT_FALSE(a.diagnostic.empty());
        if (a.accepted) {
            EXPECT_LE(a.residual_off, 1e-6) << a.diagnostic;
            EXPECT_LE(a.residual_on, 1e-6) << a.diagnostic;
        }
        // measured norm against the bound with the stored constant
        EXPECT_LE(a.norm_l2 * a.norm_l2, a.norm_bound) << "group " << g;
    }
}

TEST(Property, GramAtomsAreBiorthogonal) {
    const ProblemData p = nu2();
    MomentSystem ms = moments_from_initial(band_limited(), spectrum(p), 1.0);
    for (auto& e : ms.entries) e.rhs = 1.0;
    for (int g = 1; g <= ms.group_count(); ++g) {
        const BiorthAtom a = synthesize_atom_gram(ms, g);
        EXPECT_TRUE(a.accepted) << a.diagnostic;
        EXPECT_LE(a.residual_on, 1e-6);
        EXPECT_LE(a.residual_off, 1e-6);
        const auto mom = measure_moments(
            [&](double s) { return eval_hp(a.exp_sum, s); },
            ms, 64);
        for (std::size_t i = 0; i < mom.size(); ++i)
            EXPECT_NEAR(mom[i], ms.entries[i].group == g ? 1.0 : 0.0, 1e-6) << "group " << g << " entry " << i;
    }
}

TEST(Gram, SingleMomentClosedForm) {
    const double m = 0.7, T = 1.5;
    const ControlSignal u = gram_moment_solve(explicit_system({1.0}, {m}, T), PrecisionContext{});
    for (double t : {0.0, 0.3, 1.0, 1.5}) {
        const double want = 2.0 * m * std::exp(-(T - t)) / (1.0 - std::exp(-2.0 * T));
        EXPECT_NEAR(u(t), want, 1e-12) << "t " << t;
    }
}

TEST(Gram, SeparatedPairAtDoublePrecision) {
    const GramSolution s = gram_solve(explicit_system({1.0, 4.0}, {0.3, -0.2}, 1.0), 53);
    EXPECT_LE(s.residual, 1e-12);
}

TEST(Gram, CondensedPairNeedsExtendedPrecision) {
    const MomentSystem ms = explicit_system({1.0, 1.0 + 1e-8}, {0.3, -0.2}, 1.0);
    bool low_ok = true;
    try {
        low_ok = gram_solve(ms, 53).relative_residual <= 1e-12;
    } catch (const PrecisionEscalation& e) {
        low_ok = false;
        EXPECT_GT(e.required_bits, 53);
    }
    EXPECT_FALSE(low_ok);
    EXPECT_LE(gram_solve(ms, 128).relative_residual, 1e-12);
}

TEST(Property, GramSolutionIsMinimumNorm) {
    const std::vector<double> lam{1.0, 2.5, 6.0};
    const double T = 1.0;
    const ControlSignal u = gram_moment_solve(explicit_system(lam, {0.4, -0.1, 0.25}, T), PrecisionContext{});
    // d = exp(-mu s) minus its projection on the atoms keeps every moment fixed
    const double mu = 3.7;
    Eigen::Matrix3d G;
    Eigen::Vector3d r;
    for (int i = 0; i < 3; ++i) {
        r(i) = inner_exp(lam[i], mu, T);
        for (int j = 0; j < 3; ++j) G(i, j) = inner_exp(lam[i], lam[j], T);
    }
    const Eigen::Vector3d c = G.ldlt().solve(r);
    auto d = [&](double s) {
        double v = std::exp(-mu * s);
        for (int i = 0; i < 3; ++i) v -= c(i) * std::exp(-lam[i] * s);
        return v;
    };
    auto w = [&](double s) { return eval_hp(u.exp_sum, s); };
    const double wd = gauss_composite([&](double s) { return w(s) * d(s); }, 0.0, T, 64);
    const double ww = gauss_composite([&](double s) { return w(s) * w(s); }, 0.0, T, 64);
    const double dd = gauss_composite([&](double s) { return d(s) * d(s); }, 0.0, T, 64);
    EXPECT_LE(std::abs(wd), 1e-8 * std::sqrt(ww * dd));
    for (double eps : {1e-3, -1e-3, 1e-1}) EXPECT_GT(ww + 2 * eps * wd + eps * eps * dd, ww);
}

TEST(Property, TimeReversalBookkeeping) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_from_initial(band_limited(), spectrum(p), 1.0);
    const ControlSignal u = control_series(ms, ControlMethod::Gram, p);
    // moments of u(t) against exp(-lambda (T - t)) over t
    for (const auto& e : ms.entries) {
        const double m = gauss_composite(
            [&](double t) { return eval_hp(u.exp_sum, 1.0 - t) * std::pow(1.0 - t, e.order) * std::exp(-e.lambda * (1.0 - t)); },
            0.0, 1.0, 256);
        EXPECT_NEAR(m, e.rhs, std::max(u.moment_residual, 1e-9) * 10.0) << "lambda " << e.lambda;
    }
}

TEST(ControlSeries, ZeroMomentsGiveZeroControl) {
    const ProblemData p = nu2(4);
    const MomentSystem ms = moments_from_initial(VectorField2(SineSeries(64), SineSeries(64)), spectrum(p), 1.0);
    const ControlSignal u = control_series(ms, ControlMethod::Gram, p);
    for (double v : u.u) EXPECT_EQ(v, 0.0);
}

TEST(ControlSeries, GroupNormsDominatedByFirstGroups) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 8, 1.0);
    const ControlSignal u = control_series(ms, ControlMethod::Gram, p);
    ASSERT_EQ(u.group_norms.size(), 8u);
    double head = 0.0, total = 0.0;
    for (const auto& [g, n] : u.group_norms) {
        EXPECT_TRUE(std::isfinite(n));
        total += n * n;
        if (g <= 4) head += n * n;
    }
    EXPECT_GT(head, 0.5 * total);
    EXPECT_EQ(u.series_U.size(), 8u);
}

TEST(ControlSeries, BlaschkeAndGramAgreeOnMoments) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 8, 1.0);
    const ControlSignal g = control_series(ms, ControlMethod::Gram, p);
    const ControlSignal b = control_series(ms, ControlMethod::Blaschke, p);
    const auto mg = measure_moments([&](double s) { return g(1.0 - s); }, ms, 64);
    const auto mb = measure_moments([&](double s) { return b(1.0 - s); }, ms, 64);
    for (std::size_t i = 0; i < mg.size(); ++i) EXPECT_NEAR(mg[i], mb[i], 1e-5) << "entry " << i;
}

TEST(ControlSeries, BlaschkeRejectionRaisesAssemblyError) {
    const ProblemData p = nu2();
    const MomentSystem ms = moments_grouped(band_limited(), p, 8, 1.0);
    bool any_rejected = false;
    for (int g = 1; g <= ms.group_count(); ++g) any_rejected = any_rejected || !synthesize_atom_blaschke(ms, g, p).accepted;
    if (any_rejected) {
        EXPECT_THROW(control_series(ms, ControlMethod::Blaschke, p), AssemblyError);
    }
}

TEST(Hum, ZeroStateGivesZeroControl) {
    const GalerkinModel m = GalerkinModel::build(nu2(), 8);
    const HumReport h = hum_control(VectorField2(SineSeries(8), SineSeries(8)), 1.0, 1e-4, m);
    for (double v : h.u.u) EXPECT_EQ(v, 0.0);
}

TEST(Hum, TerminalStateShrinksWithPenalty) {
    const GalerkinModel m = GalerkinModel::build(nu2(), 16);
    const VectorField2 y0 = band_limited(16);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        const HumReport h = hum_control(y0, 1.0, eps, m);
        EXPECT_LE(h.terminal_hm1, prev) << "eps " << eps;
        EXPECT_GT(h.bound_constant, 0.0);
        prev = h.terminal_hm1;
    }
}

TEST(Hum, AgreesWithMomentControlBelowTolerance) {
    const ProblemData p = nu2();
    const VectorField2 y0 = band_limited();
    const ControlSignal g = control_series(moments_from_initial(y0, spectrum(p), 1.0), ControlMethod::Gram, p);
    const HumReport h = hum_control(VectorField2(y0.first.resized(16), y0.second.resized(16)), 1.0, 1e-6,
                                    GalerkinModel::build(p, 16));
    const double rg = verify_null_control(y0, g, p, 1.0, 16).relative_residual;
    const double rh = verify_null_control(y0, h.u, p, 1.0, 16).relative_residual;
    EXPECT_LE(rg, 1e-4);
    EXPECT_LE(rh, 1e-4);
}

TEST(Hum, RejectsNonPositivePenalty) {
    const GalerkinModel m = GalerkinModel::build(nu2(), 4);
    EXPECT_THROW(hum_control(VectorField2(SineSeries(4), SineSeries(4)), 1.0, 0.0, m), InputError);
}
