#include "ctrllab/errors.hpp"
#include "ctrllab/spectral.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
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

std::vector<double> lambdas(const SpectrumTable& t) {
    std::vector<double> v;
    for (const auto& e : t.entries) v.push_back(e.lambda);
    return v;
}

std::set<double> tagged(const SpectrumTable& t, LambdaTag tag) {
    std::set<double> s;
    for (const auto& e : t.entries)
        if (e.tag == tag) s.insert(e.lambda);
    return s;
}

} // namespace

TEST(Spectrum, RationalNuFourClassification) {
    const SpectrumTable t = spectrum(make(NuValue::rational(2, 1), Coupling::sine_series({1.0}), 3));
    EXPECT_EQ(lambdas(t), (std::vector<double>{1, 4, 9, 16, 36}));
    EXPECT_TRUE(tagged(t, LambdaTag::L1).empty());
    EXPECT_EQ(tagged(t, LambdaTag::L2), (std::set<double>{1, 9}));
    EXPECT_EQ(tagged(t, LambdaTag::L3), (std::set<double>{4, 16, 36}));
}

TEST(Spectrum, IrrationalAllSimple) {
    const SpectrumTable t = spectrum(make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 2));
    const auto l = lambdas(t);
    ASSERT_EQ(l.size(), 4u);
    const double want[] = {1, 2, 4, 8};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(l[i], want[i], 1e-14);
    for (const auto& e : t.entries) EXPECT_EQ(e.classification, Classification::Simple);
}

TEST(Spectrum, NineQuartersSetArithmetic) {
    const SpectrumTable t = spectrum(make(NuValue::rational(3, 2), Coupling::sine_series({1.0}), 3));
    const auto l1 = tagged(t, LambdaTag::L1), l2 = tagged(t, LambdaTag::L2), l3 = tagged(t, LambdaTag::L3);
    EXPECT_TRUE(l1.count(2.25));
    EXPECT_TRUE(l2.count(1) && l2.count(4));
    EXPECT_TRUE(l3.count(9));
}

TEST(Spectrum, CsvColumns) {
    const SpectrumTable t = spectrum(make(NuValue::rational(2, 1), Coupling::constant(1.0), 3));
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
              "lambda,branch,k,Lambda_tag,observation,coupling_integral,double_flag");
}

TEST(Psi, ZeroCouplingGivesZero) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::zero());
    for (int k : {1, 4}) {
        EXPECT_EQ(psi_closed_form(p, k).psi.norm(Space::H10), 0.0);
        EXPECT_EQ(psi_closed_form(p, k).psi_prime_zero, 0.0);
        EXPECT_EQ(psi_series(p, k).psi.norm(Space::H10), 0.0);
        EXPECT_LT(ode_oracle_psi(p, k).psi.norm(Space::H10), 1e-14);
    }
}

TEST(Psi, SeriesCoefficientFormula) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    const double num = p.q.inner_phi(1, 2, p.ctx).value;
    EXPECT_NEAR(psi_series(p, 1).psi[2], num / (1.0 - 8.0), 1e-14);
}

TEST(Psi, OracleAgreesForSinTwoX) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({0.0, 1.0}));
    EXPECT_LT((psi_closed_form(p, 3).psi - ode_oracle_psi(p, 3).psi).norm(Space::H10), 1e-8);
}

TEST(Psi, OracleIsLinearInCoupling) {
    const ProblemData a = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    const ProblemData b = make(NuValue::real("2", 128), Coupling::trig_series(0.5, {}, {0.0, 0.3}));
    const ProblemData ab = make(NuValue::real("2", 128), Coupling::trig_series(0.5, {1.0}, {0.0, 0.3}));
    for (int k : {1, 2, 5}) {
        const SineSeries d = ode_oracle_psi(ab, k).psi - ode_oracle_psi(a, k).psi - ode_oracle_psi(b, k).psi;
        EXPECT_LT(d.norm(Space::H10), 1e-10) << "k " << k;
    }
}

TEST(Psi, TildeAndHatRejectWrongIndices) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::constant(1.0));
    EXPECT_THROW(psi_tilde(p, 2), DomainError);
    EXPECT_THROW(psi_closed_form(p, 1), DomainError);
    EXPECT_THROW(psi_hat(p, 0), DomainError);
}

TEST(PsiHat, ZeroCouplingAndBetaSlope) {
    const ProblemData z = make(NuValue::rational(2, 1), Coupling::zero());
    const PsiHat h0 = psi_hat(z, 1);
    EXPECT_EQ(h0.beta.norm(Space::H10), 0.0);
    EXPECT_EQ(h0.alpha, 0.0);
    EXPECT_EQ(psi_tilde(z, 1).psi.norm(Space::L2), 0.0);
    const ProblemData p = make(NuValue::rational(1, 2), Coupling::sine_series({1.0, 0.5}));
    for (int l = 1; l <= 3; ++l) EXPECT_NEAR(psi_hat(p, l).beta_prime_zero, 0.0, 1e-12) << "l " << l;
}

TEST(PsiHat, DoubleEigenvalueFlag) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::constant(1.0));
    EXPECT_TRUE(psi_hat(p, 1).is_double);
}

TEST(CouplingIntegral, SpotValues) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::constant(1.0));
    EXPECT_NEAR(coupling_integral(p, 1.0).value, 4.0 / 3.0, 1e-12);
    EXPECT_NEAR(coupling_integral(p, 4.0).value, 0.0, 1e-14);
    EXPECT_THROW(coupling_integral(p, 2.0), DomainError);
    const ProblemData z = make(NuValue::rational(2, 1), Coupling::zero());
    for (double zeta : {1.0, 4.0, 9.0}) EXPECT_EQ(coupling_integral(z, zeta).value, 0.0);
}

TEST(CouplingIntegral, HighPrecisionMatchesDouble) {
    const ProblemData p = make(NuValue::rational(1, 2), Coupling::sine_series({1.0, 0.5, 0.25}));
    for (int k = 1; k <= 5; ++k) {
        ScopedBits g(128);
        EXPECT_NEAR(to_double(coupling_integral_hp(p, k)), coupling_integral(p, double(k * k)).value, 1e-14);
    }
}

TEST(IndexMaps, NuTwo) {
    const IndexMaps m = index_maps(NuValue::real("2", 128), 12);
    EXPECT_EQ(std::vector<int>(m.i_k.begin(), m.i_k.begin() + 5), (std::vector<int>{1, 3, 4, 6, 7}));
    EXPECT_EQ(std::vector<int>(m.i_hat.begin(), m.i_hat.begin() + 4), (std::vector<int>{2, 5, 9, 12}));
    EXPECT_EQ(m.j_k[0], 1);
    EXPECT_EQ(m.j_k[1], 1);
}

TEST(IndexMaps, HalfIsInjective) {
    const IndexMaps m = index_maps(NuValue::real("0.5", 128), 50);
    EXPECT_EQ(std::set<int>(m.j_k.begin(), m.j_k.end()).size(), m.j_k.size());
}

TEST(Property, IndexPartition) {
    for (const char* nu : {"2", "3", "5", "0.5"}) {
        const IndexMaps m = index_maps(NuValue::real(nu, 128), 40);
        const auto& img = std::string(nu) == "0.5" ? m.j_k : m.i_k;
        const auto& hat = std::string(nu) == "0.5" ? m.j_hat : m.i_hat;
        std::set<int> all(img.begin(), img.end());
        for (int h : hat) EXPECT_TRUE(all.insert(h).second) << "nu " << nu << " overlap at " << h;
        const int top = *std::max_element(img.begin(), img.end());
        EXPECT_EQ(static_cast<int>(all.size()), top) << "nu " << nu;
        EXPECT_EQ(*all.begin(), 1);
        EXPECT_EQ(*all.rbegin(), top);
    }
}

TEST(Observation, SlowAndZeroCoupling) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(observation(slow_eigenpair(p, k)), 2.0 * k * kSqrt2OverPi, 1e-13);
    const ProblemData z = make(NuValue::real("2", 128), Coupling::zero());
    EXPECT_EQ(observation(fast_eigenpair(z, 1)), 0.0);
    EXPECT_THROW(normalize_by_observation(fast_eigenpair(z, 1)), NormalizationError);
}

TEST(Observation, FastEqualsNuTimesSlope) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}));
    for (int k = 1; k <= 6; ++k) {
        const EigenPair e = fast_eigenpair(p, k);
        EXPECT_NEAR(e.observation, 2.0 * e.psi_prime_zero, 1e-15);
        EXPECT_NEAR(normalize_by_observation(e).first[static_cast<std::size_t>(k)] * e.observation, 1.0, 1e-14);
    }
}

TEST(Observation, RationalFastFormula) {
    const ProblemData p = make(NuValue::rational(2, 1), Coupling::sine_series({1.0, 0.3}));
    for (int k : {1, 3, 5}) {
        const EigenPair e = fast_eigenpair(p, k);
        const double want = -coupling_integral(p, double(k * k)).value / (kSqrtPiOver2 * std::sin(k * kPi / 2.0));
        EXPECT_NEAR(e.observation, want, 1e-12) << "k " << k;
    }
}

TEST(Controllability, Verdicts) {
    const ControllabilityReport a = approx_controllability_check(make(NuValue::rational(2, 1), Coupling::constant(1.0), 3));
    EXPECT_FALSE(a.controllable);
    // every chain integral vanishes: sin(2 l s) is orthogonal to sin(l s)
    EXPECT_EQ(a.failing_lambdas, (std::vector<double>{4.0, 16.0, 36.0}));
    const ProblemData z = make(NuValue::real("2", 128), Coupling::zero(), 5);
    const ControllabilityReport b = approx_controllability_check(z);
    EXPECT_FALSE(b.controllable);
    for (int k = 1; k <= 5; ++k)
        EXPECT_TRUE(std::find(b.failing_lambdas.begin(), b.failing_lambdas.end(), double(k * k)) != b.failing_lambdas.end());
    EXPECT_TRUE(approx_controllability_check(make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 20)).controllable);
}

TEST(Property, EigenResidualForSimplePairs) {
    for (const auto& p : {make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 12),
                          make(NuValue::real("0.5", 128), Coupling::sine_series({0.0, 1.0}), 12),
                          make(NuValue::rational(2, 3), Coupling::trig_series(0.2, {1.0}, {0.5}), 12)}) {
        for (const auto& e : spectrum(p).entries)
            if (e.classification == Classification::Simple) {
                EXPECT_LE(eigen_residual(p, e), 1e-8 * (1.0 + e.lambda)) << "lambda " << e.lambda;
            }
    }
}

TEST(Property, ChainIdentity) {
    const ProblemData p = make(NuValue::rational(1, 2), Coupling::sine_series({1.0, 0.5}), 12);
    for (int l = 1; l <= 6; ++l) {
        const EigenPair e = chain_eigenpair(p, l);
        if (e.classification != Classification::GeneralizedChain) continue;
        EXPECT_LE(chain_residual(p, e), 1e-8 * (1.0 + e.lambda)) << "l " << l;
        EXPECT_NEAR(e.chain_coefficient, chain_from_integral(e.coupling_integral, 2 * l), 1e-12);
    }
}

TEST(Property, CompletenessProxyFullRank) {
    const ProblemData p = make(NuValue::real("2", 128), Coupling::sine_series({1.0}), 12);
    const SpectrumTable t = spectrum(p);
    const int n = static_cast<int>(t.entries.size());
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto& a = t.entries[i].eigfn;
            const auto& b = t.entries[j].eigfn;
            G(i, j) = inner(a, b, Space::L2) / (a.norm(Space::L2) * b.norm(Space::L2));
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    EXPECT_GT(es.eigenvalues().minCoeff(), 1e-8);
}

TEST(Gap, TwoThirds) {
    const GapReport g = gap_condition(NuValue::rational(2, 3), 400.0);
    EXPECT_TRUE(g.holds);
    EXPECT_NEAR(g.min_gap, 5.0 / 9.0, 1e-15);
    EXPECT_NEAR(g.lower_bound, 1.0 / 9.0, 1e-15);
}

TEST(Gap, PairCountMatchesCount) {
    const GapReport g = gap_condition(NuValue::real("2", 128), 100.0);
    EXPECT_EQ(g.pairs, g.count * (g.count - 1) / 2);
    EXPECT_GT(g.min_gap, 0.0);
}

TEST(NuValue, RealDetectsRationalRoot) {
    const NuValue v = NuValue::real("2.25", 128);
    EXPECT_TRUE(v.is_rational());
    EXPECT_EQ(v.i0, 3);
    EXPECT_EQ(v.j0, 2);
    EXPECT_EQ(NuValue::real("2", 128).regime(), Regime::IrrationalGt1);
    EXPECT_EQ(NuValue::real("0.5", 128).regime(), Regime::IrrationalLt1);
}
