#include "ctrllab/condensation.hpp"
#include "ctrllab/moment.hpp"
#include "ctrllab/simulate.hpp"
#include "ctrllab/spectral.hpp"

#include <benchmark/benchmark.h>

using namespace ctrllab;

namespace {

ProblemData problem(int K) {
    ProblemData p;
    p.nu = NuValue::real("2", 128);
    p.q = Coupling::sine_series({1.0});
    p.K = K;
    return p;
}

VectorField2 initial_state(std::size_t n) {
    SineSeries a(n), b(n);
    for (std::size_t m = 1; m <= std::min<std::size_t>(n, 6); ++m) {
        a.at(m) = 1.0 / double(m);
        b.at(m) = (m % 2 ? -1.0 : 1.0) / double(m * m);
    }
    return VectorField2(a, b);
}

void BM_Spectrum(benchmark::State& st) {
    const ProblemData p = problem(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(spectrum(p));
}
BENCHMARK(BM_Spectrum)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Psi(benchmark::State& st) {
    const ProblemData p = problem(8);
    const int k = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(psi_series(p, k));
}
BENCHMARK(BM_Psi)->Arg(1)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& st) {
    const ProblemData p = problem(8);
    const int N = static_cast<int>(st.range(0));
    const GalerkinModel m = GalerkinModel::build(p, N);
    const VectorField2 y0 = initial_state(static_cast<std::size_t>(N));
    std::vector<double> u;
    for (double t : uniform_grid(1.0, 2049)) u.push_back(std::sin(3.0 * t));
    const ControlSignal c = ControlSignal::from_samples(1.0, u);
    for (auto _ : st) benchmark::DoNotOptimize(forward(y0, c, m, 2048));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GramSolve(benchmark::State& st) {
    const ProblemData p = problem(static_cast<int>(st.range(0)));
    const MomentSystem ms = moments_from_initial(initial_state(64), spectrum(p), 1.0);
    const int bits = static_cast<int>(st.range(1));
    for (auto _ : st) benchmark::DoNotOptimize(gram_solve(ms, bits));
}
BENCHMARK(BM_GramSolve)->Args({8, 128})->Args({8, 256})->Args({16, 256})->Unit(benchmark::kMillisecond);

void BM_RieszScan(benchmark::State& st) {
    const LiouvilleSpec spec = liouville_nu(1.0, 3, Parity::Even, 256).first;
    for (auto _ : st) benchmark::DoNotOptimize(riesz_degeneracy_scan(spec));
}
BENCHMARK(BM_RieszScan)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
