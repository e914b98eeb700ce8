#include <benchmark/benchmark.h>

#include <random>

#include "phi4/solvers.hpp"

using namespace phi4;

namespace {

SpectralField random_field(const TorusGrid& g, int n, std::uint64_t seed) {
    SpectralField f(g);
    CVec z(g.spec_size());
    stream_source(g, n, seed)(0, z);
    f.coeffs = z;
    return f;
}

void BM_ForwardInverse(benchmark::State& st) {
    TorusGrid g(3, static_cast<int>(st.range(0)));
    RealField f(g);
    std::mt19937_64 e(1);
    std::normal_distribution<double> nd;
    for (auto& x : f.values) x = nd(e);
    for (auto _ : st) benchmark::DoNotOptimize(dft_inverse(dft_forward(f)));
}
BENCHMARK(BM_ForwardInverse)->Arg(16)->Arg(32);

void BM_DealiasedCube(benchmark::State& st) {
    TorusGrid g(3, static_cast<int>(st.range(0)));
    SpectralField f = random_field(g, g.N() / 2, 3);
    for (auto _ : st) benchmark::DoNotOptimize(dealiased_product(f, f, f));
}
BENCHMARK(BM_DealiasedCube)->Arg(16)->Arg(32);

void BM_Resonant(benchmark::State& st) {
    TorusGrid g(3, static_cast<int>(st.range(0)));
    DyadicPartition p(g);
    SpectralField a = random_field(g, g.N() / 2, 4), b = random_field(g, g.N() / 2, 5);
    for (auto _ : st) benchmark::DoNotOptimize(resonant(a, b, p));
}
BENCHMARK(BM_Resonant)->Arg(16)->Arg(32);

void BM_SymbolStep(benchmark::State& st) {
    const int N = static_cast<int>(st.range(0));
    TorusGrid g(3, N);
    TimeGrid tg(0.5, 20000);
    CoefficientSet c(TimePoly::constant(0.0), TimePoly::constant(-1.0), 0.5);
    DyadicPartition p(g);
    StepKernel k(g, c, tg);
    SymbolParams prm;
    prm.n = N / 4;
    prm.sigma = 0.1;
    prm.c_unit.assign(tg.steps() + 1, 0.0);
    prm.ctilde_unit.assign(tg.steps() + 1, 0.0);
    SymbolStepper s(k, p, prm, stream_source(g, prm.n, 7));
    for (auto _ : st) s.advance();
}
BENCHMARK(BM_SymbolStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_VWStep(benchmark::State& st) {
    const int N = static_cast<int>(st.range(0));
    TorusGrid g(3, N);
    TimeGrid tg(0.5, 20000);
    CoefficientSet c(TimePoly::constant(0.5), TimePoly::constant(-2.0), 0.5);
    DyadicPartition p(g);
    StepKernel k(g, c, tg);
    SymbolParams prm;
    prm.n = N / 4;
    prm.sigma = 0.1;
    prm.c_unit.assign(tg.steps() + 1, 0.0);
    prm.ctilde_unit.assign(tg.steps() + 1, 0.0);
    SymbolStepper s(k, p, prm, stream_source(g, prm.n, 7));
    s.advance();
    VWSolver vs(k);
    for (auto _ : st) {
        VWContext ctx(s, 0.5);
        benchmark::DoNotOptimize(vs.step(s.index(), ctx));
    }
}
BENCHMARK(BM_VWStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
