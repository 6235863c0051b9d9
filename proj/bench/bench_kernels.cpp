// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <numbers>

#include "tomopet/event_sim.hpp"
#include "tomopet/mlem.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/phantom_io.hpp"
#include "tomopet/rng.hpp"
#include "tomopet/serial.hpp"
#include "tomopet/system_matrix.hpp"
#include "tomopet/uq.hpp"

using namespace tomopet;

namespace {

struct Fixture {
    Scanner scanner;
    GridSpec grid{64, 64, 4.0};
    SystemMatrix a;
    std::vector<double> x, y, sens;

    Fixture() : scanner(ScannerConfig{}), a(build_system_matrix(scanner, grid)) {
        PhantomParams p;
        p.radius_mm = 80;
        const auto disk = make_synthetic_phantom(PhantomKind::disk, 64, 64, 4.0, p);
        x = disk.values();
        y = forward_project(a, x);
        sens = a.sensitivity();
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void set_threads(const benchmark::State& state) { set_num_threads(int(state.range(0))); }

void BM_ForwardSerial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(serial::forward_project(f.a, f.x));
}

void BM_ForwardParallel(benchmark::State& state) {
    const auto& f = fixture();
    set_threads(state);
    for (auto _ : state) benchmark::DoNotOptimize(forward_project(f.a, f.x));
}

void BM_BackSerial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(serial::back_project(f.a, f.y));
}

void BM_BackParallel(benchmark::State& state) {
    const auto& f = fixture();
    set_threads(state);
    for (auto _ : state) benchmark::DoNotOptimize(back_project(f.a, f.y));
}

void BM_MlemStepSerial(benchmark::State& state) {
    const auto& f = fixture();
    const std::vector<double> x0(f.x.size(), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(serial::mlem_step(f.a, f.sens, f.y, x0, 1e-12));
}

void BM_MlemStepParallel(benchmark::State& state) {
    const auto& f = fixture();
    set_threads(state);
    const std::vector<double> x0(f.x.size(), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(mlem_step(f.a, f.sens, f.y, x0, 1e-12));
}

void BM_DetectSingleSerial(benchmark::State& state) {
    const auto& f = fixture();
    Rng rng(1);
    for (auto _ : state) {
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        benchmark::DoNotOptimize(
            serial::detect_single(f.scanner, {10.0, -5.0}, {std::cos(phi), std::sin(phi)}, 7));
    }
}

void BM_DetectSingle(benchmark::State& state) {
    const auto& f = fixture();
    Rng rng(1);
    for (auto _ : state) {
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        benchmark::DoNotOptimize(f.scanner.detect_single({10.0, -5.0}, {std::cos(phi), std::sin(phi)}, 7));
    }
}

ActivityMap bench_phantom() {
    PhantomParams p;
    return make_synthetic_phantom(PhantomKind::shepp_logan, 64, 64, 4.0, p);
}

SimConfig bench_sim() {
    SimConfig c;
    c.n_total = 20000;
    c.seed = 3;
    return c;
}

void BM_SimulateSerial(benchmark::State& state) {
    const auto& f = fixture();
    const auto map = bench_phantom();
    for (auto _ : state) benchmark::DoNotOptimize(serial::simulate_scan(map, f.scanner, bench_sim()));
}

void BM_SimulateParallel(benchmark::State& state) {
    const auto& f = fixture();
    set_threads(state);
    const auto map = bench_phantom();
    for (auto _ : state) benchmark::DoNotOptimize(simulate_scan(map, f.scanner, bench_sim()));
}

std::pair<Image, Image> ssim_pair() {
    const GridSpec g{256, 256, 1.0};
    Rng rng(5);
    std::vector<double> a(g.size()), b(g.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform();
        b[i] = a[i] + 0.1 * rng.normal();
    }
    return {Image(g, a), Image(g, b)};
}

void BM_SsimSerial(benchmark::State& state) {
    const auto [a, b] = ssim_pair();
    for (auto _ : state) benchmark::DoNotOptimize(serial::ssim(a, b, 1.0));
}

void BM_SsimParallel(benchmark::State& state) {
    set_threads(state);
    const auto [a, b] = ssim_pair();
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b, 1.0));
}

} // namespace

BENCHMARK(BM_ForwardSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlemStepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlemStepParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DetectSingleSerial);
BENCHMARK(BM_DetectSingle);
BENCHMARK(BM_SimulateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SsimSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SsimParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
