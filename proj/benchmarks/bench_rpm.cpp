// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "densreach/net.hpp"
#include "densreach/reach.hpp"
#include "densreach/rpm.hpp"

using namespace densreach;

namespace {

const Polyhedron& domain2() {
    static const Polyhedron p = Polyhedron::from_box({Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)});
    return p;
}

void BM_EnumerateCells(benchmark::State& state) {
    const int width = static_cast<int>(state.range(0));
    const auto net = slice_net(make_net(2, {width, width}, 5), 1.0);
    std::size_t cells = 0;
    for (auto _ : state) {
        cells = enumerate_cells(net, domain2()).size();
        benchmark::DoNotOptimize(cells);
    }
    state.counters["cells"] = static_cast<double>(cells);
}
BENCHMARK(BM_EnumerateCells)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ForwardReach(benchmark::State& state) {
    const auto cells = enumerate_cells(slice_net(make_net(2, {16, 16}, 6), 1.0), domain2());
    const auto rho0 = InitialDistribution::uniform({Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)});
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_reach(cells, rho0));
    }
}
BENCHMARK(BM_ForwardReach)->Unit(benchmark::kMillisecond);

void BM_Verify(benchmark::State& state) {
    std::map<double, std::vector<AffineCell>> slices;
    const auto net = make_net(2, {16, 16}, 8);
    for (double t : {0.5, 1.0}) {
        slices[t] = enumerate_cells(slice_net(net, t), domain2());
    }
    const auto unsafe = Polyhedron::from_box({Vector::Constant(2, 5.0), Vector::Constant(2, 6.0)});
    const auto rho0 = InitialDistribution::uniform({Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)});
    const bool heuristic = state.range(0) != 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(verify_safety(slices, unsafe, [](double) { return ZRange{}; }, rho0, heuristic));
    }
}
BENCHMARK(BM_Verify)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
