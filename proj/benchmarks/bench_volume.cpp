// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "densreach/geometry.hpp"
#include "densreach/rng.hpp"

using namespace densreach;

namespace {

Polyhedron cut_box(int d, int cuts, std::uint64_t seed) {
    Rng rng(seed);
    Matrix a(cuts, d);
    Vector b(cuts);
    for (int k = 0; k < cuts; ++k) {
        for (int j = 0; j < d; ++j) {
            a(k, j) = rng.normal();
        }
        b[k] = rng.uniform(0.3, 1.0) * a.row(k).norm();
    }
    return intersect(Polyhedron::from_box({Vector::Constant(d, -1.0), Vector::Constant(d, 1.0)}), Polyhedron(a, b));
}

void BM_Volume(benchmark::State& state) {
    const auto p = cut_box(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(volume(p));
    }
}
BENCHMARK(BM_Volume)->Args({2, 6})->Args({3, 8})->Args({4, 8});

void BM_Vertices(benchmark::State& state) {
    const auto p = cut_box(static_cast<int>(state.range(0)), 8, 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(vertices(p));
    }
}
BENCHMARK(BM_Vertices)->Arg(2)->Arg(3)->Arg(4);

void BM_BoundingBox(benchmark::State& state) {
    const auto p = cut_box(static_cast<int>(state.range(0)), 8, 11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bounding_box(p));
    }
}
BENCHMARK(BM_BoundingBox)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
