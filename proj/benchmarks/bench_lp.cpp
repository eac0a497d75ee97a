// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "densreach/geometry.hpp"
#include "densreach/rng.hpp"

using namespace densreach;

namespace {

// Random polytope: unit box plus `extra` random cuts through the interior.
Polyhedron random_polytope(int d, int extra, std::uint64_t seed) {
    Rng rng(seed);
    Matrix a(2 * d + extra, d);
    Vector b(2 * d + extra);
    a.setZero();
    for (int i = 0; i < d; ++i) {
        a(2 * i, i) = 1.0;
        a(2 * i + 1, i) = -1.0;
        b[2 * i] = b[2 * i + 1] = 1.0;
    }
    for (int k = 0; k < extra; ++k) {
        for (int j = 0; j < d; ++j) {
            a(2 * d + k, j) = rng.normal();
        }
        b[2 * d + k] = rng.uniform(0.2, 1.0) * a.row(2 * d + k).norm();
    }
    return Polyhedron(a, b);
}

void BM_LpSolve(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const auto p = random_polytope(d, static_cast<int>(state.range(1)), 1);
    Rng rng(2);
    Vector c = Vector::NullaryExpr(d, [&] { return rng.normal(); });
    for (auto _ : state) {
        benchmark::DoNotOptimize(lp_solve(c, p, Sense::Maximize));
    }
}
BENCHMARK(BM_LpSolve)->Args({2, 20})->Args({4, 40})->Args({6, 60});

void BM_ChebyshevCenter(benchmark::State& state) {
    const auto p = random_polytope(static_cast<int>(state.range(0)), 30, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(chebyshev_center(p));
    }
}
BENCHMARK(BM_ChebyshevCenter)->Arg(2)->Arg(4);

void BM_RemoveRedundant(benchmark::State& state) {
    const auto p = random_polytope(static_cast<int>(state.range(0)), 40, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(remove_redundant(p));
    }
}
BENCHMARK(BM_RemoveRedundant)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
