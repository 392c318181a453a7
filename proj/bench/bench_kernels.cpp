// Serial versus OpenMP throughput of the analytics kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "vigc/kernels.hpp"

namespace {

std::vector<std::string> corpus(std::size_t n) {
  static const char* words[] = {"what", "is", "the", "man", "holding", "in", "his", "hand", "color", "of",
                                "bus", "why", "might", "dog", "be", "sitting", "on", "couch", "how", "many"};
  std::mt19937_64 rng(7);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    for (std::size_t k = 0, len = 4 + rng() % 10; k < len; ++k) s += std::string(k ? " " : "") + words[rng() % 20];
    out.push_back(s);
  }
  return out;
}

constexpr std::size_t kDim = 512;

template <auto Embed>
void BM_embed(benchmark::State& state) {
  const auto texts = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Embed(texts, kDim));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Sum>
void BM_pairwise(benchmark::State& state) {
  const auto m = vigc::kernels::hashing_embed_serial(corpus(static_cast<std::size_t>(state.range(0))), kDim);
  for (auto _ : state) benchmark::DoNotOptimize(Sum(m));
  const auto n = state.range(0);
  state.SetItemsProcessed(state.iterations() * n * (n - 1) / 2);
}

}  // namespace

BENCHMARK(BM_embed<vigc::kernels::hashing_embed_serial>)->Name("embed/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_embed<vigc::kernels::hashing_embed_omp>)->Name("embed/omp")->Arg(1000)->Arg(10000);
BENCHMARK(BM_pairwise<vigc::kernels::pairwise_distance_sum_serial>)->Name("pairwise/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_pairwise<vigc::kernels::pairwise_distance_sum_omp>)->Name("pairwise/omp")->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
