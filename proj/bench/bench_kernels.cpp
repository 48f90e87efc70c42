#include <random>

#include <benchmark/benchmark.h>

#include "dvnee/kernels.hpp"
#include "dvnee/pipeline.hpp"
#include "dvnee/synth.hpp"

namespace {

using namespace dvnee;

Tensor2 random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor2 t(r, c);
  glorot_uniform(t, rng);
  return t;
}

template <void (*Gemm)(const Tensor2&, const Tensor2&, Tensor2&, bool)>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Tensor2 c(n, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_gemm_nn<kernels::reference::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_gemm_nn<kernels::gemm_nn>)->Name("gemm_nn/openmp")->Arg(64)->Arg(128)->Arg(256);

template <void (*Gemm)(const Tensor2&, const Tensor2&, Tensor2&, bool)>
void BM_gemm_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
  Tensor2 c(n, n);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_gemm_tn<kernels::reference::gemm_tn>)->Name("gemm_tn/serial")->Arg(128);
BENCHMARK(BM_gemm_tn<kernels::gemm_tn>)->Name("gemm_tn/openmp")->Arg(128);

struct InferFixture {
  Model model;
  std::vector<Document> docs;

  InferFixture() {
    synth::GenConfig g;
    g.n_docs = 8;
    g.seed = 11;
    docs = synth::generate(g);
    model = Model::create(g.schema.inventory(), FeatureConfig{}, LocalDims{}, DvnConfig{}, 11);
  }
};

void BM_infer(benchmark::State& state) {
  static InferFixture fx;
  Model m = fx.model;
  m.use_dvn = state.range(0) > 0;
  m.dvn.h = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    for (const auto& d : fx.docs) benchmark::DoNotOptimize(infer_document(m, d, 128));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * fx.docs.size()));
}
BENCHMARK(BM_infer)->Name("infer_document/h")->Arg(0)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
