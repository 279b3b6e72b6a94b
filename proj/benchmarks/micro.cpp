#include <benchmark/benchmark.h>

#include "llmcomp/codec.hpp"
#include "llmcomp/entropy.hpp"
#include "llmcomp/layout.hpp"
#include "llmcomp/model.hpp"
#include "llmcomp/quant.hpp"
#include "llmcomp/rng.hpp"

using namespace llmcomp;

static void BM_EntropyEncode(benchmark::State& state) {
  const auto alphabet = static_cast<uint32_t>(state.range(0));
  Rng rng(7);
  std::vector<uint32_t> symbols(1 << 16);
  for (auto& s : symbols) s = static_cast<uint32_t>(rng.below(alphabet));
  for (auto _ : state) benchmark::DoNotOptimize(entropy_encode(symbols, alphabet));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(symbols.size()));
}
BENCHMARK(BM_EntropyEncode)->Arg(9)->Arg(1025);

static void BM_EntropyDecode(benchmark::State& state) {
  const auto alphabet = static_cast<uint32_t>(state.range(0));
  Rng rng(7);
  std::vector<uint32_t> symbols(1 << 16);
  for (auto& s : symbols) s = static_cast<uint32_t>(rng.below(alphabet));
  const Bytes bytes = entropy_encode(symbols, alphabet);
  for (auto _ : state) benchmark::DoNotOptimize(entropy_decode(bytes, symbols.size(), alphabet));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(symbols.size()));
}
BENCHMARK(BM_EntropyDecode)->Arg(9)->Arg(1025);

static void BM_LloydMax(benchmark::State& state) {
  const Field f = gen_synthetic(SyntheticKind::smooth_advection, {4, 64, 64}, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(lloyd_max_fit(f.values(), static_cast<uint32_t>(state.range(0)), 1e-3));
}
BENCHMARK(BM_LloydMax)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_Flatten(benchmark::State& state) {
  const Field f = gen_synthetic(SyntheticKind::white_noise, {4, 128, 128}, 1);
  const auto kind = static_cast<LayoutKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(flatten(f, kind));
}
BENCHMARK(BM_Flatten)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_TransformerForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden = static_cast<uint32_t>(state.range(0));
  cfg.heads = 4;
  cfg.vocab = 256;
  cfg.context = 16;
  const Transformer model = Transformer::initialized(cfg, 3);
  auto ws = model.make_workspace();
  std::vector<uint32_t> tokens(cfg.context, 5);
  std::vector<Coord> coords(cfg.context + 1);
  std::vector<double> logits(cfg.vocab);
  for (auto _ : state) {
    model.logits({tokens, coords}, logits, *ws);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_TransformerForward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_CompressLastValue(benchmark::State& state) {
  const Field f = gen_synthetic(SyntheticKind::smooth_advection, {4, 64, 64}, 1, {Precision::f32});
  CompressOptions o;
  o.vocab = 256;
  o.epsilon = 1e-3;
  const Tokenized tok = tokenize(f, o);
  const auto predictor = make_baseline(PredictorKind::last_value, tok.stream.tokens, o.vocab, 32);
  for (auto _ : state) benchmark::DoNotOptimize(compress(f, tok, o, *predictor));
}
BENCHMARK(BM_CompressLastValue)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
