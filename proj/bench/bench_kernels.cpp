// Serial reference vs OpenMP kernels. Run with --benchmark_filter=<name> to
// compare a single pair; OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "crowdcensus/cluster.hpp"
#include "crowdcensus/consensus.hpp"
#include "crowdcensus/screening.hpp"
#include "crowdcensus/stats.hpp"
#include "crowdcensus/synth.hpp"

using namespace crowdcensus;

namespace {

synth::SynthSpec campaign_spec(int records) {
  synth::SynthSpec spec;
  int n = records / 100;
  for (int c = 0; c < n; ++c) {
    synth::CollectionSpec col;
    col.id = "C" + std::to_string(c + 1);
    spec.world.collections.push_back(col);
  }
  spec.workers.sloppy.count = 5;
  spec.workers.spammer.count = 2;
  spec.workers.birth_sigma = 3;
  return spec;
}

const ingest::ResponsePool& pool_of(int records) {
  static std::map<int, ingest::ResponsePool> cache;
  auto it = cache.find(records);
  if (it == cache.end()) {
    auto c = synth::generate(campaign_spec(records), 7);
    it = cache.emplace(records, ingest::pool_responses(c.responses, c.records)).first;
  }
  return it->second;
}

std::vector<cluster::FeatureVector> random_vectors(int n, int dims) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<cluster::FeatureVector> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].group = "g" + std::to_string(i);
    for (int d = 0; d < dims; ++d) {
      out[i].names.push_back("x" + std::to_string(d));
      out[i].coords.push_back(u(rng));
    }
  }
  return out;
}

void BM_ConsensusSerial(benchmark::State& state) {
  const auto& pool = pool_of(static_cast<int>(state.range(0)));
  CampaignConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(consensus::serial::run_consensus(pool, RegionMap::builtin(), cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ConsensusParallel(benchmark::State& state) {
  const auto& pool = pool_of(static_cast<int>(state.range(0)));
  CampaignConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(consensus::run_consensus(pool, RegionMap::builtin(), cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ProfilesSerial(benchmark::State& state) {
  const auto& pool = pool_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(screening::serial::profile_workers(pool, 30));
}

void BM_ProfilesParallel(benchmark::State& state) {
  const auto& pool = pool_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(screening::profile_workers(pool, 30));
}

void BM_DistanceSerial(benchmark::State& state) {
  auto v = random_vectors(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(cluster::serial::distance_matrix(v));
}

void BM_DistanceParallel(benchmark::State& state) {
  auto v = random_vectors(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(cluster::distance_matrix(v));
}

void BM_SynthSerial(benchmark::State& state) {
  auto spec = campaign_spec(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(synth::serial::generate(spec, 3));
}

void BM_SynthParallel(benchmark::State& state) {
  auto spec = campaign_spec(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate(spec, 3));
}

void BM_CoverageSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::serial::wilson_coverage(500, 0.1, 0.05, 2000, 5));
}

void BM_CoverageParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::wilson_coverage(500, 0.1, 0.05, 2000, 5));
}

void BM_FamilywiseSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::serial::null_familywise(18, 500, 0.15, 0.05, 500, 5));
}

void BM_FamilywiseParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::null_familywise(18, 500, 0.15, 0.05, 500, 5));
}

}  // namespace

BENCHMARK(BM_ConsensusSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConsensusParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfilesSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfilesParallel)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceSerial)->Arg(18)->Arg(500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DistanceParallel)->Arg(18)->Arg(500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SynthSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SynthParallel)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoverageSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoverageParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FamilywiseSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FamilywiseParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
