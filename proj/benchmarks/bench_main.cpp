// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include <mwgnn/adam.hpp>
#include <mwgnn/autodiff.hpp>
#include <mwgnn/meta_weight.hpp>
#include <mwgnn/models.hpp>
#include <mwgnn/synthgen.hpp>

namespace {

using namespace mwgnn;

GraphBundle bench_graph(std::size_t n, double p_in) {
  return generate_graph(make_synthetic_spec(n, 5, 100, block_matrix_for_target_h(5, p_in, 0.5), 3));
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// One forward + backward + Adam step; the argument is the node count.
void BM_Epoch(benchmark::State& state, ModelKind kind) {
  const GraphBundle b = bench_graph(static_cast<std::size_t>(state.range(0)), 0.05);
  auto model = make_model(kind, b, MwgnnConfig{}, 1);
  ad::Adam adam(ad::AdamConfig{});
  const auto rows = mask_indices(b.masks.train);
  for (auto _ : state) {
    model->params().zero_grad();
    ad::Tape tape;
    tape.backward(ad::masked_cross_entropy(model->forward(tape), b.labels, rows));
    adam.step(model->params());
  }
  state.counters["edges"] = static_cast<double>(b.graph.num_edges());
}
BENCHMARK_CAPTURE(BM_Epoch, mwgnn, ModelKind::kMwgnn)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Epoch, gcn, ModelKind::kGcn)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Epoch, mlp, ModelKind::kMlp)->Arg(1000)->Unit(benchmark::kMillisecond);

// Sparse edge-weighted aggregation at 1000 nodes; the argument scales p_in
// in thousandths, so edges grow linearly with it.
void BM_EdgeAggregate(benchmark::State& state) {
  const GraphBundle b = bench_graph(1000, static_cast<double>(state.range(0)) / 1000.0);
  const ad::EdgeIndex idx = ad::EdgeIndex::from_graph(b.graph);
  const Matrix h = gaussian(1000, 128, 5);
  const Matrix w = gaussian(static_cast<Eigen::Index>(idx.num_edges()), 1, 6);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(ad::edge_aggregate(idx, tape.constant(w), tape.constant(h)).value().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * idx.num_edges()));
}
BENCHMARK(BM_EdgeAggregate)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

// Batched GRU over every node's k-hop context (k = 2) of a 1000-node graph.
void BM_GruContexts(benchmark::State& state) {
  const GraphBundle b = bench_graph(1000, 0.05);
  const StructuralInputs s = prepare_structure(b, 2, static_cast<std::size_t>(state.range(0)));
  ad::ParamStore store(2);
  add_gru_params(store, "gru", 5, 32);
  for (auto _ : state) {
    ad::Tape tape;
    const auto vars = gru_vars(tape, store, "gru");
    benchmark::DoNotOptimize(ad::gru_sequence(s.contexts, s.ldp_normalized, vars).value().data());
  }
  state.counters["steps"] = static_cast<double>(s.contexts.steps);
}
BENCHMARK(BM_GruContexts)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
