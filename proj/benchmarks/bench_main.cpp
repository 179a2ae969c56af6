#include <benchmark/benchmark.h>

#include "langsup/analysis.hpp"
#include "langsup/contrastive.hpp"
#include "langsup/corpus.hpp"
#include "langsup/rng.hpp"
#include "langsup/selection.hpp"

namespace {

using namespace langsup;

const EmbeddingSet& fixture_set() {
  static const EmbeddingSet es = [] {
    const auto dir = std::filesystem::path(LANGSUP_FIXTURE_DIR);
    const Corpus c = load_corpus(dir / "corpus.json");
    return load_embeddings(dir / "embeddings.json", c);
  }();
  return es;
}

Matrix random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : m.row(i)) x = rng.normal();
    normalize_in_place(m.row(i));
  }
  return m;
}

void BM_SelectPaper(benchmark::State& state) {
  const auto& es = fixture_set();
  SelectionConfig cfg;
  cfg.d = 64;
  for (auto _ : state) benchmark::DoNotOptimize(select(es, cfg));
}
BENCHMARK(BM_SelectPaper)->Unit(benchmark::kMillisecond);

void BM_SelectApe(benchmark::State& state) {
  const auto& es = fixture_set();
  SelectionConfig cfg;
  cfg.method = SelectionMethod::kApe;
  cfg.d = 64;
  for (auto _ : state) benchmark::DoNotOptimize(select(es, cfg));
}
BENCHMARK(BM_SelectApe)->Unit(benchmark::kMillisecond);

void BM_InfoNce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix p = random_unit_rows(n, 64, 1), t = random_unit_rows(20, 64, 2);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 20;
  for (auto _ : state) benchmark::DoNotOptimize(infonce_loss(p, t, labels, 0.07));
}
BENCHMARK(BM_InfoNce)->Arg(64)->Arg(1024);

void BM_PcaFixture(benchmark::State& state) {
  const auto& es = fixture_set();
  Matrix rows(es.total_rows(), es.dim());
  for (std::size_t n = 0, r = 0; n < es.num_categories(); ++n)
    for (std::size_t i = 0; i < es.block(n).rows(); ++i, ++r)
      std::copy(es.block(n).row(i).begin(), es.block(n).row(i).end(), rows.row(r).begin());
  for (auto _ : state) benchmark::DoNotOptimize(pca_project(rows, 2));
}
BENCHMARK(BM_PcaFixture)->Unit(benchmark::kMillisecond);

void BM_JacobiEigen(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_unit_rows(n, n, 3);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = dot(a.row(i), a.row(j));
  for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigen(s));
}
BENCHMARK(BM_JacobiEigen)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
