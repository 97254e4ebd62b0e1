// Serial reference kernels versus their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "polytuplet/kernels.hpp"
#include "polytuplet/rng.hpp"

using namespace polytuplet;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<SparseVector> random_sparse(Rng& rng, std::size_t rows, std::size_t dim,
                                        std::size_t nnz) {
  std::vector<SparseVector> out(rows);
  for (auto& x : out) {
    x.dim = dim;
    for (std::size_t k = 0; k < nnz; ++k) {
      x.entries.emplace_back(static_cast<std::uint32_t>(k * (dim / nnz)), 1.0 + rng.uniform());
    }
  }
  return out;
}

// A training-sized batch: 32 questions x 4 answers through a 1024 -> 128 -> 64 path.
struct Fixture {
  static constexpr std::size_t kRows = 128, kVocab = 1024, kHidden = 128, kEmbed = 64;
  Rng rng{1};
  std::vector<SparseVector> sparse = random_sparse(rng, kRows, kVocab, 24);
  Matrix hidden = random_matrix(rng, kRows, kHidden);
  Matrix w1 = random_matrix(rng, kHidden, kVocab);
  Matrix w2 = random_matrix(rng, kEmbed, kHidden);
  std::vector<double> b1 = std::vector<double>(kHidden, 0.1);
  std::vector<double> b2 = std::vector<double>(kEmbed, 0.1);
  Matrix grad_out = random_matrix(rng, kRows, kEmbed);
  Matrix grad_hidden = random_matrix(rng, kRows, kHidden);
  Matrix context = random_matrix(rng, 32, kEmbed);
  Matrix results = random_matrix(rng, 128, kEmbed);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

template <bool Parallel>
void BM_SparseAffine(benchmark::State& state) {
  const auto& f = fixture();
  Matrix out(Fixture::kRows, Fixture::kHidden);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::sparse_affine(f.sparse, f.w1, f.b1, out);
    } else {
      kernels::reference::sparse_affine(f.sparse, f.w1, f.b1, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <bool Parallel>
void BM_DenseAffine(benchmark::State& state) {
  const auto& f = fixture();
  Matrix out(Fixture::kRows, Fixture::kEmbed);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_affine(f.hidden, f.w2, f.b2, out);
    } else {
      kernels::reference::dense_affine(f.hidden, f.w2, f.b2, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <bool Parallel>
void BM_SparseAffineBackward(benchmark::State& state) {
  const auto& f = fixture();
  Matrix gw(Fixture::kHidden, Fixture::kVocab);
  std::vector<double> gb(Fixture::kHidden);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::sparse_affine_backward(f.sparse, f.grad_hidden, gw, gb);
    } else {
      kernels::reference::sparse_affine_backward(f.sparse, f.grad_hidden, gw, gb);
    }
    benchmark::DoNotOptimize(gw.values().data());
  }
}

template <bool Parallel>
void BM_DenseAffineBackward(benchmark::State& state) {
  const auto& f = fixture();
  Matrix gw(Fixture::kEmbed, Fixture::kHidden);
  std::vector<double> gb(Fixture::kEmbed);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_affine_backward(f.hidden, f.grad_out, gw, gb);
    } else {
      kernels::reference::dense_affine_backward(f.hidden, f.grad_out, gw, gb);
    }
    benchmark::DoNotOptimize(gw.values().data());
  }
}

template <bool Parallel>
void BM_DenseInputGrad(benchmark::State& state) {
  const auto& f = fixture();
  Matrix gi(Fixture::kRows, Fixture::kHidden);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_input_grad(f.w2, f.grad_out, gi);
    } else {
      kernels::reference::dense_input_grad(f.w2, f.grad_out, gi);
    }
    benchmark::DoNotOptimize(gi.values().data());
  }
}

template <bool Parallel>
void BM_DistanceRows(benchmark::State& state) {
  const auto& f = fixture();
  Matrix out(32, 4);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::distance_rows(f.context, f.results, 4, out);
    } else {
      kernels::reference::distance_rows(f.context, f.results, 4, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
}

}  // namespace

BENCHMARK(BM_SparseAffine<false>)->Name("sparse_affine/serial");
BENCHMARK(BM_SparseAffine<true>)->Name("sparse_affine/openmp");
BENCHMARK(BM_DenseAffine<false>)->Name("dense_affine/serial");
BENCHMARK(BM_DenseAffine<true>)->Name("dense_affine/openmp");
BENCHMARK(BM_SparseAffineBackward<false>)->Name("sparse_affine_backward/serial");
BENCHMARK(BM_SparseAffineBackward<true>)->Name("sparse_affine_backward/openmp");
BENCHMARK(BM_DenseAffineBackward<false>)->Name("dense_affine_backward/serial");
BENCHMARK(BM_DenseAffineBackward<true>)->Name("dense_affine_backward/openmp");
BENCHMARK(BM_DenseInputGrad<false>)->Name("dense_input_grad/serial");
BENCHMARK(BM_DenseInputGrad<true>)->Name("dense_input_grad/openmp");
BENCHMARK(BM_DistanceRows<false>)->Name("distance_rows/serial");
BENCHMARK(BM_DistanceRows<true>)->Name("distance_rows/openmp");

BENCHMARK_MAIN();
