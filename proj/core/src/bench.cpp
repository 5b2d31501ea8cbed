#include "dmlkit/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "dmlkit/errors.hpp"
#include "dmlkit/rng.hpp"

namespace dml::bench {

namespace {

// One query sweep: for every row, the k most similar other rows by dot
// product (unit vectors, so this is exact euclidean/cosine k-NN). Returns a
// checksum over the nearest-neighbor indices.
std::uint64_t knn_sweep(const Eigen::MatrixXf& data, int k, int threads) {
  const Eigen::Index n = data.rows();
  // Score-block rows bounded to keep the per-thread GEMM buffer around 64 MB.
  const Eigen::Index block = std::max<Eigen::Index>(
      16, std::min<Eigen::Index>(256, static_cast<Eigen::Index>(64e6 / (4.0 * static_cast<double>(n)))));

  std::atomic<Eigen::Index> next_block{0};
  std::vector<std::uint64_t> partial(static_cast<std::size_t>(threads), 0);

  auto worker = [&](int tid) {
    Eigen::MatrixXf scores(block, n);
    std::vector<std::pair<float, Eigen::Index>> heap;  // min-heap over kept scores
    std::uint64_t checksum = 0;
    while (true) {
      const Eigen::Index start = next_block.fetch_add(block);
      if (start >= n) break;
      const Eigen::Index rows = std::min<Eigen::Index>(block, n - start);
      scores.topRows(rows).noalias() = data.middleRows(start, rows) * data.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index query = start + r;
        if (k == 1) {
          float best = -2.0f;
          Eigen::Index best_idx = 0;
          for (Eigen::Index j = 0; j < n; ++j) {
            const float s = scores(r, j);
            if (j != query && s > best) {
              best = s;
              best_idx = j;
            }
          }
          checksum += static_cast<std::uint64_t>(best_idx);
        } else {
          heap.clear();
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == query) continue;
            const float s = scores(r, j);
            if (static_cast<int>(heap.size()) < k) {
              heap.emplace_back(s, j);
              std::push_heap(heap.begin(), heap.end(), std::greater<>());
            } else if (s > heap.front().first) {
              std::pop_heap(heap.begin(), heap.end(), std::greater<>());
              heap.back() = {s, j};
              std::push_heap(heap.begin(), heap.end(), std::greater<>());
            }
          }
          for (const auto& [s, j] : heap) checksum += static_cast<std::uint64_t>(j);
        }
      }
    }
    partial[static_cast<std::size_t>(tid)] = checksum;
  };

  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& t : pool) t.join();

  std::uint64_t total = 0;
  for (auto c : partial) total += c;
  return total;
}

}  // namespace

std::vector<RetrievalBenchResult> retrieval_bench(const RetrievalBenchSpec& spec) {
  if (spec.n < 2 || spec.k < 1 || spec.k >= spec.n || spec.repetitions < 1) {
    throw Error(errc::invalid_argument, "retrieval_bench: need n >= 2, 1 <= k < n, repetitions >= 1");
  }
  if (spec.dims.empty()) {
    throw Error(errc::invalid_argument, "retrieval_bench: no dimensions given");
  }
  int threads = spec.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  std::vector<RetrievalBenchResult> results;
  for (int dim : spec.dims) {
    if (dim < 1) {
      throw Error(errc::invalid_argument, "retrieval_bench: dimension must be >= 1");
    }
    // Data generation is not timed.
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(dim));
    Eigen::MatrixXf data(spec.n, dim);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        data(i, j) = static_cast<float>(rng.uniform(-1.0, 1.0));
      }
      data.row(i) /= std::max(1e-12f, data.row(i).norm());
    }

    std::vector<double> times;
    std::uint64_t checksum = 0;
    for (int rep = 0; rep < spec.repetitions; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      checksum = knn_sweep(data, spec.k, threads);
      const auto stop = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::sort(times.begin(), times.end());
    results.push_back({dim, times[times.size() / 2], checksum});
  }
  return results;
}

}  // namespace dml::bench
