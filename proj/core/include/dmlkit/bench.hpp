#pragma once

#include <cstdint>
#include <vector>

namespace dml::bench {

// Exact brute-force k-NN timing over synthetic unit vectors, the setting of
// flat-index retrieval benchmarks. Work scales linearly in the dimension,
// so wall times are expected to be monotone in it.
struct RetrievalBenchSpec {
  long n = 50000;
  std::vector<int> dims = {32, 64, 128};
  std::uint64_t seed = 0;
  int k = 1;
  int repetitions = 3;  // reported time is the median
  int threads = 0;      // 0 = hardware concurrency
};

struct RetrievalBenchResult {
  int dim = 0;
  double seconds = 0.0;        // median wall time of one full query sweep
  std::uint64_t checksum = 0;  // sum of nearest-neighbor indices (determinism probe)
};

std::vector<RetrievalBenchResult> retrieval_bench(const RetrievalBenchSpec& spec);

}  // namespace dml::bench
