#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "dmlkit/embedding_set.hpp"

namespace dml::metrics {

enum class Metric { euclidean, cosine };

struct RetrievalReport {
  std::map<int, double> recall_at;  // k -> recall in [0,1]
  std::map<int, double> map_at;     // cutoff -> mAP in [0,1]
};

struct ClusterReport {
  double nmi = 0.0;
  std::vector<std::uint32_t> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  int iterations = 0;
};

struct StructureReport {
  double pi_intra = 0.0;
  double pi_inter = 0.0;
  double pi_ratio = 0.0;
  double spectral_decay = 0.0;
};

// Fraction of queries whose k nearest neighbors (self excluded, distance
// ties broken by smaller row index) contain at least one same-class row.
RetrievalReport recall_at_k(const EmbeddingSet& set, const std::vector<int>& ks,
                            Metric metric = Metric::euclidean);

// Mean average precision at a ranked-list cutoff. Per query the AP sum is
// divided by min(#same-class others, cutoff); queries without any
// same-class other are skipped.
double map_at(const EmbeddingSet& set, int cutoff, Metric metric = Metric::euclidean);

// Lloyd iterations from a k-means++ seeding; stops at an assignment
// fixpoint or max_iters. Assignment ties go to the smaller center index.
ClusterReport kmeans(const EmbeddingSet& set, int k, std::uint64_t seed, int max_iters = 300);

// 2 I(A,B) / (H(A) + H(B)) with natural-log entropies; 0 when both
// partitions are trivial (zero entropy).
double nmi(const std::vector<std::uint32_t>& assignments, const std::vector<std::uint32_t>& labels);

// Embedding space density: mean within-class pair distance over mean
// class-center pair distance.
struct DensityResult {
  double pi_intra = 0.0;
  double pi_inter = 0.0;
  double pi_ratio = 0.0;
};
DensityResult density(const EmbeddingSet& set);

// KL divergence from uniform to the normalized singular-value spectrum of
// the mean-centered data, after dropping the first skip_first values.
double spectral_decay(const EmbeddingSet& set, int skip_first = 10);

}  // namespace dml::metrics
