#include "dmlkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmlkit/rng.hpp"

namespace dml::metrics {

namespace {

// Squared distances keep the euclidean ranking and avoid the sqrt.
double pair_score(const Eigen::MatrixXd& data, Eigen::Index a, Eigen::Index b, Metric metric) {
  if (metric == Metric::euclidean) {
    return (data.row(a) - data.row(b)).squaredNorm();
  }
  // Cosine distance; rows are not assumed unit norm.
  const double denom = data.row(a).norm() * data.row(b).norm();
  if (denom <= 0.0) return 1.0;
  return 1.0 - data.row(a).dot(data.row(b)) / denom;
}

// Indices of all rows but `query`, sorted by (distance, row index).
std::vector<Eigen::Index> ranked_neighbors(const EmbeddingSet& set, Eigen::Index query, Metric metric) {
  std::vector<std::pair<double, Eigen::Index>> order;
  order.reserve(static_cast<std::size_t>(set.rows()) - 1);
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (j == query) continue;
    order.emplace_back(pair_score(set.data, query, j, metric), j);
  }
  std::sort(order.begin(), order.end());
  std::vector<Eigen::Index> out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) out[i] = order[i].second;
  return out;
}

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

RetrievalReport recall_at_k(const EmbeddingSet& set, const std::vector<int>& ks, Metric metric) {
  set.validate();
  if (ks.empty()) {
    throw Error(errc::invalid_argument, "recall_at_k: no k values given");
  }
  int max_k = 0;
  for (int k : ks) {
    if (k < 1 || k >= set.rows()) {
      throw Error(errc::invalid_k, "recall_at_k: k must satisfy 1 <= k < N", k);
    }
    max_k = std::max(max_k, k);
  }

  std::vector<int> hits(ks.size(), 0);
  for (Eigen::Index q = 0; q < set.rows(); ++q) {
    const auto ranked = ranked_neighbors(set, q, metric);
    // first_hit = rank (1-based) of the first same-class neighbor
    int first_hit = 0;
    for (int r = 0; r < max_k; ++r) {
      if (set.labels[static_cast<std::size_t>(ranked[static_cast<std::size_t>(r)])] ==
          set.labels[static_cast<std::size_t>(q)]) {
        first_hit = r + 1;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (first_hit > 0 && first_hit <= ks[i]) ++hits[i];
    }
  }
  RetrievalReport report;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.recall_at[ks[i]] = static_cast<double>(hits[i]) / static_cast<double>(set.rows());
  }
  return report;
}

double map_at(const EmbeddingSet& set, int cutoff, Metric metric) {
  set.validate();
  if (set.rows() < 2) {
    throw Error(errc::insufficient_data, "map_at: need at least 2 rows");
  }
  if (cutoff < 1) {
    throw Error(errc::invalid_argument, "map_at: cutoff must be >= 1");
  }
  std::vector<Eigen::Index> class_count(set.num_classes(), 0);
  for (auto l : set.labels) class_count[l]++;

  double ap_sum = 0.0;
  Eigen::Index queries = 0;
  const int list_len = static_cast<int>(std::min<Eigen::Index>(cutoff, set.rows() - 1));
  for (Eigen::Index q = 0; q < set.rows(); ++q) {
    const auto label = set.labels[static_cast<std::size_t>(q)];
    const Eigen::Index relevant_total = class_count[label] - 1;
    if (relevant_total < 1) continue;  // no same-class other: AP undefined
    const auto ranked = ranked_neighbors(set, q, metric);
    double ap = 0.0;
    int found = 0;
    for (int r = 0; r < list_len; ++r) {
      if (set.labels[static_cast<std::size_t>(ranked[static_cast<std::size_t>(r)])] == label) {
        ++found;
        ap += static_cast<double>(found) / static_cast<double>(r + 1);
      }
    }
    ap /= static_cast<double>(std::min<Eigen::Index>(relevant_total, cutoff));
    ap_sum += ap;
    ++queries;
  }
  if (queries == 0) {
    throw Error(errc::insufficient_data, "map_at: no query has a same-class other");
  }
  return ap_sum / static_cast<double>(queries);
}

ClusterReport kmeans(const EmbeddingSet& set, int k, std::uint64_t seed, int max_iters) {
  set.validate();
  const Eigen::Index n = set.rows();
  if (k < 1 || k > n) {
    throw Error(errc::invalid_k, "kmeans: need 1 <= k <= N", k);
  }
  Rng rng(seed);

  // k-means++ seeding
  Eigen::MatrixXd centers(k, set.dim());
  std::vector<double> d2(static_cast<std::size_t>(n), 0.0);
  centers.row(0) = set.data.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[static_cast<std::size_t>(i)] = (set.data.row(i) - centers.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index chosen;
    if (total <= 0.0) {
      chosen = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    } else {
      chosen = static_cast<Eigen::Index>(rng.categorical(d2));
    }
    centers.row(c) = set.data.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = (set.data.row(i) - centers.row(c)).squaredNorm();
      auto& cur = d2[static_cast<std::size_t>(i)];
      if (dist < cur) cur = dist;
    }
  }

  ClusterReport report;
  report.assignments.assign(static_cast<std::size_t>(n), 0);
  std::vector<std::uint32_t> prev(static_cast<std::size_t>(n), UINT32_MAX);
  for (int iter = 0; iter < max_iters; ++iter) {
    // assignment step
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = (set.data.row(i) - centers.row(0)).squaredNorm();
      int best_c = 0;
      for (int c = 1; c < k; ++c) {
        const double dist = (set.data.row(i) - centers.row(c)).squaredNorm();
        if (dist < best) {
          best = dist;
          best_c = c;
        }
      }
      report.assignments[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best_c);
      inertia += best;
    }
    report.inertia = inertia;
    report.inertia_history.push_back(inertia);
    report.iterations = iter + 1;
    if (report.assignments == prev) break;
    prev = report.assignments;

    // update step; empty clusters keep their previous center
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, set.dim());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = report.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += set.data.row(i);
      counts[c]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }
  return report;
}

double nmi(const std::vector<std::uint32_t>& assignments, const std::vector<std::uint32_t>& labels) {
  if (assignments.size() != labels.size() || assignments.empty()) {
    throw Error(errc::shape_error, "nmi: sequences must have equal nonzero length");
  }
  const double n = static_cast<double>(assignments.size());
  std::uint32_t ca = 0, cb = 0;
  for (auto a : assignments) ca = std::max(ca, a + 1);
  for (auto b : labels) cb = std::max(cb, b + 1);

  std::vector<double> joint(static_cast<std::size_t>(ca) * cb, 0.0);
  std::vector<double> count_a(ca, 0.0), count_b(cb, 0.0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    joint[static_cast<std::size_t>(assignments[i]) * cb + labels[i]] += 1.0;
    count_a[assignments[i]] += 1.0;
    count_b[labels[i]] += 1.0;
  }
  const double ha = entropy(count_a, n);
  const double hb = entropy(count_b, n);
  if (ha + hb <= 0.0) return 0.0;

  double mi = 0.0;
  for (std::uint32_t a = 0; a < ca; ++a) {
    for (std::uint32_t b = 0; b < cb; ++b) {
      const double nij = joint[static_cast<std::size_t>(a) * cb + b];
      if (nij > 0.0) {
        mi += (nij / n) * std::log(nij * n / (count_a[a] * count_b[b]));
      }
    }
  }
  return 2.0 * mi / (ha + hb);
}

DensityResult density(const EmbeddingSet& set) {
  set.validate();
  const auto index = ClassIndex::build(set);
  if (index.num_classes() < 2) {
    throw Error(errc::need_two_classes, "density: need at least 2 classes");
  }
  for (std::size_t c = 0; c < index.num_classes(); ++c) {
    if (index.row_groups[c].size() < 2) {
      throw Error(errc::singleton_class, "density: class " + std::to_string(index.class_ids[c]) +
                                             " has a single sample",
                  static_cast<long>(index.class_ids[c]));
    }
  }

  double intra_sum = 0.0;
  double intra_pairs = 0.0;
  for (const auto& rows : index.row_groups) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        intra_sum += (set.data.row(rows[i]) - set.data.row(rows[j])).norm();
        intra_pairs += 1.0;
      }
    }
  }
  double inter_sum = 0.0;
  double inter_pairs = 0.0;
  const auto c = static_cast<Eigen::Index>(index.num_classes());
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      inter_sum += (index.class_means.row(i) - index.class_means.row(j)).norm();
      inter_pairs += 1.0;
    }
  }
  DensityResult r;
  r.pi_intra = intra_sum / intra_pairs;
  r.pi_inter = inter_sum / inter_pairs;
  r.pi_ratio = r.pi_intra / r.pi_inter;
  return r;
}

double spectral_decay(const EmbeddingSet& set, int skip_first) {
  set.validate();
  const Eigen::Index rank_bound = std::min(set.rows(), set.dim());
  if (skip_first < 0 || skip_first >= rank_bound) {
    throw Error(errc::invalid_argument, "spectral_decay: skip_first must be in [0, min(N,D))");
  }
  const Eigen::MatrixXd centered = set.data.rowwise() - set.data.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();  // sorted descending

  const Eigen::Index m = sv.size() - skip_first;
  double total = 0.0;
  for (Eigen::Index i = skip_first; i < sv.size(); ++i) total += sv(i);
  if (total <= 1e-12) {
    throw Error(errc::degenerate_spectrum, "spectral_decay: remaining spectrum is zero");
  }
  const double u = 1.0 / static_cast<double>(m);
  double kl = 0.0;
  for (Eigen::Index i = skip_first; i < sv.size(); ++i) {
    const double s = std::max(sv(i) / total, 1e-12);
    kl += u * std::log(u / s);
  }
  return kl;
}

}  // namespace dml::metrics
