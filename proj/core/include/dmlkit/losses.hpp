#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "dmlkit/mlp.hpp"
#include "dmlkit/rng.hpp"

namespace dml::losses {

struct MarginConfig {
  double margin = 0.2;
  double beta_init = 1.2;      // 0.9 variant for distillation-heavy setups
  double beta_lr = 5e-4;
  double sampling_lambda = 0.5;
  double p_switch = 0.0;       // > 0 turns the loss into Regularized Margin
};

struct MultisimConfig {
  double alpha = 2.0;
  double beta = 40.0;
  double lambda = 0.5;
  double epsilon = 0.1;
};

struct S2SDConfig {
  double gamma = 0.0;            // distillation weight
  double temperature = 1.0;
  std::vector<int> target_dims;  // ascending, each > reference dim
  long warmup_iters = 0;         // iterations before feature distillation
  bool use_feature_distill = true;
  bool detach_targets = true;

  void validate(int reference_dim) const;
};

// Value plus analytic gradients. grad_embeddings always matches the shape
// of the embedding input; the remaining blocks are filled only by the
// operations that produce them.
struct LossOutput {
  double value = 0.0;
  Eigen::MatrixXd grad_embeddings;
  Eigen::VectorXd grad_betas;             // margin loss
  Eigen::MatrixXd grad_features;          // s2sd
  std::vector<MlpGradients> head_grads;   // s2sd, one per target head

  // s2sd diagnostics
  double base_value = 0.0;
  std::vector<double> target_values;
  std::vector<double> distill_values;
  double feature_distill_value = 0.0;
};

struct SampledPair {
  Eigen::Index anchor = 0;
  Eigen::Index partner = 0;
};

// Row normalization with the pieces needed to backpropagate through it.
struct RowNormalized {
  Eigen::MatrixXd unit;   // rows scaled to norm 1
  Eigen::VectorXd norms;  // original row norms
};
RowNormalized normalize_rows(const Eigen::MatrixXd& x);
// Pulls a gradient w.r.t. the unit rows back to the raw rows.
Eigen::MatrixXd normalize_rows_backward(const RowNormalized& n, const Eigen::MatrixXd& grad_unit);

// Margin loss over sampled pairs with class-specific learnable boundaries:
// mean over pairs of [m + (beta_y - d) for negatives, m - (beta_y - d) for
// positives]_+ with d the Euclidean distance between unit embeddings.
// Returns gradients for the embeddings and the per-class boundaries.
LossOutput margin_loss(const Eigen::MatrixXd& unit_embeddings,
                       const std::vector<std::uint32_t>& labels, const Eigen::VectorXd& betas,
                       const MarginConfig& cfg, const std::vector<SampledPair>& pairs);

// Normalized sampling weights for the negatives of `anchor` under the
// inverse hypersphere-density rule min(lambda, q(d)^-1), distances clamped
// to [0.05, 1.95]. Exposed separately so the distribution is testable.
struct NegativeWeights {
  std::vector<Eigen::Index> candidates;
  std::vector<double> probabilities;
};
NegativeWeights negative_sampling_weights(const Eigen::MatrixXd& unit_embeddings,
                                          const std::vector<std::uint32_t>& labels,
                                          Eigen::Index anchor, double sampling_lambda);

// Draws one negative for `anchor` (or, with probability p_switch, a random
// positive, which is the Regularized Margin variant).
Eigen::Index distance_weighted_sample(const Eigen::MatrixXd& unit_embeddings,
                                      const std::vector<std::uint32_t>& labels,
                                      Eigen::Index anchor, const MarginConfig& cfg, Rng& rng);

// Standard margin-loss pair construction: per anchor one random positive
// and one distance-weighted negative.
std::vector<SampledPair> sample_margin_pairs(const Eigen::MatrixXd& unit_embeddings,
                                             const std::vector<std::uint32_t>& labels,
                                             const MarginConfig& cfg, Rng& rng);

// Multisimilarity loss on cosine similarities with the +-epsilon mining
// band. The mining mask is treated as a constant for gradients.
LossOutput multisim_loss(const Eigen::MatrixXd& unit_embeddings,
                         const std::vector<std::uint32_t>& labels, const MultisimConfig& cfg);

// KL(row-softmax(B/T) || row-softmax(A/T)) summed over rows, scaled by
// T^2 / N. grad_b is computed only when want_grad_b is set (the target side
// is normally detached).
struct KlResult {
  double value = 0.0;
  Eigen::MatrixXd grad_a;
  Eigen::MatrixXd grad_b;
};
KlResult row_softmax_kl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature,
                        bool want_grad_b = false);

// Base DML objective plugged into the s2sd composite: consumes unit-row
// embeddings, returns value and gradient w.r.t. those unit rows.
using BaseObjective =
    std::function<LossOutput(const Eigen::MatrixXd& unit_embeddings,
                             const std::vector<std::uint32_t>& labels)>;

// Complete multiscale self-distillation objective:
//   (base + mean targets)/2 + gamma * mean branch KL terms
//   (+ gamma * feature KL once past warmup).
// Each target branch runs head_i on the penultimate features, normalizes,
// applies the base objective, and distills its similarity matrix into the
// reference one. Targets are detached by default, so distillation moves
// only the reference space. Returns gradients for the raw reference
// embeddings, the features, and every target head's parameters.
LossOutput s2sd_loss(const Eigen::MatrixXd& ref_embeddings, const Eigen::MatrixXd& features,
                     const std::vector<std::uint32_t>& labels, const std::vector<MlpHead>& heads,
                     const BaseObjective& base, const S2SDConfig& cfg, long iteration);

// Sum of global average- and max-pooling per channel, for grid-shaped
// penultimate features (one channels x positions matrix per sample).
Eigen::MatrixXd pool_avg_max(const std::vector<Eigen::MatrixXd>& grids);

}  // namespace dml::losses
