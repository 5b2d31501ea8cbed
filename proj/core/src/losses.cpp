#include "dmlkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dml::losses {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kDistanceEps = 1e-12;

void check_unit_rows(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).norm() - 1.0) > kUnitTolerance) {
      throw Error(errc::not_normalized,
                  std::string(what) + ": row " + std::to_string(i) + " is not unit norm", i);
    }
  }
}

}  // namespace

void S2SDConfig::validate(int reference_dim) const {
  if (!(gamma >= 0.0)) {
    throw Error(errc::invalid_argument, "S2SDConfig: gamma must be >= 0");
  }
  if (!(temperature > 0.0)) {
    throw Error(errc::invalid_argument, "S2SDConfig: temperature must be > 0");
  }
  for (std::size_t i = 0; i < target_dims.size(); ++i) {
    if (target_dims[i] <= reference_dim) {
      throw Error(errc::invalid_argument, "S2SDConfig: target dims must exceed the reference dim");
    }
    if (i > 0 && target_dims[i] < target_dims[i - 1]) {
      throw Error(errc::invalid_argument, "S2SDConfig: target dims must be ascending");
    }
  }
}

RowNormalized normalize_rows(const Eigen::MatrixXd& x) {
  RowNormalized n;
  n.unit = x;
  n.norms.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm <= 1e-12) {
      throw Error(errc::degenerate_row, "normalize_rows: row " + std::to_string(i) + " has zero norm", i);
    }
    n.norms(i) = norm;
    n.unit.row(i) /= norm;
  }
  return n;
}

Eigen::MatrixXd normalize_rows_backward(const RowNormalized& n, const Eigen::MatrixXd& grad_unit) {
  // d(x/|x|) pulls back as (g - (g.u) u) / |x|.
  Eigen::MatrixXd out(grad_unit.rows(), grad_unit.cols());
  for (Eigen::Index i = 0; i < grad_unit.rows(); ++i) {
    const double along = grad_unit.row(i).dot(n.unit.row(i));
    out.row(i) = (grad_unit.row(i) - along * n.unit.row(i)) / n.norms(i);
  }
  return out;
}

LossOutput margin_loss(const Eigen::MatrixXd& unit_embeddings,
                       const std::vector<std::uint32_t>& labels, const Eigen::VectorXd& betas,
                       const MarginConfig& cfg, const std::vector<SampledPair>& pairs) {
  check_unit_rows(unit_embeddings, "margin_loss");
  if (static_cast<Eigen::Index>(labels.size()) != unit_embeddings.rows()) {
    throw Error(errc::shape_error, "margin_loss: labels/embeddings size mismatch");
  }
  LossOutput out;
  out.grad_embeddings = Eigen::MatrixXd::Zero(unit_embeddings.rows(), unit_embeddings.cols());
  out.grad_betas = Eigen::VectorXd::Zero(betas.size());
  if (pairs.empty()) return out;

  const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pair : pairs) {
    const auto i = pair.anchor;
    const auto j = pair.partner;
    const auto label_i = labels[static_cast<std::size_t>(i)];
    if (label_i >= betas.size()) {
      throw Error(errc::unknown_class, "margin_loss: no boundary for class " + std::to_string(label_i));
    }
    const bool positive = label_i == labels[static_cast<std::size_t>(j)];
    const double dist = (unit_embeddings.row(i) - unit_embeddings.row(j)).norm();
    const double sign = positive ? -1.0 : 1.0;  // (-1)^{1[y_i = y_j]}
    const double arg = cfg.margin + sign * (betas(label_i) - dist);
    if (arg <= 0.0) continue;  // hinge inactive; subgradient 0 at the kink

    out.value += arg * inv_pairs;
    out.grad_betas(label_i) += sign * inv_pairs;
    if (dist > kDistanceEps) {
      const Eigen::RowVectorXd dd = (unit_embeddings.row(i) - unit_embeddings.row(j)) / dist;
      // d(arg)/d(dist) = -sign
      out.grad_embeddings.row(i) += -sign * inv_pairs * dd;
      out.grad_embeddings.row(j) -= -sign * inv_pairs * dd;
    }
  }
  return out;
}

NegativeWeights negative_sampling_weights(const Eigen::MatrixXd& unit_embeddings,
                                          const std::vector<std::uint32_t>& labels,
                                          Eigen::Index anchor, double sampling_lambda) {
  check_unit_rows(unit_embeddings, "distance_weighted_sample");
  const auto n_dim = unit_embeddings.cols();
  if (n_dim < 3) {
    throw Error(errc::invalid_argument, "distance_weighted_sample: needs dimension >= 3");
  }
  if (!(sampling_lambda > 0.0)) {
    throw Error(errc::invalid_argument, "distance_weighted_sample: lambda must be > 0");
  }
  NegativeWeights w;
  const auto anchor_label = labels[static_cast<std::size_t>(anchor)];
  std::vector<double> log_weights;
  const double log_lambda = std::log(sampling_lambda);
  for (Eigen::Index j = 0; j < unit_embeddings.rows(); ++j) {
    if (j == anchor || labels[static_cast<std::size_t>(j)] == anchor_label) continue;
    double d = (unit_embeddings.row(anchor) - unit_embeddings.row(j)).norm();
    d = std::clamp(d, 0.05, 1.95);
    // q(d) ~ d^{n-2} (1 - d^2/4)^{(n-3)/2}; weight = min(lambda, 1/q).
    const double log_q = (static_cast<double>(n_dim) - 2.0) * std::log(d) +
                         0.5 * (static_cast<double>(n_dim) - 3.0) * std::log1p(-0.25 * d * d);
    log_weights.push_back(std::min(log_lambda, -log_q));
    w.candidates.push_back(j);
  }
  if (w.candidates.empty()) {
    throw Error(errc::no_negatives, "distance_weighted_sample: anchor has no negatives");
  }
  // Shifted exponentiation keeps huge inverse densities finite.
  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  w.probabilities.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    w.probabilities[i] = std::exp(log_weights[i] - shift);
    total += w.probabilities[i];
  }
  for (auto& p : w.probabilities) p /= total;
  return w;
}

Eigen::Index distance_weighted_sample(const Eigen::MatrixXd& unit_embeddings,
                                      const std::vector<std::uint32_t>& labels,
                                      Eigen::Index anchor, const MarginConfig& cfg, Rng& rng) {
  const auto weights = negative_sampling_weights(unit_embeddings, labels, anchor, cfg.sampling_lambda);
  const auto negative = weights.candidates[rng.categorical(weights.probabilities)];
  if (cfg.p_switch > 0.0 && rng.uniform() < cfg.p_switch) {
    std::vector<Eigen::Index> positives;
    for (Eigen::Index j = 0; j < unit_embeddings.rows(); ++j) {
      if (j != anchor && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(anchor)]) {
        positives.push_back(j);
      }
    }
    if (!positives.empty()) {
      return positives[rng.index(positives.size())];
    }
  }
  return negative;
}

std::vector<SampledPair> sample_margin_pairs(const Eigen::MatrixXd& unit_embeddings,
                                             const std::vector<std::uint32_t>& labels,
                                             const MarginConfig& cfg, Rng& rng) {
  std::vector<SampledPair> pairs;
  const auto n = unit_embeddings.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    std::vector<Eigen::Index> positives;
    bool has_negative = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)]) {
        positives.push_back(j);
      } else {
        has_negative = true;
      }
    }
    if (!positives.empty()) {
      pairs.push_back({a, positives[rng.index(positives.size())]});
    }
    if (has_negative) {
      pairs.push_back({a, distance_weighted_sample(unit_embeddings, labels, a, cfg, rng)});
    }
  }
  return pairs;
}

LossOutput multisim_loss(const Eigen::MatrixXd& unit_embeddings,
                         const std::vector<std::uint32_t>& labels, const MultisimConfig& cfg) {
  check_unit_rows(unit_embeddings, "multisim_loss");
  if (static_cast<Eigen::Index>(labels.size()) != unit_embeddings.rows()) {
    throw Error(errc::shape_error, "multisim_loss: labels/embeddings size mismatch");
  }
  const auto n = unit_embeddings.rows();
  const Eigen::MatrixXd sims = unit_embeddings * unit_embeddings.transpose();

  LossOutput out;
  out.grad_embeddings = Eigen::MatrixXd::Zero(n, unit_embeddings.cols());
  Eigen::MatrixXd grad_sims = Eigen::MatrixXd::Zero(n, n);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> positives, negatives;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)] ? positives
                                                                                  : negatives)
          .push_back(j);
    }
    // Mining band: negatives harder than the hardest positive (minus eps),
    // positives easier than the hardest negative (plus eps). Thresholds use
    // the unmined sets; without negatives every positive is kept, without
    // positives no negative is kept.
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (auto j : positives) min_pos = std::min(min_pos, sims(i, j));
    for (auto k : negatives) max_neg = std::max(max_neg, sims(i, k));

    std::vector<Eigen::Index> kept_pos, kept_neg;
    for (auto j : positives) {
      if (negatives.empty() || sims(i, j) < max_neg + cfg.epsilon) kept_pos.push_back(j);
    }
    if (!positives.empty()) {
      for (auto k : negatives) {
        if (sims(i, k) > min_pos - cfg.epsilon) kept_neg.push_back(k);
      }
    }

    double pos_sum = 0.0, neg_sum = 0.0;
    for (auto j : kept_pos) pos_sum += std::exp(-cfg.alpha * (sims(i, j) - cfg.lambda));
    for (auto k : kept_neg) neg_sum += std::exp(cfg.beta * (sims(i, k) - cfg.lambda));
    if (!kept_pos.empty()) out.value += inv_n / cfg.alpha * std::log1p(pos_sum);
    if (!kept_neg.empty()) out.value += inv_n / cfg.beta * std::log1p(neg_sum);

    for (auto j : kept_pos) {
      grad_sims(i, j) += inv_n * -std::exp(-cfg.alpha * (sims(i, j) - cfg.lambda)) / (1.0 + pos_sum);
    }
    for (auto k : kept_neg) {
      grad_sims(i, k) += inv_n * std::exp(cfg.beta * (sims(i, k) - cfg.lambda)) / (1.0 + neg_sum);
    }
  }
  // sims = U U^T, so dU = (G + G^T) U.
  out.grad_embeddings = (grad_sims + grad_sims.transpose()) * unit_embeddings;
  return out;
}

KlResult row_softmax_kl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature,
                        bool want_grad_b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw Error(errc::shape_error, "row_softmax_kl: matrices must be square with equal shape");
  }
  if (!(temperature > 0.0)) {
    throw Error(errc::invalid_argument, "row_softmax_kl: temperature must be > 0");
  }
  const auto n = a.rows();
  auto row_log_softmax = [&](const Eigen::MatrixXd& m, Eigen::Index row) {
    Eigen::RowVectorXd logits = m.row(row) / temperature;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return Eigen::RowVectorXd(logits.array() - lse);
  };

  KlResult result;
  result.grad_a.setZero(n, n);
  if (want_grad_b) result.grad_b.setZero(n, n);
  const double scale = temperature * temperature / static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd log_pa = row_log_softmax(a, i);
    const Eigen::RowVectorXd log_pb = row_log_softmax(b, i);
    const Eigen::RowVectorXd pa = log_pa.array().exp();
    const Eigen::RowVectorXd pb = log_pb.array().exp();

    double row_kl = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (pb(j) > 0.0) row_kl += pb(j) * (log_pb(j) - log_pa(j));
    }
    result.value += scale * row_kl;
    result.grad_a.row(i) = (temperature / static_cast<double>(n)) * (pa - pb);
    if (want_grad_b) {
      const Eigen::RowVectorXd r = log_pb - log_pa;
      const double mean_r = pb.dot(r);
      result.grad_b.row(i) =
          (temperature / static_cast<double>(n)) * (pb.array() * (r.array() - mean_r)).matrix();
    }
  }
  return result;
}

LossOutput s2sd_loss(const Eigen::MatrixXd& ref_embeddings, const Eigen::MatrixXd& features,
                     const std::vector<std::uint32_t>& labels, const std::vector<MlpHead>& heads,
                     const BaseObjective& base, const S2SDConfig& cfg, long iteration) {
  if (iteration < 0) {
    throw Error(errc::invalid_state, "s2sd_loss: iteration must be >= 0");
  }
  if (ref_embeddings.rows() != features.rows() ||
      ref_embeddings.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(errc::shape_error, "s2sd_loss: row count mismatch");
  }
  cfg.validate(static_cast<int>(ref_embeddings.cols()));
  if (heads.size() != cfg.target_dims.size()) {
    throw Error(errc::shape_error, "s2sd_loss: one target head per target dim required");
  }
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i].input_dim() != features.cols()) {
      throw Error(errc::shape_error, "s2sd_loss: head " + std::to_string(i) +
                                         " input dim does not match features");
    }
    if (heads[i].output_dim() != cfg.target_dims[i]) {
      throw Error(errc::shape_error, "s2sd_loss: head " + std::to_string(i) +
                                         " output dim does not match target_dims");
    }
  }

  const auto n = ref_embeddings.rows();
  const auto ref_norm = normalize_rows(ref_embeddings);
  const Eigen::MatrixXd base_smat = ref_norm.unit * ref_norm.unit.transpose();

  LossOutput out;
  const LossOutput base_out = base(ref_norm.unit, labels);
  out.base_value = base_out.value;
  out.grad_betas = base_out.grad_betas;
  if (!heads.empty() && out.grad_betas.size() > 0) out.grad_betas *= 0.5;

  Eigen::MatrixXd grad_unit;  // w.r.t. the normalized reference embeddings
  Eigen::MatrixXd grad_smat = Eigen::MatrixXd::Zero(n, n);
  bool smat_used = false;

  out.grad_features = Eigen::MatrixXd::Zero(features.rows(), features.cols());
  const std::size_t branches = heads.size();

  if (branches == 0) {
    // Degenerate composite: exactly the base objective.
    out.value = base_out.value;
    grad_unit = base_out.grad_embeddings;
  } else {
    const double inv_b = 1.0 / static_cast<double>(branches);
    double target_sum = 0.0;
    double distill_sum = 0.0;
    for (std::size_t t = 0; t < branches; ++t) {
      MlpCache cache;
      const Eigen::MatrixXd raw_target = mlp_forward(heads[t], features, &cache);
      const auto target_norm = normalize_rows(raw_target);
      const LossOutput target_out = base(target_norm.unit, labels);
      out.target_values.push_back(target_out.value);
      target_sum += target_out.value;
      if (out.grad_betas.size() > 0 && target_out.grad_betas.size() == out.grad_betas.size()) {
        out.grad_betas += (0.5 * inv_b) * target_out.grad_betas;
      }

      // Target DML term enters as mean(targets)/2.
      Eigen::MatrixXd grad_target_unit = (0.5 * inv_b) * target_out.grad_embeddings;

      if (cfg.gamma > 0.0) {
        const Eigen::MatrixXd target_smat = target_norm.unit * target_norm.unit.transpose();
        const KlResult kl =
            row_softmax_kl(base_smat, target_smat, cfg.temperature, !cfg.detach_targets);
        out.distill_values.push_back(kl.value);
        distill_sum += kl.value;
        grad_smat += (cfg.gamma * inv_b) * kl.grad_a;
        smat_used = true;
        if (!cfg.detach_targets) {
          grad_target_unit +=
              (cfg.gamma * inv_b) * (kl.grad_b + kl.grad_b.transpose()) * target_norm.unit;
        }
      }

      const Eigen::MatrixXd grad_raw_target = normalize_rows_backward(target_norm, grad_target_unit);
      MlpGradients head_grad = mlp_backward(heads[t], cache, grad_raw_target);
      out.grad_features += head_grad.dinput;
      out.head_grads.push_back(std::move(head_grad));
    }
    out.value = 0.5 * (base_out.value + target_sum * inv_b);
    if (cfg.gamma > 0.0) out.value += cfg.gamma * distill_sum * inv_b;
    grad_unit = 0.5 * base_out.grad_embeddings;
  }

  if (cfg.gamma > 0.0 && cfg.use_feature_distill && iteration >= cfg.warmup_iters) {
    // Feature similarity matrix; the features are detached here, so this
    // term moves the reference space only.
    const auto feat_norm = normalize_rows(features);
    const Eigen::MatrixXd feat_smat = feat_norm.unit * feat_norm.unit.transpose();
    const KlResult kl = row_softmax_kl(base_smat, feat_smat, cfg.temperature, false);
    out.feature_distill_value = kl.value;
    out.value += cfg.gamma * kl.value;
    grad_smat += cfg.gamma * kl.grad_a;
    smat_used = true;
  }

  if (smat_used) {
    grad_unit += (grad_smat + grad_smat.transpose()) * ref_norm.unit;
  }
  out.grad_embeddings = normalize_rows_backward(ref_norm, grad_unit);
  return out;
}

Eigen::MatrixXd pool_avg_max(const std::vector<Eigen::MatrixXd>& grids) {
  if (grids.empty()) {
    throw Error(errc::empty_input, "pool_avg_max: no samples");
  }
  const auto channels = grids.front().rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grids.size()), channels);
  for (std::size_t s = 0; s < grids.size(); ++s) {
    const auto& g = grids[s];
    if (g.rows() != channels || g.cols() < 1) {
      throw Error(errc::shape_error, "pool_avg_max: inconsistent grid shape at sample " +
                                         std::to_string(s));
    }
    for (Eigen::Index c = 0; c < channels; ++c) {
      out(static_cast<Eigen::Index>(s), c) = g.row(c).mean() + g.row(c).maxCoeff();
    }
  }
  return out;
}

}  // namespace dml::losses
