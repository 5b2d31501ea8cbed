#include <algorithm>
#include <cmath>
#include <functional>

#include "dmlkit/trainer.hpp"

namespace dml::train {

namespace {

constexpr double kStep = 1e-6;       // central-difference step
constexpr double kKinkSlack = 1e-3;  // hinge / mining boundary clearance
constexpr double kReluSlack = 1e-4;

double rel_error(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

// Central finite differences of a scalar function over one tensor block.
double check_block(const std::function<double()>& value, Eigen::MatrixXd& block,
                   const Eigen::MatrixXd& analytic) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      const double saved = block(i, j);
      block(i, j) = saved + kStep;
      const double up = value();
      block(i, j) = saved - kStep;
      const double down = value();
      block(i, j) = saved;
      const double fd = (up - down) / (2.0 * kStep);
      worst = std::max(worst, rel_error(analytic(i, j), fd));
    }
  }
  return worst;
}

double check_vector(const std::function<double()>& value, Eigen::VectorXd& block,
                    const Eigen::VectorXd& analytic) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < block.size(); ++i) {
    const double saved = block(i);
    block(i) = saved + kStep;
    const double up = value();
    block(i) = saved - kStep;
    const double down = value();
    block(i) = saved;
    const double fd = (up - down) / (2.0 * kStep);
    worst = std::max(worst, rel_error(analytic(i), fd));
  }
  return worst;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  }
  return m;
}

std::vector<std::uint32_t> two_class_labels(Eigen::Index n) {
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
  return labels;
}

bool margin_kink_free(const Eigen::MatrixXd& unit, const std::vector<std::uint32_t>& labels,
                      const Eigen::VectorXd& betas, const losses::MarginConfig& cfg,
                      const std::vector<losses::SampledPair>& pairs) {
  for (const auto& p : pairs) {
    const bool positive = labels[static_cast<std::size_t>(p.anchor)] ==
                          labels[static_cast<std::size_t>(p.partner)];
    const double d = (unit.row(p.anchor) - unit.row(p.partner)).norm();
    const double sign = positive ? -1.0 : 1.0;
    const double arg = cfg.margin + sign * (betas(labels[static_cast<std::size_t>(p.anchor)]) - d);
    if (std::abs(arg) < kKinkSlack || d < 1e-3) return false;
  }
  return true;
}

bool multisim_kink_free(const Eigen::MatrixXd& unit, const std::vector<std::uint32_t>& labels,
                        const losses::MultisimConfig& cfg) {
  const Eigen::MatrixXd sims = unit * unit.transpose();
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < unit.rows(); ++j) {
      if (j == i) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
        min_pos = std::min(min_pos, sims(i, j));
      } else {
        max_neg = std::max(max_neg, sims(i, j));
      }
    }
    for (Eigen::Index j = 0; j < unit.rows(); ++j) {
      if (j == i) continue;
      const bool positive = labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)];
      if (positive && std::isfinite(max_neg) &&
          std::abs(sims(i, j) - (max_neg + cfg.epsilon)) < kKinkSlack) {
        return false;
      }
      if (!positive && std::isfinite(min_pos) &&
          std::abs(sims(i, j) - (min_pos - cfg.epsilon)) < kKinkSlack) {
        return false;
      }
    }
  }
  return true;
}

bool relu_kink_free(const MlpHead& head, const Eigen::MatrixXd& input) {
  MlpCache cache;
  mlp_forward(head, input, &cache);
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l + 1 < head.weights.size(); ++l) {
    Eigen::MatrixXd z = a * head.weights[l].transpose();
    z.rowwise() += head.biases[l].transpose();
    if (z.cwiseAbs().minCoeff() < kReluSlack) return false;
    a = z.cwiseMax(0.0);
  }
  return true;
}

GradCheckBlock run_linear_toy(Rng& rng) {
  // Least squares: exact central differences up to roundoff.
  const Eigen::MatrixXd x = random_matrix(12, 4, rng);
  const Eigen::VectorXd y = random_matrix(12, 1, rng).col(0);
  Eigen::VectorXd w = random_matrix(4, 1, rng).col(0);
  auto value = [&]() { return (x * w - y).squaredNorm() / static_cast<double>(x.rows()); };
  const Eigen::VectorXd analytic = 2.0 * x.transpose() * (x * w - y) / static_cast<double>(x.rows());
  return {"linear_toy", "weights", check_vector(value, w, analytic)};
}

std::vector<GradCheckBlock> run_mlp(Rng& rng) {
  MlpHead head = MlpHead::random({5, 7, 4}, rng);
  Eigen::MatrixXd input = random_matrix(6, 5, rng);
  while (!relu_kink_free(head, input)) input = random_matrix(6, 5, rng);
  const Eigen::MatrixXd upstream = random_matrix(6, 4, rng);

  auto value = [&]() {
    return (mlp_forward(head, input, nullptr).cwiseProduct(upstream)).sum();
  };
  MlpCache cache;
  mlp_forward(head, input, &cache);
  const MlpGradients grads = mlp_backward(head, cache, upstream);

  std::vector<GradCheckBlock> blocks;
  blocks.push_back({"mlp", "input", check_block(value, input, grads.dinput)});
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    blocks.push_back({"mlp", "weights" + std::to_string(l),
                      check_block(value, head.weights[l], grads.dweights[l])});
    blocks.push_back({"mlp", "biases" + std::to_string(l),
                      check_vector(value, head.biases[l], grads.dbiases[l])});
  }
  return blocks;
}

std::vector<GradCheckBlock> run_margin(Rng& rng) {
  const Eigen::Index n = 8;
  losses::MarginConfig cfg;
  const auto labels = two_class_labels(n);

  Eigen::MatrixXd raw;
  Eigen::VectorXd betas;
  std::vector<losses::SampledPair> pairs;
  while (true) {
    raw = random_matrix(n, 4, rng);
    betas = Eigen::VectorXd::Constant(2, cfg.beta_init);
    betas(0) += 0.08 * rng.gaussian();
    betas(1) += 0.08 * rng.gaussian();
    const auto norm = losses::normalize_rows(raw);
    pairs.clear();
    Rng pair_rng(rng.next_u64());
    pairs = losses::sample_margin_pairs(norm.unit, labels, cfg, pair_rng);
    if (!pairs.empty() && margin_kink_free(norm.unit, labels, betas, cfg, pairs)) break;
  }

  auto value = [&]() {
    const auto norm = losses::normalize_rows(raw);
    return losses::margin_loss(norm.unit, labels, betas, cfg, pairs).value;
  };
  const auto norm = losses::normalize_rows(raw);
  const auto out = losses::margin_loss(norm.unit, labels, betas, cfg, pairs);
  const Eigen::MatrixXd grad_raw = losses::normalize_rows_backward(norm, out.grad_embeddings);

  std::vector<GradCheckBlock> blocks;
  blocks.push_back({"margin", "embeddings", check_block(value, raw, grad_raw)});
  blocks.push_back({"margin", "betas", check_vector(value, betas, out.grad_betas)});
  return blocks;
}

std::vector<GradCheckBlock> run_multisim(Rng& rng) {
  const Eigen::Index n = 10;
  losses::MultisimConfig cfg;
  const auto labels = two_class_labels(n);
  Eigen::MatrixXd raw = random_matrix(n, 8, rng);
  while (!multisim_kink_free(losses::normalize_rows(raw).unit, labels, cfg)) {
    raw = random_matrix(n, 8, rng);
  }
  auto value = [&]() {
    const auto norm = losses::normalize_rows(raw);
    return losses::multisim_loss(norm.unit, labels, cfg).value;
  };
  const auto norm = losses::normalize_rows(raw);
  const auto out = losses::multisim_loss(norm.unit, labels, cfg);
  const Eigen::MatrixXd grad_raw = losses::normalize_rows_backward(norm, out.grad_embeddings);
  return {{"multisim", "embeddings", check_block(value, raw, grad_raw)}};
}

std::vector<GradCheckBlock> run_row_softmax_kl(Rng& rng) {
  const Eigen::Index n = 5;
  Eigen::MatrixXd a = random_matrix(n, n, rng);
  Eigen::MatrixXd b = random_matrix(n, n, rng);
  const double temperature = 2.0;
  auto value = [&]() { return losses::row_softmax_kl(a, b, temperature, false).value; };
  const auto result = losses::row_softmax_kl(a, b, temperature, true);
  std::vector<GradCheckBlock> blocks;
  blocks.push_back({"row_softmax_kl", "a", check_block(value, a, result.grad_a)});
  blocks.push_back({"row_softmax_kl", "b", check_block(value, b, result.grad_b)});
  return blocks;
}

std::vector<GradCheckBlock> run_s2sd(Rng& rng) {
  const Eigen::Index n = 6;
  const int ref_dim = 8;
  const int feature_dim = 10;
  losses::S2SDConfig cfg;
  cfg.gamma = 1.0;
  cfg.temperature = 1.0;
  cfg.target_dims = {16, 32};
  cfg.warmup_iters = 0;
  cfg.use_feature_distill = true;
  cfg.detach_targets = true;

  losses::MultisimConfig base_cfg;
  const auto labels = two_class_labels(n);
  const losses::BaseObjective base = [&](const Eigen::MatrixXd& unit,
                                         const std::vector<std::uint32_t>& lb) {
    return losses::multisim_loss(unit, lb, base_cfg);
  };

  Eigen::MatrixXd ref, features;
  std::vector<MlpHead> heads;
  while (true) {
    ref = random_matrix(n, ref_dim, rng);
    features = random_matrix(n, feature_dim, rng);
    heads.clear();
    heads.push_back(MlpHead::random({feature_dim, 16}, rng));
    heads.push_back(MlpHead::random({feature_dim, 32}, rng));
    bool ok = multisim_kink_free(losses::normalize_rows(ref).unit, labels, base_cfg);
    for (const auto& head : heads) {
      if (!ok) break;
      const auto target = losses::normalize_rows(mlp_forward(head, features, nullptr));
      ok = multisim_kink_free(target.unit, labels, base_cfg);
    }
    if (ok) break;
  }

  auto value = [&]() {
    return losses::s2sd_loss(ref, features, labels, heads, base, cfg, 0).value;
  };
  const auto out = losses::s2sd_loss(ref, features, labels, heads, base, cfg, 0);

  std::vector<GradCheckBlock> blocks;
  blocks.push_back({"s2sd", "ref_embeddings", check_block(value, ref, out.grad_embeddings)});
  blocks.push_back({"s2sd", "features", check_block(value, features, out.grad_features)});
  for (std::size_t t = 0; t < heads.size(); ++t) {
    blocks.push_back({"s2sd", "head" + std::to_string(t) + "_weights",
                      check_block(value, heads[t].weights[0], out.head_grads[t].dweights[0])});
    blocks.push_back({"s2sd", "head" + std::to_string(t) + "_biases",
                      check_vector(value, heads[t].biases[0], out.head_grads[t].dbiases[0])});
  }
  return blocks;
}

void merge(GradCheckReport& report, std::vector<GradCheckBlock> blocks) {
  for (auto& block : blocks) {
    // keep the worst error per (objective, block) across trials
    auto it = std::find_if(report.blocks.begin(), report.blocks.end(), [&](const GradCheckBlock& b) {
      return b.objective == block.objective && b.block == block.block;
    });
    if (it == report.blocks.end()) {
      report.blocks.push_back(block);
    } else {
      it->max_rel_error = std::max(it->max_rel_error, block.max_rel_error);
    }
    report.worst = std::max(report.worst, block.max_rel_error);
  }
}

}  // namespace

std::vector<std::string> grad_check_objectives() {
  return {"linear_toy", "mlp", "margin", "multisim", "row_softmax_kl", "s2sd"};
}

GradCheckReport grad_check(const std::string& objective, int trials, std::uint64_t seed) {
  if (trials < 1) {
    throw Error(errc::invalid_argument, "grad_check: trials must be >= 1");
  }
  const auto known = grad_check_objectives();
  if (objective != "all" &&
      std::find(known.begin(), known.end(), objective) == known.end()) {
    throw Error(errc::invalid_argument, "grad_check: unknown objective " + objective);
  }
  Rng rng(seed);
  GradCheckReport report;
  for (int trial = 0; trial < trials; ++trial) {
    if (objective == "all" || objective == "linear_toy") merge(report, {run_linear_toy(rng)});
    if (objective == "all" || objective == "mlp") merge(report, run_mlp(rng));
    if (objective == "all" || objective == "margin") merge(report, run_margin(rng));
    if (objective == "all" || objective == "multisim") merge(report, run_multisim(rng));
    if (objective == "all" || objective == "row_softmax_kl") merge(report, run_row_softmax_kl(rng));
    if (objective == "all" || objective == "s2sd") merge(report, run_s2sd(rng));
  }
  return report;
}

}  // namespace dml::train
