#include "dmlkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dml::train {

namespace {

using losses::LossOutput;
using losses::normalize_rows;
using losses::normalize_rows_backward;

std::vector<Eigen::Index> sample_batch(const ClassIndex& index,
                                       const std::vector<std::size_t>& eligible, int batch_size,
                                       Rng& rng) {
  const std::size_t wanted = std::max<std::size_t>(2, static_cast<std::size_t>(batch_size / 2));
  std::vector<std::size_t> order = eligible;
  rng.shuffle(order);
  const std::size_t classes = std::min(wanted, order.size());

  std::vector<Eigen::Index> rows;
  rows.reserve(classes * 2);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& group = index.row_groups[order[c]];
    const std::size_t a = rng.index(group.size());
    std::size_t b = rng.index(group.size() - 1);
    if (b >= a) ++b;
    rows.push_back(group[a]);
    rows.push_back(group[b]);
  }
  return rows;
}

struct Batch {
  Eigen::MatrixXd x;
  std::vector<std::uint32_t> labels;
};

Batch gather_rows(const EmbeddingSet& data, const std::vector<Eigen::Index>& rows) {
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  b.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.x.row(static_cast<Eigen::Index>(i)) = data.data.row(rows[i]);
    b.labels[i] = data.labels[static_cast<std::size_t>(rows[i])];
  }
  return b;
}

// Adam slots for one MlpHead (weights then biases per layer).
struct HeadSlots {
  std::vector<int> weight_slots;
  std::vector<int> bias_slots;
};

HeadSlots register_head(AdamState& adam, const MlpHead& head) {
  HeadSlots slots;
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    slots.weight_slots.push_back(adam.add_slot(static_cast<std::size_t>(head.weights[l].size())));
    slots.bias_slots.push_back(adam.add_slot(static_cast<std::size_t>(head.biases[l].size())));
  }
  return slots;
}

void update_head(AdamState& adam, const HeadSlots& slots, MlpHead& head,
                 const MlpGradients& grads) {
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    adam.update(slots.weight_slots[l], head.weights[l], grads.dweights[l]);
    adam.update(slots.bias_slots[l], head.biases[l], grads.dbiases[l]);
  }
}

}  // namespace

const char* objective_name(Objective objective) {
  switch (objective) {
    case Objective::margin: return "margin";
    case Objective::multisim: return "multisim";
    case Objective::s2sd: return "s2sd";
  }
  return "unknown";
}

Objective objective_from_name(const std::string& name) {
  if (name == "margin") return Objective::margin;
  if (name == "multisim") return Objective::multisim;
  if (name == "s2sd") return Objective::s2sd;
  throw Error(errc::invalid_argument, "unknown objective: " + name);
}

void TrainConfig::validate() const {
  if (batch_size < 4) {
    throw Error(errc::invalid_argument, "TrainConfig: batch_size must be >= 4");
  }
  if (epochs < 1 || eval_every < 1) {
    throw Error(errc::invalid_argument, "TrainConfig: epochs and eval_every must be >= 1");
  }
  if (hidden_dim < 1 || feature_dim < 1 || embed_dim < 3) {
    throw Error(errc::invalid_argument, "TrainConfig: need hidden/feature dims >= 1, embed_dim >= 3");
  }
  if (!(lr > 0.0)) {
    throw Error(errc::invalid_argument, "TrainConfig: lr must be > 0");
  }
  if (objective == Objective::s2sd) {
    s2sd.validate(embed_dim);
    if (s2sd_base == Objective::s2sd) {
      throw Error(errc::invalid_argument, "TrainConfig: s2sd base objective cannot be s2sd");
    }
  }
}

EmbeddingSet embed_set(const MlpHead& trunk, const MlpHead& embed_layer, const EmbeddingSet& data) {
  const Eigen::MatrixXd features = mlp_forward(trunk, data.data, nullptr);
  const Eigen::MatrixXd raw = mlp_forward(embed_layer, features, nullptr);
  EmbeddingSet out;
  out.data = normalize_rows(raw).unit;
  out.labels = data.labels;
  out.class_names = data.class_names;
  return out;
}

EpochRecord evaluate_epoch(const EmbeddingSet& embedded, int epoch, std::uint64_t kmeans_seed,
                           int spectral_skip) {
  EpochRecord record;
  record.epoch = epoch;
  record.evaluated = true;
  record.recall1 = metrics::recall_at_k(embedded, {1}).recall_at.at(1);
  record.map1000 = metrics::map_at(embedded, 1000);
  const auto index = ClassIndex::build(embedded);
  const auto clusters =
      metrics::kmeans(embedded, static_cast<int>(index.num_classes()), kmeans_seed);
  // Cluster ids are compared against labels re-mapped to dense ids.
  std::vector<std::uint32_t> dense(embedded.labels.size());
  for (std::size_t i = 0; i < embedded.labels.size(); ++i) {
    dense[i] = static_cast<std::uint32_t>(index.position_of(embedded.labels[i]));
  }
  record.nmi = metrics::nmi(clusters.assignments, dense);
  record.pi_ratio = metrics::density(embedded).pi_ratio;
  record.spectral_decay = metrics::spectral_decay(embedded, spectral_skip);
  return record;
}

TrainResult train(const EmbeddingSet& data, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  const auto index = ClassIndex::build(data);
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < index.num_classes(); ++c) {
    if (index.row_groups[c].size() >= 2) eligible.push_back(c);
  }
  if (eligible.size() < 2) {
    throw Error(errc::insufficient_data, "train: need >= 2 classes with >= 2 samples");
  }

  Rng rng(cfg.seed);
  TrainResult result;
  result.trunk = MlpHead::random({static_cast<int>(data.dim()), cfg.hidden_dim, cfg.feature_dim}, rng);
  result.embed = MlpHead::random({cfg.feature_dim, cfg.embed_dim}, rng);
  const bool is_s2sd = cfg.objective == Objective::s2sd;
  if (is_s2sd) {
    for (int t : cfg.s2sd.target_dims) {
      result.target_heads.push_back(MlpHead::random({cfg.feature_dim, t}, rng));
    }
  }
  result.betas = Eigen::VectorXd::Constant(data.num_classes(), cfg.margin.beta_init);
  result.initial_trunk = result.trunk;
  result.initial_embed = result.embed;
  result.initial_eval = evaluate_epoch(embed_set(result.trunk, result.embed, data), -1, cfg.seed,
                                       cfg.spectral_skip);

  AdamState adam(AdamConfig{cfg.lr, cfg.weight_decay});
  const auto trunk_slots = register_head(adam, result.trunk);
  const auto embed_slots = register_head(adam, result.embed);
  std::vector<HeadSlots> target_slots;
  for (const auto& head : result.target_heads) target_slots.push_back(register_head(adam, head));
  AdamState beta_adam(AdamConfig{cfg.margin.beta_lr, 0.0});
  const int beta_slot = beta_adam.add_slot(static_cast<std::size_t>(result.betas.size()));

  const Objective base_kind = is_s2sd ? cfg.s2sd_base : cfg.objective;
  const bool uses_margin = base_kind == Objective::margin;

  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(data.rows()) / std::max(1, cfg.batch_size));
  long iteration = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool freeze_reference = cfg.head_warmup && epoch == 0;
    double loss_sum = 0.0;
    double distill_sum = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const auto batch = gather_rows(data, sample_batch(index, eligible, cfg.batch_size, rng));

      MlpCache trunk_cache, embed_cache;
      const Eigen::MatrixXd features = mlp_forward(result.trunk, batch.x, &trunk_cache);
      const Eigen::MatrixXd embeddings = mlp_forward(result.embed, features, &embed_cache);

      const losses::BaseObjective base_fn = [&](const Eigen::MatrixXd& unit,
                                                const std::vector<std::uint32_t>& lb) {
        if (base_kind == Objective::margin) {
          const auto pairs = losses::sample_margin_pairs(unit, lb, cfg.margin, rng);
          return losses::margin_loss(unit, lb, result.betas, cfg.margin, pairs);
        }
        return losses::multisim_loss(unit, lb, cfg.multisim);
      };

      LossOutput out;
      Eigen::MatrixXd grad_embeddings_raw;
      if (is_s2sd) {
        out = losses::s2sd_loss(embeddings, features, batch.labels, result.target_heads, base_fn,
                                cfg.s2sd, iteration);
        grad_embeddings_raw = out.grad_embeddings;
        if (!out.distill_values.empty()) {
          distill_sum += std::accumulate(out.distill_values.begin(), out.distill_values.end(), 0.0) /
                         static_cast<double>(out.distill_values.size());
        }
      } else {
        const auto norm = normalize_rows(embeddings);
        out = base_fn(norm.unit, batch.labels);
        grad_embeddings_raw = normalize_rows_backward(norm, out.grad_embeddings);
      }
      loss_sum += out.value;
      result.step_losses.push_back(out.value);

      const MlpGradients embed_grads = mlp_backward(result.embed, embed_cache, grad_embeddings_raw);
      Eigen::MatrixXd trunk_upstream = embed_grads.dinput;
      if (is_s2sd) trunk_upstream += out.grad_features;
      const MlpGradients trunk_grads = mlp_backward(result.trunk, trunk_cache, trunk_upstream);

      adam.begin_step();
      if (!freeze_reference) {
        update_head(adam, trunk_slots, result.trunk, trunk_grads);
        update_head(adam, embed_slots, result.embed, embed_grads);
      }
      for (std::size_t t = 0; t < result.target_heads.size(); ++t) {
        update_head(adam, target_slots[t], result.target_heads[t], out.head_grads[t]);
      }
      if (uses_margin && out.grad_betas.size() == result.betas.size()) {
        beta_adam.begin_step();
        beta_adam.update(beta_slot, result.betas, out.grad_betas);
      }
      ++iteration;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(steps_per_epoch);
    record.distill = distill_sum / static_cast<double>(steps_per_epoch);
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs - 1) {
      const auto embedded = embed_set(result.trunk, result.embed, data);
      auto eval = evaluate_epoch(embedded, epoch, cfg.seed, cfg.spectral_skip);
      eval.loss = record.loss;
      eval.distill = record.distill;
      record = eval;
    }
    result.history.push_back(record);
  }
  return result;
}

void EpisodeSpec::validate() const {
  if (shots < 1) {
    throw Error(errc::invalid_argument, "EpisodeSpec: shots must be >= 1");
  }
  if (episodes < 1 || adapt_steps < 0) {
    throw Error(errc::invalid_argument, "EpisodeSpec: episodes >= 1 and adapt_steps >= 0 required");
  }
  if (!(adapt_lr > 0.0)) {
    throw Error(errc::invalid_argument, "EpisodeSpec: adapt_lr must be > 0");
  }
}

namespace {

metrics::RetrievalReport evaluate_query(const EmbeddingSet& embedded) {
  metrics::RetrievalReport report;
  report.recall_at[1] = metrics::recall_at_k(embedded, {1}).recall_at.at(1);
  try {
    report.map_at[1000] = metrics::map_at(embedded, 1000);
  } catch (const Error& e) {
    if (e.code() != errc::insufficient_data) throw;
    // single-sample-per-class query sets have no defined AP
  }
  return report;
}

metrics::RetrievalReport mean_report(const std::vector<metrics::RetrievalReport>& reports) {
  metrics::RetrievalReport mean;
  if (reports.empty()) return mean;
  for (const auto& [k, v] : reports.front().recall_at) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.recall_at.at(k);
    mean.recall_at[k] = sum / static_cast<double>(reports.size());
  }
  for (const auto& [c, v] : reports.front().map_at) {
    double sum = 0.0;
    std::size_t have = 0;
    for (const auto& r : reports) {
      auto it = r.map_at.find(c);
      if (it != r.map_at.end()) {
        sum += it->second;
        ++have;
      }
    }
    if (have == reports.size()) mean.map_at[c] = sum / static_cast<double>(have);
  }
  return mean;
}

}  // namespace

FewShotReport few_shot_adapt(const MlpHead& trunk, const MlpHead& embed_layer,
                             const EmbeddingSet& test_data, const EpisodeSpec& spec) {
  test_data.validate();
  spec.validate();
  const auto index = ClassIndex::build(test_data);
  for (std::size_t c = 0; c < index.num_classes(); ++c) {
    if (static_cast<int>(index.row_groups[c].size()) <= spec.shots) {
      throw Error(errc::insufficient_support,
                  "few_shot_adapt: class " + std::to_string(index.class_ids[c]) + " has <= k samples",
                  static_cast<long>(index.class_ids[c]));
    }
  }

  Rng rng(spec.seed);
  FewShotReport report;
  for (int episode = 0; episode < spec.episodes; ++episode) {
    // Support: k rows per class; query: the remainder in original order.
    std::vector<Eigen::Index> support_rows, query_rows;
    for (std::size_t c = 0; c < index.num_classes(); ++c) {
      std::vector<Eigen::Index> group = index.row_groups[c];
      rng.shuffle(group);
      support_rows.insert(support_rows.end(), group.begin(), group.begin() + spec.shots);
      query_rows.insert(query_rows.end(), group.begin() + spec.shots, group.end());
    }
    std::sort(query_rows.begin(), query_rows.end());

    const auto support = gather_rows(test_data, support_rows);
    const auto query = gather_rows(test_data, query_rows);
    EmbeddingSet query_set;
    query_set.data = query.x;
    query_set.labels = query.labels;

    report.zero_shot_episodes.push_back(
        evaluate_query(embed_set(trunk, embed_layer, query_set)));

    // Fine-tune only the final embedding layer on the support rows.
    MlpHead adapted = embed_layer;
    const Eigen::MatrixXd support_features = mlp_forward(trunk, support.x, nullptr);
    Eigen::VectorXd betas =
        Eigen::VectorXd::Constant(test_data.num_classes(), spec.margin.beta_init);
    AdamState adam(AdamConfig{spec.adapt_lr, 0.0});
    const auto slots = register_head(adam, adapted);
    AdamState beta_adam(AdamConfig{spec.margin.beta_lr, 0.0});
    const int beta_slot = beta_adam.add_slot(static_cast<std::size_t>(betas.size()));

    for (int step = 0; step < spec.adapt_steps; ++step) {
      MlpCache cache;
      const Eigen::MatrixXd embeddings = mlp_forward(adapted, support_features, &cache);
      const auto norm = normalize_rows(embeddings);
      const auto pairs = losses::sample_margin_pairs(norm.unit, support.labels, spec.margin, rng);
      const auto out = losses::margin_loss(norm.unit, support.labels, betas, spec.margin, pairs);
      const auto grads =
          mlp_backward(adapted, cache, normalize_rows_backward(norm, out.grad_embeddings));
      adam.begin_step();
      update_head(adam, slots, adapted, grads);
      beta_adam.begin_step();
      beta_adam.update(beta_slot, betas, out.grad_betas);
    }
    report.adapted_episodes.push_back(evaluate_query(embed_set(trunk, adapted, query_set)));
  }
  report.zero_shot = mean_report(report.zero_shot_episodes);
  report.adapted = mean_report(report.adapted_episodes);
  return report;
}

OodTask make_ood_task(int train_classes, int test_classes, int per_class, int dim, double shift,
                      std::uint64_t seed) {
  SynthSpec spec;
  spec.num_classes = train_classes + test_classes;
  spec.samples_per_class = per_class;
  spec.dim = dim;
  spec.class_mean_scale = 1.0;
  spec.within_class_std = 0.5;
  spec.seed = seed;
  EmbeddingSet all = synth_gaussian_classes(spec);

  // Displace the held-out classes by `shift` along the unit all-ones
  // direction to create a genuine distribution gap.
  const Eigen::RowVectorXd delta =
      Eigen::RowVectorXd::Constant(dim, shift / std::sqrt(static_cast<double>(dim)));
  for (Eigen::Index r = 0; r < all.rows(); ++r) {
    if (all.labels[static_cast<std::size_t>(r)] >= static_cast<std::uint32_t>(train_classes)) {
      all.data.row(r) += delta;
    }
  }
  std::vector<std::uint32_t> train_ids(static_cast<std::size_t>(train_classes));
  for (int c = 0; c < train_classes; ++c) train_ids[static_cast<std::size_t>(c)] = static_cast<std::uint32_t>(c);
  auto [train, test] = split_by_classes(all, train_ids);
  return {std::move(train), std::move(test)};
}

}  // namespace dml::train
