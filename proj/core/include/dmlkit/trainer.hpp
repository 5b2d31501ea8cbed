#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmlkit/embedding_set.hpp"
#include "dmlkit/losses.hpp"
#include "dmlkit/metrics.hpp"
#include "dmlkit/mlp.hpp"
#include "dmlkit/optim.hpp"

namespace dml::train {

enum class Objective { margin, multisim, s2sd };

const char* objective_name(Objective objective);
Objective objective_from_name(const std::string& name);

// Desk-scale training configuration. The embedding network is a small
// trunk (input -> hidden -> feature) followed by a linear embedding layer
// (feature -> embed); target heads for s2sd map features to the target
// dims. Input rows of the training EmbeddingSet are treated as raw
// features for the trunk.
struct TrainConfig {
  int batch_size = 32;  // batch_size/2 classes with 2 samples each
  int epochs = 30;
  std::uint64_t seed = 0;
  Objective objective = Objective::margin;
  int eval_every = 5;

  int hidden_dim = 32;
  int feature_dim = 24;
  int embed_dim = 8;

  double lr = 1e-3;
  double weight_decay = 3e-4;
  bool head_warmup = false;  // epoch 0 updates target heads only

  losses::MarginConfig margin;
  losses::MultisimConfig multisim;
  losses::S2SDConfig s2sd;
  Objective s2sd_base = Objective::margin;

  int spectral_skip = 0;  // skip used for the history spectral decay

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;     // mean batch loss over the epoch
  double distill = 0.0;  // mean distillation term (s2sd runs)
  bool evaluated = false;
  double recall1 = 0.0;
  double map1000 = 0.0;
  double nmi = 0.0;
  double pi_ratio = 0.0;
  double spectral_decay = 0.0;
};

struct TrainResult {
  MlpHead trunk;
  MlpHead embed;
  std::vector<MlpHead> target_heads;
  Eigen::VectorXd betas;
  std::vector<EpochRecord> history;
  std::vector<double> step_losses;  // one entry per optimization step

  // Untrained network, kept for before/after comparisons.
  MlpHead initial_trunk;
  MlpHead initial_embed;
  EpochRecord initial_eval;  // metrics of the untrained network (epoch -1)
};

TrainResult train(const EmbeddingSet& data, const TrainConfig& cfg);

// Unit-normalized embeddings of `data` under trunk+embed, labels preserved.
EmbeddingSet embed_set(const MlpHead& trunk, const MlpHead& embed_layer, const EmbeddingSet& data);

// Metric snapshot used for the training history.
EpochRecord evaluate_epoch(const EmbeddingSet& embedded, int epoch, std::uint64_t kmeans_seed,
                           int spectral_skip);

struct EpisodeSpec {
  int shots = 5;
  int episodes = 10;
  int adapt_steps = 50;  // optimization steps on the support set
  std::uint64_t seed = 0;
  double adapt_lr = 1e-4;
  losses::MarginConfig margin;

  void validate() const;
};

struct FewShotReport {
  metrics::RetrievalReport zero_shot;  // episode means
  metrics::RetrievalReport adapted;
  std::vector<metrics::RetrievalReport> zero_shot_episodes;
  std::vector<metrics::RetrievalReport> adapted_episodes;
};

// k-shot episodes on held-out classes: fine-tunes only the final embedding
// layer with margin loss on the support rows, then evaluates the query
// remainder against the unadapted baseline on the same rows.
FewShotReport few_shot_adapt(const MlpHead& trunk, const MlpHead& embed_layer,
                             const EmbeddingSet& test_data, const EpisodeSpec& spec);

struct GradCheckBlock {
  std::string objective;
  std::string block;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double worst = 0.0;
};

// Central finite differences (h = 1e-6) against the analytic gradients of a
// registered objective; instances are drawn away from hinge kinks, mining
// boundaries and ReLU zeros. Relative error uses max(1, |analytic|, |fd|).
GradCheckReport grad_check(const std::string& objective, int trials, std::uint64_t seed);
std::vector<std::string> grad_check_objectives();

// Synthetic zero-shot task: disjoint train/test Gaussian classes with the
// test-class means displaced by `shift` along the all-ones direction.
struct OodTask {
  EmbeddingSet train;  // classes 0..train_classes-1
  EmbeddingSet test;   // classes train_classes..train_classes+test_classes-1
};
OodTask make_ood_task(int train_classes, int test_classes, int per_class, int dim, double shift,
                      std::uint64_t seed);

}  // namespace dml::train
