#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmlkit/embedding_set.hpp"

namespace dml::splits {

enum class StepKind { initial, swap, removal };

const char* step_kind_name(StepKind kind);
StepKind step_kind_from_name(const std::string& name);

// One train/test class partition with its measured Frechet distance.
struct SplitState {
  std::vector<std::uint32_t> train_classes;  // sorted ascending
  std::vector<std::uint32_t> test_classes;   // sorted ascending
  double fid = 0.0;
  int step = 0;
  StepKind kind = StepKind::initial;
};

struct SplitSequence {
  std::vector<SplitState> states;
  int swap_size = 1;
  double retained_fraction_floor = 0.5;
};

struct BuildOptions {
  int swap_size = 1;
  double retained_fraction_floor = 0.5;
  std::uint64_t seed = 0;     // used only when initial_train is empty (random half)
  bool reverse = false;       // minimize FID during swapping instead of maximizing
  int max_swap_steps = 10000;
};

// The class pair whose exchange is expected to push the split distance the
// furthest: the train class maximizing |mu_C - mu_train| - |mu_C - mu_test|
// and the test class maximizing the mirrored objective. Both argmaxes use
// the pre-swap split means; ties go to the smaller class id.
std::pair<std::uint32_t, std::uint32_t> select_swap_pair(const EmbeddingSet& train,
                                                         const EmbeddingSet& test);

// One accepted swap state, or nullopt once no exchange of swap_size class
// pairs raises the true FID by more than 1e-9 (convergence).
std::optional<SplitState> swap_step(const SplitState& state, const EmbeddingSet& data,
                                    int swap_size = 1, bool reverse = false);

// One removal state (drop the train class closest to the test mean and the
// test class closest to the train mean), or nullopt when the retained
// sample floor or the two-classes-per-side minimum would be violated.
std::optional<SplitState> removal_step(const SplitState& state, const EmbeddingSet& data,
                                       double retained_fraction_floor = 0.5);

// Full construction: swap to convergence, then remove until stopped.
// With an empty initial_train, a random half of the classes is drawn from
// options.seed. Deterministic given its inputs.
SplitSequence build_split_sequence(const EmbeddingSet& data,
                                   std::vector<std::uint32_t> initial_train,
                                   const BuildOptions& options = {});

// Performance-versus-difficulty curve input: one (fid, score) point per
// split, scores in [0,1]. Points are sorted by fid on construction.
struct AGSInput {
  std::vector<double> fids;
  std::vector<double> scores;

  static AGSInput make(std::vector<double> fids, std::vector<double> scores);
};

// Aggregated Generalization Score: trapezoid area under the score curve over
// min-max normalized fids. Lives in [0,1] when the scores do.
double ags(const AGSInput& input);

}  // namespace dml::splits
