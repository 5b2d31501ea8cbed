#include "dmlkit/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dmlkit/fid.hpp"
#include "dmlkit/rng.hpp"

namespace dml::splits {

namespace {

constexpr double kAcceptEps = 1e-9;

struct SideSummary {
  std::vector<std::uint32_t> class_ids;
  Eigen::MatrixXd class_means;  // one row per class id
  Eigen::RowVectorXd side_mean; // mean over all rows of the side
};

// Class means and the whole-side mean for the classes listed in `classes`.
SideSummary summarize_side(const ClassIndex& index, const EmbeddingSet& data,
                           const std::vector<std::uint32_t>& classes) {
  SideSummary s;
  s.class_ids = classes;
  s.class_means.resize(static_cast<Eigen::Index>(classes.size()), data.dim());
  Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(data.dim());
  double count = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto pos = index.position_of(classes[i]);
    s.class_means.row(static_cast<Eigen::Index>(i)) = index.class_means.row(static_cast<Eigen::Index>(pos));
    const double rows = static_cast<double>(index.row_groups[pos].size());
    total += index.class_means.row(static_cast<Eigen::Index>(pos)) * rows;
    count += rows;
  }
  s.side_mean = total / count;
  return s;
}

// argmax over side A's classes of |mu_C - mu_A| - |mu_C - mu_B|
// (argmin when reverse), ties broken by smaller class id.
std::uint32_t select_from_side(const SideSummary& own, const Eigen::RowVectorXd& other_mean,
                               bool reverse) {
  double best = reverse ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  std::uint32_t best_id = own.class_ids.front();
  for (std::size_t i = 0; i < own.class_ids.size(); ++i) {
    const auto row = own.class_means.row(static_cast<Eigen::Index>(i));
    const double objective = (row - own.side_mean).norm() - (row - other_mean).norm();
    const bool better = reverse ? objective < best : objective > best;
    if (better || (objective == best && own.class_ids[i] < best_id)) {
      best = objective;
      best_id = own.class_ids[i];
    }
  }
  return best_id;
}

EmbeddingSet gather_classes(const EmbeddingSet& data, const ClassIndex& index,
                            const std::vector<std::uint32_t>& classes) {
  std::vector<Eigen::Index> rows;
  for (auto c : classes) {
    const auto& group = index.row_groups[index.position_of(c)];
    rows.insert(rows.end(), group.begin(), group.end());
  }
  std::sort(rows.begin(), rows.end());  // keep original row order
  EmbeddingSet out;
  out.data.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.data.row(static_cast<Eigen::Index>(i)) = data.data.row(rows[i]);
    out.labels[i] = data.labels[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

double split_fid(const EmbeddingSet& data, const ClassIndex& index, const SplitState& state) {
  const auto train = gather_classes(data, index, state.train_classes);
  const auto test = gather_classes(data, index, state.test_classes);
  return fid::frechet_distance(train, test);
}

Eigen::Index side_samples(const ClassIndex& index, const std::vector<std::uint32_t>& classes) {
  Eigen::Index n = 0;
  for (auto c : classes) n += static_cast<Eigen::Index>(index.row_groups[index.position_of(c)].size());
  return n;
}

void erase_class(std::vector<std::uint32_t>& classes, std::uint32_t id) {
  classes.erase(std::remove(classes.begin(), classes.end(), id), classes.end());
}

std::optional<SplitState> swap_step_indexed(const SplitState& state, const EmbeddingSet& data,
                                            const ClassIndex& index, int swap_size, bool reverse) {
  if (swap_size < 1) {
    throw Error(errc::invalid_argument, "swap_step: swap_size must be >= 1");
  }
  SplitState next = state;
  int swapped = 0;
  for (int s = 0; s < swap_size; ++s) {
    if (next.train_classes.size() < 2 || next.test_classes.size() < 2) break;
    const auto train = summarize_side(index, data, next.train_classes);
    const auto test = summarize_side(index, data, next.test_classes);
    const auto from_train = select_from_side(train, test.side_mean, reverse);
    const auto from_test = select_from_side(test, train.side_mean, reverse);
    erase_class(next.train_classes, from_train);
    erase_class(next.test_classes, from_test);
    next.train_classes.push_back(from_test);
    next.test_classes.push_back(from_train);
    std::sort(next.train_classes.begin(), next.train_classes.end());
    std::sort(next.test_classes.begin(), next.test_classes.end());
    ++swapped;
  }
  if (swapped == 0) return std::nullopt;

  next.fid = split_fid(data, index, next);
  const bool improved = reverse ? next.fid < state.fid - kAcceptEps
                                : next.fid > state.fid + kAcceptEps;
  if (!improved) return std::nullopt;
  next.step = state.step + 1;
  next.kind = StepKind::swap;
  return next;
}

std::optional<SplitState> removal_step_indexed(const SplitState& state, const EmbeddingSet& data,
                                               const ClassIndex& index,
                                               double retained_fraction_floor) {
  if (state.train_classes.size() < 3 || state.test_classes.size() < 3) {
    return std::nullopt;  // a removal would leave a side with < 2 classes
  }
  const auto train = summarize_side(index, data, state.train_classes);
  const auto test = summarize_side(index, data, state.test_classes);

  // Drop whichever train class sits nearest the test split mean and vice
  // versa; ties by smaller class id.
  auto closest = [](const SideSummary& own, const Eigen::RowVectorXd& other_mean) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_id = own.class_ids.front();
    for (std::size_t i = 0; i < own.class_ids.size(); ++i) {
      const double dist = (own.class_means.row(static_cast<Eigen::Index>(i)) - other_mean).norm();
      if (dist < best || (dist == best && own.class_ids[i] < best_id)) {
        best = dist;
        best_id = own.class_ids[i];
      }
    }
    return best_id;
  };
  const auto drop_train = closest(train, test.side_mean);
  const auto drop_test = closest(test, train.side_mean);

  SplitState next = state;
  erase_class(next.train_classes, drop_train);
  erase_class(next.test_classes, drop_test);

  const auto retained = side_samples(index, next.train_classes) + side_samples(index, next.test_classes);
  const auto original = data.rows();
  if (static_cast<double>(retained) < retained_fraction_floor * static_cast<double>(original)) {
    return std::nullopt;
  }
  next.fid = split_fid(data, index, next);
  next.step = state.step + 1;
  next.kind = StepKind::removal;
  return next;
}

}  // namespace

const char* step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::initial: return "initial";
    case StepKind::swap: return "swap";
    case StepKind::removal: return "removal";
  }
  return "unknown";
}

StepKind step_kind_from_name(const std::string& name) {
  if (name == "initial") return StepKind::initial;
  if (name == "swap") return StepKind::swap;
  if (name == "removal") return StepKind::removal;
  throw Error(errc::invalid_argument, "unknown step kind: " + name);
}

std::pair<std::uint32_t, std::uint32_t> select_swap_pair(const EmbeddingSet& train,
                                                         const EmbeddingSet& test) {
  const auto train_index = ClassIndex::build(train);
  const auto test_index = ClassIndex::build(test);
  if (train_index.num_classes() < 2 || test_index.num_classes() < 2) {
    throw Error(errc::cannot_swap, "select_swap_pair: each side needs at least 2 classes");
  }
  const auto train_side = summarize_side(train_index, train, train_index.class_ids);
  const auto test_side = summarize_side(test_index, test, test_index.class_ids);
  return {select_from_side(train_side, test_side.side_mean, false),
          select_from_side(test_side, train_side.side_mean, false)};
}

std::optional<SplitState> swap_step(const SplitState& state, const EmbeddingSet& data,
                                    int swap_size, bool reverse) {
  return swap_step_indexed(state, data, ClassIndex::build(data), swap_size, reverse);
}

std::optional<SplitState> removal_step(const SplitState& state, const EmbeddingSet& data,
                                       double retained_fraction_floor) {
  return removal_step_indexed(state, data, ClassIndex::build(data), retained_fraction_floor);
}

SplitSequence build_split_sequence(const EmbeddingSet& data,
                                   std::vector<std::uint32_t> initial_train,
                                   const BuildOptions& options) {
  data.validate();
  const auto index = ClassIndex::build(data);
  if (index.num_classes() < 4) {
    throw Error(errc::cannot_swap, "build_split_sequence: need at least 4 classes");
  }
  if (initial_train.empty()) {
    // Random half of the classes, drawn from the seed.
    std::vector<std::uint32_t> ids = index.class_ids;
    Rng rng(options.seed);
    rng.shuffle(ids);
    initial_train.assign(ids.begin(), ids.begin() + static_cast<long>(ids.size() / 2));
  }

  std::set<std::uint32_t> train_set(initial_train.begin(), initial_train.end());
  SplitState state;
  state.train_classes.assign(train_set.begin(), train_set.end());
  for (auto c : index.class_ids) {
    if (!train_set.count(c)) state.test_classes.push_back(c);
  }
  if (state.train_classes.empty() || state.test_classes.empty()) {
    throw Error(errc::empty_split, "build_split_sequence: initial split has an empty side");
  }
  for (auto c : state.train_classes) index.position_of(c);  // throws UnknownClass
  state.fid = split_fid(data, index, state);
  state.step = 0;
  state.kind = StepKind::initial;

  SplitSequence sequence;
  sequence.swap_size = options.swap_size;
  sequence.retained_fraction_floor = options.retained_fraction_floor;
  sequence.states.push_back(state);

  for (int i = 0; i < options.max_swap_steps; ++i) {
    auto next = swap_step_indexed(sequence.states.back(), data, index, options.swap_size,
                                  options.reverse);
    if (!next) break;
    sequence.states.push_back(std::move(*next));
  }
  // Removal pushes the distance up past swap convergence; it has no
  // counterpart when minimizing.
  if (!options.reverse) {
    while (true) {
      auto next = removal_step_indexed(sequence.states.back(), data, index,
                                       options.retained_fraction_floor);
      if (!next) break;
      sequence.states.push_back(std::move(*next));
    }
  }
  return sequence;
}

AGSInput AGSInput::make(std::vector<double> fids, std::vector<double> scores) {
  if (fids.size() != scores.size()) {
    throw Error(errc::shape_error, "AGSInput: fids and scores must have equal length");
  }
  if (fids.size() < 2) {
    throw Error(errc::insufficient_data, "AGSInput: need at least 2 points");
  }
  std::vector<std::size_t> order(fids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fids[a] < fids[b]; });

  AGSInput input;
  input.fids.reserve(fids.size());
  input.scores.reserve(scores.size());
  for (auto i : order) {
    if (!std::isfinite(fids[i]) || !std::isfinite(scores[i])) {
      throw Error(errc::non_finite, "AGSInput: non-finite entry");
    }
    if (scores[i] < -1e-12 || scores[i] > 1.0 + 1e-12) {
      throw Error(errc::invalid_argument, "AGSInput: scores must lie in [0,1]");
    }
    input.fids.push_back(fids[i]);
    input.scores.push_back(scores[i]);
  }
  for (std::size_t i = 1; i < input.fids.size(); ++i) {
    if (input.fids[i] == input.fids[i - 1]) {
      throw Error(errc::degenerate_axis, "AGSInput: duplicate fid values");
    }
  }
  return input;
}

double ags(const AGSInput& input) {
  if (input.fids.size() < 2) {
    throw Error(errc::insufficient_data, "ags: need at least 2 points");
  }
  const double lo = input.fids.front();
  const double hi = input.fids.back();
  if (hi <= lo) {
    throw Error(errc::degenerate_axis, "ags: fid axis has zero span");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < input.fids.size(); ++i) {
    const double x0 = (input.fids[i - 1] - lo) / (hi - lo);
    const double x1 = (input.fids[i] - lo) / (hi - lo);
    area += (x1 - x0) * 0.5 * (input.scores[i - 1] + input.scores[i]);
  }
  return area;
}

}  // namespace dml::splits
