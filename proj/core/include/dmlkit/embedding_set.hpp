#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dmlkit/errors.hpp"

namespace dml {

// A labeled set of embeddings: N rows of dimension D plus one class id per
// row. Immutable by convention after construction; everything downstream
// (metrics, FID, splits, training) consumes this type.
struct EmbeddingSet {
  Eigen::MatrixXd data;                  // N x D
  std::vector<std::uint32_t> labels;     // size N
  std::vector<std::string> class_names;  // optional, indexed by class id

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }

  std::uint32_t num_classes() const;

  // Throws on any violated invariant (shape, finiteness, label range).
  void validate() const;
};

// Per-class view of an EmbeddingSet: distinct class ids, the row indices of
// each class, and the arithmetic class means.
struct ClassIndex {
  std::vector<std::uint32_t> class_ids;               // sorted ascending
  std::vector<std::vector<Eigen::Index>> row_groups;  // aligned with class_ids
  Eigen::MatrixXd class_means;                        // C x D

  static ClassIndex build(const EmbeddingSet& set);

  std::size_t num_classes() const { return class_ids.size(); }
  // Position of a class id in class_ids; throws UnknownClass.
  std::size_t position_of(std::uint32_t class_id) const;
};

// Parameters for the synthetic generator: class means drawn uniformly in
// [-class_mean_scale, class_mean_scale]^D, samples isotropic Gaussian
// around the mean. Identical spec (including seed) gives bit-identical data.
struct SynthSpec {
  int num_classes = 1;
  int samples_per_class = 1;
  int dim = 1;
  double class_mean_scale = 1.0;
  double within_class_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

EmbeddingSet synth_gaussian_classes(const SynthSpec& spec);

// CSV rows are `label,v1,...,vD` with a constant D across rows.
EmbeddingSet load_csv(const std::filesystem::path& path, bool has_header = false);

// EMB1 binary container (little-endian): magic "EMB1", u16 version, u8
// flags (bit0 = class-name table), u8 reserved, u64 N, u32 D, N*D f32
// row-major, N u32 labels, optional name table (u32 count, per name u16
// byte length + UTF-8 bytes). Values are widened to f64 on load.
void save_binary(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet load_binary(const std::filesystem::path& path);

// Returns a copy with every row scaled to unit Euclidean norm.
EmbeddingSet l2_normalize(const EmbeddingSet& set);

// Partitions rows by class membership: first element holds rows whose label
// is in train_classes, second the complement. Row order is preserved.
std::pair<EmbeddingSet, EmbeddingSet> split_by_classes(
    const EmbeddingSet& set, const std::vector<std::uint32_t>& train_classes);

}  // namespace dml
