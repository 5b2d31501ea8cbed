#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dmlkit/errors.hpp"
#include "dmlkit/rng.hpp"

namespace dml {

// Fully connected stack: affine + ReLU on hidden layers, linear output.
// Weight matrices are (out x in); batches are (rows x features).
struct MlpHead {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpHead random(const std::vector<int>& layer_dims, Rng& rng);
  static MlpHead zeros(const std::vector<int>& layer_dims);

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::size_t num_layers() const { return weights.size(); }
  void validate() const;
};

// Activations kept for the backward pass; activations[0] is the input.
struct MlpCache {
  std::vector<Eigen::MatrixXd> activations;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> dweights;
  std::vector<Eigen::VectorXd> dbiases;
  Eigen::MatrixXd dinput;

  void setZero(const MlpHead& head, Eigen::Index batch_rows);
  void accumulate(const MlpGradients& other);
};

Eigen::MatrixXd mlp_forward(const MlpHead& head, const Eigen::MatrixXd& batch, MlpCache* cache);

// Exact reverse-mode gradients; ReLU subgradient is 0 at 0.
MlpGradients mlp_backward(const MlpHead& head, const MlpCache& cache,
                          const Eigen::MatrixXd& upstream);

}  // namespace dml
