#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "dmlkit/errors.hpp"

namespace dml {

struct AdamConfig {
  double lr = 1e-5;
  double weight_decay = 3e-4;  // classic L2, folded into the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter tensors. Slots are
// registered once; one begin_step() per optimization step, then update()
// per slot.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  long step_count() const { return t_; }

  int add_slot(std::size_t size);
  void begin_step();

  // In-place parameter update from the gradient; throws NonFinite on a
  // non-finite gradient entry.
  void update(int slot, double* param, const double* grad, std::size_t size);

  void update(int slot, Eigen::MatrixXd& param, const Eigen::MatrixXd& grad);
  void update(int slot, Eigen::VectorXd& param, const Eigen::VectorXd& grad);

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dml
