#include "dmlkit/optim.hpp"

#include <cmath>

namespace dml {

int AdamState::add_slot(std::size_t size) {
  m_.emplace_back(size, 0.0);
  v_.emplace_back(size, 0.0);
  return static_cast<int>(m_.size()) - 1;
}

void AdamState::begin_step() { ++t_; }

void AdamState::update(int slot, double* param, const double* grad, std::size_t size) {
  if (t_ < 1) {
    throw Error(errc::invalid_state, "AdamState: begin_step() before update()");
  }
  auto& m = m_.at(static_cast<std::size_t>(slot));
  auto& v = v_.at(static_cast<std::size_t>(slot));
  if (m.size() != size) {
    throw Error(errc::shape_error, "AdamState: slot size mismatch");
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::isfinite(grad[i])) {
      throw Error(errc::non_finite, "AdamState: non-finite gradient");
    }
    const double g = grad[i] + config_.weight_decay * param[i];
    m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
    v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

void AdamState::update(int slot, Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw Error(errc::shape_error, "AdamState: gradient shape mismatch");
  }
  update(slot, param.data(), grad.data(), static_cast<std::size_t>(param.size()));
}

void AdamState::update(int slot, Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
  if (param.size() != grad.size()) {
    throw Error(errc::shape_error, "AdamState: gradient shape mismatch");
  }
  update(slot, param.data(), grad.data(), static_cast<std::size_t>(param.size()));
}

}  // namespace dml
