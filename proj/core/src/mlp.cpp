#include "dmlkit/mlp.hpp"

#include <cmath>

namespace dml {

MlpHead MlpHead::random(const std::vector<int>& layer_dims, Rng& rng) {
  if (layer_dims.size() < 2) {
    throw Error(errc::invalid_argument, "MlpHead: need at least input and output dims");
  }
  MlpHead head;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l];
    const int out = layer_dims[l + 1];
    if (in < 1 || out < 1) {
      throw Error(errc::invalid_argument, "MlpHead: layer dims must be >= 1");
    }
    // He initialization for the ReLU stack.
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = scale * rng.gaussian();
      }
    }
    head.weights.push_back(std::move(w));
    head.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return head;
}

MlpHead MlpHead::zeros(const std::vector<int>& layer_dims) {
  if (layer_dims.size() < 2) {
    throw Error(errc::invalid_argument, "MlpHead: need at least input and output dims");
  }
  MlpHead head;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    head.weights.push_back(Eigen::MatrixXd::Zero(layer_dims[l + 1], layer_dims[l]));
    head.biases.push_back(Eigen::VectorXd::Zero(layer_dims[l + 1]));
  }
  return head;
}

void MlpHead::validate() const {
  if (weights.empty() || weights.size() != biases.size()) {
    throw Error(errc::shape_error, "MlpHead: inconsistent layer count");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != biases[l].size()) {
      throw Error(errc::shape_error, "MlpHead: bias size mismatch at layer " + std::to_string(l));
    }
    if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
      throw Error(errc::shape_error, "MlpHead: dim mismatch between layers " + std::to_string(l - 1) +
                                         " and " + std::to_string(l));
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw Error(errc::non_finite, "MlpHead: non-finite parameter at layer " + std::to_string(l));
    }
  }
}

void MlpGradients::setZero(const MlpHead& head, Eigen::Index batch_rows) {
  dweights.clear();
  dbiases.clear();
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    dweights.push_back(Eigen::MatrixXd::Zero(head.weights[l].rows(), head.weights[l].cols()));
    dbiases.push_back(Eigen::VectorXd::Zero(head.biases[l].size()));
  }
  dinput = Eigen::MatrixXd::Zero(batch_rows, head.input_dim());
}

void MlpGradients::accumulate(const MlpGradients& other) {
  for (std::size_t l = 0; l < dweights.size(); ++l) {
    dweights[l] += other.dweights[l];
    dbiases[l] += other.dbiases[l];
  }
  dinput += other.dinput;
}

Eigen::MatrixXd mlp_forward(const MlpHead& head, const Eigen::MatrixXd& batch, MlpCache* cache) {
  if (batch.cols() != head.input_dim()) {
    throw Error(errc::shape_error, "mlp_forward: batch has " + std::to_string(batch.cols()) +
                                       " columns, head expects " + std::to_string(head.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(batch);
  }
  Eigen::MatrixXd a = batch;
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    Eigen::MatrixXd z = a * head.weights[l].transpose();
    z.rowwise() += head.biases[l].transpose();
    if (l + 1 < head.weights.size()) {
      a = z.cwiseMax(0.0);  // ReLU on hidden layers only
    } else {
      a = std::move(z);
    }
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

MlpGradients mlp_backward(const MlpHead& head, const MlpCache& cache,
                          const Eigen::MatrixXd& upstream) {
  if (cache.activations.size() != head.weights.size() + 1) {
    throw Error(errc::shape_error, "mlp_backward: cache does not match head");
  }
  if (upstream.rows() != cache.activations.front().rows() ||
      upstream.cols() != head.output_dim()) {
    throw Error(errc::shape_error, "mlp_backward: upstream shape mismatch");
  }
  MlpGradients grads;
  grads.dweights.resize(head.weights.size());
  grads.dbiases.resize(head.weights.size());

  Eigen::MatrixXd g = upstream;
  for (std::size_t l = head.weights.size(); l-- > 0;) {
    if (l + 1 < head.weights.size()) {
      // ReLU mask; activation > 0 iff pre-activation > 0.
      g = g.cwiseProduct((cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.dweights[l] = g.transpose() * cache.activations[l];
    grads.dbiases[l] = g.colwise().sum().transpose();
    if (l > 0) {
      g = g * head.weights[l];
    } else {
      grads.dinput = g * head.weights[0];
    }
  }
  return grads;
}

}  // namespace dml
