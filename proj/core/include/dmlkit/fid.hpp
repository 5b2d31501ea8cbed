#pragma once

#include <Eigen/Dense>

#include "dmlkit/embedding_set.hpp"

namespace dml::fid {

// Gaussian fit of an embedding distribution: sample mean and unbiased
// (N-1) covariance, symmetrized.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::Index n = 0;
};

GaussianSummary summarize(const EmbeddingSet& set);

// Tr((A B)^{1/2}) for symmetric PSD A, B, computed through the symmetric
// product S B S with S = A^{1/2}: same spectrum as A B but guaranteed real.
// Eigenvalues pushed slightly negative by roundoff are clamped to zero.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Squared Frechet distance between two Gaussians:
//   |mu_p - mu_q|^2 + Tr(cov_p) + Tr(cov_q) - 2 Tr((cov_p cov_q)^{1/2}).
// Tiny negative results (> -1e-6) are floored at zero; anything more
// negative raises NumericalFailure.
double frechet_distance(const GaussianSummary& p, const GaussianSummary& q);

// Convenience: fit both sets and return their Frechet distance.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

}  // namespace dml::fid
