#include "dmlkit/fid.hpp"

#include <cmath>

namespace dml::fid {

namespace {

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(errc::shape_error, std::string(what) + ": matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    throw Error(errc::not_symmetric, std::string(what) + ": matrix is not symmetric");
  }
}

// Symmetric square root with relative eigenvalue clamp at 1e-8 * lambda_max.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = 1e-8 * std::max(0.0, ev.maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev(i) = ev(i) > floor ? std::sqrt(ev(i)) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

GaussianSummary summarize(const EmbeddingSet& set) {
  if (set.rows() < 2) {
    throw Error(errc::insufficient_data, "summarize: need at least 2 samples");
  }
  GaussianSummary s;
  s.n = set.rows();
  s.mean = set.data.colwise().mean();
  const Eigen::MatrixXd centered = set.data.rowwise() - s.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(set.rows() - 1);
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_symmetric(a, "trace_sqrt_product (first argument)");
  check_symmetric(b, "trace_sqrt_product (second argument)");
  if (a.rows() != b.rows()) {
    throw Error(errc::shape_error, "trace_sqrt_product: dimension mismatch");
  }
  const Eigen::MatrixXd s = sqrt_psd(a);
  Eigen::MatrixXd sbs = s * b * s;
  sbs = 0.5 * (sbs + sbs.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sbs, Eigen::EigenvaluesOnly);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev > 0.0) tr += std::sqrt(ev);
  }
  return tr;
}

double frechet_distance(const GaussianSummary& p, const GaussianSummary& q) {
  if (p.mean.size() != q.mean.size()) {
    throw Error(errc::shape_error, "frechet_distance: dimension mismatch");
  }
  const double mean_term = (p.mean - q.mean).squaredNorm();
  const double value = mean_term + p.cov.trace() + q.cov.trace() - 2.0 * trace_sqrt_product(p.cov, q.cov);
  if (value < -1e-6) {
    throw Error(errc::numerical_failure, "frechet_distance: negative beyond tolerance");
  }
  return value < 0.0 ? 0.0 : value;
}

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
  return frechet_distance(summarize(a), summarize(b));
}

}  // namespace dml::fid
