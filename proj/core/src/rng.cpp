#include "dmlkit/rng.hpp"

#include <cmath>

#include "dmlkit/errors.hpp"

namespace dml {

std::size_t Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(errc::invalid_argument, "categorical: weights must be finite and >= 0");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw Error(errc::invalid_argument, "categorical: total weight is zero");
  }
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.empty() ? 0 : weights.size() - 1;
}

}  // namespace dml
