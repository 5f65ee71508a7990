#include "ecct/linalg.hpp"

#include "ecct/rng.hpp"

#include <cmath>

namespace ecct {

double spectral_norm(const Mat& m, const PowerIterationOptions& opt) {
  if (m.size() == 0) return 0.0;
  Rng rng(opt.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  v.normalize();

  double sigma = 0.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vec w = m * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    Vec u = m.transpose() * w;
    const double un = u.norm();
    if (un == 0.0) return next;
    v = u / un;
    if (it > 0 && std::abs(next - sigma) <= opt.tolerance * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  // One more half-step: sqrt(||M^T M v||) is at least as close as ||M v||.
  return std::max(sigma, (m * v).norm());
}

}  // namespace ecct
