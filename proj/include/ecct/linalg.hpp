#pragma once

#include "ecct/types.hpp"

#include <cstdint>

namespace ecct {

struct PowerIterationOptions {
  double tolerance = 1e-8;  // relative change of the estimate between iterations
  int max_iterations = 1000;
  std::uint64_t seed = 0x5EED;
};

/// Largest singular value by power iteration on M^T M.
double spectral_norm(const Mat& m, const PowerIterationOptions& opt = {});

}  // namespace ecct
