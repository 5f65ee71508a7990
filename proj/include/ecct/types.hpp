#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecct {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Bits = std::vector<std::uint8_t>;

/// Raised when a forward or backward pass produces NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int layer)
      : std::runtime_error(what), layer_(layer) {}
  /// Layer index (1-based) where the value appeared; 0 = embedding, -1 = output.
  int layer() const { return layer_; }

 private:
  int layer_;
};

}  // namespace ecct
