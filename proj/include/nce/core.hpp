#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace nce {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown for arguments outside a function's mathematical domain
// (non-positive variances, empty inputs, non-finite matrices, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace nce
