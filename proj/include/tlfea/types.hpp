#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlfea {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
/// 3 x n_u matrix of nodal unknowns (one column per vector unknown).
using NodalMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;
/// n_u x 3 matrix of reference gradients, row i = h_i^T.
using GradMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Global index of a vector-valued nodal unknown; it owns entries 3*slot .. 3*slot+2.
using Slot = std::size_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation outside an element's reference domain in strict mode.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Basis construction failure (singular interpolation matrix, degenerate tet).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// det F at or below the admissible floor at some quadrature point.
class InvertedElementError : public Error {
 public:
  InvertedElementError(std::size_t element, std::size_t qp, double J)
      : Error("inverted element " + std::to_string(element) + " at quadrature point " +
              std::to_string(qp) + " (J = " + std::to_string(J) + ")"),
        element_(element),
        qp_(qp),
        J_(J) {}

  std::size_t element() const { return element_; }
  std::size_t quadrature_point() const { return qp_; }
  double jacobian() const { return J_; }

 private:
  std::size_t element_;
  std::size_t qp_;
  double J_;
};

/// Assembly bug: index out of range, stale cache, shape mismatch.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlfea
