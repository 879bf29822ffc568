#pragma once

#include "tlfea/types.hpp"

namespace tlfea {

/// Element view of the nodal unknowns N(t), their rates and the element -> global slot map.
struct ElementState {
  NodalMatrix N;
  NodalMatrix N_dot;
  std::vector<Slot> dof_map;

  Eigen::Index n_u() const { return N.cols(); }
};

/// Gather an element's state from global position/velocity vectors (3 entries per slot).
ElementState gather_state(const VecX& q, const VecX& v, const std::vector<Slot>& dof_map);

struct DeformationPoint {
  Mat3 F;
  double J = 1.0;
  Mat3 C;
  Mat3 E;
  Mat3 F_dot;
  Mat3 E_dot;
};

/// F = N H.
Mat3 deformation_gradient(const NodalMatrix& N, const GradMatrix& H);
inline Mat3 deformation_gradient(const ElementState& state, const GradMatrix& H) {
  return deformation_gradient(state.N, H);
}

/// F_dot = N_dot H.
Mat3 velocity_gradient_assembly(const NodalMatrix& N_dot, const GradMatrix& H);
inline Mat3 velocity_gradient_assembly(const ElementState& state, const GradMatrix& H) {
  return velocity_gradient_assembly(state.N_dot, H);
}

struct StrainMeasures {
  Mat3 C;
  Mat3 E;
  double J;
};

/// C = F^T F, E = (C - I)/2, J = det F.
StrainMeasures strain_measures(const Mat3& F);

/// E_dot = (F_dot^T F + F^T F_dot)/2.
Mat3 strain_rate(const Mat3& F, const Mat3& F_dot);

DeformationPoint evaluate_point(const ElementState& state, const GradMatrix& H);

}  // namespace tlfea
