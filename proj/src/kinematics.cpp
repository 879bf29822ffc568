#include "tlfea/kinematics.hpp"

namespace tlfea {

ElementState gather_state(const VecX& q, const VecX& v, const std::vector<Slot>& dof_map) {
  ElementState s;
  const auto n = static_cast<Eigen::Index>(dof_map.size());
  s.N.resize(3, n);
  s.N_dot.resize(3, n);
  s.dof_map = dof_map;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto base = static_cast<Eigen::Index>(3 * dof_map[static_cast<std::size_t>(i)]);
    if (base + 3 > q.size() || base + 3 > v.size()) {
      throw InternalError("element slot " + std::to_string(dof_map[static_cast<std::size_t>(i)]) +
                          " outside global vector");
    }
    s.N.col(i) = q.segment<3>(base);
    s.N_dot.col(i) = v.segment<3>(base);
  }
  return s;
}

Mat3 deformation_gradient(const NodalMatrix& N, const GradMatrix& H) {
  if (N.cols() != H.rows()) throw InternalError("nodal matrix / gradient shape mismatch");
  return N * H;
}

Mat3 velocity_gradient_assembly(const NodalMatrix& N_dot, const GradMatrix& H) {
  if (N_dot.cols() != H.rows()) throw InternalError("nodal rate / gradient shape mismatch");
  return N_dot * H;
}

StrainMeasures strain_measures(const Mat3& F) {
  StrainMeasures m;
  m.C = F.transpose() * F;
  m.E = 0.5 * (m.C - Mat3::Identity());
  m.J = F.determinant();
  return m;
}

Mat3 strain_rate(const Mat3& F, const Mat3& F_dot) {
  const Mat3 A = F_dot.transpose() * F;
  return 0.5 * (A + A.transpose());
}

DeformationPoint evaluate_point(const ElementState& state, const GradMatrix& H) {
  DeformationPoint p;
  p.F = deformation_gradient(state, H);
  const auto m = strain_measures(p.F);
  p.C = m.C;
  p.E = m.E;
  p.J = m.J;
  p.F_dot = velocity_gradient_assembly(state, H);
  p.E_dot = strain_rate(p.F, p.F_dot);
  return p;
}

}  // namespace tlfea
