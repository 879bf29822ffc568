#pragma once

#include "tlfea/kinematics.hpp"
#include "tlfea/model.hpp"

#include <Eigen/Sparse>

#include <span>
#include <utility>

namespace tlfea {

// ---------------------------------------------------------------------------------------------
// Loads

/// Mass-distributed load b(x, t) in force per unit mass: profile(t) * (b0 + G x).
struct ForceField {
  enum class Kind { Uniform, Linear };
  Kind kind = Kind::Uniform;
  Vec3 b0 = Vec3::Zero();
  Mat3 G = Mat3::Zero();
  TimeFunction profile = TimeFunction::constant(1.0);
  /// Bodies the field acts on; empty means all bodies.
  std::vector<std::size_t> bodies;

  Vec3 eval(const Vec3& x, double t) const;
  /// Scalar potential phi with b = grad phi, built from the symmetric part of G.
  double potential(const Vec3& x, double t) const;
  bool applies_to(std::size_t body) const;
  bool operator==(const ForceField& o) const {
    return kind == o.kind && b0 == o.b0 && G == o.G && profile == o.profile && bodies == o.bodies;
  }
};

/// Concentrated force at a material point of one element.
struct PointLoad {
  std::size_t element = 0;
  MaterialCoords u;
  VecX s;
  Vec3 force = Vec3::Zero();
  TimeFunction profile = TimeFunction::constant(1.0);
};

// ---------------------------------------------------------------------------------------------
// Global containers

/// Block-compressed sparse matrix of 3x3 blocks keyed by (slot_i, slot_j). The sparsity pattern is
/// fixed at construction; adding outside it is an assembly bug.
class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;
  BlockSparseMatrix(std::size_t block_rows, std::vector<std::pair<Slot, Slot>> pattern);
  /// Pattern of all slot couplings inside the model's elements.
  static BlockSparseMatrix from_model(const Model& model);

  std::size_t block_rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t block_count() const { return cols_.size(); }

  void set_zero();
  void add(Slot i, Slot j, const Mat3& b);
  bool has_block(Slot i, Slot j) const { return find(i, j) >= 0; }
  Mat3 block(Slot i, Slot j) const;

  VecX multiply(const VecX& x) const;
  void append_triplets(std::vector<Eigen::Triplet<double>>& out, double scale = 1.0) const;
  Eigen::SparseMatrix<double> to_sparse() const;

 private:
  std::ptrdiff_t find(Slot i, Slot j) const;

  std::vector<std::size_t> row_ptr_;
  std::vector<Slot> cols_;
  std::vector<Mat3> blocks_;
};

/// Consistent mass matrix stored as the scalar slot matrix m_ij; the DOF-level matrix is m (x) I3.
class MassMatrix {
 public:
  MassMatrix() = default;
  explicit MassMatrix(Eigen::SparseMatrix<double> scalar) : m_(std::move(scalar)) {}

  const Eigen::SparseMatrix<double>& scalar() const { return m_; }
  double entry(Slot i, Slot j) const { return m_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  /// (m (x) I3) x
  VecX apply(const VecX& x) const;
  /// x^T (m (x) I3) y
  double inner(const VecX& x, const VecX& y) const { return x.dot(apply(y)); }
  void append_triplets(std::vector<Eigen::Triplet<double>>& out, double scale) const;

 private:
  Eigen::SparseMatrix<double> m_;
};

/// Element evaluations run on `threads` workers in `processing_order` (default: index order).
/// Contributions are always reduced serially in element-index order, so results do not depend on
/// either setting.
struct AssemblyOptions {
  unsigned threads = 1;
  std::vector<std::size_t> processing_order;
};

// ---------------------------------------------------------------------------------------------
// Element level

/// m_ij = sum_q rho s_i s_j w_q over the mass rule.
MatX element_mass_matrix(const ElementData& element, double density);

/// f_i = sum_q (P_el + P_vis) h_i w_q. The viscous share is returned separately if requested.
NodalMatrix internal_force_element(std::span<const QuadPoint> qps, const ElementState& state,
                                   const MaterialSpec& material, NodalMatrix* viscous = nullptr);
NodalMatrix internal_force_element(const ElementBasis& basis, const ElementState& state,
                                   const MaterialSpec& material, const QuadratureRule& rule);

struct ElementTangent {
  /// d f_int / d e at fixed nodal velocities (elastic plus viscous, consistent).
  MatX K;
  /// d f_vis / d e_dot at fixed F (zero matrix for purely elastic materials).
  MatX D;
};

ElementTangent tangent_element(std::span<const QuadPoint> qps, const ElementState& state,
                               const MaterialSpec& material);
ElementTangent tangent_element(const ElementBasis& basis, const ElementState& state,
                               const MaterialSpec& material, const QuadratureRule& rule);

/// sum_q Psi(F_q) w_q.
double element_strain_energy(std::span<const QuadPoint> qps, const ElementState& state,
                             const MaterialSpec& material);
/// sum_q W_diss(E_dot_q) w_q.
double element_dissipation_rate(std::span<const QuadPoint> qps, const ElementState& state,
                                const MaterialSpec& material);

/// f_i = sum_q rho s_i b(r(u_q), t) w_q with r evaluated at the current configuration.
NodalMatrix force_field_element(std::span<const QuadPoint> qps, const ElementState& state,
                                double density, const ForceField& field, double t);
/// d f_ff / d e for the linear field (rho s_i s_j G); zero for uniform fields.
MatX force_field_jacobian_element(std::span<const QuadPoint> qps, double density,
                                  const ForceField& field, double t);

/// f_iP = s_i(u_P) f_P, one column per element unknown.
NodalMatrix point_load_distribute(const VecX& s, const Vec3& f);

void scatter_add(const std::vector<Slot>& dof_map, const NodalMatrix& local, VecX& global);
NodalMatrix gather(const std::vector<Slot>& dof_map, const VecX& global);

// ---------------------------------------------------------------------------------------------
// Global level

MassMatrix assemble_mass(const Model& model, const AssemblyOptions& opts = {});

/// Elastic plus viscous internal force at (q, v). `viscous` receives the viscous share.
VecX assemble_internal_force(const Model& model, const VecX& q, const VecX& v,
                             const AssemblyOptions& opts = {}, VecX* viscous = nullptr);

/// Fills K (elastic tangent) and D (viscous velocity tangent); both must use the model pattern.
void assemble_tangent(const Model& model, const VecX& q, const VecX& v, BlockSparseMatrix& K,
                      BlockSparseMatrix& D, const AssemblyOptions& opts = {});

double assemble_strain_energy(const Model& model, const VecX& q, const AssemblyOptions& opts = {});
double assemble_dissipation_rate(const Model& model, const VecX& q, const VecX& v,
                                 const AssemblyOptions& opts = {});

VecX assemble_force_fields(const Model& model, std::span<const ForceField> fields, const VecX& q,
                           double t, const AssemblyOptions& opts = {});
/// Adds d f_ff / d q into `out` (model pattern).
void assemble_force_field_jacobian(const Model& model, std::span<const ForceField> fields, double t,
                                   BlockSparseMatrix& out);
/// -sum_fields integral rho phi(r) dV.
double force_field_potential(const Model& model, std::span<const ForceField> fields, const VecX& q,
                             double t);

VecX assemble_point_loads(const Model& model, std::span<const PointLoad> loads, double t);
/// -sum f(t) . r_P
double point_load_potential(const Model& model, std::span<const PointLoad> loads, const VecX& q,
                            double t);

}  // namespace tlfea
