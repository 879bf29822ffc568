#pragma once

#include "tlfea/model.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tlfea {

/// A material point of a body element, or a fixed world point (ground).
struct AttachmentPoint {
  bool ground = false;
  Vec3 world = Vec3::Zero();
  std::size_t body = 0;
  std::size_t element = 0;
  MaterialCoords u;
  VecX s;
  std::vector<Slot> dofs;

  static AttachmentPoint on_element(const Model& model, std::size_t element,
                                    const MaterialCoords& u);
  static AttachmentPoint fixed(const Vec3& x);
};

/// r = N s(u_P), or the world position for ground points.
Vec3 eval_point(const VecX& q, const AttachmentPoint& p);

enum class PrimitiveKind { DP1, DP2, DIST, CD };
std::string_view to_string(PrimitiveKind kind);

/// Scalar constraint built from point evaluations.
///   DP1, DP2: points (P, Q, R, T), a = r_Q - r_P, b = r_T - r_R, c = a.b - f(t).
///             DP2 differs only in where the points live (P, Q, R on one body, T on the other).
///   DIST:     points (P, Q), c = (a.a - f(t)^2) / 2.
///   CD:       points (P, Q), c = d.a - f(t).
struct ConstraintPrimitive {
  PrimitiveKind kind = PrimitiveKind::CD;
  std::vector<AttachmentPoint> points;
  Vec3 d = Vec3::UnitX();
  TimeFunction f;
  /// Per-constraint penalty; the set's scalar penalty is used when empty.
  std::optional<double> rho;
  std::string label;
};

double primitive_residual(const ConstraintPrimitive& c, const VecX& q, double t);

/// Non-zero Jacobian block of one attachment point: row = sign w^T (s^T (x) I3).
struct JacobianBlock {
  std::vector<Slot> dofs;
  Eigen::RowVectorXd row;
};

std::vector<JacobianBlock> primitive_jacobian_blocks(const ConstraintPrimitive& c, const VecX& q,
                                                     double t);

/// The Jacobian row as a merged sparse list of (global dof, value), sorted by dof.
std::vector<std::pair<Eigen::Index, double>> primitive_jacobian_row(const ConstraintPrimitive& c,
                                                                    const VecX& q, double t);

enum class JointKind { Spherical, Revolute, Fixed };
std::string_view to_string(JointKind kind);

/// Joint between side b and side c. Directions are point pairs (tail, head).
///   Revolute: b_dirs = {axis on b}, c_dirs = two directions on c spanning the plane normal to it.
///   Fixed:    b_dirs = {x_b, y_b}, c_dirs = {y_c, z_c}.
struct JointSpec {
  JointKind kind = JointKind::Spherical;
  AttachmentPoint on_b;
  AttachmentPoint on_c;
  std::vector<std::pair<AttachmentPoint, AttachmentPoint>> b_dirs;
  std::vector<std::pair<AttachmentPoint, AttachmentPoint>> c_dirs;
  std::string label;
};

/// Spherical: 3 CD. Revolute: spherical + 2 DP1. Fixed: spherical + 3 DP1. Prescribed values are
/// the reference-configuration values, so the joint is satisfied by q_ref.
std::vector<ConstraintPrimitive> make_joint(const JointSpec& spec, const VecX& q_ref);

class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(double rho) : rho_(rho) {}

  void add(ConstraintPrimitive c);
  void add(std::vector<ConstraintPrimitive> cs);

  std::size_t size() const { return primitives_.size(); }
  bool empty() const { return primitives_.empty(); }
  const std::vector<ConstraintPrimitive>& primitives() const { return primitives_; }

  double base_rho() const { return rho_; }
  void set_base_rho(double rho) { rho_ = rho; }
  /// Multiplies every penalty (used by the solver when the outer loop stalls).
  void set_penalty_factor(double factor) { factor_ = factor; }
  double penalty_factor() const { return factor_; }
  double penalty(std::size_t i) const;

  VecX& multipliers() { return lambda_; }
  const VecX& multipliers() const { return lambda_; }

  VecX residuals(const VecX& q, double t) const;

  /// out += scale * C_q^T (lambda + rho c).
  void apply_constraint_term(const VecX& q, double t, VecX& out, double scale = 1.0) const;
  /// out += C_q^T mu.
  void apply_transpose(const VecX& q, double t, const VecX& mu, VecX& out) const;
  /// Triplets of scale * sum_i rho_i J_i^T J_i.
  void append_gauss_newton(const VecX& q, double t, double scale,
                           std::vector<Eigen::Triplet<double>>& out) const;
  /// lambda <- lambda + rho c.
  void update_multipliers(const VecX& c);

 private:
  std::vector<ConstraintPrimitive> primitives_;
  VecX lambda_;
  double rho_ = 1.0;
  double factor_ = 1.0;
};

}  // namespace tlfea
