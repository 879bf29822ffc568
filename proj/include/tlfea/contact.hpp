#pragma once

#include "tlfea/assembly.hpp"
#include "tlfea/constraints.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace tlfea {

struct ContactGeometry {
  enum class Kind { SphereSphere, SpherePlane, Patch };
  Kind kind = Kind::SpherePlane;
  double R_A = 0.0;
  double R_B = 0.0;
  double A_patch = 0.0;
};

struct ContactParams {
  double E_A = 0.0, E_B = 0.0;
  double nu_A = 0.0, nu_B = 0.0;
  /// Restitution coefficient in (0, 1].
  double e = 1.0;
  /// Coulomb friction coefficient.
  double mu = 0.0;
  ContactGeometry geometry;
};

/// Relative kinematics of a contact; n points from B to A and delta > 0 means overlap.
struct ContactKinematics {
  Vec3 n = Vec3::UnitZ();
  double delta = 0.0;
  Vec3 v_rel = Vec3::Zero();
  double v_n = 0.0;
  Vec3 v_t = Vec3::Zero();
  double m_eff = 0.0;
  Vec3 x_c = Vec3::Zero();
};

/// Builds v_rel = v_A - v_B, v_n = v_rel . n, v_t = v_rel - v_n n, m_eff = (1/m_A + 1/m_B)^-1.
/// Infinite masses are passed as mobilities (1/m) of zero.
ContactKinematics make_kinematics(const Vec3& n, double delta, const Vec3& v_A, const Vec3& v_B,
                                  double mobility_A, double mobility_B, const Vec3& x_c);

struct ContactDerived {
  double E_eff = 0.0, G_eff = 0.0, a = 0.0;
  double S_n = 0.0, k_n = 0.0, k_t = 0.0;
  double beta = 0.0, gamma_n = 0.0, gamma_t = 0.0;
};

double effective_radius(const ContactGeometry& g);
ContactDerived effective_properties(const ContactParams& params, const ContactKinematics& kin);

/// max(0, x) regularized as (x + sqrt(x^2 + eps^2)) / 2.
double smooth_max(double x, double epsilon);

/// F_n = max(0, k_n delta - gamma_n v_n) n; zero without overlap. A positive `smooth_epsilon`
/// replaces the max by smooth_max.
Vec3 normal_force(const ContactKinematics& kin, const ContactDerived& d, double smooth_epsilon = 0.0);

struct ContactPairState {
  Vec3 delta_t = Vec3::Zero();
  bool active = false;
  bool operator==(const ContactPairState&) const = default;
};

struct TangentialResult {
  Vec3 F_t = Vec3::Zero();
  ContactPairState state;
  bool slipping = false;
};

/// Mindlin spring with Coulomb cap and history rewind.
TangentialResult tangential_force(const ContactKinematics& kin, const ContactDerived& d,
                                  const ContactPairState& state, double dt, const Vec3& F_n,
                                  double mu);

ContactPairState reset_on_separation(const ContactPairState& state);

// ---------------------------------------------------------------------------------------------
// Contact pairs attached to a model

/// One side of a contact: a sphere centred on a material point, a mesh node (patch contact), or a
/// fixed plane (ground).
struct ContactSide {
  enum class Kind { Sphere, Node, Plane };
  Kind kind = Kind::Sphere;
  AttachmentPoint point;
  double radius = 0.0;
  Vec3 plane_point = Vec3::Zero();
  Vec3 plane_normal = Vec3::UnitZ();
  /// Point mobility s^T M^-1 s (zero for ground).
  double mobility = 0.0;
};

struct ContactPair {
  std::string label;
  ContactSide A;
  ContactSide B;
  ContactParams params;
  ContactPairState state;
};

struct ContactReport {
  bool active = false;
  double delta = 0.0;
  Vec3 F_n = Vec3::Zero();
  Vec3 F_t = Vec3::Zero();
  Vec3 x_c = Vec3::Zero();
};

/// Geometric kinematics of a pair in configuration (q, v).
ContactKinematics pair_kinematics(const ContactPair& pair, const VecX& q, const VecX& v);

/// Adds +F on side A and -F on side B at their attachment points (ground sides receive nothing).
void distribute_contact_forces(const ContactPair& pair, const Vec3& F, VecX& out);

/// Point mobilities from the consistent mass matrix restricted to the free slots.
class MobilityCalculator {
 public:
  MobilityCalculator(const Model& model, const MassMatrix& mass);
  double mobility(const AttachmentPoint& p) const;

 private:
  std::vector<Eigen::Index> free_index_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> llt_;
  Eigen::Index n_free_ = 0;
};

class ContactSet {
 public:
  struct Evaluation {
    VecX force;
    std::vector<ContactReport> reports;
    std::vector<ContactPairState> states;
    std::size_t skipped = 0;
  };

  void add(ContactPair pair) { pairs_.push_back(std::move(pair)); }
  std::vector<ContactPair>& pairs() { return pairs_; }
  const std::vector<ContactPair>& pairs() const { return pairs_; }
  bool empty() const { return pairs_.empty(); }

  double smooth_epsilon = 0.0;

  /// Forces at (q, v) with histories advanced by dt. Histories are not committed.
  Evaluation evaluate(const VecX& q, const VecX& v, double dt) const;
  void commit(const std::vector<ContactPairState>& states);

 private:
  std::vector<ContactPair> pairs_;
};

}  // namespace tlfea
