#pragma once

#include "tlfea/elements.hpp"
#include "tlfea/materials.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tlfea {

/// Scalar function of time used for prescribed constraint values and load profiles.
struct TimeFunction {
  enum class Kind { Constant, Ramp, Sine };
  Kind kind = Kind::Constant;
  /// Constant: value = a. Ramp: a + b * max(0, t - c). Sine: a + b * sin(c * t + d).
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  double operator()(double t) const;
  bool is_constant() const { return kind == Kind::Constant || b == 0.0; }

  static TimeFunction constant(double value) { return {Kind::Constant, value, 0, 0, 0}; }
  static TimeFunction ramp(double value0, double rate, double start = 0.0) {
    return {Kind::Ramp, value0, rate, start, 0};
  }
  static TimeFunction sine(double offset, double amplitude, double omega, double phase = 0.0) {
    return {Kind::Sine, offset, amplitude, omega, phase};
  }
  bool operator==(const TimeFunction&) const = default;
};

/// Reference mesh of one body. Slot vectors are stored node-major: for ANCF nodes the four
/// columns are position, r_u, r_v, r_w; T10 nodes carry the position only.
struct BodyMesh {
  ElementKind kind = ElementKind::Tet10;
  NodalMatrix slots;
  std::vector<std::vector<std::size_t>> connectivity;
  /// ANCF box extents per element: beam (L, W, H), shell (Lu, T, Lw). Empty for T10.
  std::vector<Vec3> element_dims;

  std::size_t node_count() const {
    return static_cast<std::size_t>(slots.cols()) / static_cast<std::size_t>(slots_per_node(kind));
  }
  bool operator==(const BodyMesh& o) const {
    return kind == o.kind && slots.cols() == o.slots.cols() && slots == o.slots &&
           connectivity == o.connectivity && element_dims == o.element_dims;
  }
};

/// Cached shape data at one quadrature point. The weight already includes the geometric Jacobian.
struct QuadPoint {
  MaterialCoords u;
  double weight = 0.0;
  VecX s;
  GradMatrix H;
};

std::vector<QuadPoint> make_quad_points(const ElementBasis& basis, const QuadratureRule& rule);

struct ElementData {
  std::size_t body = 0;
  ElementBasis basis;
  std::vector<Slot> dof_map;
  std::vector<QuadPoint> force_qp;
  std::vector<QuadPoint> mass_qp;
};

struct BodyData {
  std::string name;
  BodyMesh mesh;
  MaterialSpec material;
  double density = 0.0;
  Slot first_slot = 0;
  std::vector<std::size_t> elements;

  std::size_t slot_count() const { return static_cast<std::size_t>(mesh.slots.cols()); }
  /// Global slot of a node's unknown; `which` is 0 for the position, 1..3 for the ANCF slopes.
  Slot node_slot(std::size_t node, int which = 0) const {
    return first_slot + node * static_cast<std::size_t>(slots_per_node(mesh.kind)) +
           static_cast<std::size_t>(which);
  }
};

/// Bodies, elements, and the global slot layout. Built once; immutable during a run apart from
/// the fixed-slot set, which is configured before the first step.
class Model {
 public:
  /// Appends a body; its slots follow those of previously added bodies. Returns the body index.
  std::size_t add_body(std::string name, BodyMesh mesh, MaterialSpec material, double density);

  const std::vector<BodyData>& bodies() const { return bodies_; }
  const std::vector<ElementData>& elements() const { return elements_; }
  const BodyData& body(std::size_t i) const { return bodies_.at(i); }
  std::optional<std::size_t> find_body(const std::string& name) const;

  std::size_t slot_count() const { return n_slots_; }
  Eigen::Index dof_count() const { return static_cast<Eigen::Index>(3 * n_slots_); }

  /// Reference configuration (3 entries per slot).
  const VecX& reference_q() const { return q_ref_; }

  void fix_slot(Slot s);
  bool is_fixed(Slot s) const { return fixed_[s] != 0; }
  const std::vector<char>& fixed_mask() const { return fixed_; }
  /// True if the slot is a nodal position (as opposed to an ANCF slope).
  bool is_position_slot(Slot s) const { return position_[s] != 0; }

  /// Vector with ones on the `axis` component of every position slot (rigid translation).
  VecX translation_vector(int axis) const;

  /// Global interpolation of a material point: r = sum_k s_k q_{dof_map[k]}.
  Vec3 interpolate(const VecX& q, std::size_t element, const VecX& s) const;

 private:
  std::vector<BodyData> bodies_;
  std::vector<ElementData> elements_;
  std::size_t n_slots_ = 0;
  VecX q_ref_;
  std::vector<char> fixed_;
  std::vector<char> position_;
};

/// Material point on a body found by inverse mapping of a reference-configuration position.
struct LocatedPoint {
  std::size_t element = 0;
  MaterialCoords u;
};

/// Newton inverse map of `x` into the elements of `body` in configuration q. Returns nothing if the
/// point lies in no element (within `tol` relative to the element extents).
std::optional<LocatedPoint> locate_point(const Model& model, std::size_t body, const Vec3& x,
                                         const VecX& q, double tol = 1e-8);

}  // namespace tlfea
