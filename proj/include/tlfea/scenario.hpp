#pragma once

#include "tlfea/constraints.hpp"
#include "tlfea/materials.hpp"
#include "tlfea/model.hpp"
#include "tlfea/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tlfea {

/// Validation failure while reading a scenario. `path` is a JSON pointer to the offending field.
class ScenarioError : public Error {
 public:
  enum class Kind { Syntax, Schema, Reference, Physical };
  ScenarioError(Kind kind, std::string path, const std::string& message);
  Kind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  Kind kind_;
  std::string path_;
};

std::string_view to_string(ScenarioError::Kind kind);

/// A material point named in a scenario: either (element, local coordinates) or a reference
/// position that is located by inverse mapping. A point with `ground` set is a fixed world point.
struct PointRef {
  std::string body;
  std::optional<std::size_t> element;
  MaterialCoords coords;
  std::optional<Vec3> position;
  std::optional<std::size_t> node;
  std::optional<Vec3> ground;
  bool operator==(const PointRef&) const = default;
};

struct MaterialEntry {
  MaterialSpec spec;
  double density = 0.0;
  bool operator==(const MaterialEntry&) const = default;
};

struct FixedEntry {
  enum class Which { All, Position, Slopes };
  std::vector<std::size_t> nodes;
  Which which = Which::All;
  bool operator==(const FixedEntry&) const = default;
};

struct BodyEntry {
  std::string name;
  std::string material;
  BodyMesh mesh;
  std::vector<FixedEntry> fixed;
  Vec3 initial_velocity = Vec3::Zero();
  /// Nodal displacements d_a = r_a - X_a of the initial state (T10 only); empty if none.
  std::vector<Vec3> initial_displacement;
  bool operator==(const BodyEntry&) const = default;
};

struct JointEntry {
  JointKind kind = JointKind::Spherical;
  std::string label;
  PointRef point;
  /// Other side; empty body (or "ground") attaches to the world.
  std::string other = "ground";
  /// World direction of the hinge axis in the reference configuration (revolute).
  Vec3 axis = Vec3::UnitZ();
  bool operator==(const JointEntry&) const = default;
};

struct PrimitiveEntry {
  PrimitiveKind kind = PrimitiveKind::CD;
  std::string label;
  std::vector<PointRef> points;
  Vec3 d = Vec3::UnitX();
  TimeFunction f;
  std::optional<double> rho;
  bool operator==(const PrimitiveEntry&) const = default;
};

struct ContactMaterial {
  double E = 0.0;
  double nu = 0.0;
  bool operator==(const ContactMaterial&) const = default;
};

struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  bool operator==(const Plane&) const = default;
};

struct ContactEntry {
  enum class Kind { SpherePlane, SphereSphere, NodePlane };
  Kind kind = Kind::SpherePlane;
  std::string label;
  /// Sphere centres (one for sphere-plane, two for sphere-sphere).
  std::vector<PointRef> spheres;
  std::vector<double> radii;
  std::vector<ContactMaterial> materials;
  /// Node-plane: body and nodes.
  std::string body;
  std::vector<std::size_t> nodes;
  double patch_area = 0.0;
  Plane plane;
  ContactMaterial plane_material;
  double restitution = 1.0;
  double friction = 0.0;
  bool operator==(const ContactEntry&) const = default;
};

struct FieldEntry {
  ForceField field;
  std::vector<std::string> bodies;
  bool operator==(const FieldEntry& o) const { return field == o.field && bodies == o.bodies; }
};

struct PointLoadEntry {
  PointRef point;
  Vec3 force = Vec3::Zero();
  TimeFunction profile = TimeFunction::constant(1.0);
  bool operator==(const PointLoadEntry&) const = default;
};

struct ProbeEntry {
  std::string name;
  PointRef point;
  bool operator==(const ProbeEntry&) const = default;
};

struct OutputEntry {
  /// Write a frame every `every` steps.
  std::size_t every = 1;
  /// Write a VTK snapshot every `snapshot_every` frames (0 disables snapshots).
  std::size_t snapshot_every = 0;
  std::vector<ProbeEntry> probes;
  bool operator==(const OutputEntry&) const = default;
};

struct Scenario {
  std::string name;
  SolverConfig solver;
  /// Number of steps; derived from t_end / h when the document gives a duration instead.
  std::size_t steps = 0;
  double t_end = 0.0;
  double smooth_contact_epsilon = 0.0;
  std::map<std::string, MaterialEntry> materials;
  std::vector<BodyEntry> bodies;
  std::vector<JointEntry> joints;
  std::vector<PrimitiveEntry> primitives;
  std::vector<ContactEntry> contacts;
  std::vector<FieldEntry> fields;
  std::vector<PointLoadEntry> point_loads;
  OutputEntry output;
  bool operator==(const Scenario&) const = default;
};

/// Parses and validates a scenario document. Mesh generators and node selectors are expanded, so
/// the result holds explicit meshes only.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {});
/// Explicit form of a scenario; parse_scenario(to_json(s)) == s.
nlohmann::json to_json(const Scenario& s);

/// Applies "a.b.c=value" to a document. The value is read as JSON when possible, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Runtime objects built from a scenario.
struct BuiltScenario {
  Problem problem;
  VecX q0;
  VecX v0;
  /// Probe points resolved to attachments, in output order.
  std::vector<std::pair<std::string, AttachmentPoint>> probes;
  std::vector<std::string> contact_labels;
};

/// Resolves references (located points, joints, contacts) against a freshly built model.
BuiltScenario build_scenario(const Scenario& s);

}  // namespace tlfea
