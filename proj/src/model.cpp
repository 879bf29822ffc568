#include "tlfea/model.hpp"

#include <cmath>

namespace tlfea {

double TimeFunction::operator()(double t) const {
  switch (kind) {
    case Kind::Constant: return a;
    case Kind::Ramp: return a + b * std::max(0.0, t - c);
    case Kind::Sine: return a + b * std::sin(c * t + d);
  }
  return a;
}

std::vector<QuadPoint> make_quad_points(const ElementBasis& basis, const QuadratureRule& rule) {
  std::vector<QuadPoint> out;
  out.reserve(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k) {
    QuadPoint qp;
    qp.u = rule.points[k];
    qp.s = eval_shape(basis, qp.u);
    qp.H = eval_ref_gradients(basis, qp.u);
    qp.weight = rule.weights[k] * basis.geometric_jacobian(qp.u);
    out.push_back(std::move(qp));
  }
  return out;
}

std::size_t Model::add_body(std::string name, BodyMesh mesh, MaterialSpec material,
                            double density) {
  const int spn = slots_per_node(mesh.kind);
  const int npe = nodes_per_element(mesh.kind);
  if (mesh.slots.cols() % spn != 0) {
    throw ConstructionError("body '" + name + "': slot count is not a multiple of " +
                            std::to_string(spn));
  }
  const std::size_t n_nodes = mesh.node_count();
  const bool ancf = mesh.kind != ElementKind::Tet10;
  if (ancf && mesh.element_dims.size() != mesh.connectivity.size()) {
    throw ConstructionError("body '" + name + "': one set of box extents is required per element");
  }

  BodyData body;
  body.name = std::move(name);
  body.material = material;
  body.density = density;
  body.first_slot = n_slots_;
  const std::size_t body_index = bodies_.size();

  std::vector<ElementData> new_elements;
  for (std::size_t e = 0; e < mesh.connectivity.size(); ++e) {
    const auto& conn = mesh.connectivity[e];
    if (static_cast<int>(conn.size()) != npe) {
      throw ConstructionError("body '" + body.name + "' element " + std::to_string(e) + ": expected " +
                              std::to_string(npe) + " nodes");
    }
    for (auto n : conn) {
      if (n >= n_nodes) {
        throw ConstructionError("body '" + body.name + "' element " + std::to_string(e) +
                                ": node index " + std::to_string(n) + " out of range");
      }
    }
    ElementData el;
    el.body = body_index;
    if (mesh.kind == ElementKind::Tet10) {
      std::array<Vec3, 10> x;
      for (int a = 0; a < 10; ++a) x[a] = mesh.slots.col(static_cast<Eigen::Index>(conn[a]));
      el.basis = build_basis_tet10(x);
    } else if (mesh.kind == ElementKind::Beam3243) {
      el.basis = build_basis_beam3243(mesh.element_dims[e]);
    } else {
      el.basis = build_basis_shell3443(mesh.element_dims[e]);
    }
    for (auto n : conn) {
      for (int k = 0; k < spn; ++k) el.dof_map.push_back(n_slots_ + n * spn + k);
    }
    el.force_qp = make_quad_points(el.basis, quadrature_for(el.basis, QuadraturePurpose::Force));
    el.mass_qp = make_quad_points(el.basis, quadrature_for(el.basis, QuadraturePurpose::Mass));

    // The reference configuration must be stress free: F = N_ref H is a rotation.
    NodalMatrix N(3, el.basis.n_u());
    for (int k = 0; k < el.basis.n_u(); ++k) {
      N.col(k) = mesh.slots.col(static_cast<Eigen::Index>(el.dof_map[k] - n_slots_));
    }
    for (const auto& qp : el.force_qp) {
      const Mat3 F = N * qp.H;
      if ((F.transpose() * F - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
          F.determinant() <= 0.0) {
        throw ConstructionError("body '" + body.name + "' element " + std::to_string(e) +
                                ": reference nodal data is not a rigid placement of the element box");
      }
    }
    new_elements.push_back(std::move(el));
  }

  for (auto& el : new_elements) {
    body.elements.push_back(elements_.size());
    elements_.push_back(std::move(el));
  }
  const auto n_new = static_cast<std::size_t>(mesh.slots.cols());
  q_ref_.conservativeResize(static_cast<Eigen::Index>(3 * (n_slots_ + n_new)));
  for (std::size_t k = 0; k < n_new; ++k) {
    q_ref_.segment<3>(static_cast<Eigen::Index>(3 * (n_slots_ + k))) =
        mesh.slots.col(static_cast<Eigen::Index>(k));
    fixed_.push_back(0);
    position_.push_back(k % spn == 0 ? 1 : 0);
  }
  n_slots_ += n_new;
  body.mesh = std::move(mesh);
  bodies_.push_back(std::move(body));
  return body_index;
}

std::optional<std::size_t> Model::find_body(const std::string& name) const {
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    if (bodies_[i].name == name) return i;
  }
  return std::nullopt;
}

void Model::fix_slot(Slot s) {
  if (s >= n_slots_) throw InternalError("fix_slot: slot " + std::to_string(s) + " out of range");
  fixed_[s] = 1;
}

VecX Model::translation_vector(int axis) const {
  VecX t = VecX::Zero(dof_count());
  for (std::size_t s = 0; s < n_slots_; ++s) {
    if (position_[s]) t[static_cast<Eigen::Index>(3 * s) + axis] = 1.0;
  }
  return t;
}

Vec3 Model::interpolate(const VecX& q, std::size_t element, const VecX& s) const {
  const auto& map = elements_.at(element).dof_map;
  if (static_cast<std::size_t>(s.size()) != map.size()) {
    throw InternalError("shape vector length does not match element " + std::to_string(element));
  }
  Vec3 r = Vec3::Zero();
  for (std::size_t k = 0; k < map.size(); ++k) {
    r += s[static_cast<Eigen::Index>(k)] * q.segment<3>(static_cast<Eigen::Index>(3 * map[k]));
  }
  return r;
}

std::optional<LocatedPoint> locate_point(const Model& model, std::size_t body, const Vec3& x,
                                         const VecX& q, double tol) {
  for (std::size_t e : model.body(body).elements) {
    const auto& el = model.elements()[e];
    const auto& basis = el.basis;
    NodalMatrix N(3, basis.n_u());
    for (int k = 0; k < basis.n_u(); ++k) {
      N.col(k) = q.segment<3>(static_cast<Eigen::Index>(3 * el.dof_map[k]));
    }
    Vec3 u;
    if (basis.kind() == ElementKind::Tet10) {
      u = Vec3::Constant(0.25);
    } else if (basis.kind() == ElementKind::Beam3243) {
      u = Vec3(basis.dims()[0] / 2, 0, 0);
    } else {
      u = Vec3(basis.dims()[0] / 2, 0, basis.dims()[2] / 2);
    }
    const double scale = basis.kind() == ElementKind::Tet10 ? 1.0 : basis.dims().maxCoeff();
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      const auto mc = MaterialCoords::from(u);
      const Vec3 r = N * eval_shape(basis, mc, DomainPolicy::Lenient);
      const Mat3 F =
          N * eval_ref_gradients(basis, mc, DomainPolicy::Lenient) * basis.parent_jacobian(mc);
      const Vec3 du = F.fullPivLu().solve(x - r);
      if (!du.allFinite()) break;
      u += du;
      if (du.norm() <= 1e-13 * scale) {
        converged = true;
        break;
      }
    }
    if (converged && basis.contains(MaterialCoords::from(u), tol)) {
      return LocatedPoint{e, MaterialCoords::from(u)};
    }
  }
  return std::nullopt;
}

}  // namespace tlfea
