#include "tlfea/constraints.hpp"

#include <algorithm>
#include <map>

namespace tlfea {

namespace {

struct PointWeight {
  const AttachmentPoint* point;
  Vec3 w;
};

Vec3 diff(const VecX& q, const AttachmentPoint& tail, const AttachmentPoint& head) {
  return eval_point(q, head) - eval_point(q, tail);
}

void check_arity(const ConstraintPrimitive& c) {
  const std::size_t need = (c.kind == PrimitiveKind::DP1 || c.kind == PrimitiveKind::DP2) ? 4 : 2;
  if (c.points.size() != need) {
    throw InternalError(std::string(to_string(c.kind)) + " constraint needs " +
                        std::to_string(need) + " attachment points");
  }
}

// d c / d r_point for every attachment point (tail points negative, head points positive).
std::vector<PointWeight> point_weights(const ConstraintPrimitive& c, const VecX& q) {
  check_arity(c);
  const auto& p = c.points;
  switch (c.kind) {
    case PrimitiveKind::DP1:
    case PrimitiveKind::DP2: {
      const Vec3 a = diff(q, p[0], p[1]);
      const Vec3 b = diff(q, p[2], p[3]);
      return {{&p[0], -b}, {&p[1], b}, {&p[2], -a}, {&p[3], a}};
    }
    case PrimitiveKind::DIST: {
      const Vec3 a = diff(q, p[0], p[1]);
      return {{&p[0], -a}, {&p[1], a}};
    }
    case PrimitiveKind::CD: return {{&p[0], -c.d}, {&p[1], c.d}};
  }
  return {};
}

}  // namespace

AttachmentPoint AttachmentPoint::on_element(const Model& model, std::size_t element,
                                            const MaterialCoords& u) {
  const auto& el = model.elements().at(element);
  AttachmentPoint p;
  p.body = el.body;
  p.element = element;
  p.u = u;
  p.s = eval_shape(el.basis, u);
  p.dofs = el.dof_map;
  return p;
}

AttachmentPoint AttachmentPoint::fixed(const Vec3& x) {
  AttachmentPoint p;
  p.ground = true;
  p.world = x;
  return p;
}

Vec3 eval_point(const VecX& q, const AttachmentPoint& p) {
  if (p.ground) return p.world;
  if (static_cast<std::size_t>(p.s.size()) != p.dofs.size()) {
    throw InternalError("attachment shape cache does not match its element");
  }
  Vec3 r = Vec3::Zero();
  for (std::size_t k = 0; k < p.dofs.size(); ++k) {
    r += p.s[static_cast<Eigen::Index>(k)] * q.segment<3>(static_cast<Eigen::Index>(3 * p.dofs[k]));
  }
  return r;
}

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::DP1: return "dp1";
    case PrimitiveKind::DP2: return "dp2";
    case PrimitiveKind::DIST: return "dist";
    case PrimitiveKind::CD: return "cd";
  }
  return "?";
}

std::string_view to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Spherical: return "spherical";
    case JointKind::Revolute: return "revolute";
    case JointKind::Fixed: return "fixed";
  }
  return "?";
}

double primitive_residual(const ConstraintPrimitive& c, const VecX& q, double t) {
  check_arity(c);
  const auto& p = c.points;
  const double f = c.f(t);
  switch (c.kind) {
    case PrimitiveKind::DP1:
    case PrimitiveKind::DP2: return diff(q, p[0], p[1]).dot(diff(q, p[2], p[3])) - f;
    case PrimitiveKind::DIST: {
      const Vec3 a = diff(q, p[0], p[1]);
      return 0.5 * (a.dot(a) - f * f);
    }
    case PrimitiveKind::CD: return c.d.dot(diff(q, p[0], p[1])) - f;
  }
  return 0.0;
}

std::vector<JacobianBlock> primitive_jacobian_blocks(const ConstraintPrimitive& c, const VecX& q,
                                                     double /*t*/) {
  std::vector<JacobianBlock> out;
  for (const auto& [point, w] : point_weights(c, q)) {
    if (point->ground) continue;
    JacobianBlock b;
    b.dofs = point->dofs;
    b.row.resize(static_cast<Eigen::Index>(3 * b.dofs.size()));
    for (std::size_t k = 0; k < b.dofs.size(); ++k) {
      b.row.segment<3>(static_cast<Eigen::Index>(3 * k)) =
          point->s[static_cast<Eigen::Index>(k)] * w.transpose();
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<std::pair<Eigen::Index, double>> primitive_jacobian_row(const ConstraintPrimitive& c,
                                                                    const VecX& q, double t) {
  std::map<Eigen::Index, double> merged;
  for (const auto& b : primitive_jacobian_blocks(c, q, t)) {
    for (std::size_t k = 0; k < b.dofs.size(); ++k) {
      for (int a = 0; a < 3; ++a) {
        merged[static_cast<Eigen::Index>(3 * b.dofs[k]) + a] +=
            b.row[static_cast<Eigen::Index>(3 * k) + a];
      }
    }
  }
  return {merged.begin(), merged.end()};
}

std::vector<ConstraintPrimitive> make_joint(const JointSpec& spec, const VecX& q_ref) {
  const std::size_t need_b = spec.kind == JointKind::Spherical ? 0 : spec.kind == JointKind::Revolute ? 1 : 2;
  const std::size_t need_c = spec.kind == JointKind::Spherical ? 0 : 2;
  if (spec.b_dirs.size() != need_b || spec.c_dirs.size() != need_c) {
    throw ConstructionError(std::string(to_string(spec.kind)) + " joint '" + spec.label +
                            "' needs " + std::to_string(need_b) + " + " + std::to_string(need_c) +
                            " direction pairs");
  }
  auto direction = [&](const std::pair<AttachmentPoint, AttachmentPoint>& pr) {
    const Vec3 a = diff(q_ref, pr.first, pr.second);
    if (a.norm() < 1e-12) {
      throw ConstructionError("joint '" + spec.label + "': zero-length reference direction");
    }
    return a;
  };

  std::vector<ConstraintPrimitive> out;
  const Vec3 offset = diff(q_ref, spec.on_c, spec.on_b);
  for (int k = 0; k < 3; ++k) {
    ConstraintPrimitive cd;
    cd.kind = PrimitiveKind::CD;
    cd.points = {spec.on_c, spec.on_b};
    cd.d = Vec3::Unit(k);
    cd.f = TimeFunction::constant(offset[k]);
    cd.label = spec.label + ".cd" + "xyz"[k];
    out.push_back(std::move(cd));
  }
  auto dp1 = [&](const std::pair<AttachmentPoint, AttachmentPoint>& a,
                 const std::pair<AttachmentPoint, AttachmentPoint>& b, const std::string& tag) {
    ConstraintPrimitive c;
    c.kind = PrimitiveKind::DP1;
    c.points = {a.first, a.second, b.first, b.second};
    c.f = TimeFunction::constant(direction(a).dot(direction(b)));
    c.label = spec.label + "." + tag;
    out.push_back(std::move(c));
  };
  if (spec.kind == JointKind::Revolute) {
    dp1(spec.b_dirs[0], spec.c_dirs[0], "dp1a");
    dp1(spec.b_dirs[0], spec.c_dirs[1], "dp1b");
  } else if (spec.kind == JointKind::Fixed) {
    dp1(spec.b_dirs[0], spec.c_dirs[0], "dp1xy");
    dp1(spec.b_dirs[0], spec.c_dirs[1], "dp1xz");
    dp1(spec.b_dirs[1], spec.c_dirs[1], "dp1yz");
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

void ConstraintSet::add(ConstraintPrimitive c) {
  check_arity(c);
  primitives_.push_back(std::move(c));
  lambda_.conservativeResize(static_cast<Eigen::Index>(primitives_.size()));
  lambda_[lambda_.size() - 1] = 0.0;
}

void ConstraintSet::add(std::vector<ConstraintPrimitive> cs) {
  for (auto& c : cs) add(std::move(c));
}

double ConstraintSet::penalty(std::size_t i) const {
  return factor_ * primitives_.at(i).rho.value_or(rho_);
}

VecX ConstraintSet::residuals(const VecX& q, double t) const {
  VecX c(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    c[static_cast<Eigen::Index>(i)] = primitive_residual(primitives_[i], q, t);
  }
  return c;
}

void ConstraintSet::apply_constraint_term(const VecX& q, double t, VecX& out, double scale) const {
  for (std::size_t i = 0; i < size(); ++i) {
    const double c = primitive_residual(primitives_[i], q, t);
    const double mult = scale * (lambda_[static_cast<Eigen::Index>(i)] + penalty(i) * c);
    if (mult == 0.0) continue;
    for (const auto& b : primitive_jacobian_blocks(primitives_[i], q, t)) {
      for (std::size_t k = 0; k < b.dofs.size(); ++k) {
        out.segment<3>(static_cast<Eigen::Index>(3 * b.dofs[k])) +=
            mult * b.row.segment<3>(static_cast<Eigen::Index>(3 * k)).transpose();
      }
    }
  }
}

void ConstraintSet::apply_transpose(const VecX& q, double t, const VecX& mu, VecX& out) const {
  for (std::size_t i = 0; i < size(); ++i) {
    const double m = mu[static_cast<Eigen::Index>(i)];
    for (const auto& [dof, val] : primitive_jacobian_row(primitives_[i], q, t)) out[dof] += m * val;
  }
}

void ConstraintSet::append_gauss_newton(const VecX& q, double t, double scale,
                                        std::vector<Eigen::Triplet<double>>& out) const {
  for (std::size_t i = 0; i < size(); ++i) {
    const auto row = primitive_jacobian_row(primitives_[i], q, t);
    const double w = scale * penalty(i);
    for (const auto& [a, va] : row) {
      for (const auto& [b, vb] : row) {
        out.emplace_back(static_cast<int>(a), static_cast<int>(b), w * va * vb);
      }
    }
  }
}

void ConstraintSet::update_multipliers(const VecX& c) {
  for (std::size_t i = 0; i < size(); ++i) {
    lambda_[static_cast<Eigen::Index>(i)] += penalty(i) * c[static_cast<Eigen::Index>(i)];
  }
}

}  // namespace tlfea
