#include "tlfea/contact.hpp"

#include <cmath>
#include <numbers>

namespace tlfea {

ContactKinematics make_kinematics(const Vec3& n, double delta, const Vec3& v_A, const Vec3& v_B,
                                  double mobility_A, double mobility_B, const Vec3& x_c) {
  ContactKinematics k;
  k.n = n;
  k.delta = delta;
  k.v_rel = v_A - v_B;
  k.v_n = k.v_rel.dot(n);
  k.v_t = k.v_rel - k.v_n * n;
  const double mob = mobility_A + mobility_B;
  k.m_eff = mob > 0.0 ? 1.0 / mob : 0.0;
  k.x_c = x_c;
  return k;
}

double effective_radius(const ContactGeometry& g) {
  switch (g.kind) {
    case ContactGeometry::Kind::SphereSphere: return g.R_A * g.R_B / (g.R_A + g.R_B);
    case ContactGeometry::Kind::SpherePlane: return g.R_A;
    case ContactGeometry::Kind::Patch: return 0.0;
  }
  return 0.0;
}

ContactDerived effective_properties(const ContactParams& p, const ContactKinematics& kin) {
  ContactDerived d;
  d.E_eff = 1.0 / ((1 - p.nu_A * p.nu_A) / p.E_A + (1 - p.nu_B * p.nu_B) / p.E_B);
  const double G_A = p.E_A / (2 * (1 + p.nu_A));
  const double G_B = p.E_B / (2 * (1 + p.nu_B));
  d.G_eff = 1.0 / ((2 - p.nu_A) / G_A + (2 - p.nu_B) / G_B);
  if (p.geometry.kind == ContactGeometry::Kind::Patch) {
    d.a = std::sqrt(p.geometry.A_patch / std::numbers::pi);
  } else {
    d.a = kin.delta > 0.0 ? std::sqrt(effective_radius(p.geometry) * kin.delta) : 0.0;
  }
  d.S_n = 2 * d.E_eff * d.a;
  d.k_n = 4.0 / 3.0 * d.E_eff * d.a;
  d.k_t = 8 * d.G_eff * d.a;
  const double le = std::log(p.e);
  d.beta = le / std::sqrt(le * le + std::numbers::pi * std::numbers::pi);
  const double c = -2 * std::sqrt(5.0 / 6.0) * d.beta;
  d.gamma_n = c * std::sqrt(d.S_n * kin.m_eff);
  d.gamma_t = c * std::sqrt(kin.m_eff * d.k_t);
  return d;
}

double smooth_max(double x, double epsilon) { return 0.5 * (x + std::sqrt(x * x + epsilon * epsilon)); }

Vec3 normal_force(const ContactKinematics& kin, const ContactDerived& d, double smooth_epsilon) {
  if (kin.delta <= 0.0) return Vec3::Zero();
  const double x = d.k_n * kin.delta - d.gamma_n * kin.v_n;
  const double mag = smooth_epsilon > 0.0 ? smooth_max(x, smooth_epsilon) : std::max(0.0, x);
  return mag * kin.n;
}

TangentialResult tangential_force(const ContactKinematics& kin, const ContactDerived& d,
                                  const ContactPairState& state, double dt, const Vec3& F_n,
                                  double mu) {
  TangentialResult r;
  r.state.active = true;
  const Mat3 Pt = Mat3::Identity() - kin.n * kin.n.transpose();
  r.state.delta_t = Pt * (state.delta_t + dt * kin.v_t);
  const Vec3 trial = -d.k_t * r.state.delta_t - d.gamma_t * kin.v_t;
  const double cap = mu * F_n.norm();
  const double tn = trial.norm();
  if (tn <= cap) {
    r.F_t = trial;
    return r;
  }
  r.slipping = true;
  r.F_t = cap * trial / tn;
  if (d.k_t > 0.0) {
    r.state.delta_t = -(r.F_t + d.gamma_t * kin.v_t) / d.k_t;
  } else {
    r.F_t.setZero();
    r.state.delta_t.setZero();
  }
  return r;
}

ContactPairState reset_on_separation(const ContactPairState& /*state*/) { return {}; }

// ---------------------------------------------------------------------------------------------

namespace {

Vec3 side_velocity(const ContactSide& s, const VecX& v) {
  if (s.kind == ContactSide::Kind::Plane || s.point.ground) return Vec3::Zero();
  return eval_point(v, s.point);
}

}  // namespace

ContactKinematics pair_kinematics(const ContactPair& pair, const VecX& q, const VecX& v) {
  const auto& A = pair.A;
  const auto& B = pair.B;
  const Vec3 xA = eval_point(q, A.point);
  Vec3 n = Vec3::UnitZ();
  double delta = 0.0;
  Vec3 x_c = xA;
  if (B.kind == ContactSide::Kind::Plane) {
    n = B.plane_normal;
    const double gap = (xA - B.plane_point).dot(n);
    const double radius = A.kind == ContactSide::Kind::Sphere ? A.radius : 0.0;
    delta = radius - gap;
    x_c = xA - (radius - 0.5 * delta) * n;
  } else {
    const Vec3 xB = eval_point(q, B.point);
    const Vec3 dx = xA - xB;
    const double dist = dx.norm();
    if (dist > 0.0) n = dx / dist;
    delta = A.radius + B.radius - dist;
    x_c = xB + (B.radius - 0.5 * delta) * n;
  }
  return make_kinematics(n, delta, side_velocity(A, v), side_velocity(B, v), A.mobility,
                         B.mobility, x_c);
}

void distribute_contact_forces(const ContactPair& pair, const Vec3& F, VecX& out) {
  auto add = [&](const ContactSide& s, const Vec3& f) {
    if (s.kind == ContactSide::Kind::Plane || s.point.ground) return;
    scatter_add(s.point.dofs, point_load_distribute(s.point.s, f), out);
  };
  add(pair.A, F);
  add(pair.B, -F);
}

MobilityCalculator::MobilityCalculator(const Model& model, const MassMatrix& mass) {
  const auto n = static_cast<Eigen::Index>(model.slot_count());
  free_index_.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!model.is_fixed(static_cast<Slot>(s))) free_index_[static_cast<std::size_t>(s)] = n_free_++;
  }
  std::vector<Eigen::Triplet<double>> t;
  const auto& m = mass.scalar();
  for (int k = 0; k < m.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      const auto i = free_index_[static_cast<std::size_t>(it.row())];
      const auto j = free_index_[static_cast<std::size_t>(it.col())];
      if (i >= 0 && j >= 0) t.emplace_back(static_cast<int>(i), static_cast<int>(j), it.value());
    }
  }
  Eigen::SparseMatrix<double> mf(n_free_, n_free_);
  mf.setFromTriplets(t.begin(), t.end());
  llt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(mf);
  if (llt_->info() != Eigen::Success) throw InternalError("mass matrix factorization failed");
}

double MobilityCalculator::mobility(const AttachmentPoint& p) const {
  if (p.ground) return 0.0;
  VecX s = VecX::Zero(n_free_);
  bool any = false;
  for (std::size_t k = 0; k < p.dofs.size(); ++k) {
    const auto i = free_index_.at(p.dofs[k]);
    if (i < 0) continue;
    s[i] += p.s[static_cast<Eigen::Index>(k)];
    any = true;
  }
  if (!any) return 0.0;
  const VecX x = llt_->solve(s);
  return s.dot(x);
}

ContactSet::Evaluation ContactSet::evaluate(const VecX& q, const VecX& v, double dt) const {
  Evaluation ev;
  ev.force = VecX::Zero(q.size());
  for (const auto& pair : pairs_) {
    const auto kin = pair_kinematics(pair, q, v);
    ContactReport rep;
    rep.delta = kin.delta;
    rep.x_c = kin.x_c;
    if (kin.delta <= 0.0 || kin.m_eff <= 0.0) {
      if (kin.delta > 0.0) ++ev.skipped;
      ev.states.push_back(reset_on_separation(pair.state));
      ev.reports.push_back(rep);
      continue;
    }
    const auto d = effective_properties(pair.params, kin);
    const Vec3 Fn = normal_force(kin, d, smooth_epsilon);
    const auto tan = tangential_force(kin, d, pair.state, dt, Fn, pair.params.mu);
    rep.active = true;
    rep.F_n = Fn;
    rep.F_t = tan.F_t;
    distribute_contact_forces(pair, Fn + tan.F_t, ev.force);
    ev.states.push_back(tan.state);
    ev.reports.push_back(rep);
  }
  return ev;
}

void ContactSet::commit(const std::vector<ContactPairState>& states) {
  if (states.size() != pairs_.size()) throw InternalError("contact state count mismatch");
  for (std::size_t i = 0; i < pairs_.size(); ++i) pairs_[i].state = states[i];
}

}  // namespace tlfea
