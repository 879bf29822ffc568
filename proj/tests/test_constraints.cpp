#include "oracles.hpp"

#include "tlfea/constraints.hpp"

#include <doctest.h>

using namespace tlfea;
using oracle::rel_err;

namespace {

/// A beam (body 0) and a tet (body 1), so primitives can couple two bodies.
Model two_bodies() {
  Model m;
  m.add_body("beam", oracle::beam_mesh(2, 1.0, 0.04, 0.04), oracle::svk_material(), 1000);
  auto corners = oracle::default_tet_corners();
  for (auto& c : corners) c += Vec3(0.5, 1.5, 0.2);
  m.add_body("tet", oracle::tet_mesh(corners), oracle::svk_material(), 1000);
  return m;
}

AttachmentPoint beam_point(const Model& m, std::size_t e, double u, double v = 0.0, double w = 0.0) {
  return AttachmentPoint::on_element(m, e, {u, v, w});
}

AttachmentPoint tet_point(const Model& m, double a, double b, double c) {
  return AttachmentPoint::on_element(m, 2, {a, b, c});
}

ConstraintPrimitive make(PrimitiveKind k, std::vector<AttachmentPoint> pts, TimeFunction f = {}) {
  ConstraintPrimitive c;
  c.kind = k;
  c.points = std::move(pts);
  c.f = f;
  return c;
}

/// One primitive of each kind with attachments spread over both bodies and the ground.
std::vector<ConstraintPrimitive> sample_primitives(const Model& m) {
  std::vector<ConstraintPrimitive> out;
  out.push_back(make(PrimitiveKind::DP1,
                     {beam_point(m, 0, 0.1, 0.01), beam_point(m, 0, 0.4, 0, -0.02), tet_point(m, 0.1, 0.2, 0.3),
                      beam_point(m, 1, 0.2, 0.01, 0.01)},
                     TimeFunction::sine(0.1, 0.05, 3.0)));
  out.push_back(make(PrimitiveKind::DP2,
                     {beam_point(m, 0, 0.1), beam_point(m, 0, 0.3, 0.01), beam_point(m, 1, 0.25),
                      tet_point(m, 0.25, 0.25, 0.25)}));
  out.push_back(make(PrimitiveKind::DIST, {beam_point(m, 1, 0.5), tet_point(m, 0.6, 0.1, 0.1)},
                     TimeFunction::ramp(1.2, 0.5)));
  auto cd = make(PrimitiveKind::CD, {AttachmentPoint::fixed(Vec3(0.2, 0.1, 0)), tet_point(m, 0.0, 0.3, 0.5)},
                 TimeFunction::constant(0.3));
  cd.d = Vec3::UnitY();
  out.push_back(cd);
  return out;
}

/// Dense Jacobian row assembled from the point blocks.
VecX dense_row(const ConstraintPrimitive& c, const VecX& q, double t) {
  VecX r = VecX::Zero(q.size());
  for (const auto& [i, v] : primitive_jacobian_row(c, q, t)) r[i] = v;
  return r;
}

}  // namespace

TEST_SUITE("constraints") {
  TEST_CASE("eval_point: node, reference point and independent summation") {
    const Model m = two_bodies();
    const VecX& q = m.reference_q();
    // T10 corner node 2 of body 1 lies at parent (1, 0, 0).
    const auto p = tet_point(m, 1, 0, 0);
    CHECK((eval_point(q, p) - q.segment<3>(3 * m.body(1).node_slot(1))).norm() < 1e-14);
    const auto b = beam_point(m, 1, 0.3, 0.01, -0.005);
    CHECK((eval_point(q, b) - Vec3(0.8, 0.01, -0.005)).norm() < 1e-14);
    std::mt19937_64 rng(1);
    const VecX qr = q + 0.1 * VecX::Random(q.size());
    Vec3 expect = Vec3::Zero();
    const auto& el = m.elements()[1];
    const VecX s = eval_shape(el.basis, {0.3, 0.01, -0.005});
    for (int i = 0; i < 8; ++i) expect += s[i] * qr.segment<3>(static_cast<Eigen::Index>(3 * el.dof_map[i]));
    CHECK((eval_point(qr, b) - expect).norm() < 1e-14);
    CHECK(eval_point(qr, AttachmentPoint::fixed(Vec3(1, 2, 3))) == Vec3(1, 2, 3));
    AttachmentPoint stale = b;
    stale.s.conservativeResize(3);
    CHECK_THROWS_AS(eval_point(q, stale), InternalError);
  }

  TEST_CASE("residual examples") {
    const VecX q = VecX::Zero(3);
    auto g = [](double x, double y, double z) { return AttachmentPoint::fixed(Vec3(x, y, z)); };
    CHECK(primitive_residual(make(PrimitiveKind::DP1, {g(0, 0, 0), g(1, 0, 0), g(5, 5, 5), g(5, 7, 5)}), q, 0) == 0.0);
    CHECK(primitive_residual(make(PrimitiveKind::DIST, {g(1, 1, 1), g(1, 1, 3)}, TimeFunction::constant(2)), q, 0) == 0.0);
    CHECK(primitive_residual(make(PrimitiveKind::CD, {g(0, 0, 0), g(3, 1, 4)}, TimeFunction::constant(3)), q, 0) == 0.0);
    auto dist = make(PrimitiveKind::DIST, {g(0, 0, 0), g(3, 4, 0)}, TimeFunction::ramp(1.0, 2.0));
    CHECK(primitive_residual(dist, q, 2.0) == doctest::Approx(0.5 * (25.0 - 25.0)));
    CHECK(primitive_residual(dist, q, 0.0) == doctest::Approx(12.0));
    auto cd = make(PrimitiveKind::CD, {g(0, 0, 0), g(3, 1, 4)}, TimeFunction::constant(0));
    cd.d = Vec3::UnitZ();
    CHECK(primitive_residual(cd, q, 0) == 4.0);
    CHECK_THROWS_AS(primitive_residual(make(PrimitiveKind::DP1, {g(0, 0, 0), g(1, 0, 0)}), q, 0), InternalError);
  }

  TEST_CASE("Jacobian rows match central differences of the residual") {
    const Model m = two_bodies();
    std::mt19937_64 rng(2);
    const auto prims = sample_primitives(m);
    for (const auto& c : prims) {
      double worst = 0.0;
      for (int state = 0; state < 20; ++state) {
        VecX q = m.reference_q();
        for (Eigen::Index k = 0; k < q.size(); ++k) q[k] += 0.05 * oracle::uniform(rng);
        const double t = oracle::uniform(rng, 0, 1);
        VecX dir(q.size());
        for (Eigen::Index k = 0; k < q.size(); ++k) dir[k] = oracle::uniform(rng);
        const double eps = 1e-6;
        const double fd = (primitive_residual(c, q + eps * dir, t) - primitive_residual(c, q - eps * dir, t)) / (2 * eps);
        const double an = dense_row(c, q, t).dot(dir);
        worst = std::max(worst, rel_err(an, fd, 1e-8));
      }
      CHECK_MESSAGE(worst < 1e-6, to_string(c.kind));
    }
  }

  TEST_CASE("CD blocks are constant; DIST at coincident points has zero rows") {
    const Model m = two_bodies();
    const auto cd = sample_primitives(m)[3];
    const VecX q0 = m.reference_q();
    const VecX q1 = q0 + 0.2 * VecX::Random(q0.size());
    CHECK((dense_row(cd, q0, 0) - dense_row(cd, q1, 0.5)).norm() == 0.0);
    const auto blocks = primitive_jacobian_blocks(cd, q0, 0);
    REQUIRE(blocks.size() == 1);  // the ground side carries no block
    const auto& p = cd.points[1];
    for (std::size_t k = 0; k < p.dofs.size(); ++k) {
      CHECK((blocks[0].row.segment<3>(static_cast<Eigen::Index>(3 * k)).transpose() - p.s[static_cast<Eigen::Index>(k)] * cd.d).norm() < 1e-15);
    }
    const auto pt = tet_point(m, 0.2, 0.2, 0.2);
    const auto dist = make(PrimitiveKind::DIST, {pt, pt}, TimeFunction::constant(1.0));
    for (const auto& b : primitive_jacobian_blocks(dist, q1, 0)) CHECK(b.row.norm() == 0.0);
  }

  TEST_CASE("apply_constraint_term: satisfied set, hand scatter, penalty linearity") {
    const Model m = two_bodies();
    const VecX q = m.reference_q();
    const auto p = tet_point(m, 0.1, 0.2, 0.3);
    const Vec3 r = eval_point(q, p);
    auto cd = make(PrimitiveKind::CD, {AttachmentPoint::fixed(Vec3::Zero()), p}, TimeFunction::constant(r.x()));
    cd.d = Vec3::UnitX();

    ConstraintSet set(10.0);
    set.add(cd);
    VecX out = VecX::Zero(q.size());
    set.apply_constraint_term(q, 0, out);
    CHECK(out.norm() == 0.0);

    ConstraintSet hand(0.0);
    hand.add(cd);
    hand.multipliers()[0] = 1.0;
    out.setZero();
    hand.apply_constraint_term(q, 0, out);
    VecX expect = VecX::Zero(q.size());
    for (std::size_t k = 0; k < p.dofs.size(); ++k) {
      expect.segment<3>(static_cast<Eigen::Index>(3 * p.dofs[k])) += p.s[static_cast<Eigen::Index>(k)] * cd.d;
    }
    CHECK((out - expect).norm() < 1e-15);

    const VecX qd = q + 0.01 * VecX::Random(q.size());
    ConstraintSet a(3.0), b(6.0);
    for (const auto& c : sample_primitives(m)) {
      a.add(c);
      b.add(c);
    }
    VecX oa = VecX::Zero(q.size()), ob = oa;
    a.apply_constraint_term(qd, 0.2, oa, 0.5);
    b.apply_constraint_term(qd, 0.2, ob, 0.5);
    CHECK(oracle::rel_err_mat(ob, VecX(2.0 * oa)) < 1e-14);
  }

  TEST_CASE("transpose product and Gauss-Newton term agree with the dense Jacobian") {
    const Model m = two_bodies();
    ConstraintSet set(7.0);
    auto prims = sample_primitives(m);
    prims[1].rho = 3.0;
    set.add(prims);
    const VecX q = m.reference_q() + 0.05 * VecX::Random(m.dof_count());
    MatX C(set.size(), q.size());
    for (std::size_t i = 0; i < set.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = dense_row(set.primitives()[i], q, 0.1).transpose();
    const VecX mu = VecX::Random(static_cast<Eigen::Index>(set.size()));
    VecX out = VecX::Zero(q.size());
    set.apply_transpose(q, 0.1, mu, out);
    CHECK(oracle::rel_err_mat(out, VecX(C.transpose() * mu)) < 1e-14);

    std::vector<Eigen::Triplet<double>> t;
    set.append_gauss_newton(q, 0.1, 0.25, t);
    Eigen::SparseMatrix<double> G(q.size(), q.size());
    G.setFromTriplets(t.begin(), t.end());
    VecX rho(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) rho[static_cast<Eigen::Index>(i)] = set.penalty(i);
    CHECK(rho[1] == 3.0);
    CHECK(rho[0] == 7.0);
    CHECK(oracle::rel_err_mat(MatX(G), MatX(0.25 * C.transpose() * rho.asDiagonal() * C)) < 1e-13);

    // The constraint term is the gradient of lambda.c + rho c^2 / 2.
    set.multipliers() = VecX::Random(static_cast<Eigen::Index>(set.size()));
    VecX term = VecX::Zero(q.size());
    set.apply_constraint_term(q, 0.1, term);
    auto phi = [&](const VecX& x) {
      const VecX c = set.residuals(x, 0.1);
      double s = 0.0;
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        s += set.multipliers()[k] * c[k] + 0.5 * set.penalty(i) * c[k] * c[k];
      }
      return s;
    };
    VecX fd(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      const VecX e = 1e-6 * VecX::Unit(q.size(), j);
      fd[j] = (phi(q + e) - phi(q - e)) / 2e-6;
    }
    CHECK(oracle::rel_err_mat(term, fd) < 1e-7);
  }

  TEST_CASE("multiplier update") {
    const Model m = two_bodies();
    ConstraintSet set(10.0);
    set.add(sample_primitives(m)[3]);
    set.update_multipliers(VecX::Zero(1));
    CHECK(set.multipliers()[0] == 0.0);
    set.update_multipliers(VecX::Constant(1, 0.01));
    CHECK(set.multipliers()[0] == doctest::Approx(0.1).epsilon(1e-15));
    set.set_penalty_factor(10.0);
    CHECK(set.penalty(0) == 100.0);
  }

  TEST_CASE("joint composition counts and reference satisfaction") {
    const Model m = two_bodies();
    const VecX& q = m.reference_q();
    JointSpec sph;
    sph.kind = JointKind::Spherical;
    sph.on_b = beam_point(m, 1, 0.5);
    sph.on_c = tet_point(m, 0.2, 0.2, 0.2);
    sph.label = "s";
    const auto s = make_joint(sph, q);
    REQUIRE(s.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(s[k].kind == PrimitiveKind::CD);
      CHECK(s[k].d == Vec3::Unit(k));
      CHECK(s[k].f.is_constant());
    }

    JointSpec rev = sph;
    rev.kind = JointKind::Revolute;
    rev.b_dirs = {{beam_point(m, 1, 0.1), beam_point(m, 1, 0.4)}};
    rev.c_dirs = {{tet_point(m, 0, 0, 0), tet_point(m, 0, 1, 0)}, {tet_point(m, 0, 0, 0), tet_point(m, 0, 0, 1)}};
    const auto r = make_joint(rev, q);
    CHECK(r.size() == 5);
    CHECK(std::count_if(r.begin(), r.end(), [](const auto& c) { return c.kind == PrimitiveKind::DP1; }) == 2);

    JointSpec fix = rev;
    fix.kind = JointKind::Fixed;
    fix.b_dirs.push_back({beam_point(m, 1, 0.1, -0.01), beam_point(m, 1, 0.1, 0.01)});
    const auto f = make_joint(fix, q);
    CHECK(f.size() == 6);
    for (const auto* set : {&s, &r, &f}) {
      for (const auto& c : *set) CHECK(std::abs(primitive_residual(c, q, 0.0)) < 1e-14);
    }
    // A spherical joint to the ground in its own location has zero offsets.
    JointSpec g;
    g.on_b = beam_point(m, 0, 0);
    g.on_c = AttachmentPoint::fixed(Vec3::Zero());
    for (const auto& c : make_joint(g, q)) CHECK(c.f(0.0) == 0.0);

    JointSpec bad = rev;
    bad.b_dirs = {{beam_point(m, 1, 0.2), beam_point(m, 1, 0.2)}};
    CHECK_THROWS_AS(make_joint(bad, q), ConstructionError);
    bad.b_dirs.clear();
    CHECK_THROWS_AS(make_joint(bad, q), ConstructionError);
  }
}
