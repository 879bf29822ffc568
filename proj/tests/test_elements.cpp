#include "oracles.hpp"

#include "tlfea/elements.hpp"

#include <doctest.h>

using namespace tlfea;
using oracle::rel_err;

namespace {

const Vec3 kBeamDims(0.8, 0.05, 0.03);
const Vec3 kShellDims(0.6, 0.01, 0.4);

MaterialCoords random_point(const ElementBasis& b, std::mt19937_64& rng) {
  const Vec3 d = b.dims();
  switch (b.kind()) {
    case ElementKind::Beam3243:
      return {oracle::uniform(rng, 0, d[0]), oracle::uniform(rng, -d[1] / 2, d[1] / 2),
              oracle::uniform(rng, -d[2] / 2, d[2] / 2)};
    case ElementKind::Shell3443:
      return {oracle::uniform(rng, 0, d[0]), oracle::uniform(rng, -d[1] / 2, d[1] / 2),
              oracle::uniform(rng, 0, d[2])};
    case ElementKind::Tet10:
      for (;;) {
        const Vec3 x(oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1));
        if (x.sum() <= 1.0) return MaterialCoords::from(x);
      }
  }
  return {};
}

VecX unit(int n, int k) {
  VecX e = VecX::Zero(n);
  e[k] = 1.0;
  return e;
}

std::vector<ElementBasis> all_bases() {
  return {build_basis_beam3243(kBeamDims), build_basis_shell3443(kShellDims),
          build_basis_tet10(oracle::tet10_nodes(oracle::default_tet_corners()))};
}

}  // namespace

TEST_SUITE("elements") {
  TEST_CASE("basis sizes and B-matrix reconstruction") {
    const auto beam = build_basis_beam3243(kBeamDims);
    const auto shell = build_basis_shell3443(kShellDims);
    const auto tet = build_basis_tet10(oracle::tet10_nodes(oracle::default_tet_corners()));
    CHECK(beam.n_u() == 8);
    CHECK(shell.n_u() == 16);
    CHECK(tet.n_u() == 10);
    for (const auto* b : {&beam, &shell}) {
      const MatX I = MatX::Identity(b->n_u(), b->n_u());
      CHECK((b->b_matrix() * b->b_inverse() - I).cwiseAbs().rowwise().sum().maxCoeff() < 1e-10);
      CHECK((b->b_inverse() * b->b_matrix() - I).cwiseAbs().rowwise().sum().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("beam: Kronecker property of positions and slopes") {
    const auto b = build_basis_beam3243(kBeamDims);
    const MaterialCoords P1{0, 0, 0}, P2{kBeamDims[0], 0, 0};
    CHECK((eval_shape(b, P1) - unit(8, 0)).norm() < 1e-12);
    CHECK((eval_shape(b, P2) - unit(8, 4)).norm() < 1e-12);
    // Slope unknowns: d s / d u_k at node n is 1 exactly in the row of that slope.
    for (int n = 0; n < 2; ++n) {
      const GradMatrix H = eval_ref_gradients(b, n == 0 ? P1 : P2);
      for (int k = 0; k < 3; ++k) {
        const VecX col = H.col(k);
        CHECK((col - unit(8, 4 * n + 1 + k)).norm() < 1e-10);
      }
    }
    // Row 2 of H at P1 is the u-slope unknown: [1, 0, 0].
    const GradMatrix H1 = eval_ref_gradients(b, P1);
    CHECK((H1.row(1) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-10);
  }

  TEST_CASE("shell: Kronecker property at the four nodes") {
    const auto b = build_basis_shell3443(kShellDims);
    const auto nodes = b.node_coords();
    REQUIRE(nodes.size() == 4);
    for (int n = 0; n < 4; ++n) {
      CHECK((eval_shape(b, nodes[n]) - unit(16, 4 * n)).norm() < 1e-10);
      const GradMatrix H = eval_ref_gradients(b, nodes[n]);
      for (int k = 0; k < 3; ++k) CHECK((VecX(H.col(k)) - unit(16, 4 * n + 1 + k)).norm() < 1e-10);
    }
    // Node 3 position is slot 9 (index 8); node 2 w-slope row of H is [0, 0, 1].
    CHECK(eval_shape(b, nodes[2])[8] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((eval_ref_gradients(b, nodes[1]).row(7) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-10);
    // Node 1 at slot 1.
    CHECK((eval_shape(b, nodes[0]) - unit(16, 0)).norm() < 1e-12);
  }

  TEST_CASE("ANCF: reference and translated nodal data reproduce the affine map") {
    std::mt19937_64 rng(11);
    for (const auto& b : all_bases()) {
      if (b.kind() == ElementKind::Tet10) continue;
      const NodalMatrix N = b.reference_nodal_matrix();
      const Vec3 c(0.3, -0.7, 1.9);
      NodalMatrix Nt = N;
      for (int k = 0; k < b.n_u(); k += 4) Nt.col(k) += c;
      // Constant field: all positions c, all slopes zero.
      NodalMatrix Nc = NodalMatrix::Zero(3, b.n_u());
      for (int k = 0; k < b.n_u(); k += 4) Nc.col(k) = c;
      for (int t = 0; t < 10; ++t) {
        const auto u = random_point(b, rng);
        const VecX s = eval_shape(b, u);
        CHECK((N * s - u.vec()).norm() < 1e-12);
        CHECK((Nt * s - (u.vec() + c)).norm() < 1e-12);
        CHECK((Nc * s - c).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("tet10: Kronecker, partition of unity, centroid and midside values") {
    const auto b = build_basis_tet10(oracle::tet10_nodes(oracle::default_tet_corners()));
    const auto nodes = b.node_coords();
    for (int a = 0; a < 10; ++a) CHECK((eval_shape(b, nodes[a]) - unit(10, a)).norm() < 1e-14);
    CHECK(eval_shape(b, {0.3, 0.2, 0.1}).sum() == doctest::Approx(1.0).epsilon(1e-14));
    const VecX sc = eval_shape(b, {0.25, 0.25, 0.25});
    for (int a = 0; a < 4; ++a) CHECK(sc[a] == doctest::Approx(-0.125).epsilon(1e-14));
    for (int a = 4; a < 10; ++a) CHECK(sc[a] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(eval_shape(b, {0.5, 0, 0})[4] == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    double worst = 0.0, worst_grad = 0.0;
    for (int t = 0; t < 100; ++t) {
      const auto u = random_point(b, rng);
      worst = std::max(worst, std::abs(eval_shape(b, u).sum() - 1.0));
      worst_grad = std::max(worst_grad, eval_ref_gradients(b, u).colwise().sum().norm());
    }
    CHECK(worst < 1e-12);
    CHECK(worst_grad < 1e-11);
  }

  TEST_CASE("tet10: H maps reference positions to F = I") {
    const auto x = oracle::tet10_nodes(oracle::default_tet_corners());
    const auto b = build_basis_tet10(x);
    NodalMatrix X(3, 10);
    for (int a = 0; a < 10; ++a) X.col(a) = x[a];
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
      const auto u = random_point(b, rng);
      CHECK((X * eval_ref_gradients(b, u) - Mat3::Identity()).norm() < 1e-12);
    }
  }

  TEST_CASE("H matches central differences of s") {
    std::mt19937_64 rng(17);
    for (const auto& b : all_bases()) {
      const Vec3 extent = b.kind() == ElementKind::Tet10 ? Vec3::Ones() : b.dims();
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) {
        // Keep the stencil inside the domain.
        MaterialCoords u = random_point(b, rng);
        if (b.kind() == ElementKind::Tet10) u = MaterialCoords::from(Vec3(Vec3::Constant(0.05) + 0.8 * u.vec()));
        const GradMatrix H = eval_ref_gradients(b, u);
        // For T10 the parent gradient is H (dX/dxi); compare in parent coordinates.
        const MatX Hp = b.kind() == ElementKind::Tet10 ? MatX(H * b.parent_jacobian(u)) : MatX(H);
        for (int k = 0; k < 3; ++k) {
          const double eps = 1e-6 * extent[k];
          Vec3 p = u.vec(), m = u.vec();
          p[k] += eps;
          m[k] -= eps;
          const VecX fd = (eval_shape(b, MaterialCoords::from(p), DomainPolicy::Lenient) -
                           eval_shape(b, MaterialCoords::from(m), DomainPolicy::Lenient)) /
                          (2 * eps);
          worst = std::max(worst, oracle::rel_err_mat(VecX(Hp.col(k)), fd));
        }
      }
      CHECK_MESSAGE(worst < 1e-6, to_string(b.kind()));
    }
  }

  TEST_CASE("beam: constant basis entry has a zero gradient contribution") {
    // b(u) = B s(u) and db/du = B H, so the constant monomial row yields 1 and a zero gradient.
    const auto b = build_basis_beam3243(kBeamDims);
    std::mt19937_64 rng(8);
    for (int t = 0; t < 5; ++t) {
      const auto u = random_point(b, rng);
      CHECK(std::abs((b.b_matrix().row(0) * eval_shape(b, u))(0) - 1.0) < 1e-12);
      CHECK((b.b_matrix().row(0) * eval_ref_gradients(b, u)).norm() < 1e-12);
    }
  }

  TEST_CASE("quadrature: parent tet volume and monomial exactness") {
    const auto r = tet_rule_degree3();
    CHECK(r.size() == 5);
    CHECK(r.exact_degree == 3);
    double sum = 0.0;
    for (double w : r.weights) sum += w;
    CHECK(std::abs(sum - 1.0 / 6.0) < 1e-15);
    auto integrate = [](const QuadratureRule& q, int a, int b, int c) {
      double s = 0.0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        s += q.weights[k] * std::pow(q.points[k].u, a) * std::pow(q.points[k].v, b) *
             std::pow(q.points[k].w, c);
      }
      return s;
    };
    CHECK(rel_err(integrate(r, 1, 1, 1), 1.0 / 720.0) < 1e-12);
    for (const auto& rule : {r, tet_collapsed_rule(4), tet_collapsed_rule(6)}) {
      for (int a = 0; a <= rule.exact_degree; ++a) {
        for (int b = 0; a + b <= rule.exact_degree; ++b) {
          for (int c = 0; a + b + c <= rule.exact_degree; ++c) {
            CHECK(rel_err(integrate(rule, a, b, c), oracle::simplex_monomial(a, b, c)) < 1e-12);
          }
        }
      }
    }
    // Not exact at degree 4: documents the order of the 5-point rule.
    CHECK(rel_err(integrate(r, 4, 0, 0), oracle::simplex_monomial(4, 0, 0)) > 1e-3);
  }

  TEST_CASE("quadrature: ANCF tensor rules integrate box monomials") {
    for (const auto& b : all_bases()) {
      if (b.kind() == ElementKind::Tet10) continue;
      const Vec3 d = b.dims();
      const bool beam = b.kind() == ElementKind::Beam3243;
      const Vec3 lo = beam ? Vec3(0, -d[1] / 2, -d[2] / 2) : Vec3(0, -d[1] / 2, 0);
      const Vec3 hi = lo + d;
      const int nu = 4, nv = 2, nw = beam ? 2 : 4;
      const auto rule = quadrature_for(b, QuadraturePurpose::Force);
      REQUIRE(rule.size() == static_cast<std::size_t>(nu * nv * nw));
      double vol = 0.0;
      for (double w : rule.weights) vol += w;
      CHECK(rel_err(vol, d.prod()) < 1e-14);
      // Per-direction Gauss exactness: degree 2n - 1 in each variable.
      for (int a = 0; a <= 2 * nu - 1; ++a) {
        for (int bb = 0; bb <= 2 * nv - 1; ++bb) {
          for (int c = 0; c <= 2 * nw - 1; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < rule.size(); ++k) {
              const auto& p = rule.points[k];
              s += rule.weights[k] * std::pow(p.u, a) * std::pow(p.v, bb) * std::pow(p.w, c);
            }
            const double ref = oracle::interval_monomial(a, lo[0], hi[0]) *
                               oracle::interval_monomial(bb, lo[1], hi[1]) *
                               oracle::interval_monomial(c, lo[2], hi[2]);
            auto abs_int = [](int n, double l, double h) {
              return (std::pow(std::abs(l), n + 1) * (l < 0 ? 1 : -1) + std::pow(h, n + 1)) / (n + 1);
            };
            const double scale = abs_int(a, lo[0], hi[0]) * abs_int(bb, lo[1], hi[1]) * abs_int(c, lo[2], hi[2]);
            CHECK(std::abs(s - ref) <= 1e-12 * std::max(std::abs(ref), scale));
          }
        }
      }
      CHECK(quadrature_for(b, QuadraturePurpose::Mass).size() == rule.size());
    }
  }

  TEST_CASE("domain policy and construction errors") {
    const auto beam = build_basis_beam3243(kBeamDims);
    CHECK_THROWS_AS(eval_shape(beam, {-0.1, 0, 0}), DomainError);
    CHECK_NOTHROW(eval_shape(beam, {-0.1, 0, 0}, DomainPolicy::Lenient));
    const auto tet = build_basis_tet10(oracle::tet10_nodes(oracle::default_tet_corners()));
    CHECK_THROWS_AS(eval_shape(tet, {0.6, 0.6, 0.1}), DomainError);
    CHECK_THROWS_AS(eval_ref_gradients(tet, {0.6, 0.6, 0.1}), DomainError);

    CHECK_THROWS_AS(build_basis_beam3243(Vec3(0, 0.1, 0.1)), ConstructionError);
    CHECK_THROWS_AS(build_basis_shell3443(Vec3(1, -0.1, 1)), ConstructionError);
    // Coplanar corners.
    auto flat = oracle::default_tet_corners();
    flat[3] = 0.3 * flat[1] + 0.7 * flat[2];
    CHECK_THROWS_AS(build_basis_tet10(oracle::tet10_nodes(flat)), ConstructionError);
    // Inverted corner order.
    auto inv = oracle::default_tet_corners();
    std::swap(inv[1], inv[2]);
    CHECK_THROWS_AS(build_basis_tet10(oracle::tet10_nodes(inv)), ConstructionError);
    // Off-midpoint edge node.
    auto x = oracle::tet10_nodes(oracle::default_tet_corners());
    x[5] += Vec3(1e-3, 0, 0);
    CHECK_THROWS_AS(build_basis_tet10(x), ConstructionError);
  }

  TEST_CASE("kind names round-trip") {
    for (auto k : {ElementKind::Beam3243, ElementKind::Shell3443, ElementKind::Tet10}) {
      CHECK(element_kind_from_string(to_string(k)) == k);
    }
    CHECK(slots_per_node(ElementKind::Beam3243) == 4);
    CHECK(slots_per_node(ElementKind::Tet10) == 1);
    CHECK(nodes_per_element(ElementKind::Shell3443) == 4);
  }
}
