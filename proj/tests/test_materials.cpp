#include "oracles.hpp"

#include "tlfea/kinematics.hpp"
#include "tlfea/materials.hpp"

#include <doctest.h>

using namespace tlfea;
using oracle::rel_err_mat;

namespace {

const SvkParams kSvk{1.3, 0.9};
const MooneyRivlinParams kMr{0.7, 0.2, 3.0};

/// Compressible neo-Hookean written out independently of the Mooney-Rivlin code path.
Mat3 neo_hookean_stress(const Mat3& F, double mu10, double k) {
  const double J = F.determinant();
  const Mat3 Fit = F.inverse().transpose();
  const double I1 = (F.transpose() * F).trace();
  return 2 * mu10 * std::pow(J, -2.0 / 3.0) * (F - I1 / 3.0 * Fit) + k * (J - 1) * J * Fit;
}

/// Energies written from their invariant definitions.
double svk_psi(const Mat3& F, const SvkParams& p) {
  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  return 0.5 * p.lambda * E.trace() * E.trace() + p.mu * (E.array() * E.array()).sum();
}

double mr_psi(const Mat3& F, const MooneyRivlinParams& p) {
  const Mat3 C = F.transpose() * F;
  const double J = F.determinant();
  const double I1 = C.trace();
  const double I2 = 0.5 * (I1 * I1 - (C * C).trace());
  return p.mu10 * (std::pow(J, -2.0 / 3.0) * I1 - 3) + p.mu01 * (std::pow(J, -4.0 / 3.0) * I2 - 3) +
         0.5 * p.k * (J - 1) * (J - 1);
}

/// FD of the stress contraction P(F) h_i with respect to e_j, where dF/de_j = (.) h_j^T.
template <class Stress>
Mat3 fd_tangent_block(const Stress& P, const Mat3& F, const Vec3& hi, const Vec3& hj, double eps) {
  Mat3 out;
  for (int c = 0; c < 3; ++c) {
    const Mat3 dF = Vec3::Unit(c) * hj.transpose();
    out.col(c) = (P(Mat3(F + eps * dF)) * hi - P(Mat3(F - eps * dF)) * hi) / (2 * eps);
  }
  return out;
}

}  // namespace

TEST_SUITE("materials") {
  TEST_CASE("SVK stress: hand-evaluated uniaxial example and P = F S") {
    const SvkParams p{1.0, 1.0};
    const Mat3 F = Vec3(1.1, 1, 1).asDiagonal();
    const Mat3 S = svk_second_piola(F, p);
    CHECK((S - Vec3(0.315, 0.105, 0.105).asDiagonal().toDenseMatrix()).norm() < 1e-14);
    CHECK((svk_stress(F, p) - Vec3(0.3465, 0.105, 0.105).asDiagonal().toDenseMatrix()).norm() < 1e-14);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
      const Mat3 G = oracle::random_gradient(rng);
      CHECK(rel_err_mat(svk_stress(G, kSvk), G * svk_second_piola(G, kSvk)) < 1e-12);
      CHECK(svk_energy(G, kSvk) == doctest::Approx(svk_psi(G, kSvk)).epsilon(1e-12));
    }
  }

  TEST_CASE("stress is the derivative of the strain energy") {
    std::mt19937_64 rng(2);
    double svk = 0.0, mr = 0.0;
    for (int t = 0; t < 50; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      const Mat3 fd_s = oracle::fd_matrix_gradient([](const Mat3& X) { return svk_psi(X, kSvk); }, F, 1e-6);
      const Mat3 fd_m = oracle::fd_matrix_gradient([](const Mat3& X) { return mr_psi(X, kMr); }, F, 1e-6);
      svk = std::max(svk, rel_err_mat(svk_stress(F, kSvk), fd_s));
      mr = std::max(mr, rel_err_mat(mr_stress(F, kMr), fd_m));
      CHECK(mr_energy(F, kMr) == doctest::Approx(mr_psi(F, kMr)).epsilon(1e-12));
    }
    CHECK(svk < 1e-6);
    CHECK(mr < 1e-5);
  }

  TEST_CASE("stress-free reference and rigid rotations") {
    std::mt19937_64 rng(3);
    CHECK(svk_stress(Mat3::Identity(), kSvk).norm() == 0.0);
    CHECK(mr_stress(Mat3::Identity(), kMr).norm() < 1e-15);
    for (int t = 0; t < 20; ++t) {
      const Mat3 R = oracle::random_rotation(rng);
      CHECK(svk_stress(R, kSvk).norm() < 1e-14);
      CHECK(mr_stress(R, kMr).norm() < 1e-14);
      // Objectivity of the stress: P(Q F) = Q P(F).
      const Mat3 F = oracle::random_gradient(rng);
      CHECK(rel_err_mat(svk_stress(R * F, kSvk), R * svk_stress(F, kSvk)) < 1e-10);
      CHECK(rel_err_mat(mr_stress(R * F, kMr), R * mr_stress(F, kMr)) < 1e-10);
    }
  }

  TEST_CASE("Mooney-Rivlin reduces to neo-Hookean when mu01 = 0") {
    std::mt19937_64 rng(4);
    const MooneyRivlinParams nh{0.9, 0.0, 2.5};
    for (int t = 0; t < 20; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      CHECK(rel_err_mat(mr_stress(F, nh), neo_hookean_stress(F, nh.mu10, nh.k)) < 1e-12);
      const Mat3 fd = oracle::fd_matrix_gradient([&](const Mat3& X) { return mr_psi(X, nh); }, F, 1e-6);
      CHECK(rel_err_mat(mr_stress(F, nh), fd) < 1e-6);
    }
  }

  TEST_CASE("invariants") {
    const Mat3 F = Vec3(1.2, 0.9, 1.1).asDiagonal();
    const auto inv = mr_invariants(F);
    const Vec3 l2(1.44, 0.81, 1.21);
    CHECK(inv.I1 == doctest::Approx(l2.sum()));
    CHECK(inv.I2 == doctest::Approx(l2[0] * l2[1] + l2[1] * l2[2] + l2[0] * l2[2]));
    CHECK(inv.J == doctest::Approx(1.2 * 0.9 * 1.1));
    CHECK(inv.I1bar == doctest::Approx(inv.I1 * std::pow(inv.J, -2.0 / 3.0)));
    CHECK(inv.I2bar == doctest::Approx(inv.I2 * std::pow(inv.J, -4.0 / 3.0)));
    double J = 0.0;
    std::mt19937_64 rng(5);
    const Mat3 G = oracle::random_gradient(rng);
    CHECK(rel_err_mat(inverse_transpose(G, J), Mat3(G.inverse().transpose())) < 1e-13);
    CHECK(J == doctest::Approx(G.determinant()));
  }

  TEST_CASE("SVK tangent block: FD, identity reduction, exchange symmetry") {
    std::mt19937_64 rng(6);
    double worst = 0.0, sym = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      const Vec3 hi = oracle::random_vec(rng), hj = oracle::random_vec(rng);
      const Mat3 K = svk_tangent_block(F, hi, hj, kSvk);
      worst = std::max(worst, rel_err_mat(K, fd_tangent_block([](const Mat3& X) { return svk_stress(X, kSvk); }, F, hi, hj, 1e-6)));
      sym = std::max(sym, rel_err_mat(K, Mat3(svk_tangent_block(F, hj, hi, kSvk).transpose())));
      ElasticTangent et(F, kSvk);
      CHECK(rel_err_mat(et.block(hi, hj), K) < 1e-13);
    }
    CHECK(worst < 1e-6);
    CHECK(sym < 1e-12);
    const Vec3 hi(0.3, -1, 0.5), hj(1, 0.2, -0.4);
    const Mat3 expect = kSvk.lambda * hi * hj.transpose() + kSvk.mu * hj.dot(hi) * Mat3::Identity() +
                        kSvk.mu * hj * hi.transpose();
    CHECK(rel_err_mat(svk_tangent_block(Mat3::Identity(), hi, hj, kSvk), expect) < 1e-14);
  }

  TEST_CASE("MR tangent block: FD, identity and purely volumetric reductions") {
    std::mt19937_64 rng(7);
    double worst = 0.0, sym = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      const Vec3 hi = oracle::random_vec(rng), hj = oracle::random_vec(rng);
      const Mat3 K = mr_tangent_block(F, hi, hj, kMr);
      worst = std::max(worst, rel_err_mat(K, fd_tangent_block([](const Mat3& X) { return mr_stress(X, kMr); }, F, hi, hj, 1e-6)));
      sym = std::max(sym, rel_err_mat(K, Mat3(mr_tangent_block(F, hj, hi, kMr).transpose())));
      ElasticTangent et(F, kMr);
      CHECK(rel_err_mat(et.block(hi, hj), K) < 1e-12);
    }
    CHECK(worst < 1e-5);
    CHECK(sym < 1e-10);

    // Volumetric part only: d[k (J - 1) J F^-T h_i]/d e_j. At F = I it is k h_i h_j^T.
    const MooneyRivlinParams vol{0.0, 0.0, 4.0};
    const Vec3 hi(0.3, -1, 0.5), hj(1, 0.2, -0.4);
    CHECK(rel_err_mat(mr_tangent_block(Mat3::Identity(), hi, hj, vol), Mat3(4.0 * hi * hj.transpose())) < 1e-14);
    for (int t = 0; t < 5; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      const auto Pvol = [&](const Mat3& X) {
        const double J = X.determinant();
        return Mat3(vol.k * (J - 1) * J * X.inverse().transpose());
      };
      CHECK(rel_err_mat(mr_tangent_block(F, hi, hj, vol), fd_tangent_block(Pvol, F, hi, hj, 1e-6)) < 1e-6);
    }
  }

  TEST_CASE("inverted deformation gradients are rejected by Mooney-Rivlin") {
    Mat3 F = Mat3::Identity();
    F(2, 2) = -0.5;
    CHECK_THROWS_AS(mr_stress(F, kMr), InvertedElementError);
    F(2, 2) = 1e-9;  // below the J floor
    CHECK_THROWS_AS(mr_stress(F, kMr), InvertedElementError);
    CHECK(requires_positive_jacobian(kMr));
    CHECK_FALSE(requires_positive_jacobian(kSvk));
    CHECK_NOTHROW(svk_stress(F, kSvk));
  }

  TEST_CASE("Kelvin-Voigt stress examples") {
    const KelvinVoigtParams kv{0.8, 0.3};
    std::mt19937_64 rng(8);
    const Mat3 F = oracle::random_gradient(rng);
    CHECK(kv_stress(F, Mat3::Zero(), kv).norm() == 0.0);
    CHECK(kv_stress(Mat3::Identity(), strain_rate(Mat3::Identity(), oracle::skew(Vec3(1, 2, 3))), kv).norm() == 0.0);
    const double a = 0.25;
    const Mat3 Ed = Vec3(a, 0, 0).asDiagonal();
    const Mat3 S = kv_second_piola(Ed, kv);
    CHECK((S - Vec3(2 * kv.eta * a + kv.lambda_v * a, kv.lambda_v * a, kv.lambda_v * a).asDiagonal().toDenseMatrix()).norm() < 1e-15);
    CHECK(rel_err_mat(kv_stress(F, Ed, kv), F * S) < 1e-15);
  }

  TEST_CASE("Kelvin-Voigt velocity tangent matches FD in the nodal rates") {
    const KelvinVoigtParams kv{0.8, 0.3};
    std::mt19937_64 rng(9);
    for (int t = 0; t < 20; ++t) {
      const Mat3 F = oracle::random_gradient(rng);
      Mat3 Fd;
      for (int i = 0; i < 9; ++i) Fd(i) = oracle::uniform(rng);
      const Vec3 hi = oracle::random_vec(rng), hj = oracle::random_vec(rng);
      const auto P = [&](const Mat3& X) {
        return Mat3(kv_stress(F, Mat3(0.5 * (X.transpose() * F + F.transpose() * X)), kv));
      };
      // P is linear in F_dot, so the tangent is independent of the base point.
      CHECK(rel_err_mat(kv_velocity_tangent_block(F, hi, hj, kv), fd_tangent_block(P, Fd, hi, hj, 1e-3)) < 1e-9);
    }
  }

  TEST_CASE("dissipation density: sign, definition, traceless case, zero iff rest") {
    std::mt19937_64 rng(10);
    const KelvinVoigtParams kv{0.6, 1.4};
    CHECK(dissipation_density(Mat3::Zero(), kv) == 0.0);
    double minimum = 1.0;
    for (int t = 0; t < 1000; ++t) {
      const KelvinVoigtParams p{oracle::uniform(rng, 0, 2), oracle::uniform(rng, 0, 2)};
      const Mat3 Ed = oracle::random_symmetric(rng);
      const double w = dissipation_density(Ed, p);
      minimum = std::min(minimum, w);
      const double sv = (kv_second_piola(Ed, p).array() * Ed.array()).sum();
      CHECK(std::abs(w - sv) <= 1e-12 * std::max(1.0, std::abs(w)));
    }
    CHECK(minimum >= 0.0);
    Mat3 dev = oracle::random_symmetric(rng);
    dev -= dev.trace() / 3.0 * Mat3::Identity();
    CHECK(dissipation_density(dev, {0.6, 123.0}) ==
          doctest::Approx(2 * 0.6 * (dev.array() * dev.array()).sum()).epsilon(1e-12));
    // With eta > 0 the density is bounded below by 2 eta |E_dot|^2, so W = 0 forces E_dot = 0.
    for (int t = 0; t < 100; ++t) {
      const Mat3 Ed = oracle::random_symmetric(rng, std::pow(10.0, oracle::uniform(rng, -6, 0)));
      const double w = dissipation_density(Ed, {0.6, oracle::uniform(rng, 0, 2)});
      CHECK(w >= 2 * 0.6 * Ed.squaredNorm() * (1 - 1e-12));
    }
  }

  TEST_CASE("Lame conversion") {
    const auto p = lame_from_young(2e11, 0.3);
    CHECK(p.mu == doctest::Approx(2e11 / 2.6));
    CHECK(p.lambda == doctest::Approx(2e11 * 0.3 / (1.3 * 0.4)));
  }
}
