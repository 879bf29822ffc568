#pragma once

#include "tlfea/types.hpp"

#include <optional>
#include <variant>

namespace tlfea {

struct SvkParams {
  double lambda = 0.0;
  double mu = 0.0;
  bool operator==(const SvkParams&) const = default;
};

struct MooneyRivlinParams {
  double mu10 = 0.0;
  double mu01 = 0.0;
  double k = 0.0;
  bool operator==(const MooneyRivlinParams&) const = default;
};

struct KelvinVoigtParams {
  double eta = 0.0;
  double lambda_v = 0.0;
  bool operator==(const KelvinVoigtParams&) const = default;
};

using ElasticLaw = std::variant<SvkParams, MooneyRivlinParams>;

struct MaterialSpec {
  ElasticLaw elastic;
  std::optional<KelvinVoigtParams> viscous;
  bool operator==(const MaterialSpec&) const = default;
};

/// Lame constants from Young's modulus and Poisson ratio.
SvkParams lame_from_young(double E, double nu);

/// det F below this is treated as inverted (keeps J^(-4/3) finite).
inline constexpr double kJacobianFloor = 1e-8;

// St. Venant-Kirchhoff -------------------------------------------------------

double svk_energy(const Mat3& F, const SvkParams& p);
Mat3 svk_second_piola(const Mat3& F, const SvkParams& p);
/// P = lambda (tr(F^T F)/2 - 3/2) F + mu F F^T F - mu F.
Mat3 svk_stress(const Mat3& F, const SvkParams& p);
/// d(P h_i)/d e_j, the integrand of the consistent SVK tangent.
Mat3 svk_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j, const SvkParams& p);

// Compressible Mooney-Rivlin -------------------------------------------------

struct MooneyRivlinInvariants {
  double I1, I2, J, I1bar, I2bar;
};

MooneyRivlinInvariants mr_invariants(const Mat3& F);
double mr_energy(const Mat3& F, const MooneyRivlinParams& p);
Mat3 mr_stress(const Mat3& F, const MooneyRivlinParams& p);
/// Sum of the six term derivatives dt1 - dt2 + dt3 - dt4 - dt5 + dt6.
Mat3 mr_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j, const MooneyRivlinParams& p);

/// inverse transpose through the adjugate; J is returned alongside.
Mat3 inverse_transpose(const Mat3& F, double& J);

// Kelvin-Voigt ---------------------------------------------------------------

Mat3 kv_second_piola(const Mat3& E_dot, const KelvinVoigtParams& p);
/// P_vis = F (2 eta E_dot + lambda_v tr(E_dot) I).
Mat3 kv_stress(const Mat3& F, const Mat3& E_dot, const KelvinVoigtParams& p);
/// d(P_vis h_i)/d(e_dot_j) at fixed F.
Mat3 kv_velocity_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j,
                               const KelvinVoigtParams& p);
/// 2 eta E_dot:E_dot + lambda_v tr(E_dot)^2.
double dissipation_density(const Mat3& E_dot, const KelvinVoigtParams& p);

// Dispatch over the elastic law ---------------------------------------------

double elastic_energy(const Mat3& F, const ElasticLaw& law);
Mat3 elastic_stress(const Mat3& F, const ElasticLaw& law);
bool requires_positive_jacobian(const ElasticLaw& law);

/// Per-quadrature-point tangent evaluator. Caches the F-dependent factors so the
/// n_u^2 block evaluations only do vector work.
class ElasticTangent {
 public:
  ElasticTangent(const Mat3& F, const ElasticLaw& law);
  Mat3 block(const Vec3& h_i, const Vec3& h_j) const;

  /// Precomputed per-column quantities for a whole element: F h_i and F^-T h_i.
  void bind(const GradMatrix& H);
  Mat3 block(Eigen::Index i, Eigen::Index j) const;
  /// Adds weight * block(i, j) to the blocks with i <= j only; the tangent is symmetric, so the
  /// caller mirrors the upper block triangle once after summing all quadrature points.
  void accumulate(double weight, MatX& K) const;

 private:
  Mat3 svk_block(const Vec3& h_i, const Vec3& h_j, const Vec3& Fhi, const Vec3& Fhj) const;
  Mat3 mr_block(const Vec3& h_i, const Vec3& h_j, const Vec3& Fhi, const Vec3& Fhj,
                const Vec3& Gi, const Vec3& Gj) const;

  ElasticLaw law_;
  Mat3 F_;
  Mat3 FFt_;
  Mat3 Finv_t_;
  double trE_ = 0.0;
  double J_ = 1.0;
  double I1_ = 3.0, I2_ = 3.0;
  double J23_ = 1.0, J43_ = 1.0;
  GradMatrix H_;
  Eigen::Matrix<double, 3, Eigen::Dynamic> FH_;
  Eigen::Matrix<double, 3, Eigen::Dynamic> GH_;
};

}  // namespace tlfea
