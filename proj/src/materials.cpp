#include "tlfea/materials.hpp"

#include <cmath>
#include <limits>

namespace tlfea {

namespace {

constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_jacobian(double J) {
  if (!(J >= kJacobianFloor)) throw InvertedElementError(kNoIndex, kNoIndex, J);
}

}  // namespace

SvkParams lame_from_young(double E, double nu) {
  return {E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))};
}

double svk_energy(const Mat3& F, const SvkParams& p) {
  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  const double tr = E.trace();
  return 0.5 * p.lambda * tr * tr + p.mu * (E * E).trace();
}

Mat3 svk_second_piola(const Mat3& F, const SvkParams& p) {
  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  return p.lambda * E.trace() * Mat3::Identity() + 2 * p.mu * E;
}

Mat3 svk_stress(const Mat3& F, const SvkParams& p) {
  const double trC = (F.transpose() * F).trace();
  return p.lambda * (0.5 * trC - 1.5) * F + p.mu * F * F.transpose() * F - p.mu * F;
}

Mat3 svk_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j, const SvkParams& p) {
  return ElasticTangent(F, p).block(h_i, h_j);
}

Mat3 inverse_transpose(const Mat3& F, double& J) {
  // cofactor matrix = J F^-T
  Mat3 cof;
  cof(0, 0) = F(1, 1) * F(2, 2) - F(1, 2) * F(2, 1);
  cof(0, 1) = F(1, 2) * F(2, 0) - F(1, 0) * F(2, 2);
  cof(0, 2) = F(1, 0) * F(2, 1) - F(1, 1) * F(2, 0);
  cof(1, 0) = F(0, 2) * F(2, 1) - F(0, 1) * F(2, 2);
  cof(1, 1) = F(0, 0) * F(2, 2) - F(0, 2) * F(2, 0);
  cof(1, 2) = F(0, 1) * F(2, 0) - F(0, 0) * F(2, 1);
  cof(2, 0) = F(0, 1) * F(1, 2) - F(0, 2) * F(1, 1);
  cof(2, 1) = F(0, 2) * F(1, 0) - F(0, 0) * F(1, 2);
  cof(2, 2) = F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
  J = F(0, 0) * cof(0, 0) + F(0, 1) * cof(0, 1) + F(0, 2) * cof(0, 2);
  return cof / J;
}

MooneyRivlinInvariants mr_invariants(const Mat3& F) {
  const Mat3 C = F.transpose() * F;
  MooneyRivlinInvariants inv;
  inv.I1 = C.trace();
  inv.I2 = 0.5 * (inv.I1 * inv.I1 - (C * C).trace());
  inv.J = F.determinant();
  inv.I1bar = std::pow(inv.J, -2.0 / 3.0) * inv.I1;
  inv.I2bar = std::pow(inv.J, -4.0 / 3.0) * inv.I2;
  return inv;
}

double mr_energy(const Mat3& F, const MooneyRivlinParams& p) {
  const auto inv = mr_invariants(F);
  check_jacobian(inv.J);
  return p.mu10 * (inv.I1bar - 3) + p.mu01 * (inv.I2bar - 3) + 0.5 * p.k * (inv.J - 1) * (inv.J - 1);
}

Mat3 mr_stress(const Mat3& F, const MooneyRivlinParams& p) {
  double J = 0.0;
  const Mat3 G = inverse_transpose(F, J);
  check_jacobian(J);
  const Mat3 C = F.transpose() * F;
  const double I1 = C.trace();
  const double I2 = 0.5 * (I1 * I1 - (C * C).trace());
  const double J23 = std::pow(J, -2.0 / 3.0);
  const double J43 = J23 * J23;
  return 2 * p.mu10 * J23 * (F - I1 / 3.0 * G) +
         2 * p.mu01 * J43 * (I1 * F - F * C - 2.0 / 3.0 * I2 * G) + p.k * (J - 1) * J * G;
}

Mat3 mr_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j,
                      const MooneyRivlinParams& p) {
  return ElasticTangent(F, p).block(h_i, h_j);
}

Mat3 kv_second_piola(const Mat3& E_dot, const KelvinVoigtParams& p) {
  return 2 * p.eta * E_dot + p.lambda_v * E_dot.trace() * Mat3::Identity();
}

Mat3 kv_stress(const Mat3& F, const Mat3& E_dot, const KelvinVoigtParams& p) {
  return F * kv_second_piola(E_dot, p);
}

Mat3 kv_velocity_tangent_block(const Mat3& F, const Vec3& h_i, const Vec3& h_j,
                               const KelvinVoigtParams& p) {
  const Vec3 Fhi = F * h_i;
  const Vec3 Fhj = F * h_j;
  return p.eta * (Fhj * Fhi.transpose() + h_j.dot(h_i) * F * F.transpose()) +
         p.lambda_v * Fhi * Fhj.transpose();
}

double dissipation_density(const Mat3& E_dot, const KelvinVoigtParams& p) {
  const double tr = E_dot.trace();
  return 2 * p.eta * E_dot.cwiseProduct(E_dot).sum() + p.lambda_v * tr * tr;
}

double elastic_energy(const Mat3& F, const ElasticLaw& law) {
  return std::visit(overloaded{[&](const SvkParams& p) { return svk_energy(F, p); },
                               [&](const MooneyRivlinParams& p) { return mr_energy(F, p); }},
                    law);
}

Mat3 elastic_stress(const Mat3& F, const ElasticLaw& law) {
  return std::visit(overloaded{[&](const SvkParams& p) { return svk_stress(F, p); },
                               [&](const MooneyRivlinParams& p) { return mr_stress(F, p); }},
                    law);
}

bool requires_positive_jacobian(const ElasticLaw& law) {
  return std::holds_alternative<MooneyRivlinParams>(law);
}

ElasticTangent::ElasticTangent(const Mat3& F, const ElasticLaw& law) : law_(law), F_(F) {
  FFt_ = F * F.transpose();
  if (std::holds_alternative<SvkParams>(law_)) {
    trE_ = 0.5 * (F.squaredNorm() - 3.0);
    return;
  }
  Finv_t_ = inverse_transpose(F, J_);
  check_jacobian(J_);
  const Mat3 C = F.transpose() * F;
  I1_ = C.trace();
  I2_ = 0.5 * (I1_ * I1_ - (C * C).trace());
  J23_ = std::pow(J_, -2.0 / 3.0);
  J43_ = J23_ * J23_;
}

Mat3 ElasticTangent::block(const Vec3& h_i, const Vec3& h_j) const {
  const Vec3 Fhi = F_ * h_i;
  const Vec3 Fhj = F_ * h_j;
  if (std::holds_alternative<SvkParams>(law_)) return svk_block(h_i, h_j, Fhi, Fhj);
  return mr_block(h_i, h_j, Fhi, Fhj, Finv_t_ * h_i, Finv_t_ * h_j);
}

void ElasticTangent::bind(const GradMatrix& H) {
  H_ = H;
  FH_ = F_ * H.transpose();
  if (std::holds_alternative<MooneyRivlinParams>(law_)) GH_ = Finv_t_ * H.transpose();
}

Mat3 ElasticTangent::block(Eigen::Index i, Eigen::Index j) const {
  const Vec3 h_i = H_.row(i).transpose();
  const Vec3 h_j = H_.row(j).transpose();
  if (std::holds_alternative<SvkParams>(law_)) return svk_block(h_i, h_j, FH_.col(i), FH_.col(j));
  return mr_block(h_i, h_j, FH_.col(i), FH_.col(j), GH_.col(i), GH_.col(j));
}

void ElasticTangent::accumulate(double weight, MatX& K) const {
  const Eigen::Index n = H_.rows();
  if (const auto* p = std::get_if<SvkParams>(&law_)) {
    const MatX HH = H_ * H_.transpose();
    const MatX GG = FH_.transpose() * FH_;
    const Mat3 wFFt = weight * p->mu * FFt_;
    const double wl = weight * p->lambda, wm = weight * p->mu;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* gj = FH_.col(j).data();
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double* gi = FH_.col(i).data();
        const double hij = HH(i, j);
        const double diag = weight * (p->lambda * trE_ * hij + p->mu * GG(i, j) - p->mu * hij);
        for (int b = 0; b < 3; ++b) {
          double* col = &K(3 * i, 3 * j + b);
          for (int a = 0; a < 3; ++a) {
            col[a] += wl * gi[a] * gj[b] + wm * gj[a] * gi[b] + hij * wFFt(a, b);
          }
          col[b] += diag;
        }
      }
    }
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) K.block<3, 3>(3 * i, 3 * j) += weight * block(i, j);
    }
  }
}

Mat3 ElasticTangent::svk_block(const Vec3& h_i, const Vec3& h_j, const Vec3& Fhi,
                               const Vec3& Fhj) const {
  const auto& p = std::get<SvkParams>(law_);
  const double hij = h_j.dot(h_i);
  const Mat3 I = Mat3::Identity();
  return p.lambda * Fhi * Fhj.transpose() + p.lambda * trE_ * hij * I +
         p.mu * Fhj.dot(Fhi) * I + p.mu * Fhj * Fhi.transpose() + p.mu * hij * FFt_ -
         p.mu * hij * I;
}

Mat3 ElasticTangent::mr_block(const Vec3& h_i, const Vec3& h_j, const Vec3& Fhi, const Vec3& Fhj,
                              const Vec3& Gi, const Vec3& Gj) const {
  const auto& p = std::get<MooneyRivlinParams>(law_);
  const double hij = h_j.dot(h_i);
  const Mat3 I = Mat3::Identity();
  const double I1 = I1_, I2 = I2_, J = J_;

  const Mat3 dt1 = 2 * p.mu10 * J23_ * (hij * I - 2.0 / 3.0 * Fhi * Gj.transpose());
  const Mat3 dt2 = 2 * p.mu10 / 3.0 * J23_ *
                   (Gi * (2 * Fhj).transpose() - 2.0 / 3.0 * I1 * Gi * Gj.transpose() -
                    I1 * Gj * Gi.transpose());
  const Mat3 dt3 = 2 * p.mu01 * J43_ *
                   (I1 * hij * I + Fhi * (2 * Fhj).transpose() -
                    4.0 / 3.0 * I1 * Fhi * Gj.transpose());
  const Mat3 dt4 = 2 * p.mu01 * J43_ *
                   (Fhj.dot(Fhi) * I + Fhj * Fhi.transpose() + hij * FFt_ -
                    4.0 / 3.0 * FFt_ * Fhi * Gj.transpose());
  const Eigen::RowVector3d row = 2 * Fhj.transpose() * (I1 * I - FFt_) - 4.0 / 3.0 * I2 * Gj.transpose();
  const Mat3 dt5 = 4 * p.mu01 / 3.0 * J43_ * (Gi * row - I2 * Gj * Gi.transpose());
  const Mat3 dt6 = p.k * J * ((2 * J - 1) * Gi * Gj.transpose() - (J - 1) * Gj * Gi.transpose());
  return dt1 - dt2 + dt3 - dt4 - dt5 + dt6;
}

}  // namespace tlfea
