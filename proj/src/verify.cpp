#include "tlfea/verify.hpp"

#include "tlfea/assembly.hpp"
#include "tlfea/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace tlfea {

namespace {

std::string describe(double err, double tol) {
  std::ostringstream os;
  os.precision(3);
  os << "max error " << err << " (tolerance " << tol << ")";
  return os.str();
}

VerifyCheck make_check(std::string name, double err, double tol) {
  return {std::move(name), err < tol, describe(err, tol)};
}

// Random deformation gradient with J in [0.5, 2]: a rotation times a random stretch.
Mat3 random_gradient(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Mat3 A;
    for (int i = 0; i < 9; ++i) A(i) = u(rng);
    const Mat3 F = Mat3::Identity() + 0.3 * A;
    const double J = F.determinant();
    if (J >= 0.5 && J <= 2.0) return F;
  }
}

double stress_energy_error(const ElasticLaw& law, std::mt19937_64& rng, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Mat3 F = random_gradient(rng);
    const Mat3 P = elastic_stress(F, law);
    Mat3 fd;
    const double eps = 1e-6;
    for (int i = 0; i < 9; ++i) {
      Mat3 Fp = F, Fm = F;
      Fp(i) += eps;
      Fm(i) -= eps;
      fd(i) = (elastic_energy(Fp, law) - elastic_energy(Fm, law)) / (2 * eps);
    }
    worst = std::max(worst, (P - fd).norm() / std::max(P.norm(), 1e-30));
  }
  return worst;
}

VecX flatten(const NodalMatrix& N) { return N.reshaped(); }

}  // namespace

std::vector<VerifyCheck> verify_model(const Model& model, std::uint64_t seed) {
  std::vector<VerifyCheck> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // Materials.
  std::vector<MaterialSpec> seen;
  for (const auto& b : model.bodies()) {
    if (std::find(seen.begin(), seen.end(), b.material) != seen.end()) continue;
    seen.push_back(b.material);
    const bool svk = std::holds_alternative<SvkParams>(b.material.elastic);
    const std::string tag = "material[" + b.name + "]";
    out.push_back(make_check(tag + " stress = dPsi/dF", stress_energy_error(b.material.elastic, rng, 20),
                             svk ? 1e-6 : 1e-5));
    const double scale = svk ? std::get<SvkParams>(b.material.elastic).mu
                             : std::get<MooneyRivlinParams>(b.material.elastic).mu10 +
                                   std::get<MooneyRivlinParams>(b.material.elastic).mu01;
    const Mat3 R = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const double rigid = std::max(elastic_stress(Mat3::Identity(), b.material.elastic).norm(),
                                  elastic_stress(R, b.material.elastic).norm()) / scale;
    out.push_back(make_check(tag + " P(I) = P(R) = 0", rigid, 1e-12));
    if (b.material.viscous) {
      double worst = 0.0;
      for (int k = 0; k < 200; ++k) {
        Mat3 A;
        for (int i = 0; i < 9; ++i) A(i) = u(rng);
        const Mat3 Ed = 0.5 * (A + A.transpose());
        worst = std::min(worst, dissipation_density(Ed, *b.material.viscous));
      }
      out.push_back({tag + " dissipation >= 0", worst >= 0.0, describe(-worst, 0.0)});
    }
  }

  // One element per kind and body.
  std::set<std::pair<std::size_t, ElementKind>> done;
  const VecX& qref = model.reference_q();
  const VecX zero = VecX::Zero(qref.size());
  for (std::size_t e = 0; e < model.elements().size(); ++e) {
    const auto& el = model.elements()[e];
    const auto& body = model.body(el.body);
    if (!done.insert({el.body, el.basis.kind()}).second) continue;
    const std::string tag = std::string(to_string(el.basis.kind())) + "[" + body.name + "]";
    const auto n = static_cast<Eigen::Index>(el.dof_map.size());

    // Partition of unity over the position slots at every force quadrature point.
    double pu = 0.0;
    for (const auto& qp : el.force_qp) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (model.is_position_slot(el.dof_map[static_cast<std::size_t>(k)])) sum += qp.s[k];
      }
      pu = std::max(pu, std::abs(sum - 1.0));
    }
    out.push_back(make_check(tag + " partition of unity", pu, 1e-12));

    // Stress-free reference and translation invariance.
    const Eigen::Index spn = slots_per_node(el.basis.kind());
    ElementState ref = gather_state(qref, zero, el.dof_map);
    const double f_scale = [&] {
      ElementState s = ref;
      for (Eigen::Index k = 0; k < 3 * n; ++k) s.N(k) += 1e-3 * u(rng);
      return internal_force_element(el.force_qp, s, body.material).norm();
    }();
    const double f_ref = internal_force_element(el.force_qp, ref, body.material).norm();
    ElementState shifted = ref;
    for (Eigen::Index k = 0; k < n; k += spn) shifted.N.col(k) += Vec3(0.3, -1.1, 2.5);
    const double f_shift = internal_force_element(el.force_qp, shifted, body.material).norm();
    out.push_back(make_check(tag + " f_int(q_ref) = 0 and translation invariant",
                             std::max(f_ref, f_shift) / std::max(f_scale, 1e-300), 1e-9));

    // Tangent vs central differences of the internal force at a perturbed state.
    Vec3 lo = ref.N.col(0), hi = lo;
    for (Eigen::Index k = 0; k < n; k += spn) {
      lo = lo.cwiseMin(ref.N.col(k));
      hi = hi.cwiseMax(ref.N.col(k));
    }
    const double L = (hi - lo).norm();
    ElementState s = ref;
    for (Eigen::Index k = 0; k < 3 * n; ++k) s.N(k) += 0.02 * u(rng) * (model.is_position_slot(el.dof_map[static_cast<std::size_t>(k / 3)]) ? L : 1.0);
    s.N_dot.setZero();
    MatX K;
    try {
      K = tangent_element(el.force_qp, s, body.material).K;
    } catch (const InvertedElementError&) {
      out.push_back({tag + " tangent vs FD", false, "perturbed state inverted the element"});
      continue;
    }
    MatX fd(3 * n, 3 * n);
    const double h = 1e-7 * std::max(L, 1e-300);
    for (Eigen::Index j = 0; j < 3 * n; ++j) {
      const double hj = model.is_position_slot(el.dof_map[static_cast<std::size_t>(j / 3)]) ? h : 1e-7;
      ElementState p = s, m = s;
      p.N(j) += hj;
      m.N(j) -= hj;
      fd.col(j) = (flatten(internal_force_element(el.force_qp, p, body.material)) -
                   flatten(internal_force_element(el.force_qp, m, body.material))) /
                  (2 * hj);
    }
    out.push_back(make_check(tag + " tangent vs FD", (K - fd).norm() / K.norm(), 1e-5));
  }
  return out;
}

}  // namespace tlfea
