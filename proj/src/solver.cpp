#include "tlfea/solver.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <sstream>

namespace tlfea {

namespace {

bool has_viscous(const Model& m) {
  for (const auto& b : m.bodies()) {
    if (b.material.viscous) return true;
  }
  return false;
}

void zero_fixed(const Model& m, VecX& g) {
  for (std::size_t s = 0; s < m.slot_count(); ++s) {
    if (m.is_fixed(s)) g.segment<3>(static_cast<Eigen::Index>(3 * s)).setZero();
  }
}

}  // namespace

Simulator::Simulator(Problem problem, SolverConfig config) : p_(std::move(problem)), cfg_(config) {
  if (!(cfg_.h > 0.0) || !(cfg_.rho > 0.0) || !(cfg_.newton_tol > 0.0) || !(cfg_.alm_tol > 0.0)) {
    throw Error("solver: h, rho and tolerances must be positive");
  }
  opts_.threads = cfg_.threads;
  p_.constraints.set_base_rho(cfg_.rho);
  mass_ = assemble_mass(p_.model, opts_);
  K_ = BlockSparseMatrix::from_model(p_.model);
  D_ = K_;
  if (!p_.contacts.empty()) {
    const MobilityCalculator mob(p_.model, mass_);
    for (auto& pair : p_.contacts.pairs()) {
      for (ContactSide* side : {&pair.A, &pair.B}) {
        side->mobility = side->kind == ContactSide::Kind::Plane ? 0.0 : mob.mobility(side->point);
      }
    }
  }
  q_ = p_.model.reference_q();
  v_ = VecX::Zero(q_.size());
}

void Simulator::set_state(const VecX& q, const VecX& v, double t) {
  if (q.size() != p_.model.dof_count() || v.size() != p_.model.dof_count()) {
    throw InternalError("set_state: vector length does not match the model");
  }
  q_ = q;
  v_ = v;
  zero_fixed(p_.model, v_);
  t_ = t;
  t0_ = t;
  step_count_ = 0;
}

Simulator::StepInputs Simulator::make_inputs(double h, ContactSet::Evaluation* contact) const {
  StepInputs in;
  in.q_n = q_;
  in.v_n = v_;
  in.h = h;
  in.t_next = t_ + h;
  in.f_fixed = assemble_point_loads(p_.model, p_.point_loads, in.t_next);
  if (!p_.contacts.empty()) {
    auto ev = p_.contacts.evaluate(q_, v_, h);
    in.f_fixed += ev.force;
    if (contact) *contact = std::move(ev);
  }
  return in;
}

VecX Simulator::residual(const StepInputs& in, const VecX& v) const {
  const VecX q = in.q_n + in.h * v;
  VecX g = mass_.apply(v - in.v_n) / in.h;
  g += assemble_internal_force(p_.model, q, v, opts_);
  g -= in.f_fixed;
  if (!p_.fields.empty()) g -= assemble_force_fields(p_.model, p_.fields, q, in.t_next, opts_);
  p_.constraints.apply_constraint_term(q, in.t_next, g, in.h);
  zero_fixed(p_.model, g);
  return g;
}

double Simulator::merit(const StepInputs& in, const VecX& v) const {
  const VecX q = in.q_n + in.h * v;
  const VecX dv = v - in.v_n;
  double phi = 0.5 / in.h * mass_.inner(dv, dv);
  phi += (assemble_strain_energy(p_.model, q, opts_) +
          force_field_potential(p_.model, p_.fields, q, in.t_next)) /
         in.h;
  // Point loads at t_next are part of f_fixed together with the contact forces; both are constant
  // over the solve, so their work enters linearly.
  phi -= in.f_fixed.dot(v);
  const auto& cs = p_.constraints;
  if (!cs.empty()) {
    const VecX c = cs.residuals(q, in.t_next);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double ci = c[static_cast<Eigen::Index>(i)];
      phi += cs.multipliers()[static_cast<Eigen::Index>(i)] * ci + 0.5 * cs.penalty(i) * ci * ci;
    }
  }
  if (has_viscous(p_.model)) {
    VecX f_vis;
    assemble_internal_force(p_.model, q, v, opts_, &f_vis);
    phi += 0.5 * v.dot(f_vis);
  }
  return phi;
}

Eigen::SparseMatrix<double> Simulator::newton_matrix(const StepInputs& in, const VecX& v) const {
  const VecX q = in.q_n + in.h * v;
  assemble_tangent(p_.model, q, v, K_, D_, opts_);
  std::vector<Eigen::Triplet<double>> t;
  mass_.append_triplets(t, 1.0 / in.h);
  K_.append_triplets(t, in.h);
  if (has_viscous(p_.model)) D_.append_triplets(t, 1.0);
  bool linear_field = false;
  for (const auto& f : p_.fields) linear_field |= f.kind == ForceField::Kind::Linear;
  if (linear_field) {
    BlockSparseMatrix J = BlockSparseMatrix::from_model(p_.model);
    assemble_force_field_jacobian(p_.model, p_.fields, in.t_next, J);
    J.append_triplets(t, -in.h);
  }
  p_.constraints.append_gauss_newton(q, in.t_next, in.h * in.h, t);

  const auto& model = p_.model;
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(t.size() + 3 * model.slot_count());
  for (const auto& e : t) {
    if (model.is_fixed(static_cast<Slot>(e.row() / 3)) || model.is_fixed(static_cast<Slot>(e.col() / 3))) continue;
    kept.push_back(e);
  }
  for (std::size_t s = 0; s < model.slot_count(); ++s) {
    if (!model.is_fixed(s)) continue;
    for (int a = 0; a < 3; ++a) kept.emplace_back(static_cast<int>(3 * s + a), static_cast<int>(3 * s + a), 1.0);
  }
  const auto n = model.dof_count();
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(kept.begin(), kept.end());
  return A;
}

Simulator::NewtonResult Simulator::newton_solve(const StepInputs& in, const VecX& v0) const {
  NewtonResult r;
  r.v = v0;
  VecX g = residual(in, r.v);
  double gn = g.norm();
  r.residual_norms.push_back(gn);
  const bool ls = cfg_.line_search.kind == LineSearchConfig::Kind::Backtracking;
  double phi = ls ? merit(in, r.v) : 0.0;
  if (ls) r.merits.push_back(phi);
  const double tol = cfg_.newton_tol * std::max(1.0, in.residual_scale > 0.0 ? in.residual_scale : gn);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  while (gn > tol) {
    if (r.iterations >= cfg_.newton_max_iter) return r;
    const auto A = newton_matrix(in, r.v);
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "singular Newton matrix (" << A.rows() << " x " << A.cols() << ", " << A.nonZeros()
          << " non-zeros, |diag|_max = " << A.diagonal().cwiseAbs().maxCoeff()
          << "): " << lu.lastErrorMessage();
      throw SolverError(msg.str());
    }
    VecX dv = lu.solve(-g);
    if (!dv.allFinite()) throw SolverError("Newton update is not finite");
    ++r.iterations;

    double alpha = 1.0;
    if (ls) {
      const double slope = g.dot(dv);
      // Below this predicted decrease the merit cannot resolve the change; take the full step.
      const bool resolvable = -slope > 1e-13 * std::max(1.0, std::abs(phi));
      bool accepted = false;
      for (int k = 0; k <= cfg_.line_search.max_iter; ++k) {
        const VecX v_try = r.v + alpha * dv;
        double phi_try = std::numeric_limits<double>::infinity();
        try {
          phi_try = merit(in, v_try);
        } catch (const InvertedElementError&) {
        }
        if (!resolvable && std::isfinite(phi_try)) {
          accepted = true;
          phi = phi_try;
          break;
        }
        if (phi_try <= phi + cfg_.line_search.c1 * alpha * slope) {
          accepted = true;
          phi = phi_try;
          break;
        }
        alpha *= cfg_.line_search.shrink;
      }
      if (!accepted) {
        // The merit is only approximate for viscous materials; fall back to residual decrease.
        try {
          const VecX v_try = r.v + dv;
          if (residual(in, v_try).norm() < gn) {
            accepted = true;
            alpha = 1.0;
            phi = merit(in, v_try);
          }
        } catch (const InvertedElementError&) {
        }
      }
      if (!accepted) return r;
      r.merits.push_back(phi);
    }
    r.v += alpha * dv;
    g = residual(in, r.v);
    const double prev = gn;
    gn = g.norm();
    r.residual_norms.push_back(gn);
    // A full step that no longer halves a residual already near the tolerance has hit the
    // roundoff floor of the residual evaluation.
    if (alpha == 1.0 && gn > 0.5 * prev && gn <= 100.0 * tol) break;
  }
  r.converged = true;
  return r;
}

Simulator::AlmResult Simulator::alm_solve(const StepInputs& in_arg, const VecX& v0) {
  AlmResult r;
  r.v = v0;
  auto& cs = p_.constraints;
  cs.set_penalty_factor(1.0);
  StepInputs in = in_arg;
  if (in.residual_scale <= 0.0) in.residual_scale = residual(in, v0).norm();
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < std::max(1, cfg_.alm_max_iter); ++k) {
    const auto nr = newton_solve(in, r.v);
    r.newton_iterations += nr.iterations;
    ++r.outer_iterations;
    if (!nr.converged) return r;
    r.v = nr.v;
    if (cs.empty()) {
      r.c_norms.push_back(0.0);
      r.converged = true;
      return r;
    }
    const VecX c = cs.residuals(in.q_n + in.h * r.v, in.t_next);
    cs.update_multipliers(c);
    const double cn = c.norm();
    r.c_norms.push_back(cn);
    if (cn <= cfg_.alm_tol) {
      r.converged = true;
      return r;
    }
    if (cn > 0.9 * prev && cs.penalty_factor() < 1e4) {
      cs.set_penalty_factor(std::min(1e4, 10.0 * cs.penalty_factor()));
    }
    prev = cn;
  }
  return r;
}

void Simulator::advance(double h, StepDiagnostics& diag) {
  const VecX lambda_saved = p_.constraints.multipliers();
  ContactSet::Evaluation contact;
  bool ok = false;
  AlmResult ar;
  std::string why;
  try {
    const auto in = make_inputs(h, &contact);
    ar = alm_solve(in, v_);
    ok = ar.converged;
    if (!ok) why = "Newton/ALM did not converge";
  } catch (const InvertedElementError& e) {
    why = e.what();
  } catch (const SolverError& e) {
    why = e.what();
  }
  diag.newton_iterations += ar.newton_iterations;
  diag.alm_iterations += ar.outer_iterations;
  if (!ok) {
    p_.constraints.multipliers() = lambda_saved;
    ++diag.rejections;
    const double half = 0.5 * h;
    if (half < cfg_.h_min) {
      std::ostringstream msg;
      msg << "step at t = " << t_ << " rejected down to h = " << h << ": " << why;
      if (!ar.c_norms.empty()) {
        msg << "; |c| trace:";
        for (double c : ar.c_norms) msg << ' ' << c;
      }
      throw SolverError(msg.str());
    }
    advance(half, diag);
    advance(half, diag);
    return;
  }

  ++diag.substeps;
  diag.h_min_used = diag.h_min_used == 0.0 ? h : std::min(diag.h_min_used, h);
  diag.c_history.insert(diag.c_history.end(), ar.c_norms.begin(), ar.c_norms.end());
  diag.c_norm = ar.c_norms.empty() ? 0.0 : ar.c_norms.back();
  if (!p_.contacts.empty()) {
    p_.contacts.commit(contact.states);
    diag.contacts = contact.reports;
    diag.contacts_skipped += contact.skipped;
  }
  q_ += h * ar.v;
  v_ = ar.v;
  t_ += h;
  dissipated_ += h * assemble_dissipation_rate(p_.model, q_, v_, opts_);
  if (!p_.constraints.empty()) {
    VecX imp = VecX::Zero(q_.size());
    p_.constraints.apply_transpose(q_, t_, p_.constraints.multipliers(), imp);
    zero_fixed(p_.model, imp);
    impulse_ = h * imp.norm();
  }
}

StepDiagnostics Simulator::step() {
  StepDiagnostics diag;
  advance(cfg_.h, diag);
  ++step_count_;
  t_ = t0_ + static_cast<double>(step_count_) * cfg_.h;
  return diag;
}

EnergyLedger Simulator::ledger() const {
  EnergyLedger e;
  e.kinetic = 0.5 * mass_.inner(v_, v_);
  e.elastic = assemble_strain_energy(p_.model, q_, opts_);
  e.potential = force_field_potential(p_.model, p_.fields, q_, t_) +
                point_load_potential(p_.model, p_.point_loads, q_, t_);
  e.dissipated = dissipated_;
  e.constraint_impulse = impulse_;
  return e;
}

}  // namespace tlfea
