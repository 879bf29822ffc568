#pragma once

#include "tlfea/assembly.hpp"
#include "tlfea/constraints.hpp"
#include "tlfea/contact.hpp"

namespace tlfea {

struct LineSearchConfig {
  enum class Kind { None, Backtracking };
  Kind kind = Kind::None;
  double c1 = 1e-4;
  double shrink = 0.5;
  int max_iter = 30;
  bool operator==(const LineSearchConfig&) const = default;
};

struct SolverConfig {
  double h = 1e-3;
  /// Smallest step allowed when halving after a rejected step.
  double h_min = 1e-7;
  double rho = 1e6;
  double newton_tol = 1e-10;
  int newton_max_iter = 30;
  double alm_tol = 1e-8;
  int alm_max_iter = 100;
  LineSearchConfig line_search;
  unsigned threads = 1;
  bool operator==(const SolverConfig&) const = default;
};

/// Step failure after exhausting the step-halving budget, or a singular Newton matrix.
class SolverError : public Error {
 public:
  using Error::Error;
};

struct EnergyLedger {
  double kinetic = 0.0;
  double elastic = 0.0;
  /// Potential of the force fields and point loads at the current time.
  double potential = 0.0;
  /// Cumulative viscous dissipation.
  double dissipated = 0.0;
  /// Norm of the last applied constraint impulse h C_q^T lambda.
  double constraint_impulse = 0.0;

  double mechanical() const { return kinetic + elastic + potential; }
};

struct StepDiagnostics {
  int substeps = 0;
  int newton_iterations = 0;
  int alm_iterations = 0;
  int rejections = 0;
  double h_min_used = 0.0;
  double c_norm = 0.0;
  std::vector<double> c_history;
  std::vector<ContactReport> contacts;
  std::size_t contacts_skipped = 0;
};

/// Everything the time stepper acts on.
struct Problem {
  Model model;
  std::vector<ForceField> fields;
  std::vector<PointLoad> point_loads;
  ConstraintSet constraints;
  ContactSet contacts;
};

class Simulator {
 public:
  Simulator(Problem problem, SolverConfig config);

  const Problem& problem() const { return p_; }
  Problem& problem() { return p_; }
  const SolverConfig& config() const { return cfg_; }
  const MassMatrix& mass() const { return mass_; }

  double time() const { return t_; }
  const VecX& q() const { return q_; }
  const VecX& v() const { return v_; }
  void set_state(const VecX& q, const VecX& v, double t);

  /// Advances by config().h. Throws SolverError when the step cannot be completed.
  StepDiagnostics step();

  EnergyLedger ledger() const;

  // ----- building blocks, exposed for diagnostics and tests -----

  /// Data frozen over one (sub)step: start state, step size, loads held fixed during the solve.
  struct StepInputs {
    VecX q_n;
    VecX v_n;
    double h = 0.0;
    double t_next = 0.0;
    /// Point loads at t_next plus the explicit contact forces.
    VecX f_fixed;
    /// Reference residual norm for the relative Newton tolerance; the solve's own initial
    /// residual is used when zero. The multiplier loop pins it to the residual at the start of
    /// the step so that later outer iterations are not held to a tolerance below roundoff.
    double residual_scale = 0.0;
  };
  StepInputs make_inputs(double h, ContactSet::Evaluation* contact = nullptr) const;

  /// g = M (v - v_n)/h + f_int(q_n + h v, v) - f_ext - f_ff + h C_q^T (lambda + rho c); zero on
  /// fixed slots.
  VecX residual(const StepInputs& in, const VecX& v) const;
  /// Augmented merit function whose v-gradient is the residual (elastic materials).
  double merit(const StepInputs& in, const VecX& v) const;
  /// Newton matrix M/h + h K + D_vis - h df_ff/dq + h^2 rho C_q^T C_q, identity on fixed slots.
  Eigen::SparseMatrix<double> newton_matrix(const StepInputs& in, const VecX& v) const;

  struct NewtonResult {
    VecX v;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_norms;
    std::vector<double> merits;
  };
  NewtonResult newton_solve(const StepInputs& in, const VecX& v0) const;

  struct AlmResult {
    VecX v;
    bool converged = false;
    int outer_iterations = 0;
    int newton_iterations = 0;
    std::vector<double> c_norms;
  };
  /// Outer multiplier loop; updates the constraint multipliers in place.
  AlmResult alm_solve(const StepInputs& in, const VecX& v0);

 private:
  void advance(double h, StepDiagnostics& diag);

  Problem p_;
  SolverConfig cfg_;
  AssemblyOptions opts_;
  MassMatrix mass_;
  mutable BlockSparseMatrix K_, D_;
  VecX q_, v_;
  double t_ = 0.0;
  std::size_t step_count_ = 0;
  double t0_ = 0.0;
  double dissipated_ = 0.0;
  double impulse_ = 0.0;
};

}  // namespace tlfea
