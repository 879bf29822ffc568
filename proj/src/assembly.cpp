#include "tlfea/assembly.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <thread>

namespace tlfea {

namespace {

// Runs fn(e) for every element. Work is dispatched in the requested processing order and split
// into contiguous chunks across threads. Each call must only write to its own output slot.
// If several elements throw, the one with the smallest index is rethrown.
template <class Fn>
void for_each_element(std::size_t n, const AssemblyOptions& opts, Fn&& fn) {
  std::vector<std::size_t> order = opts.processing_order;
  if (order.empty()) {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else if (order.size() != n) {
    throw InternalError("processing order does not list every element exactly once");
  }
  std::vector<std::exception_ptr> errors(n);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t e = order[k];
      try {
        fn(e);
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(1u, opts.threads), n);
  if (threads <= 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool) th.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

ElementState element_state(const ElementData& el, const VecX& q, const VecX& v) {
  return gather_state(q, v, el.dof_map);
}

// Calls body(k) for each quadrature point, tagging inverted-element failures with the point index.
template <class Fn>
void for_each_qp(std::size_t n_qp, Fn&& body) {
  for (std::size_t k = 0; k < n_qp; ++k) {
    try {
      body(k);
    } catch (const InvertedElementError& e) {
      throw InvertedElementError(e.element(), k, e.jacobian());
    }
  }
}

template <class Fn>
auto with_element_id(std::size_t e, Fn&& fn) {
  try {
    return fn();
  } catch (const InvertedElementError& err) {
    throw InvertedElementError(e, err.quadrature_point(), err.jacobian());
  }
}

Mat3 checked_gradient(const ElementState& state, const GradMatrix& H) {
  const Mat3 F = deformation_gradient(state, H);
  const double J = F.determinant();
  if (!(J > 0.0)) throw InvertedElementError(std::size_t(-1), std::size_t(-1), J);
  return F;
}

void add_local_matrix(const std::vector<Slot>& map, const MatX& local, BlockSparseMatrix& out,
                      double scale = 1.0) {
  const auto n = map.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.add(map[i], map[j],
              scale * local.block<3, 3>(static_cast<Eigen::Index>(3 * i), static_cast<Eigen::Index>(3 * j)));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------------------------

Vec3 ForceField::eval(const Vec3& x, double t) const {
  const double p = profile(t);
  if (kind == Kind::Uniform) return p * b0;
  return p * (b0 + G * x);
}

double ForceField::potential(const Vec3& x, double t) const {
  const double p = profile(t);
  if (kind == Kind::Uniform) return p * b0.dot(x);
  const Mat3 Gs = 0.5 * (G + G.transpose());
  return p * (b0.dot(x) + 0.5 * x.dot(Gs * x));
}

bool ForceField::applies_to(std::size_t body) const {
  return bodies.empty() || std::find(bodies.begin(), bodies.end(), body) != bodies.end();
}

// ---------------------------------------------------------------------------------------------

BlockSparseMatrix::BlockSparseMatrix(std::size_t block_rows,
                                     std::vector<std::pair<Slot, Slot>> pattern) {
  std::sort(pattern.begin(), pattern.end());
  pattern.erase(std::unique(pattern.begin(), pattern.end()), pattern.end());
  row_ptr_.assign(block_rows + 1, 0);
  for (const auto& [i, j] : pattern) {
    if (i >= block_rows || j >= block_rows) throw InternalError("block pattern index out of range");
    ++row_ptr_[i + 1];
  }
  for (std::size_t r = 0; r < block_rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
  cols_.reserve(pattern.size());
  for (const auto& p : pattern) cols_.push_back(p.second);
  blocks_.assign(pattern.size(), Mat3::Zero());
}

BlockSparseMatrix BlockSparseMatrix::from_model(const Model& model) {
  std::vector<std::pair<Slot, Slot>> pattern;
  for (const auto& el : model.elements()) {
    for (Slot i : el.dof_map) {
      for (Slot j : el.dof_map) pattern.emplace_back(i, j);
    }
  }
  return BlockSparseMatrix(model.slot_count(), std::move(pattern));
}

void BlockSparseMatrix::set_zero() {
  for (auto& b : blocks_) b.setZero();
}

std::ptrdiff_t BlockSparseMatrix::find(Slot i, Slot j) const {
  if (i + 1 >= row_ptr_.size()) return -1;
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return -1;
  return it - cols_.begin();
}

void BlockSparseMatrix::add(Slot i, Slot j, const Mat3& b) {
  const auto k = find(i, j);
  if (k < 0) {
    throw InternalError("block (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") outside the sparsity pattern");
  }
  blocks_[static_cast<std::size_t>(k)] += b;
}

Mat3 BlockSparseMatrix::block(Slot i, Slot j) const {
  const auto k = find(i, j);
  return k < 0 ? Mat3::Zero() : blocks_[static_cast<std::size_t>(k)];
}

VecX BlockSparseMatrix::multiply(const VecX& x) const {
  VecX y = VecX::Zero(x.size());
  for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r) {
    Vec3 acc = Vec3::Zero();
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      acc += blocks_[k] * x.segment<3>(static_cast<Eigen::Index>(3 * cols_[k]));
    }
    y.segment<3>(static_cast<Eigen::Index>(3 * r)) = acc;
  }
  return y;
}

void BlockSparseMatrix::append_triplets(std::vector<Eigen::Triplet<double>>& out,
                                        double scale) const {
  for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const auto& b = blocks_[k];
      for (int a = 0; a < 3; ++a) {
        for (int c = 0; c < 3; ++c) {
          out.emplace_back(static_cast<int>(3 * r + a), static_cast<int>(3 * cols_[k] + c),
                           scale * b(a, c));
        }
      }
    }
  }
}

Eigen::SparseMatrix<double> BlockSparseMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double>> t;
  append_triplets(t);
  const auto n = static_cast<Eigen::Index>(3 * block_rows());
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

VecX MassMatrix::apply(const VecX& x) const {
  const auto n = m_.rows();
  const Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>> X(x.data(), 3, n);
  VecX y(x.size());
  Eigen::Map<Eigen::Matrix<double, 3, Eigen::Dynamic>> Y(y.data(), 3, n);
  Y = (m_ * X.transpose()).transpose();
  return y;
}

void MassMatrix::append_triplets(std::vector<Eigen::Triplet<double>>& out, double scale) const {
  for (int k = 0; k < m_.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m_, k); it; ++it) {
      for (int a = 0; a < 3; ++a) {
        out.emplace_back(static_cast<int>(3 * it.row() + a), static_cast<int>(3 * it.col() + a),
                         scale * it.value());
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------

MatX element_mass_matrix(const ElementData& element, double density) {
  const int n = element.basis.n_u();
  MatX m = MatX::Zero(n, n);
  for (const auto& qp : element.mass_qp) m.noalias() += (density * qp.weight) * qp.s * qp.s.transpose();
  // The rank-one products round differently above and below the diagonal.
  return MatX(m.selfadjointView<Eigen::Upper>());
}

NodalMatrix internal_force_element(std::span<const QuadPoint> qps, const ElementState& state,
                                   const MaterialSpec& material, NodalMatrix* viscous) {
  const auto n = state.n_u();
  NodalMatrix f = NodalMatrix::Zero(3, n);
  if (viscous) *viscous = NodalMatrix::Zero(3, n);
  for_each_qp(qps.size(), [&](std::size_t k) {
    const auto& qp = qps[k];
    const Mat3 F = checked_gradient(state, qp.H);
    Mat3 P = elastic_stress(F, material.elastic);
    if (material.viscous) {
      const Mat3 F_dot = velocity_gradient_assembly(state, qp.H);
      const Mat3 E_dot = strain_rate(F, F_dot);
      const Mat3 P_vis = kv_stress(F, E_dot, *material.viscous);
      if (viscous) viscous->noalias() += qp.weight * P_vis * qp.H.transpose();
      P += P_vis;
    }
    f.noalias() += qp.weight * P * qp.H.transpose();
  });
  return f;
}

NodalMatrix internal_force_element(const ElementBasis& basis, const ElementState& state,
                                   const MaterialSpec& material, const QuadratureRule& rule) {
  const auto qps = make_quad_points(basis, rule);
  return internal_force_element(qps, state, material);
}

ElementTangent tangent_element(std::span<const QuadPoint> qps, const ElementState& state,
                               const MaterialSpec& material) {
  const auto n = state.n_u();
  ElementTangent out;
  out.K = MatX::Zero(3 * n, 3 * n);
  out.D = MatX::Zero(3 * n, 3 * n);
  MatX K_vis;
  if (material.viscous) K_vis = MatX::Zero(3 * n, 3 * n);
  for_each_qp(qps.size(), [&](std::size_t k) {
    const auto& qp = qps[k];
    const Mat3 F = checked_gradient(state, qp.H);
    ElasticTangent T(F, material.elastic);
    T.bind(qp.H);
    T.accumulate(qp.weight, out.K);
    if (material.viscous) {
      const auto& kv = *material.viscous;
      const Mat3 Fd = velocity_gradient_assembly(state, qp.H);
      const Mat3 S = kv_second_piola(strain_rate(F, Fd), kv);
      const Eigen::Matrix<double, 3, Eigen::Dynamic> FH = F * qp.H.transpose();
      const Eigen::Matrix<double, 3, Eigen::Dynamic> FdH = Fd * qp.H.transpose();
      const Eigen::MatrixXd HSH = qp.H * S * qp.H.transpose();
      const Mat3 FFt = F * F.transpose();
      const Mat3 FFdt = F * Fd.transpose();
      const Eigen::MatrixXd HH = qp.H * qp.H.transpose();
      const double we = qp.weight * kv.eta, wl = qp.weight * kv.lambda_v;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double* gj = FH.col(j).data();
        const double* dj = FdH.col(j).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double* gi = FH.col(i).data();
          const double* di = FdH.col(i).data();
          const double hij = HH(i, j);
          for (int b = 0; b < 3; ++b) {
            double* dcol = &out.D(3 * i, 3 * j + b);
            // Viscous stress varies with F at fixed nodal velocities.
            double* kcol = &K_vis(3 * i, 3 * j + b);
            for (int a = 0; a < 3; ++a) {
              dcol[a] += we * (gj[a] * gi[b] + hij * FFt(a, b)) + wl * gi[a] * gj[b];
              kcol[a] += we * (gj[a] * di[b] + hij * FFdt(a, b)) + wl * gi[a] * dj[b];
            }
            kcol[b] += qp.weight * HSH(j, i);
          }
        }
      }
    }
  });
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      out.K.block<3, 3>(3 * i, 3 * j) = out.K.block<3, 3>(3 * j, 3 * i).transpose();
    }
  }
  if (material.viscous) out.K += K_vis;
  return out;
}

ElementTangent tangent_element(const ElementBasis& basis, const ElementState& state,
                               const MaterialSpec& material, const QuadratureRule& rule) {
  const auto qps = make_quad_points(basis, rule);
  return tangent_element(qps, state, material);
}

double element_strain_energy(std::span<const QuadPoint> qps, const ElementState& state,
                             const MaterialSpec& material) {
  double U = 0.0;
  for_each_qp(qps.size(), [&](std::size_t k) {
    const Mat3 F = checked_gradient(state, qps[k].H);
    U += qps[k].weight * elastic_energy(F, material.elastic);
  });
  return U;
}

double element_dissipation_rate(std::span<const QuadPoint> qps, const ElementState& state,
                                const MaterialSpec& material) {
  if (!material.viscous) return 0.0;
  double W = 0.0;
  for (const auto& qp : qps) {
    const Mat3 F = deformation_gradient(state, qp.H);
    const Mat3 E_dot = strain_rate(F, velocity_gradient_assembly(state, qp.H));
    W += qp.weight * dissipation_density(E_dot, *material.viscous);
  }
  return W;
}

NodalMatrix force_field_element(std::span<const QuadPoint> qps, const ElementState& state,
                                double density, const ForceField& field, double t) {
  NodalMatrix f = NodalMatrix::Zero(3, state.n_u());
  for (const auto& qp : qps) {
    const Vec3 r = state.N * qp.s;
    f.noalias() += (density * qp.weight) * field.eval(r, t) * qp.s.transpose();
  }
  return f;
}

MatX force_field_jacobian_element(std::span<const QuadPoint> qps, double density,
                                  const ForceField& field, double t) {
  const auto n = qps.empty() ? Eigen::Index{0} : qps.front().s.size();
  MatX J = MatX::Zero(3 * n, 3 * n);
  if (field.kind == ForceField::Kind::Uniform) return J;
  const Mat3 G = field.profile(t) * field.G;
  for (const auto& qp : qps) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        J.block<3, 3>(3 * i, 3 * j) += (density * qp.weight * qp.s[i] * qp.s[j]) * G;
      }
    }
  }
  return J;
}

NodalMatrix point_load_distribute(const VecX& s, const Vec3& f) { return f * s.transpose(); }

void scatter_add(const std::vector<Slot>& dof_map, const NodalMatrix& local, VecX& global) {
  if (static_cast<std::size_t>(local.cols()) != dof_map.size()) {
    throw InternalError("scatter: local block has " + std::to_string(local.cols()) +
                        " columns for " + std::to_string(dof_map.size()) + " slots");
  }
  for (std::size_t k = 0; k < dof_map.size(); ++k) {
    const auto base = static_cast<Eigen::Index>(3 * dof_map[k]);
    if (base + 3 > global.size()) {
      throw InternalError("scatter: slot " + std::to_string(dof_map[k]) + " out of range");
    }
    global.segment<3>(base) += local.col(static_cast<Eigen::Index>(k));
  }
}

NodalMatrix gather(const std::vector<Slot>& dof_map, const VecX& global) {
  NodalMatrix out(3, static_cast<Eigen::Index>(dof_map.size()));
  for (std::size_t k = 0; k < dof_map.size(); ++k) {
    const auto base = static_cast<Eigen::Index>(3 * dof_map[k]);
    if (base + 3 > global.size()) {
      throw InternalError("gather: slot " + std::to_string(dof_map[k]) + " out of range");
    }
    out.col(static_cast<Eigen::Index>(k)) = global.segment<3>(base);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

MassMatrix assemble_mass(const Model& model, const AssemblyOptions& opts) {
  const auto& els = model.elements();
  std::vector<MatX> local(els.size());
  for_each_element(els.size(), opts, [&](std::size_t e) {
    local[e] = element_mass_matrix(els[e], model.body(els[e].body).density);
  });
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t e = 0; e < els.size(); ++e) {
    const auto& map = els[e].dof_map;
    for (std::size_t i = 0; i < map.size(); ++i) {
      for (std::size_t j = 0; j < map.size(); ++j) {
        t.emplace_back(static_cast<int>(map[i]), static_cast<int>(map[j]),
                       local[e](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(model.slot_count());
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return MassMatrix(std::move(m));
}

VecX assemble_internal_force(const Model& model, const VecX& q, const VecX& v,
                             const AssemblyOptions& opts, VecX* viscous) {
  const auto& els = model.elements();
  std::vector<NodalMatrix> f(els.size()), fv(els.size());
  for_each_element(els.size(), opts, [&](std::size_t e) {
    const auto& el = els[e];
    const auto state = element_state(el, q, v);
    f[e] = with_element_id(e, [&] {
      return internal_force_element(el.force_qp, state, model.body(el.body).material,
                                    viscous ? &fv[e] : nullptr);
    });
  });
  VecX out = VecX::Zero(model.dof_count());
  if (viscous) *viscous = VecX::Zero(model.dof_count());
  for (std::size_t e = 0; e < els.size(); ++e) {
    scatter_add(els[e].dof_map, f[e], out);
    if (viscous) scatter_add(els[e].dof_map, fv[e], *viscous);
  }
  return out;
}

void assemble_tangent(const Model& model, const VecX& q, const VecX& v, BlockSparseMatrix& K,
                      BlockSparseMatrix& D, const AssemblyOptions& opts) {
  const auto& els = model.elements();
  std::vector<ElementTangent> local(els.size());
  for_each_element(els.size(), opts, [&](std::size_t e) {
    const auto& el = els[e];
    const auto state = element_state(el, q, v);
    local[e] = with_element_id(
        e, [&] { return tangent_element(el.force_qp, state, model.body(el.body).material); });
  });
  K.set_zero();
  D.set_zero();
  for (std::size_t e = 0; e < els.size(); ++e) {
    add_local_matrix(els[e].dof_map, local[e].K, K);
    if (model.body(els[e].body).material.viscous) add_local_matrix(els[e].dof_map, local[e].D, D);
  }
}

double assemble_strain_energy(const Model& model, const VecX& q, const AssemblyOptions& opts) {
  const auto& els = model.elements();
  std::vector<double> U(els.size(), 0.0);
  const VecX zero = VecX::Zero(q.size());
  for_each_element(els.size(), opts, [&](std::size_t e) {
    const auto& el = els[e];
    const auto state = element_state(el, q, zero);
    U[e] = with_element_id(
        e, [&] { return element_strain_energy(el.force_qp, state, model.body(el.body).material); });
  });
  double total = 0.0;
  for (double u : U) total += u;
  return total;
}

double assemble_dissipation_rate(const Model& model, const VecX& q, const VecX& v,
                                 const AssemblyOptions& opts) {
  const auto& els = model.elements();
  std::vector<double> W(els.size(), 0.0);
  for_each_element(els.size(), opts, [&](std::size_t e) {
    const auto& el = els[e];
    W[e] = element_dissipation_rate(el.force_qp, element_state(el, q, v),
                                    model.body(el.body).material);
  });
  double total = 0.0;
  for (double w : W) total += w;
  return total;
}

VecX assemble_force_fields(const Model& model, std::span<const ForceField> fields, const VecX& q,
                           double t, const AssemblyOptions& opts) {
  const auto& els = model.elements();
  std::vector<NodalMatrix> f(els.size());
  const VecX zero = VecX::Zero(q.size());
  for_each_element(els.size(), opts, [&](std::size_t e) {
    const auto& el = els[e];
    const auto state = element_state(el, q, zero);
    f[e] = NodalMatrix::Zero(3, el.basis.n_u());
    for (const auto& field : fields) {
      if (!field.applies_to(el.body)) continue;
      f[e] += force_field_element(el.mass_qp, state, model.body(el.body).density, field, t);
    }
  });
  VecX out = VecX::Zero(model.dof_count());
  for (std::size_t e = 0; e < els.size(); ++e) scatter_add(els[e].dof_map, f[e], out);
  return out;
}

void assemble_force_field_jacobian(const Model& model, std::span<const ForceField> fields, double t,
                                   BlockSparseMatrix& out) {
  for (const auto& field : fields) {
    if (field.kind == ForceField::Kind::Uniform) continue;
    for (const auto& el : model.elements()) {
      if (!field.applies_to(el.body)) continue;
      add_local_matrix(el.dof_map,
                       force_field_jacobian_element(el.mass_qp, model.body(el.body).density, field, t),
                       out);
    }
  }
}

double force_field_potential(const Model& model, std::span<const ForceField> fields, const VecX& q,
                             double t) {
  double V = 0.0;
  for (const auto& el : model.elements()) {
    const double rho = model.body(el.body).density;
    const NodalMatrix N = gather(el.dof_map, q);
    for (const auto& field : fields) {
      if (!field.applies_to(el.body)) continue;
      for (const auto& qp : el.mass_qp) V -= rho * qp.weight * field.potential(N * qp.s, t);
    }
  }
  return V;
}

VecX assemble_point_loads(const Model& model, std::span<const PointLoad> loads, double t) {
  VecX out = VecX::Zero(model.dof_count());
  for (const auto& load : loads) {
    const auto& el = model.elements().at(load.element);
    scatter_add(el.dof_map, point_load_distribute(load.s, load.profile(t) * load.force), out);
  }
  return out;
}

double point_load_potential(const Model& model, std::span<const PointLoad> loads, const VecX& q,
                            double t) {
  double V = 0.0;
  for (const auto& load : loads) {
    V -= (load.profile(t) * load.force).dot(model.interpolate(q, load.element, load.s));
  }
  return V;
}

}  // namespace tlfea
