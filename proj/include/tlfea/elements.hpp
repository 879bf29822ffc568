#pragma once

#include "tlfea/types.hpp"

#include <array>
#include <string_view>

namespace tlfea {

enum class ElementKind { Beam3243, Shell3443, Tet10 };

std::string_view to_string(ElementKind kind);
ElementKind element_kind_from_string(std::string_view name);

/// Number of vector unknowns per node: position plus three slopes for ANCF, position only for T10.
int slots_per_node(ElementKind kind);
int nodes_per_element(ElementKind kind);

/// Local coordinates of a material point. For ANCF elements these are lengths inside the
/// reference box; for T10 they are the parent coordinates (xi, eta, zeta).
struct MaterialCoords {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;

  Vec3 vec() const { return {u, v, w}; }
  static MaterialCoords from(const Vec3& x) { return {x[0], x[1], x[2]}; }
  bool operator==(const MaterialCoords&) const = default;
};

enum class DomainPolicy { Strict, Lenient };
enum class QuadraturePurpose { Mass, Force };

struct QuadratureRule {
  std::vector<MaterialCoords> points;
  std::vector<double> weights;
  /// Total polynomial degree integrated exactly over the parent domain.
  int exact_degree = 0;

  std::size_t size() const { return points.size(); }
};

/// Shape-function machinery for one element. Immutable after construction.
///
/// ANCF reference boxes:
///   Beam3243:  nodes at u = 0 and u = L (v = w = 0); section v in [-W/2, W/2], w in [-H/2, H/2].
///              dims = (L, W, H).
///   Shell3443: nodes at the corners (0,0), (Lu,0), (Lu,Lw), (0,Lw) of the (u, w) midsurface with
///              v = 0; thickness v in [-T/2, T/2]. dims = (Lu, T, Lw).
/// T10 keeps its reference nodal coordinates X_a; corner nodes 1..4, then edges
/// (1,2), (2,3), (3,1), (1,4), (2,4), (3,4).
class ElementBasis {
 public:
  ElementKind kind() const { return kind_; }
  int n_u() const { return n_u_; }
  const Vec3& dims() const { return dims_; }
  /// ANCF only: the interpolation matrix assembled column-wise from b and its derivatives at the nodes.
  const MatX& b_matrix() const { return b_; }
  const MatX& b_inverse() const { return b_inv_; }
  /// 2-norm condition number of the interpolation matrix (ANCF) or of dX/dxi (T10).
  double condition_number() const { return cond_; }
  const std::array<Vec3, 10>& reference_nodes() const { return x_ref_; }

  bool contains(const MaterialCoords& u, double rel_tol = 1e-10) const;

  /// Material coordinates of the element nodes (one entry per node, not per unknown).
  std::vector<MaterialCoords> node_coords() const;

  /// Reference nodal matrix in the element's local frame. ANCF: node positions in the box and
  /// identity slopes. T10: X_a.
  NodalMatrix reference_nodal_matrix() const;

  /// Geometric Jacobian of the parent -> reference map. ANCF rules already carry the
  /// constant box scaling in their weights, so this is 1 there.
  double geometric_jacobian(const MaterialCoords& u) const;

  /// dX/dxi for T10 (identity for ANCF).
  Mat3 parent_jacobian(const MaterialCoords& u) const;

 private:
  friend ElementBasis build_basis_beam3243(const Vec3& dims);
  friend ElementBasis build_basis_shell3443(const Vec3& dims);
  friend ElementBasis build_basis_tet10(const std::array<Vec3, 10>& nodes);
  friend VecX eval_shape(const ElementBasis&, const MaterialCoords&, DomainPolicy);
  friend GradMatrix eval_ref_gradients(const ElementBasis&, const MaterialCoords&, DomainPolicy);

  ElementKind kind_ = ElementKind::Beam3243;
  int n_u_ = 0;
  Vec3 dims_ = Vec3::Zero();
  MatX b_;
  MatX b_inv_;
  double cond_ = 1.0;
  std::array<Vec3, 10> x_ref_{};
};

ElementBasis build_basis_beam3243(const Vec3& dims);
ElementBasis build_basis_shell3443(const Vec3& dims);
ElementBasis build_basis_tet10(const std::array<Vec3, 10>& nodes);

/// s(u) = B^-1 b(u) for ANCF, N_a(xi, eta, zeta) for T10.
VecX eval_shape(const ElementBasis& basis, const MaterialCoords& u,
                DomainPolicy policy = DomainPolicy::Strict);

/// H(u) = ds/du with respect to reference coordinates; for T10 the parent gradients are mapped
/// through (dX/dxi)^-1.
GradMatrix eval_ref_gradients(const ElementBasis& basis, const MaterialCoords& u,
                              DomainPolicy policy = DomainPolicy::Strict);

QuadratureRule quadrature_for(const ElementBasis& basis, QuadraturePurpose purpose);

/// Tensor Gauss-Legendre rule over an ANCF box with the given point counts per direction.
QuadratureRule ancf_gauss_rule(const ElementBasis& basis, int nu, int nv, int nw);

/// 5-point degree-3 rule on the parent tet (negative centroid weight).
QuadratureRule tet_rule_degree3();
/// Collapsed-coordinate product Gauss rule on the parent tet with n points per direction;
/// positive weights, exact through degree 2n - 3.
QuadratureRule tet_collapsed_rule(int n);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace tlfea
