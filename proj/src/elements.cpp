#include "tlfea/elements.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <sstream>

namespace tlfea {

namespace {

struct Monomial {
  int a, b, c;  // u^a v^b w^c
};

constexpr std::array<Monomial, 8> kBeamMonomials{{
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {2, 0, 0}, {3, 0, 0}}};

constexpr std::array<Monomial, 16> kShellMonomials{{{0, 0, 0},
                                                    {1, 0, 0},
                                                    {0, 1, 0},
                                                    {0, 0, 1},
                                                    {1, 0, 1},
                                                    {0, 1, 1},
                                                    {1, 1, 0},
                                                    {2, 0, 0},
                                                    {0, 0, 2},
                                                    {3, 0, 0},
                                                    {0, 0, 3},
                                                    {2, 0, 1},
                                                    {1, 0, 2},
                                                    {1, 1, 1},
                                                    {3, 0, 1},
                                                    {1, 0, 3}}};

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// d^k/dx^k x^n evaluated at x.
double dpow(double x, int n, int k) {
  if (k > n) return 0.0;
  double coef = 1.0;
  for (int i = 0; i < k; ++i) coef *= (n - i);
  return coef * ipow(x, n - k);
}

// Basis vector or one of its first derivatives: deriv = -1 (value), 0 (u), 1 (v), 2 (w).
template <std::size_t N>
VecX eval_monomials(const std::array<Monomial, N>& mono, const Vec3& x, int deriv) {
  VecX out(static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k < N; ++k) {
    const auto& m = mono[k];
    const int du = deriv == 0 ? 1 : 0;
    const int dv = deriv == 1 ? 1 : 0;
    const int dw = deriv == 2 ? 1 : 0;
    out[static_cast<Eigen::Index>(k)] =
        dpow(x[0], m.a, du) * dpow(x[1], m.b, dv) * dpow(x[2], m.c, dw);
  }
  return out;
}

VecX ancf_monomials(ElementKind kind, const Vec3& x, int deriv) {
  return kind == ElementKind::Beam3243 ? eval_monomials(kBeamMonomials, x, deriv)
                                       : eval_monomials(kShellMonomials, x, deriv);
}

std::vector<Vec3> ancf_node_positions(ElementKind kind, const Vec3& dims) {
  if (kind == ElementKind::Beam3243) return {Vec3::Zero(), Vec3(dims[0], 0, 0)};
  return {Vec3::Zero(), Vec3(dims[0], 0, 0), Vec3(dims[0], 0, dims[2]), Vec3(0, 0, dims[2])};
}

void build_ancf(ElementKind kind, const Vec3& dims, MatX& b, MatX& b_inv, double& cond) {
  if (!(dims.array() > 0.0).all()) {
    throw ConstructionError("ANCF element extents must be strictly positive");
  }
  const auto nodes = ancf_node_positions(kind, dims);
  const Eigen::Index n = kind == ElementKind::Beam3243 ? 8 : 16;
  b.resize(n, n);
  Eigen::Index col = 0;
  for (const auto& p : nodes) {
    b.col(col++) = ancf_monomials(kind, p, -1);
    for (int d = 0; d < 3; ++d) b.col(col++) = ancf_monomials(kind, p, d);
  }
  Eigen::FullPivLU<MatX> lu(b);
  const Eigen::JacobiSVD<MatX> svd(b);
  const auto& sv = svd.singularValues();
  cond = sv[n - 1] > 0.0 ? sv[0] / sv[n - 1] : std::numeric_limits<double>::infinity();
  if (!lu.isInvertible() || cond > 1e13) {
    std::ostringstream msg;
    msg << "singular " << to_string(kind) << " interpolation matrix (condition number " << cond
        << ")";
    throw ConstructionError(msg.str());
  }
  b_inv = lu.inverse();
}

// T10 parent shape functions and their parent gradients.
void tet10_parent(const Vec3& xi, Eigen::Matrix<double, 10, 1>& N,
                  Eigen::Matrix<double, 10, 3>* dN) {
  const double L1 = 1.0 - xi[0] - xi[1] - xi[2];
  const double L2 = xi[0], L3 = xi[1], L4 = xi[2];
  N << L1 * (2 * L1 - 1), L2 * (2 * L2 - 1), L3 * (2 * L3 - 1), L4 * (2 * L4 - 1), 4 * L1 * L2,
      4 * L2 * L3, 4 * L3 * L1, 4 * L1 * L4, 4 * L2 * L4, 4 * L3 * L4;
  if (!dN) return;
  // dL/dxi rows for L1..L4.
  const Eigen::Matrix<double, 4, 3> dL =
      (Eigen::Matrix<double, 4, 3>() << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1).finished();
  const std::array<double, 4> L{L1, L2, L3, L4};
  for (int a = 0; a < 4; ++a) dN->row(a) = (4 * L[a] - 1) * dL.row(a);
  constexpr std::array<std::pair<int, int>, 6> edges{{{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}}};
  for (int e = 0; e < 6; ++e) {
    const auto [i, j] = edges[e];
    dN->row(4 + e) = 4 * (L[i] * dL.row(j) + L[j] * dL.row(i));
  }
}

Mat3 tet10_parent_jacobian(const std::array<Vec3, 10>& x, const Vec3& xi) {
  Eigen::Matrix<double, 10, 1> N;
  Eigen::Matrix<double, 10, 3> dN;
  tet10_parent(xi, N, &dN);
  Mat3 J = Mat3::Zero();
  for (int a = 0; a < 10; ++a) J += x[a] * dN.row(a);
  return J;
}

void check_domain(const ElementBasis& basis, const MaterialCoords& u, DomainPolicy policy) {
  if (policy == DomainPolicy::Strict && !basis.contains(u)) {
    std::ostringstream msg;
    msg << "material point (" << u.u << ", " << u.v << ", " << u.w << ") outside "
        << to_string(basis.kind()) << " reference domain";
    throw DomainError(msg.str());
  }
}

}  // namespace

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Beam3243: return "beam3243";
    case ElementKind::Shell3443: return "shell3443";
    case ElementKind::Tet10: return "tet10";
  }
  return "?";
}

ElementKind element_kind_from_string(std::string_view name) {
  if (name == "beam3243") return ElementKind::Beam3243;
  if (name == "shell3443") return ElementKind::Shell3443;
  if (name == "tet10") return ElementKind::Tet10;
  throw Error("unknown element kind '" + std::string(name) + "'");
}

int slots_per_node(ElementKind kind) { return kind == ElementKind::Tet10 ? 1 : 4; }

int nodes_per_element(ElementKind kind) {
  switch (kind) {
    case ElementKind::Beam3243: return 2;
    case ElementKind::Shell3443: return 4;
    case ElementKind::Tet10: return 10;
  }
  return 0;
}

ElementBasis build_basis_beam3243(const Vec3& dims) {
  ElementBasis basis;
  basis.kind_ = ElementKind::Beam3243;
  basis.n_u_ = 8;
  basis.dims_ = dims;
  build_ancf(basis.kind_, dims, basis.b_, basis.b_inv_, basis.cond_);
  return basis;
}

ElementBasis build_basis_shell3443(const Vec3& dims) {
  ElementBasis basis;
  basis.kind_ = ElementKind::Shell3443;
  basis.n_u_ = 16;
  basis.dims_ = dims;
  build_ancf(basis.kind_, dims, basis.b_, basis.b_inv_, basis.cond_);
  return basis;
}

ElementBasis build_basis_tet10(const std::array<Vec3, 10>& nodes) {
  ElementBasis basis;
  basis.kind_ = ElementKind::Tet10;
  basis.n_u_ = 10;
  basis.x_ref_ = nodes;

  double scale = 0.0;
  for (int a = 1; a < 4; ++a) scale = std::max(scale, (nodes[a] - nodes[0]).norm());
  if (scale <= 0.0) throw ConstructionError("degenerate tet10: coincident corner nodes");

  constexpr std::array<std::pair<int, int>, 6> edges{{{0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3}}};
  for (int e = 0; e < 6; ++e) {
    const auto [i, j] = edges[e];
    const Vec3 mid = 0.5 * (nodes[i] + nodes[j]);
    if ((nodes[4 + e] - mid).norm() > 1e-9 * scale) {
      throw ConstructionError("tet10 mid-edge node " + std::to_string(5 + e) +
                              " is not at its edge midpoint");
    }
  }
  const Mat3 J = tet10_parent_jacobian(nodes, Vec3(0.25, 0.25, 0.25));
  const double det = J.determinant();
  if (std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw ConstructionError("degenerate tet10: near-zero reference volume");
  }
  if (det < 0.0) throw ConstructionError("inverted tet10 reference element (det dX/dxi < 0)");
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(J.transpose() * J);
  basis.cond_ = std::sqrt(eig.eigenvalues()[2] / eig.eigenvalues()[0]);
  basis.dims_ = Vec3::Constant(scale);
  return basis;
}

bool ElementBasis::contains(const MaterialCoords& u, double rel_tol) const {
  if (kind_ == ElementKind::Tet10) {
    const double t = rel_tol;
    return u.u >= -t && u.v >= -t && u.w >= -t && u.u + u.v + u.w <= 1.0 + t;
  }
  const Vec3 x = u.vec();
  const Vec3 lo = kind_ == ElementKind::Beam3243 ? Vec3(0, -dims_[1] / 2, -dims_[2] / 2)
                                                 : Vec3(0, -dims_[1] / 2, 0);
  const Vec3 hi = kind_ == ElementKind::Beam3243 ? Vec3(dims_[0], dims_[1] / 2, dims_[2] / 2)
                                                 : Vec3(dims_[0], dims_[1] / 2, dims_[2]);
  for (int k = 0; k < 3; ++k) {
    const double t = rel_tol * dims_[k];
    if (x[k] < lo[k] - t || x[k] > hi[k] + t) return false;
  }
  return true;
}

std::vector<MaterialCoords> ElementBasis::node_coords() const {
  if (kind_ == ElementKind::Tet10) {
    return {{0, 0, 0},     {1, 0, 0},     {0, 1, 0},   {0, 0, 1},     {0.5, 0, 0},
            {0.5, 0.5, 0}, {0, 0.5, 0},   {0, 0, 0.5}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
  }
  std::vector<MaterialCoords> out;
  for (const auto& p : ancf_node_positions(kind_, dims_)) out.push_back(MaterialCoords::from(p));
  return out;
}

NodalMatrix ElementBasis::reference_nodal_matrix() const {
  NodalMatrix N(3, n_u_);
  if (kind_ == ElementKind::Tet10) {
    for (int a = 0; a < 10; ++a) N.col(a) = x_ref_[a];
    return N;
  }
  const auto nodes = ancf_node_positions(kind_, dims_);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(4 * k);
    N.col(c) = nodes[k];
    N.block<3, 3>(0, c + 1) = Mat3::Identity();
  }
  return N;
}

Mat3 ElementBasis::parent_jacobian(const MaterialCoords& u) const {
  if (kind_ != ElementKind::Tet10) return Mat3::Identity();
  return tet10_parent_jacobian(x_ref_, u.vec());
}

double ElementBasis::geometric_jacobian(const MaterialCoords& u) const {
  if (kind_ != ElementKind::Tet10) return 1.0;
  return parent_jacobian(u).determinant();
}

VecX eval_shape(const ElementBasis& basis, const MaterialCoords& u, DomainPolicy policy) {
  check_domain(basis, u, policy);
  if (basis.kind_ == ElementKind::Tet10) {
    Eigen::Matrix<double, 10, 1> N;
    tet10_parent(u.vec(), N, nullptr);
    return N;
  }
  return basis.b_inv_ * ancf_monomials(basis.kind_, u.vec(), -1);
}

GradMatrix eval_ref_gradients(const ElementBasis& basis, const MaterialCoords& u,
                              DomainPolicy policy) {
  check_domain(basis, u, policy);
  if (basis.kind_ == ElementKind::Tet10) {
    Eigen::Matrix<double, 10, 1> N;
    Eigen::Matrix<double, 10, 3> dN;
    tet10_parent(u.vec(), N, &dN);
    Mat3 J = Mat3::Zero();
    for (int a = 0; a < 10; ++a) J += basis.x_ref_[a] * dN.row(a);
    const double det = J.determinant();
    if (det <= 0.0) {
      throw ConstructionError("inverted tet10 reference element (det dX/dxi = " +
                              std::to_string(det) + ")");
    }
    return dN * J.inverse();
  }
  GradMatrix H(basis.n_u_, 3);
  for (int d = 0; d < 3; ++d) H.col(d) = basis.b_inv_ * ancf_monomials(basis.kind_, u.vec(), d);
  return H;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence: p1 = P_n(x), p0 = P_{n-1}(x).
      double p1 = 1.0, p0 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p0;
        p0 = p1;
        p1 = ((2 * k - 1) * x * p0 - (k - 1) * p2) / k;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
}

QuadratureRule ancf_gauss_rule(const ElementBasis& basis, int nu, int nv, int nw) {
  if (basis.kind() == ElementKind::Tet10) throw Error("ancf_gauss_rule requires an ANCF basis");
  const Vec3 d = basis.dims();
  const Vec3 lo = basis.kind() == ElementKind::Beam3243 ? Vec3(0, -d[1] / 2, -d[2] / 2)
                                                        : Vec3(0, -d[1] / 2, 0);
  std::array<std::vector<double>, 3> x, w;
  const std::array<int, 3> n{nu, nv, nw};
  for (int k = 0; k < 3; ++k) gauss_legendre(n[k], x[k], w[k]);

  QuadratureRule rule;
  rule.exact_degree = 2 * std::min({nu, nv, nw}) - 1;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      for (int k = 0; k < nw; ++k) {
        const Vec3 t(x[0][i], x[1][j], x[2][k]);
        const Vec3 p = lo + 0.5 * (t + Vec3::Ones()).cwiseProduct(d);
        rule.points.push_back(MaterialCoords::from(p));
        rule.weights.push_back(w[0][i] * w[1][j] * w[2][k] * d.prod() / 8.0);
      }
    }
  }
  return rule;
}

QuadratureRule tet_rule_degree3() {
  QuadratureRule rule;
  rule.exact_degree = 3;
  rule.points = {{0.25, 0.25, 0.25},
                 {1.0 / 6, 1.0 / 6, 1.0 / 6},
                 {0.5, 1.0 / 6, 1.0 / 6},
                 {1.0 / 6, 0.5, 1.0 / 6},
                 {1.0 / 6, 1.0 / 6, 0.5}};
  rule.weights = {-2.0 / 15, 3.0 / 40, 3.0 / 40, 3.0 / 40, 3.0 / 40};
  return rule;
}

QuadratureRule tet_collapsed_rule(int n) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  QuadratureRule rule;
  rule.exact_degree = 2 * n - 3;
  for (int i = 0; i < n; ++i) {
    const double a = 0.5 * (x[i] + 1);
    for (int j = 0; j < n; ++j) {
      const double b = 0.5 * (x[j] + 1);
      for (int k = 0; k < n; ++k) {
        const double c = 0.5 * (x[k] + 1);
        rule.points.push_back({a, b * (1 - a), c * (1 - a) * (1 - b)});
        rule.weights.push_back(w[i] * w[j] * w[k] / 8.0 * (1 - a) * (1 - a) * (1 - b));
      }
    }
  }
  return rule;
}

QuadratureRule quadrature_for(const ElementBasis& basis, QuadraturePurpose purpose) {
  switch (basis.kind()) {
    case ElementKind::Beam3243: return ancf_gauss_rule(basis, 4, 2, 2);
    case ElementKind::Shell3443: return ancf_gauss_rule(basis, 4, 2, 4);
    case ElementKind::Tet10:
      // The 5-point rule has rank 5 < 10 when used for s_i s_j, so the mass integrand
      // gets a positive rule that integrates degree 4 exactly.
      return purpose == QuadraturePurpose::Force ? tet_rule_degree3() : tet_collapsed_rule(4);
  }
  return {};
}

}  // namespace tlfea
