#include "tlfea/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tlfea {

using nlohmann::json;

ScenarioError::ScenarioError(Kind kind, std::string path, const std::string& message)
    : Error(std::string(to_string(kind)) + " error at " + (path.empty() ? "/" : path) + ": " +
            message),
      kind_(kind),
      path_(std::move(path)) {}

std::string_view to_string(ScenarioError::Kind kind) {
  switch (kind) {
    case ScenarioError::Kind::Syntax: return "syntax";
    case ScenarioError::Kind::Schema: return "schema";
    case ScenarioError::Kind::Reference: return "reference";
    case ScenarioError::Kind::Physical: return "physical";
  }
  return "?";
}

namespace {

using EK = ScenarioError::Kind;

// Read-only cursor into the document that knows its JSON pointer.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(EK kind, const std::string& msg) const { throw ScenarioError(kind, path_, msg); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    expect_object();
    if (!j_->contains(key)) fail(EK::Schema, "missing required field '" + key + "'");
    return Node((*j_)[key], path_ + "/" + key);
  }
  std::optional<Node> opt(const std::string& key) const {
    expect_object();
    if (!j_->contains(key)) return std::nullopt;
    return Node((*j_)[key], path_ + "/" + key);
  }
  Node operator[](std::size_t i) const { return Node((*j_)[i], path_ + "/" + std::to_string(i)); }
  std::size_t size() const {
    expect_array();
    return j_->size();
  }

  void expect_object() const {
    if (!j_->is_object()) fail(EK::Schema, "expected an object");
  }
  void expect_array() const {
    if (!j_->is_array()) fail(EK::Schema, "expected an array");
  }
  void allow_keys(std::initializer_list<const char*> keys) const {
    expect_object();
    for (const auto& [k, _] : j_->items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        Node((*j_)[k], path_ + "/" + k).fail(EK::Schema, "unknown field '" + k + "'");
      }
    }
  }

  double num() const {
    if (!j_->is_number()) fail(EK::Schema, "expected a number");
    return j_->get<double>();
  }
  std::size_t index() const {
    if (!j_->is_number_integer() || j_->get<long long>() < 0) fail(EK::Schema, "expected a non-negative integer");
    return j_->get<std::size_t>();
  }
  std::string str() const {
    if (!j_->is_string()) fail(EK::Schema, "expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail(EK::Schema, "expected true or false");
    return j_->get<bool>();
  }
  Vec3 vec3() const {
    if (!j_->is_array() || j_->size() != 3) fail(EK::Schema, "expected an array of 3 numbers");
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = (*this)[static_cast<std::size_t>(k)].num();
    return v;
  }
  Mat3 mat3() const {
    if (!j_->is_array() || j_->size() != 3) fail(EK::Schema, "expected a 3x3 array");
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = (*this)[static_cast<std::size_t>(r)].vec3().transpose();
    return m;
  }
  std::vector<std::size_t> indices() const {
    expect_array();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].index());
    return out;
  }

  double num_or(const std::string& key, double def) const {
    auto n = opt(key);
    return n ? n->num() : def;
  }
  std::size_t index_or(const std::string& key, std::size_t def) const {
    auto n = opt(key);
    return n ? n->index() : def;
  }

 private:
  const json* j_;
  std::string path_;
};

void require(bool ok, const Node& n, const std::string& msg) {
  if (!ok) n.fail(EK::Physical, msg);
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
json mat_json(const Mat3& m) {
  return json::array({vec_json(m.row(0).transpose()), vec_json(m.row(1).transpose()),
                      vec_json(m.row(2).transpose())});
}

// ----- time functions ------------------------------------------------------------------------

TimeFunction parse_time_function(const Node& n) {
  if (n.raw().is_number()) return TimeFunction::constant(n.num());
  const std::string type = n.at("type").str();
  if (type == "constant") {
    n.allow_keys({"type", "value"});
    return TimeFunction::constant(n.at("value").num());
  }
  if (type == "ramp") {
    n.allow_keys({"type", "value0", "rate", "start"});
    return TimeFunction::ramp(n.num_or("value0", 0.0), n.at("rate").num(), n.num_or("start", 0.0));
  }
  if (type == "sine") {
    n.allow_keys({"type", "offset", "amplitude", "omega", "phase"});
    return TimeFunction::sine(n.num_or("offset", 0.0), n.at("amplitude").num(), n.at("omega").num(),
                              n.num_or("phase", 0.0));
  }
  n.at("type").fail(EK::Schema, "unknown time function type '" + type + "'");
}

json time_function_json(const TimeFunction& f) {
  switch (f.kind) {
    case TimeFunction::Kind::Constant: return f.a;
    case TimeFunction::Kind::Ramp:
      return {{"type", "ramp"}, {"value0", f.a}, {"rate", f.b}, {"start", f.c}};
    case TimeFunction::Kind::Sine:
      return {{"type", "sine"}, {"offset", f.a}, {"amplitude", f.b}, {"omega", f.c}, {"phase", f.d}};
  }
  return f.a;
}

// Lower bound of f on [0, t_end].
double time_function_min(const TimeFunction& f, double t_end) {
  switch (f.kind) {
    case TimeFunction::Kind::Constant: return f.a;
    case TimeFunction::Kind::Ramp: return std::min(f.a, f(t_end));
    case TimeFunction::Kind::Sine: return f.a - std::abs(f.b);
  }
  return f.a;
}

// ----- materials -----------------------------------------------------------------------------

MaterialEntry parse_material(const Node& n) {
  n.allow_keys({"model", "lambda", "mu", "E", "nu", "mu10", "mu01", "k", "density", "viscous"});
  MaterialEntry m;
  m.density = n.at("density").num();
  require(m.density > 0.0, n.at("density"), "density must be positive");
  const std::string model = n.at("model").str();
  if (model == "svk") {
    SvkParams p;
    if (n.has("E") || n.has("nu")) {
      if (n.has("lambda") || n.has("mu")) n.fail(EK::Schema, "give either (E, nu) or (lambda, mu)");
      const double E = n.at("E").num(), nu = n.at("nu").num();
      require(E > 0.0, n.at("E"), "Young's modulus must be positive");
      require(nu > -1.0 && nu < 0.5, n.at("nu"), "Poisson ratio must lie in (-1, 0.5)");
      p = lame_from_young(E, nu);
    } else {
      p.lambda = n.at("lambda").num();
      p.mu = n.at("mu").num();
    }
    require(p.mu > 0.0, n, "SVK requires mu > 0");
    require(p.lambda >= 0.0, n, "SVK requires lambda >= 0");
    m.spec.elastic = p;
  } else if (model == "mooney_rivlin") {
    MooneyRivlinParams p;
    p.mu10 = n.at("mu10").num();
    p.mu01 = n.at("mu01").num();
    p.k = n.at("k").num();
    require(p.mu10 >= 0.0 && p.mu01 >= 0.0, n, "Mooney-Rivlin requires mu10, mu01 >= 0");
    require(p.mu10 + p.mu01 > 0.0, n, "Mooney-Rivlin requires mu10 + mu01 > 0");
    require(p.k > 0.0, n.at("k"), "Mooney-Rivlin requires k > 0");
    m.spec.elastic = p;
  } else {
    n.at("model").fail(EK::Schema, "unknown material model '" + model + "'");
  }
  if (auto v = n.opt("viscous")) {
    v->allow_keys({"eta", "lambda_v"});
    KelvinVoigtParams kv{v->at("eta").num(), v->num_or("lambda_v", 0.0)};
    require(kv.eta >= 0.0 && kv.lambda_v >= 0.0, *v, "viscosities must be non-negative");
    m.spec.viscous = kv;
  }
  return m;
}

json material_json(const MaterialEntry& m) {
  json j;
  if (const auto* s = std::get_if<SvkParams>(&m.spec.elastic)) {
    j = {{"model", "svk"}, {"lambda", s->lambda}, {"mu", s->mu}};
  } else {
    const auto& p = std::get<MooneyRivlinParams>(m.spec.elastic);
    j = {{"model", "mooney_rivlin"}, {"mu10", p.mu10}, {"mu01", p.mu01}, {"k", p.k}};
  }
  j["density"] = m.density;
  if (m.spec.viscous) j["viscous"] = {{"eta", m.spec.viscous->eta}, {"lambda_v", m.spec.viscous->lambda_v}};
  return j;
}

// ----- meshes --------------------------------------------------------------------------------

// Orthonormal right-handed triad (r_u, r_v, r_w) with r_u along `dir`, r_w as close to `up` as possible.
Mat3 beam_frame(const Vec3& dir, const Vec3& up) {
  const Vec3 ru = dir.normalized();
  Vec3 rw = up - up.dot(ru) * ru;
  if (rw.norm() < 1e-12) rw = ru.unitOrthogonal();
  rw.normalize();
  const Vec3 rv = rw.cross(ru);
  Mat3 m;
  m << ru, rv, rw;
  return m;
}

void push_ancf_node(std::vector<Vec3>& cols, const Vec3& r, const Mat3& frame) {
  cols.push_back(r);
  for (int k = 0; k < 3; ++k) cols.push_back(frame.col(k));
}

NodalMatrix to_nodal(const std::vector<Vec3>& cols) {
  NodalMatrix N(3, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = cols[k];
  return N;
}

BodyMesh generate_beam(const Node& g, const Vec3& section) {
  g.allow_keys({"type", "start", "end", "elements", "up"});
  if (g.at("type").str() != "line") g.at("type").fail(EK::Schema, "beam generators support type 'line'");
  const Vec3 a = g.at("start").vec3(), b = g.at("end").vec3();
  const std::size_t n = g.at("elements").index();
  require(n > 0, g.at("elements"), "at least one element is required");
  require((b - a).norm() > 0.0, g, "start and end coincide");
  const Vec3 up = g.has("up") ? g.at("up").vec3() : Vec3::UnitZ();
  const Mat3 frame = beam_frame(b - a, up);
  BodyMesh m;
  m.kind = ElementKind::Beam3243;
  std::vector<Vec3> cols;
  const double L = (b - a).norm() / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    push_ancf_node(cols, a + (b - a) * (static_cast<double>(i) / static_cast<double>(n)), frame);
  }
  for (std::size_t i = 0; i < n; ++i) {
    m.connectivity.push_back({i, i + 1});
    m.element_dims.emplace_back(L, section[0], section[1]);
  }
  m.slots = to_nodal(cols);
  return m;
}

BodyMesh generate_shell(const Node& g, double thickness) {
  g.allow_keys({"type", "origin", "u_axis", "w_axis", "size", "elements"});
  if (g.at("type").str() != "rectangle") g.at("type").fail(EK::Schema, "shell generators support type 'rectangle'");
  const Vec3 o = g.at("origin").vec3();
  const Vec3 eu = g.at("u_axis").vec3().normalized();
  Vec3 ew = g.at("w_axis").vec3();
  ew = (ew - ew.dot(eu) * eu);
  require(ew.norm() > 1e-12, g.at("w_axis"), "w_axis must not be parallel to u_axis");
  ew.normalize();
  const auto size = g.at("size");
  if (size.size() != 2) size.fail(EK::Schema, "expected [Lu, Lw]");
  const double Lu = size[0].num(), Lw = size[1].num();
  require(Lu > 0.0 && Lw > 0.0, size, "extents must be positive");
  const auto els = g.at("elements");
  if (els.size() != 2) els.fail(EK::Schema, "expected [nu, nw]");
  const std::size_t nu = els[0].index(), nw = els[1].index();
  require(nu > 0 && nw > 0, els, "at least one element per direction is required");
  Mat3 frame;
  frame << eu, ew.cross(eu), ew;
  BodyMesh m;
  m.kind = ElementKind::Shell3443;
  std::vector<Vec3> cols;
  for (std::size_t j = 0; j <= nw; ++j) {
    for (std::size_t i = 0; i <= nu; ++i) {
      push_ancf_node(cols, o + eu * (Lu * static_cast<double>(i) / static_cast<double>(nu)) +
                               ew * (Lw * static_cast<double>(j) / static_cast<double>(nw)),
                     frame);
    }
  }
  auto id = [&](std::size_t i, std::size_t j) { return j * (nu + 1) + i; };
  for (std::size_t j = 0; j < nw; ++j) {
    for (std::size_t i = 0; i < nu; ++i) {
      m.connectivity.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      m.element_dims.emplace_back(Lu / static_cast<double>(nu), thickness, Lw / static_cast<double>(nw));
    }
  }
  m.slots = to_nodal(cols);
  return m;
}

BodyMesh generate_tet_box(const Node& g) {
  g.allow_keys({"type", "origin", "size", "elements"});
  if (g.at("type").str() != "box") g.at("type").fail(EK::Schema, "tet10 generators support type 'box'");
  const Vec3 o = g.at("origin").vec3();
  const Vec3 size = g.at("size").vec3();
  require((size.array() > 0.0).all(), g.at("size"), "extents must be positive");
  const auto els = g.at("elements");
  if (els.size() != 3) els.fail(EK::Schema, "expected [nx, ny, nz]");
  const std::array<std::size_t, 3> n{els[0].index(), els[1].index(), els[2].index()};
  require(n[0] > 0 && n[1] > 0 && n[2] > 0, els, "at least one cell per direction is required");

  std::vector<Vec3> pts;
  auto cid = [&](std::size_t i, std::size_t j, std::size_t k) {
    return (k * (n[1] + 1) + j) * (n[0] + 1) + i;
  };
  for (std::size_t k = 0; k <= n[2]; ++k)
    for (std::size_t j = 0; j <= n[1]; ++j)
      for (std::size_t i = 0; i <= n[0]; ++i)
        pts.push_back(o + Vec3(size[0] * static_cast<double>(i) / static_cast<double>(n[0]),
                               size[1] * static_cast<double>(j) / static_cast<double>(n[1]),
                               size[2] * static_cast<double>(k) / static_cast<double>(n[2])));

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> mids;
  auto mid = [&](std::size_t a, std::size_t b) {
    const auto key = std::minmax(a, b);
    auto it = mids.find(key);
    if (it != mids.end()) return it->second;
    pts.push_back(0.5 * (pts[a] + pts[b]));
    mids.emplace(key, pts.size() - 1);
    return pts.size() - 1;
  };

  BodyMesh m;
  m.kind = ElementKind::Tet10;
  constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (std::size_t k = 0; k < n[2]; ++k)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t i = 0; i < n[0]; ++i)
        for (const auto& p : perms) {
          std::array<std::size_t, 3> c{i, j, k};
          std::array<std::size_t, 4> corner;
          corner[0] = cid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[static_cast<std::size_t>(p[s])];
            corner[static_cast<std::size_t>(s) + 1] = cid(c[0], c[1], c[2]);
          }
          const double vol = (pts[corner[1]] - pts[corner[0]])
                                 .cross(pts[corner[2]] - pts[corner[0]])
                                 .dot(pts[corner[3]] - pts[corner[0]]);
          if (vol < 0) std::swap(corner[1], corner[2]);
          m.connectivity.push_back({corner[0], corner[1], corner[2], corner[3],
                                    mid(corner[0], corner[1]), mid(corner[1], corner[2]),
                                    mid(corner[2], corner[0]), mid(corner[0], corner[3]),
                                    mid(corner[1], corner[3]), mid(corner[2], corner[3])});
        }
  m.slots = to_nodal(pts);
  return m;
}

BodyMesh parse_mesh(const Node& n) {
  const auto kind_node = n.at("kind");
  ElementKind kind;
  try {
    kind = element_kind_from_string(kind_node.str());
  } catch (const Error& e) {
    kind_node.fail(EK::Schema, e.what());
  }
  const bool beam = kind == ElementKind::Beam3243;
  const bool shell = kind == ElementKind::Shell3443;
  if (beam) n.allow_keys({"kind", "section", "nodes", "elements", "generator"});
  if (shell) n.allow_keys({"kind", "thickness", "nodes", "elements", "generator"});
  if (kind == ElementKind::Tet10) n.allow_keys({"kind", "nodes", "elements", "generator"});

  Vec3 section = Vec3::Zero();
  double thickness = 0.0;
  if (beam) {
    const auto s = n.at("section");
    if (s.size() != 2) s.fail(EK::Schema, "expected [width, height]");
    section = Vec3(s[0].num(), s[1].num(), 0.0);
    require(section[0] > 0.0 && section[1] > 0.0, s, "section extents must be positive");
  }
  if (shell) {
    thickness = n.at("thickness").num();
    require(thickness > 0.0, n.at("thickness"), "thickness must be positive");
  }

  if (auto g = n.opt("generator")) {
    if (n.has("nodes") || n.has("elements")) n.fail(EK::Schema, "give either a generator or explicit nodes/elements");
    if (beam) return generate_beam(*g, section);
    if (shell) return generate_shell(*g, thickness);
    return generate_tet_box(*g);
  }

  BodyMesh m;
  m.kind = kind;
  const auto nodes = n.at("nodes");
  std::vector<Vec3> cols;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto nd = nodes[i];
    if (kind == ElementKind::Tet10) {
      cols.push_back(nd.vec3());
      continue;
    }
    nd.allow_keys({"r", "ru", "rv", "rw"});
    cols.push_back(nd.at("r").vec3());
    cols.push_back(nd.has("ru") ? nd.at("ru").vec3() : Vec3::UnitX());
    cols.push_back(nd.has("rv") ? nd.at("rv").vec3() : Vec3::UnitY());
    cols.push_back(nd.has("rw") ? nd.at("rw").vec3() : Vec3::UnitZ());
  }
  m.slots = to_nodal(cols);
  const std::size_t n_nodes = nodes.size();
  const auto els = n.at("elements");
  const auto npe = static_cast<std::size_t>(nodes_per_element(kind));
  const auto spn = static_cast<Eigen::Index>(slots_per_node(kind));
  for (std::size_t e = 0; e < els.size(); ++e) {
    const auto el = els[e];
    std::vector<std::size_t> conn;
    if (kind == ElementKind::Tet10) {
      conn = el.indices();
    } else {
      el.allow_keys({"nodes", "dims"});
      conn = el.at("nodes").indices();
    }
    if (conn.size() != npe) el.fail(EK::Schema, "expected " + std::to_string(npe) + " node indices");
    for (auto c : conn) {
      if (c >= n_nodes) el.fail(EK::Reference, "node index " + std::to_string(c) + " does not exist");
    }
    std::set<std::size_t> uniq(conn.begin(), conn.end());
    if (uniq.size() != conn.size()) el.fail(EK::Physical, "repeated node index");
    if (kind != ElementKind::Tet10) {
      Vec3 dims;
      if (auto d = el.opt("dims")) {
        dims = d->vec3();
      } else {
        const auto pos = [&](std::size_t k) { return Vec3(m.slots.col(static_cast<Eigen::Index>(conn[k]) * spn)); };
        dims = beam ? Vec3((pos(1) - pos(0)).norm(), section[0], section[1])
                    : Vec3((pos(1) - pos(0)).norm(), thickness, (pos(3) - pos(0)).norm());
      }
      require((dims.array() > 0.0).all(), el, "element extents must be positive");
      m.element_dims.push_back(dims);
    }
    m.connectivity.push_back(std::move(conn));
  }
  return m;
}

json mesh_json(const BodyMesh& m) {
  json j;
  j["kind"] = std::string(to_string(m.kind));
  const auto spn = slots_per_node(m.kind);
  json nodes = json::array();
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    const auto c = static_cast<Eigen::Index>(i) * spn;
    if (m.kind == ElementKind::Tet10) {
      nodes.push_back(vec_json(m.slots.col(c)));
    } else {
      nodes.push_back({{"r", vec_json(m.slots.col(c))},
                       {"ru", vec_json(m.slots.col(c + 1))},
                       {"rv", vec_json(m.slots.col(c + 2))},
                       {"rw", vec_json(m.slots.col(c + 3))}});
    }
  }
  j["nodes"] = nodes;
  json els = json::array();
  for (std::size_t e = 0; e < m.connectivity.size(); ++e) {
    if (m.kind == ElementKind::Tet10) {
      els.push_back(m.connectivity[e]);
    } else {
      els.push_back({{"nodes", m.connectivity[e]}, {"dims", vec_json(m.element_dims[e])}});
    }
  }
  j["elements"] = els;
  if (m.kind == ElementKind::Beam3243) {
    const Vec3 d = m.element_dims.empty() ? Vec3(0, 1, 1) : m.element_dims.front();
    j["section"] = json::array({d[1], d[2]});
  } else if (m.kind == ElementKind::Shell3443) {
    j["thickness"] = m.element_dims.empty() ? 1.0 : m.element_dims.front()[1];
  }
  return j;
}

// ----- point references ----------------------------------------------------------------------

PointRef parse_point(const Node& n, bool allow_ground) {
  n.allow_keys({"body", "element", "coords", "position", "node", "ground"});
  PointRef p;
  if (auto g = n.opt("ground")) {
    if (!allow_ground) g->fail(EK::Schema, "ground points are not allowed here");
    p.ground = g->vec3();
    return p;
  }
  p.body = n.at("body").str();
  const int forms = static_cast<int>(n.has("element")) + static_cast<int>(n.has("position")) +
                    static_cast<int>(n.has("node"));
  if (forms != 1) n.fail(EK::Schema, "give exactly one of element/coords, position or node");
  if (auto e = n.opt("element")) {
    p.element = e->index();
    p.coords = MaterialCoords::from(n.at("coords").vec3());
  }
  if (auto x = n.opt("position")) p.position = x->vec3();
  if (auto k = n.opt("node")) p.node = k->index();
  return p;
}

json point_json(const PointRef& p) {
  if (p.ground) return {{"ground", vec_json(*p.ground)}};
  json j{{"body", p.body}};
  if (p.element) {
    j["element"] = *p.element;
    j["coords"] = vec_json(p.coords.vec());
  }
  if (p.position) j["position"] = vec_json(*p.position);
  if (p.node) j["node"] = *p.node;
  return j;
}

ContactMaterial parse_contact_material(const Node& n) {
  n.allow_keys({"E", "nu"});
  ContactMaterial m{n.at("E").num(), n.at("nu").num()};
  require(m.E > 0.0, n.at("E"), "contact modulus must be positive");
  require(m.nu > -1.0 && m.nu < 0.5, n.at("nu"), "Poisson ratio must lie in (-1, 0.5)");
  return m;
}

json contact_material_json(const ContactMaterial& m) { return {{"E", m.E}, {"nu", m.nu}}; }

Plane parse_plane(const Node& n) {
  n.allow_keys({"point", "normal", "material"});
  Plane p{n.at("point").vec3(), n.at("normal").vec3()};
  require(p.normal.norm() > 0.0, n.at("normal"), "plane normal must be non-zero");
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

Scenario parse_scenario(const json& doc) {
  const Node root(doc, "");
  root.allow_keys({"name", "solver", "materials", "bodies", "joints", "constraints", "contacts", "loads", "output"});
  Scenario s;
  if (auto n = root.opt("name")) s.name = n->str();

  // solver
  {
    const auto n = root.at("solver");
    n.allow_keys({"h", "h_min", "rho", "newton_tol", "newton_max_iter", "alm_tol", "alm_max_iter",
                  "line_search", "threads", "steps", "t_end", "smooth_contact_epsilon"});
    auto& c = s.solver;
    c.h = n.at("h").num();
    c.h_min = n.num_or("h_min", c.h / 1024.0);
    c.rho = n.num_or("rho", c.rho);
    c.newton_tol = n.num_or("newton_tol", c.newton_tol);
    c.newton_max_iter = static_cast<int>(n.index_or("newton_max_iter", static_cast<std::size_t>(c.newton_max_iter)));
    c.alm_tol = n.num_or("alm_tol", c.alm_tol);
    c.alm_max_iter = static_cast<int>(n.index_or("alm_max_iter", static_cast<std::size_t>(c.alm_max_iter)));
    c.threads = static_cast<unsigned>(n.index_or("threads", 1));
    require(c.h > 0.0, n.at("h"), "time step must be positive");
    require(c.h_min > 0.0 && c.h_min <= c.h, n, "h_min must lie in (0, h]");
    require(c.rho > 0.0, n, "rho must be positive");
    require(c.newton_tol > 0.0 && c.alm_tol > 0.0, n, "tolerances must be positive");
    require(c.newton_max_iter > 0 && c.alm_max_iter > 0, n, "iteration limits must be positive");
    if (auto ls = n.opt("line_search")) {
      if (ls->raw().is_string()) {
        const auto t = ls->str();
        if (t == "none") c.line_search.kind = LineSearchConfig::Kind::None;
        else if (t == "backtracking") c.line_search.kind = LineSearchConfig::Kind::Backtracking;
        else ls->fail(EK::Schema, "unknown line search '" + t + "'");
      } else {
        ls->allow_keys({"type", "c1", "shrink", "max_iter"});
        const auto t = ls->at("type").str();
        if (t == "none") c.line_search.kind = LineSearchConfig::Kind::None;
        else if (t == "backtracking") c.line_search.kind = LineSearchConfig::Kind::Backtracking;
        else ls->at("type").fail(EK::Schema, "unknown line search '" + t + "'");
        c.line_search.c1 = ls->num_or("c1", c.line_search.c1);
        c.line_search.shrink = ls->num_or("shrink", c.line_search.shrink);
        c.line_search.max_iter = static_cast<int>(ls->index_or("max_iter", 30));
        require(c.line_search.c1 > 0.0 && c.line_search.c1 < 1.0, *ls, "c1 must lie in (0, 1)");
        require(c.line_search.shrink > 0.0 && c.line_search.shrink < 1.0, *ls, "shrink must lie in (0, 1)");
      }
    }
    if (n.has("steps") == n.has("t_end")) n.fail(EK::Schema, "give exactly one of 'steps' or 't_end'");
    if (auto st = n.opt("steps")) {
      s.steps = st->index();
    } else {
      s.t_end = n.at("t_end").num();
      require(s.t_end > 0.0, n.at("t_end"), "t_end must be positive");
      s.steps = static_cast<std::size_t>(std::llround(s.t_end / c.h));
    }
    require(s.steps > 0, n, "the run must contain at least one step");
    s.smooth_contact_epsilon = n.num_or("smooth_contact_epsilon", 0.0);
    require(s.smooth_contact_epsilon >= 0.0, n, "smooth_contact_epsilon must be non-negative");
  }

  // materials
  {
    const auto n = root.at("materials");
    n.expect_object();
    for (const auto& [name, _] : n.raw().items()) s.materials[name] = parse_material(n.at(name));
  }

  // bodies
  std::map<std::string, std::size_t> body_index;
  {
    const auto n = root.at("bodies");
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto b = n[i];
      b.allow_keys({"name", "material", "mesh", "fixed", "initial_velocity", "initial_displacement"});
      BodyEntry e;
      e.name = b.at("name").str();
      if (e.name == "ground") b.at("name").fail(EK::Schema, "'ground' is reserved");
      if (body_index.count(e.name)) b.at("name").fail(EK::Reference, "duplicate body name '" + e.name + "'");
      e.material = b.at("material").str();
      if (!s.materials.count(e.material)) b.at("material").fail(EK::Reference, "unknown material '" + e.material + "'");
      e.mesh = parse_mesh(b.at("mesh"));
      const std::size_t n_nodes = e.mesh.node_count();
      if (auto f = b.opt("fixed")) {
        for (std::size_t k = 0; k < f->size(); ++k) {
          const auto fx = (*f)[k];
          fx.allow_keys({"nodes", "where", "slots"});
          FixedEntry entry;
          if (fx.has("nodes") == fx.has("where")) fx.fail(EK::Schema, "give exactly one of 'nodes' or 'where'");
          if (auto nd = fx.opt("nodes")) {
            entry.nodes = nd->indices();
            for (auto id : entry.nodes) {
              if (id >= n_nodes) nd->fail(EK::Reference, "node " + std::to_string(id) + " does not exist");
            }
          } else {
            const auto w = fx.at("where");
            w.allow_keys({"axis", "value", "tol"});
            const std::string ax = w.at("axis").str();
            if (ax != "x" && ax != "y" && ax != "z") w.at("axis").fail(EK::Schema, "axis must be x, y or z");
            const int a = ax[0] - 'x';
            const double val = w.at("value").num(), tol = w.num_or("tol", 1e-9);
            const auto spn = slots_per_node(e.mesh.kind);
            for (std::size_t id = 0; id < n_nodes; ++id) {
              if (std::abs(e.mesh.slots(a, static_cast<Eigen::Index>(id) * spn) - val) <= tol) entry.nodes.push_back(id);
            }
            if (entry.nodes.empty()) w.fail(EK::Reference, "selector matches no node");
          }
          const std::string which = fx.has("slots") ? fx.at("slots").str() : "all";
          if (which == "all") entry.which = FixedEntry::Which::All;
          else if (which == "position") entry.which = FixedEntry::Which::Position;
          else if (which == "slopes") entry.which = FixedEntry::Which::Slopes;
          else fx.at("slots").fail(EK::Schema, "slots must be all, position or slopes");
          e.fixed.push_back(std::move(entry));
        }
      }
      if (auto v = b.opt("initial_velocity")) e.initial_velocity = v->vec3();
      if (auto d = b.opt("initial_displacement")) {
        if (e.mesh.kind != ElementKind::Tet10) d->fail(EK::Schema, "initial_displacement is supported for tet10 bodies");
        if (d->size() != n_nodes) d->fail(EK::Schema, "one displacement per node is required");
        for (std::size_t k = 0; k < n_nodes; ++k) e.initial_displacement.push_back((*d)[k].vec3());
      }
      body_index[e.name] = i;
      s.bodies.push_back(std::move(e));
    }
    if (s.bodies.empty()) n.fail(EK::Schema, "at least one body is required");
  }

  auto check_body = [&](const Node& n, const PointRef& p) {
    if (p.ground) return;
    auto it = body_index.find(p.body);
    if (it == body_index.end()) n.fail(EK::Reference, "unknown body '" + p.body + "'");
    const auto& b = s.bodies[it->second];
    if (p.element && *p.element >= b.mesh.connectivity.size()) {
      n.fail(EK::Reference, "body '" + p.body + "' has no element " + std::to_string(*p.element));
    }
    if (p.node && *p.node >= b.mesh.node_count()) {
      n.fail(EK::Reference, "body '" + p.body + "' has no node " + std::to_string(*p.node));
    }
  };
  auto point = [&](const Node& n, bool allow_ground) {
    auto p = parse_point(n, allow_ground);
    check_body(n, p);
    return p;
  };

  // joints
  if (auto n = root.opt("joints")) {
    for (std::size_t i = 0; i < n->size(); ++i) {
      const auto j = (*n)[i];
      j.allow_keys({"type", "label", "point", "other", "axis"});
      JointEntry e;
      const auto t = j.at("type").str();
      if (t == "spherical") e.kind = JointKind::Spherical;
      else if (t == "revolute") e.kind = JointKind::Revolute;
      else if (t == "fixed") e.kind = JointKind::Fixed;
      else j.at("type").fail(EK::Schema, "unknown joint type '" + t + "'");
      e.label = j.has("label") ? j.at("label").str() : t + std::to_string(i);
      e.point = point(j.at("point"), false);
      if (auto o = j.opt("other")) {
        e.other = o->str();
        if (e.other != "ground" && !body_index.count(e.other)) o->fail(EK::Reference, "unknown body '" + e.other + "'");
        if (e.other == e.point.body) o->fail(EK::Reference, "a joint needs two different sides");
      }
      if (e.kind == JointKind::Revolute) {
        e.axis = j.at("axis").vec3();
        require(e.axis.norm() > 0.0, j.at("axis"), "degenerate hinge axis");
      } else if (j.has("axis")) {
        j.at("axis").fail(EK::Schema, "only revolute joints take an axis");
      }
      s.joints.push_back(std::move(e));
    }
  }

  // primitive constraints
  if (auto n = root.opt("constraints")) {
    for (std::size_t i = 0; i < n->size(); ++i) {
      const auto c = (*n)[i];
      c.allow_keys({"type", "label", "points", "d", "f", "rho"});
      PrimitiveEntry e;
      const auto t = c.at("type").str();
      if (t == "dp1") e.kind = PrimitiveKind::DP1;
      else if (t == "dp2") e.kind = PrimitiveKind::DP2;
      else if (t == "dist") e.kind = PrimitiveKind::DIST;
      else if (t == "cd") e.kind = PrimitiveKind::CD;
      else c.at("type").fail(EK::Schema, "unknown constraint type '" + t + "'");
      e.label = c.has("label") ? c.at("label").str() : t + std::to_string(i);
      const auto pts = c.at("points");
      const std::size_t need = (e.kind == PrimitiveKind::DP1 || e.kind == PrimitiveKind::DP2) ? 4 : 2;
      if (pts.size() != need) pts.fail(EK::Schema, t + " needs " + std::to_string(need) + " points");
      for (std::size_t k = 0; k < need; ++k) e.points.push_back(point(pts[k], true));
      e.f = c.has("f") ? parse_time_function(c.at("f")) : TimeFunction::constant(0.0);
      if (e.kind == PrimitiveKind::CD) {
        const auto d = c.at("d");
        if (d.raw().is_string()) {
          const auto ax = d.str();
          if (ax != "x" && ax != "y" && ax != "z") d.fail(EK::Schema, "d must be x, y or z");
          e.d = Vec3::Unit(ax[0] - 'x');
        } else {
          e.d = d.vec3();
          const bool unit_axis = (e.d.cwiseAbs() - Vec3::UnitX()).norm() == 0 ||
                                 (e.d.cwiseAbs() - Vec3::UnitY()).norm() == 0 ||
                                 (e.d.cwiseAbs() - Vec3::UnitZ()).norm() == 0;
          require(unit_axis && e.d.sum() > 0, d, "d must be a Cartesian unit vector");
        }
      } else if (c.has("d")) {
        c.at("d").fail(EK::Schema, "only cd constraints take a selector d");
      }
      if (e.kind == PrimitiveKind::DIST) {
        const double horizon = s.t_end > 0.0 ? s.t_end : static_cast<double>(s.steps) * s.solver.h;
        require(time_function_min(e.f, horizon) > 0.0, c.has("f") ? c.at("f") : c,
                "dist requires f(t) > 0 (use cd constraints for coincidence)");
      }
      if (auto r = c.opt("rho")) {
        e.rho = r->num();
        require(*e.rho > 0.0, *r, "rho must be positive");
      }
      s.primitives.push_back(std::move(e));
    }
  }

  // contacts
  if (auto n = root.opt("contacts")) {
    for (std::size_t i = 0; i < n->size(); ++i) {
      const auto c = (*n)[i];
      ContactEntry e;
      const auto t = c.at("type").str();
      e.label = c.has("label") ? c.at("label").str() : t + std::to_string(i);
      auto sphere = [&](const Node& sn) {
        sn.allow_keys({"point", "radius", "material"});
        e.spheres.push_back(point(sn.at("point"), false));
        const double R = sn.at("radius").num();
        require(R > 0.0, sn.at("radius"), "radius must be positive");
        e.radii.push_back(R);
        e.materials.push_back(parse_contact_material(sn.at("material")));
      };
      if (t == "sphere_plane") {
        c.allow_keys({"type", "label", "sphere", "plane", "restitution", "friction"});
        e.kind = ContactEntry::Kind::SpherePlane;
        sphere(c.at("sphere"));
      } else if (t == "sphere_sphere") {
        c.allow_keys({"type", "label", "spheres", "restitution", "friction"});
        e.kind = ContactEntry::Kind::SphereSphere;
        const auto sp = c.at("spheres");
        if (sp.size() != 2) sp.fail(EK::Schema, "expected two spheres");
        sphere(sp[0]);
        sphere(sp[1]);
      } else if (t == "node_plane") {
        c.allow_keys({"type", "label", "body", "nodes", "patch_area", "material", "plane", "restitution", "friction"});
        e.kind = ContactEntry::Kind::NodePlane;
        e.body = c.at("body").str();
        auto it = body_index.find(e.body);
        if (it == body_index.end()) c.at("body").fail(EK::Reference, "unknown body '" + e.body + "'");
        const auto n_nodes = s.bodies[it->second].mesh.node_count();
        const auto nd = c.at("nodes");
        if (nd.raw().is_string()) {
          if (nd.str() != "all") nd.fail(EK::Schema, "expected a node list or \"all\"");
          for (std::size_t k = 0; k < n_nodes; ++k) e.nodes.push_back(k);
        } else {
          e.nodes = nd.indices();
          for (auto k : e.nodes) {
            if (k >= n_nodes) nd.fail(EK::Reference, "node " + std::to_string(k) + " does not exist");
          }
        }
        e.patch_area = c.at("patch_area").num();
        require(e.patch_area > 0.0, c.at("patch_area"), "patch area must be positive");
        e.materials.push_back(parse_contact_material(c.at("material")));
      } else {
        c.at("type").fail(EK::Schema, "unknown contact type '" + t + "'");
      }
      if (e.kind != ContactEntry::Kind::SphereSphere) {
        e.plane = parse_plane(c.at("plane"));
        e.plane_material = parse_contact_material(c.at("plane").at("material"));
      }
      e.restitution = c.num_or("restitution", 1.0);
      e.friction = c.num_or("friction", 0.0);
      require(e.restitution > 0.0 && e.restitution <= 1.0, c, "restitution must lie in (0, 1]");
      require(e.friction >= 0.0, c, "friction coefficient must be non-negative");
      s.contacts.push_back(std::move(e));
    }
  }

  // loads
  if (auto n = root.opt("loads")) {
    n->allow_keys({"gravity", "force_fields", "point_loads"});
    if (auto g = n->opt("gravity")) {
      FieldEntry f;
      f.field.kind = ForceField::Kind::Uniform;
      f.field.b0 = g->vec3();
      s.fields.push_back(std::move(f));
    }
    if (auto ff = n->opt("force_fields")) {
      for (std::size_t i = 0; i < ff->size(); ++i) {
        const auto f = (*ff)[i];
        f.allow_keys({"type", "b", "b0", "G", "profile", "bodies"});
        FieldEntry e;
        const auto t = f.at("type").str();
        if (t == "uniform") {
          e.field.kind = ForceField::Kind::Uniform;
          e.field.b0 = f.at("b").vec3();
        } else if (t == "linear") {
          e.field.kind = ForceField::Kind::Linear;
          e.field.b0 = f.has("b0") ? f.at("b0").vec3() : Vec3::Zero();
          e.field.G = f.at("G").mat3();
        } else {
          f.at("type").fail(EK::Schema, "unknown force field type '" + t + "'");
        }
        if (auto p = f.opt("profile")) e.field.profile = parse_time_function(*p);
        if (auto b = f.opt("bodies")) {
          for (std::size_t k = 0; k < b->size(); ++k) {
            const auto name = (*b)[k].str();
            if (!body_index.count(name)) (*b)[k].fail(EK::Reference, "unknown body '" + name + "'");
            e.bodies.push_back(name);
          }
        }
        s.fields.push_back(std::move(e));
      }
    }
    if (auto pl = n->opt("point_loads")) {
      for (std::size_t i = 0; i < pl->size(); ++i) {
        const auto p = (*pl)[i];
        p.allow_keys({"point", "force", "profile"});
        PointLoadEntry e;
        e.point = point(p.at("point"), false);
        e.force = p.at("force").vec3();
        if (auto pr = p.opt("profile")) e.profile = parse_time_function(*pr);
        s.point_loads.push_back(std::move(e));
      }
    }
  }

  // output
  if (auto n = root.opt("output")) {
    n->allow_keys({"every", "snapshot_every", "probes"});
    s.output.every = n->index_or("every", 1);
    require(s.output.every > 0, *n, "frame cadence must be positive");
    s.output.snapshot_every = n->index_or("snapshot_every", 0);
    if (auto pr = n->opt("probes")) {
      std::set<std::string> names;
      for (std::size_t i = 0; i < pr->size(); ++i) {
        const auto p = (*pr)[i];
        p.allow_keys({"name", "point"});
        ProbeEntry e{p.at("name").str(), point(p.at("point"), false)};
        if (!names.insert(e.name).second) p.at("name").fail(EK::Reference, "duplicate probe name '" + e.name + "'");
        s.output.probes.push_back(std::move(e));
      }
    }
  }
  return s;
}

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  const auto& c = s.solver;
  json solver = {{"h", c.h},
                 {"h_min", c.h_min},
                 {"rho", c.rho},
                 {"newton_tol", c.newton_tol},
                 {"newton_max_iter", c.newton_max_iter},
                 {"alm_tol", c.alm_tol},
                 {"alm_max_iter", c.alm_max_iter},
                 {"threads", c.threads},
                 {"smooth_contact_epsilon", s.smooth_contact_epsilon}};
  solver["line_search"] = {{"type", c.line_search.kind == LineSearchConfig::Kind::None ? "none" : "backtracking"},
                           {"c1", c.line_search.c1},
                           {"shrink", c.line_search.shrink},
                           {"max_iter", c.line_search.max_iter}};
  if (s.t_end > 0.0) solver["t_end"] = s.t_end;
  else solver["steps"] = s.steps;
  j["solver"] = solver;

  json mats = json::object();
  for (const auto& [name, m] : s.materials) mats[name] = material_json(m);
  j["materials"] = mats;

  json bodies = json::array();
  for (const auto& b : s.bodies) {
    json jb{{"name", b.name}, {"material", b.material}, {"mesh", mesh_json(b.mesh)},
            {"initial_velocity", vec_json(b.initial_velocity)}};
    json fixed = json::array();
    for (const auto& f : b.fixed) {
      const char* which = f.which == FixedEntry::Which::All ? "all" : f.which == FixedEntry::Which::Position ? "position" : "slopes";
      fixed.push_back({{"nodes", f.nodes}, {"slots", which}});
    }
    jb["fixed"] = fixed;
    if (!b.initial_displacement.empty()) {
      json d = json::array();
      for (const auto& x : b.initial_displacement) d.push_back(vec_json(x));
      jb["initial_displacement"] = d;
    }
    bodies.push_back(jb);
  }
  j["bodies"] = bodies;

  json joints = json::array();
  for (const auto& jt : s.joints) {
    json e{{"type", std::string(to_string(jt.kind))}, {"label", jt.label}, {"point", point_json(jt.point)}, {"other", jt.other}};
    if (jt.kind == JointKind::Revolute) e["axis"] = vec_json(jt.axis);
    joints.push_back(e);
  }
  j["joints"] = joints;

  json cons = json::array();
  for (const auto& p : s.primitives) {
    json e{{"type", std::string(to_string(p.kind))}, {"label", p.label}, {"f", time_function_json(p.f)}};
    json pts = json::array();
    for (const auto& pt : p.points) pts.push_back(point_json(pt));
    e["points"] = pts;
    if (p.kind == PrimitiveKind::CD) e["d"] = vec_json(p.d);
    if (p.rho) e["rho"] = *p.rho;
    cons.push_back(e);
  }
  j["constraints"] = cons;

  json contacts = json::array();
  for (const auto& c2 : s.contacts) {
    json e{{"label", c2.label}, {"restitution", c2.restitution}, {"friction", c2.friction}};
    auto sphere = [&](std::size_t k) {
      return json{{"point", point_json(c2.spheres[k])}, {"radius", c2.radii[k]}, {"material", contact_material_json(c2.materials[k])}};
    };
    auto plane = [&] {
      return json{{"point", vec_json(c2.plane.point)}, {"normal", vec_json(c2.plane.normal)},
                  {"material", contact_material_json(c2.plane_material)}};
    };
    switch (c2.kind) {
      case ContactEntry::Kind::SpherePlane:
        e["type"] = "sphere_plane";
        e["sphere"] = sphere(0);
        e["plane"] = plane();
        break;
      case ContactEntry::Kind::SphereSphere:
        e["type"] = "sphere_sphere";
        e["spheres"] = json::array({sphere(0), sphere(1)});
        break;
      case ContactEntry::Kind::NodePlane:
        e["type"] = "node_plane";
        e["body"] = c2.body;
        e["nodes"] = c2.nodes;
        e["patch_area"] = c2.patch_area;
        e["material"] = contact_material_json(c2.materials[0]);
        e["plane"] = plane();
        break;
    }
    contacts.push_back(e);
  }
  j["contacts"] = contacts;

  json fields = json::array();
  for (const auto& f : s.fields) {
    json e;
    if (f.field.kind == ForceField::Kind::Uniform) {
      e = {{"type", "uniform"}, {"b", vec_json(f.field.b0)}};
    } else {
      e = {{"type", "linear"}, {"b0", vec_json(f.field.b0)}, {"G", mat_json(f.field.G)}};
    }
    e["profile"] = time_function_json(f.field.profile);
    if (!f.bodies.empty()) e["bodies"] = f.bodies;
    fields.push_back(e);
  }
  json loads = json::array();
  for (const auto& p : s.point_loads) {
    loads.push_back({{"point", point_json(p.point)}, {"force", vec_json(p.force)}, {"profile", time_function_json(p.profile)}});
  }
  j["loads"] = {{"force_fields", fields}, {"point_loads", loads}};

  json probes = json::array();
  for (const auto& p : s.output.probes) probes.push_back({{"name", p.name}, {"point", point_json(p.point)}});
  j["output"] = {{"every", s.output.every}, {"snapshot_every", s.output.snapshot_every}, {"probes", probes}};
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioError(EK::Syntax, "", "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* cur = &doc;
  std::string path;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    path += "/" + p;
    const bool last = i + 1 == parts.size();
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (...) {
        throw ScenarioError(EK::Schema, path, "expected an array index");
      }
      if (idx >= cur->size()) throw ScenarioError(EK::Reference, path, "index out of range");
      cur = &(*cur)[idx];
    } else if (cur->is_object() || cur->is_null()) {
      if (last) {
        (*cur)[p] = value;
        return;
      }
      cur = &(*cur)[p];
    } else {
      throw ScenarioError(EK::Schema, path, "cannot descend into a scalar");
    }
    if (last) *cur = value;
  }
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(EK::Syntax, "", "cannot open scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ScenarioError(EK::Syntax, "", path.string() + " line " + std::to_string(line) + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  Scenario s = parse_scenario(doc);
  build_scenario(s);  // resolves every reference now so errors surface at load time
  return s;
}

// ---------------------------------------------------------------------------------------------

namespace {

struct Resolver {
  const Scenario& s;
  const Model& model;
  std::map<std::string, std::size_t> body_index;

  std::size_t body(const std::string& name, const std::string& path) const {
    auto it = body_index.find(name);
    if (it == body_index.end()) throw ScenarioError(EK::Reference, path, "unknown body '" + name + "'");
    return it->second;
  }

  AttachmentPoint node_point(std::size_t b, std::size_t node) const {
    const Slot slot = model.body(b).node_slot(node);
    for (std::size_t e : model.body(b).elements) {
      const auto& map = model.elements()[e].dof_map;
      auto it = std::find(map.begin(), map.end(), slot);
      if (it == map.end()) continue;
      AttachmentPoint p;
      p.body = b;
      p.element = e;
      p.u = model.elements()[e].basis.node_coords()[static_cast<std::size_t>(it - map.begin()) /
                                                    static_cast<std::size_t>(slots_per_node(model.body(b).mesh.kind))];
      p.s = VecX::Zero(static_cast<Eigen::Index>(map.size()));
      p.s[it - map.begin()] = 1.0;
      p.dofs = map;
      return p;
    }
    throw InternalError("node is not used by any element");
  }

  std::optional<AttachmentPoint> locate(std::size_t b, const Vec3& x) const {
    auto loc = locate_point(model, b, x, model.reference_q());
    if (!loc) return std::nullopt;
    return AttachmentPoint::on_element(model, loc->element, loc->u);
  }

  AttachmentPoint resolve(const PointRef& p, const std::string& path) const {
    if (p.ground) return AttachmentPoint::fixed(*p.ground);
    const std::size_t b = body(p.body, path);
    const auto& bd = model.body(b);
    if (p.node) return node_point(b, *p.node);
    if (p.element) {
      const std::size_t e = bd.elements.at(*p.element);
      if (!model.elements()[e].basis.contains(p.coords, 1e-9)) {
        throw ScenarioError(EK::Reference, path, "material coordinates lie outside element " + std::to_string(*p.element));
      }
      return AttachmentPoint::on_element(model, e, p.coords);
    }
    auto a = locate(b, *p.position);
    if (!a) throw ScenarioError(EK::Reference, path, "position lies in no element of body '" + p.body + "'");
    return *a;
  }

  double element_scale(const AttachmentPoint& p) const {
    const auto& basis = model.elements()[p.element].basis;
    if (basis.kind() == ElementKind::Tet10) {
      return std::cbrt(std::abs(basis.parent_jacobian({0.25, 0.25, 0.25}).determinant()) / 6.0);
    }
    return basis.dims().minCoeff();
  }

  // Point pair (tail, head) in body b along world direction dir through x.
  std::pair<AttachmentPoint, AttachmentPoint> direction_on_body(std::size_t b, const Vec3& x, const Vec3& dir,
                                                                double eps, const std::string& path) const {
    const Vec3 d = dir.normalized() * eps;
    const std::array<std::pair<Vec3, Vec3>, 3> tries{{{x - d, x + d}, {x, x + d}, {x - d, x}}};
    for (const auto& [a, c] : tries) {
      auto pa = locate(b, a), pc = locate(b, c);
      if (pa && pc) return {*pa, *pc};
    }
    throw ScenarioError(EK::Reference, path, "cannot place a joint direction inside body '" + model.body(b).name + "'");
  }
};

}  // namespace

BuiltScenario build_scenario(const Scenario& s) {
  BuiltScenario out;
  Model& model = out.problem.model;
  std::map<std::string, std::size_t> body_index;
  for (std::size_t i = 0; i < s.bodies.size(); ++i) {
    const auto& b = s.bodies[i];
    const auto& mat = s.materials.at(b.material);
    try {
      body_index[b.name] = model.add_body(b.name, b.mesh, mat.spec, mat.density);
    } catch (const ConstructionError& e) {
      throw ScenarioError(EK::Physical, "/bodies/" + std::to_string(i) + "/mesh", e.what());
    }
    const auto& bd = model.body(body_index[b.name]);
    const int spn = slots_per_node(b.mesh.kind);
    for (const auto& f : b.fixed) {
      for (auto node : f.nodes) {
        for (int k = 0; k < spn; ++k) {
          const bool pos = k == 0;
          if (f.which == FixedEntry::Which::All || (pos && f.which == FixedEntry::Which::Position) ||
              (!pos && f.which == FixedEntry::Which::Slopes)) {
            model.fix_slot(bd.node_slot(node, k));
          }
        }
      }
    }
  }
  out.q0 = model.reference_q();
  out.v0 = VecX::Zero(out.q0.size());
  for (std::size_t i = 0; i < s.bodies.size(); ++i) {
    const auto& b = s.bodies[i];
    const auto& bd = model.body(i);
    for (std::size_t node = 0; node < bd.mesh.node_count(); ++node) {
      const Slot slot = bd.node_slot(node);
      const auto r = static_cast<Eigen::Index>(3 * slot);
      if (!b.initial_displacement.empty()) out.q0.segment<3>(r) += b.initial_displacement[node];
      if (!model.is_fixed(slot)) out.v0.segment<3>(r) = b.initial_velocity;
    }
  }

  const Resolver res{s, model, body_index};
  auto& cs = out.problem.constraints;
  cs.set_base_rho(s.solver.rho);

  for (std::size_t i = 0; i < s.joints.size(); ++i) {
    const auto& j = s.joints[i];
    const std::string path = "/joints/" + std::to_string(i);
    JointSpec spec;
    spec.kind = j.kind;
    spec.label = j.label;
    spec.on_b = res.resolve(j.point, path + "/point");
    const Vec3 x = eval_point(model.reference_q(), spec.on_b);
    const bool ground = j.other == "ground";
    std::size_t other = 0;
    if (ground) {
      spec.on_c = AttachmentPoint::fixed(x);
    } else {
      other = res.body(j.other, path + "/other");
      auto a = res.locate(other, x);
      if (!a) throw ScenarioError(EK::Reference, path + "/other", "joint location lies outside body '" + j.other + "'");
      spec.on_c = *a;
    }
    const double eps_b = 0.25 * res.element_scale(spec.on_b);
    const double eps_c = ground ? 1.0 : 0.25 * res.element_scale(spec.on_c);
    auto c_dir = [&](const Vec3& d) {
      if (ground) return std::make_pair(AttachmentPoint::fixed(x), AttachmentPoint::fixed(x + d));
      return res.direction_on_body(other, x, d, eps_c, path);
    };
    if (j.kind == JointKind::Revolute) {
      const Vec3 a = j.axis.normalized();
      const Vec3 e1 = a.unitOrthogonal();
      const Vec3 e2 = a.cross(e1);
      spec.b_dirs.push_back(res.direction_on_body(spec.on_b.body, x, a, eps_b, path));
      spec.c_dirs.push_back(c_dir(e1));
      spec.c_dirs.push_back(c_dir(e2));
    } else if (j.kind == JointKind::Fixed) {
      spec.b_dirs.push_back(res.direction_on_body(spec.on_b.body, x, Vec3::UnitX(), eps_b, path));
      spec.b_dirs.push_back(res.direction_on_body(spec.on_b.body, x, Vec3::UnitY(), eps_b, path));
      spec.c_dirs.push_back(c_dir(Vec3::UnitY()));
      spec.c_dirs.push_back(c_dir(Vec3::UnitZ()));
    }
    try {
      cs.add(make_joint(spec, model.reference_q()));
    } catch (const ConstructionError& e) {
      throw ScenarioError(EK::Physical, path, e.what());
    }
  }

  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    const auto& p = s.primitives[i];
    const std::string path = "/constraints/" + std::to_string(i);
    ConstraintPrimitive c;
    c.kind = p.kind;
    c.label = p.label;
    c.d = p.d;
    c.f = p.f;
    c.rho = p.rho;
    for (std::size_t k = 0; k < p.points.size(); ++k) {
      c.points.push_back(res.resolve(p.points[k], path + "/points/" + std::to_string(k)));
    }
    cs.add(std::move(c));
  }

  auto& contacts = out.problem.contacts;
  contacts.smooth_epsilon = s.smooth_contact_epsilon;
  for (std::size_t i = 0; i < s.contacts.size(); ++i) {
    const auto& c = s.contacts[i];
    const std::string path = "/contacts/" + std::to_string(i);
    ContactParams params;
    params.e = c.restitution;
    params.mu = c.friction;
    params.E_A = c.materials[0].E;
    params.nu_A = c.materials[0].nu;
    ContactSide plane;
    plane.kind = ContactSide::Kind::Plane;
    plane.plane_point = c.plane.point;
    plane.plane_normal = c.plane.normal.normalized();
    plane.point = AttachmentPoint::fixed(c.plane.point);
    auto sphere_side = [&](std::size_t k) {
      ContactSide side;
      side.kind = ContactSide::Kind::Sphere;
      side.point = res.resolve(c.spheres[k], path + "/sphere");
      side.radius = c.radii[k];
      return side;
    };
    if (c.kind == ContactEntry::Kind::NodePlane) {
      const std::size_t b = res.body(c.body, path + "/body");
      params.E_B = c.plane_material.E;
      params.nu_B = c.plane_material.nu;
      params.geometry.kind = ContactGeometry::Kind::Patch;
      params.geometry.A_patch = c.patch_area;
      for (auto node : c.nodes) {
        ContactPair pair;
        pair.label = c.label + ".n" + std::to_string(node);
        pair.A.kind = ContactSide::Kind::Node;
        pair.A.point.body = b;
        pair.A.point.s = VecX::Ones(1);
        pair.A.point.dofs = {model.body(b).node_slot(node)};
        pair.B = plane;
        pair.params = params;
        out.contact_labels.push_back(pair.label);
        contacts.add(std::move(pair));
      }
      continue;
    }
    ContactPair pair;
    pair.label = c.label;
    pair.A = sphere_side(0);
    if (c.kind == ContactEntry::Kind::SpherePlane) {
      pair.B = plane;
      params.E_B = c.plane_material.E;
      params.nu_B = c.plane_material.nu;
      params.geometry.kind = ContactGeometry::Kind::SpherePlane;
      params.geometry.R_A = c.radii[0];
    } else {
      pair.B = sphere_side(1);
      params.E_B = c.materials[1].E;
      params.nu_B = c.materials[1].nu;
      params.geometry.kind = ContactGeometry::Kind::SphereSphere;
      params.geometry.R_A = c.radii[0];
      params.geometry.R_B = c.radii[1];
    }
    pair.params = params;
    out.contact_labels.push_back(pair.label);
    contacts.add(std::move(pair));
  }

  for (const auto& f : s.fields) {
    ForceField field = f.field;
    for (const auto& name : f.bodies) field.bodies.push_back(body_index.at(name));
    out.problem.fields.push_back(std::move(field));
  }
  for (std::size_t i = 0; i < s.point_loads.size(); ++i) {
    const auto& p = s.point_loads[i];
    const auto a = res.resolve(p.point, "/loads/point_loads/" + std::to_string(i) + "/point");
    PointLoad load;
    load.element = a.element;
    load.u = a.u;
    load.s = a.s;
    load.force = p.force;
    load.profile = p.profile;
    out.problem.point_loads.push_back(std::move(load));
  }
  for (std::size_t i = 0; i < s.output.probes.size(); ++i) {
    const auto& p = s.output.probes[i];
    out.probes.emplace_back(p.name, res.resolve(p.point, "/output/probes/" + std::to_string(i) + "/point"));
  }
  return out;
}

}  // namespace tlfea
