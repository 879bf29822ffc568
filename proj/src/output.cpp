#include "tlfea/output.hpp"

#include <charconv>
#include <cstdio>

namespace tlfea {

std::string format_number(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

void put_vec(std::ostream& os, const Vec3& v) {
  os << format_number(v[0]) << ',' << format_number(v[1]) << ',' << format_number(v[2]);
}

int vtk_cell_type(ElementKind k) {
  switch (k) {
    case ElementKind::Beam3243: return 3;
    case ElementKind::Shell3443: return 9;
    case ElementKind::Tet10: return 24;
  }
  return 0;
}

}  // namespace

void write_vtk(const std::filesystem::path& path, const Model& model, const VecX& q,
               const std::string& title) {
  std::ofstream os(path);
  if (!os) throw OutputError("cannot open '" + path.string() + "' for writing");
  std::size_t n_points = 0, n_cells = 0, n_ints = 0;
  for (const auto& b : model.bodies()) {
    n_points += b.mesh.node_count();
    n_cells += b.mesh.connectivity.size();
    for (const auto& c : b.mesh.connectivity) n_ints += 1 + c.size();
  }
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << n_points << " double\n";
  for (const auto& b : model.bodies()) {
    for (std::size_t k = 0; k < b.mesh.node_count(); ++k) {
      const auto r = static_cast<Eigen::Index>(3 * b.node_slot(k));
      os << format_number(q[r]) << ' ' << format_number(q[r + 1]) << ' ' << format_number(q[r + 2])
         << '\n';
    }
  }
  os << "CELLS " << n_cells << ' ' << n_ints << '\n';
  std::size_t offset = 0;
  for (const auto& b : model.bodies()) {
    for (const auto& c : b.mesh.connectivity) {
      os << c.size();
      for (auto id : c) os << ' ' << offset + id;
      os << '\n';
    }
    offset += b.mesh.node_count();
  }
  os << "CELL_TYPES " << n_cells << '\n';
  for (const auto& b : model.bodies()) {
    for (std::size_t e = 0; e < b.mesh.connectivity.size(); ++e) os << vtk_cell_type(b.mesh.kind) << '\n';
  }
  os.flush();
  if (!os) throw OutputError("write failed for '" + path.string() + "'");
}

void write_final_state(const std::filesystem::path& path, const Model& model, const VecX& q,
                       const VecX& v) {
  std::ofstream os(path);
  if (!os) throw OutputError("cannot open '" + path.string() + "' for writing");
  static constexpr const char* kSlotNames[] = {"r", "r_u", "r_v", "r_w"};
  os << "body,node,slot,qx,qy,qz,vx,vy,vz\n";
  for (const auto& b : model.bodies()) {
    const int spn = slots_per_node(b.mesh.kind);
    for (std::size_t k = 0; k < b.mesh.node_count(); ++k) {
      for (int w = 0; w < spn; ++w) {
        const auto r = static_cast<Eigen::Index>(3 * b.node_slot(k, w));
        os << b.name << ',' << k << ',' << kSlotNames[w] << ',';
        put_vec(os, q.segment<3>(r));
        os << ',';
        put_vec(os, v.segment<3>(r));
        os << '\n';
      }
    }
  }
  os.flush();
  if (!os) throw OutputError("write failed for '" + path.string() + "'");
}

FrameWriter::FrameWriter(const std::filesystem::path& dir, const Model& model,
                         std::vector<std::string> probe_names,
                         std::vector<std::string> contact_labels, std::size_t snapshot_every)
    : dir_(dir),
      model_(model),
      probe_names_(std::move(probe_names)),
      contact_labels_(std::move(contact_labels)),
      snapshot_every_(snapshot_every) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw OutputError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  if (snapshot_every_ > 0) {
    std::filesystem::create_directories(dir_ / "snapshots", ec);
    if (ec) throw OutputError("cannot create '" + (dir_ / "snapshots").string() + "': " + ec.message());
  }
  energy_ = open(dir_ / "energy.csv");
  energy_ << "step,time,kinetic,elastic,potential,mechanical,dissipated,constraint_impulse,c_norm,"
             "newton_iterations,alm_iterations,substeps\n";
  probes_ = open(dir_ / "probes.csv");
  probes_ << "step,time";
  for (const auto& n : probe_names_) probes_ << ',' << n << "_x," << n << "_y," << n << "_z";
  probes_ << '\n';
  contacts_ = open(dir_ / "contacts.csv");
  contacts_ << "step,time,pair,delta,fn_x,fn_y,fn_z,ft_x,ft_y,ft_z\n";
}

std::ofstream FrameWriter::open(const std::filesystem::path& p) {
  std::ofstream s(p);
  if (!s) throw OutputError("cannot open '" + p.string() + "' for writing");
  return s;
}

void FrameWriter::check(const std::ofstream& s, const std::filesystem::path& p) const {
  if (!s) throw OutputError("write failed for '" + p.string() + "'");
}

void FrameWriter::write(const OutputFrame& f) {
  if (f.probes.size() != probe_names_.size() || f.contacts.size() != contact_labels_.size()) {
    throw InternalError("frame layout does not match the writer");
  }
  const std::string head = std::to_string(f.step) + ',' + format_number(f.time);
  const auto& L = f.ledger;
  energy_ << head << ',' << format_number(L.kinetic) << ',' << format_number(L.elastic) << ','
          << format_number(L.potential) << ',' << format_number(L.mechanical()) << ','
          << format_number(L.dissipated) << ',' << format_number(L.constraint_impulse) << ','
          << format_number(f.c_norm) << ',' << f.newton_iterations << ',' << f.alm_iterations << ','
          << f.substeps << '\n';
  check(energy_, dir_ / "energy.csv");

  probes_ << head;
  for (const auto& p : f.probes) {
    probes_ << ',';
    put_vec(probes_, p);
  }
  probes_ << '\n';
  check(probes_, dir_ / "probes.csv");

  for (std::size_t i = 0; i < f.contacts.size(); ++i) {
    const auto& c = f.contacts[i];
    if (!c.active) continue;
    contacts_ << head << ',' << contact_labels_[i] << ',' << format_number(c.delta) << ',';
    put_vec(contacts_, c.F_n);
    contacts_ << ',';
    put_vec(contacts_, c.F_t);
    contacts_ << '\n';
  }
  check(contacts_, dir_ / "contacts.csv");

  ++frames_;
  if (snapshot_every_ > 0 && frames_ % snapshot_every_ == 0) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.vtk", f.step);
    write_vtk(dir_ / "snapshots" / name, model_, f.q, "step " + std::to_string(f.step) + " time " + format_number(f.time));
  }
}

void FrameWriter::close() {
  for (auto* s : {&energy_, &probes_, &contacts_}) s->flush();
  check(energy_, dir_ / "energy.csv");
  check(probes_, dir_ / "probes.csv");
  check(contacts_, dir_ / "contacts.csv");
}

}  // namespace tlfea
