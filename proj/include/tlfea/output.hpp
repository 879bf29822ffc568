#pragma once

#include "tlfea/solver.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tlfea {

/// I/O failure; the message names the offending path.
class OutputError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal string that reads back to exactly `x`.
std::string format_number(double x);

struct OutputFrame {
  std::size_t step = 0;
  double time = 0.0;
  VecX q;
  std::vector<Vec3> probes;
  EnergyLedger ledger;
  double c_norm = 0.0;
  int newton_iterations = 0;
  int alm_iterations = 0;
  int substeps = 0;
  std::vector<ContactReport> contacts;
};

/// Legacy ASCII unstructured grid of all nodal positions in q. ANCF beams become line cells, ANCF
/// shells quads, T10 elements quadratic tetrahedra.
void write_vtk(const std::filesystem::path& path, const Model& model, const VecX& q,
               const std::string& title);

/// One row per slot: body, node, slot kind, q xyz, v xyz.
void write_final_state(const std::filesystem::path& path, const Model& model, const VecX& q,
                       const VecX& v);

/// Streams frames into energy.csv, probes.csv, contacts.csv and snapshots/ under `dir`.
class FrameWriter {
 public:
  FrameWriter(const std::filesystem::path& dir, const Model& model,
              std::vector<std::string> probe_names, std::vector<std::string> contact_labels,
              std::size_t snapshot_every);

  void write(const OutputFrame& frame);
  std::size_t frames_written() const { return frames_; }
  /// Flushes all sinks; throws OutputError if any stream went bad.
  void close();

 private:
  std::ofstream open(const std::filesystem::path& p);
  void check(const std::ofstream& s, const std::filesystem::path& p) const;

  std::filesystem::path dir_;
  const Model& model_;
  std::vector<std::string> probe_names_;
  std::vector<std::string> contact_labels_;
  std::size_t snapshot_every_;
  std::ofstream energy_, probes_, contacts_;
  std::size_t frames_ = 0;
};

}  // namespace tlfea
