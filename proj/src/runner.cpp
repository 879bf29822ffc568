#include "tlfea/runner.hpp"

#include "tlfea/output.hpp"
#include "tlfea/verify.hpp"

#include <fstream>
#include <ostream>

namespace tlfea {

namespace {

OutputFrame make_frame(const Simulator& sim, const BuiltScenario& built, std::size_t step,
                       const StepDiagnostics& diag) {
  OutputFrame f;
  f.step = step;
  f.time = sim.time();
  f.q = sim.q();
  for (const auto& [name, point] : built.probes) f.probes.push_back(eval_point(sim.q(), point));
  f.ledger = sim.ledger();
  f.c_norm = diag.c_norm;
  f.newton_iterations = diag.newton_iterations;
  f.alm_iterations = diag.alm_iterations;
  f.substeps = diag.substeps;
  f.contacts = diag.contacts;
  f.contacts.resize(built.contact_labels.size());
  return f;
}

void write_failure(const std::filesystem::path& dir, const Scenario& s, const Simulator& sim,
                   std::size_t step, const std::string& what) {
  std::ofstream os(dir / "failure.txt");
  os << "scenario: " << s.name << '\n'
     << "failed step: " << step << '\n'
     << "last accepted time: " << format_number(sim.time()) << '\n'
     << "h: " << format_number(s.solver.h) << '\n'
     << "h_min: " << format_number(s.solver.h_min) << '\n'
     << "error: " << what << '\n';
  try {
    const auto L = sim.ledger();
    os << "kinetic: " << format_number(L.kinetic) << '\n' << "elastic: " << format_number(L.elastic) << '\n';
  } catch (const Error& e) {
    // The last accepted state may itself be inverted (a bad initial state).
    os << "energy: unavailable (" << e.what() << ")\n";
  }
  os << "state: final_state.csv (last accepted step)\n";
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& opts) {
  RunResult res;
  std::ostream* log = opts.log;
  BuiltScenario built = build_scenario(scenario);

  if (opts.verify) {
    bool ok = true;
    for (const auto& c : verify_model(built.problem.model)) {
      ok = ok && c.passed;
      if (log) *log << (c.passed ? "verify PASS " : "verify FAIL ") << c.name << ": " << c.detail << '\n';
    }
    if (!ok) {
      res.exit_code = kExitVerify;
      res.message = "self-check failed";
      return res;
    }
  }

  const std::size_t every = scenario.output.every;
  const std::size_t steps = opts.frames ? *opts.frames * every : scenario.steps;
  std::vector<std::string> probe_names;
  for (const auto& p : built.probes) probe_names.push_back(p.first);

  Simulator sim(std::move(built.problem), scenario.solver);
  sim.set_state(built.q0, built.v0, 0.0);

  std::optional<FrameWriter> writer;
  try {
    writer.emplace(opts.out_dir, sim.problem().model, probe_names, built.contact_labels,
                   scenario.output.snapshot_every);
    for (std::size_t k = 1; k <= steps; ++k) {
      StepDiagnostics diag;
      try {
        diag = sim.step();
      } catch (const Error& e) {
        write_final_state(opts.out_dir / "final_state.csv", sim.problem().model, sim.q(), sim.v());
        write_failure(opts.out_dir, scenario, sim, k, e.what());
        writer->close();
        res.exit_code = kExitSolver;
        res.frames_written = writer->frames_written();
        res.message = "step " + std::to_string(k) + " failed: " + e.what();
        return res;
      }
      res.steps_completed = k;
      if (k % every == 0) writer->write(make_frame(sim, built, k, diag));
      if (log && steps >= 10 && k % (steps / 10) == 0) {
        *log << "step " << k << "/" << steps << " t=" << format_number(sim.time()) << '\n';
      }
    }
    writer->close();
    write_final_state(opts.out_dir / "final_state.csv", sim.problem().model, sim.q(), sim.v());
  } catch (const OutputError& e) {
    res.exit_code = kExitOutput;
    res.message = e.what();
    if (writer) res.frames_written = writer->frames_written();
    return res;
  }
  res.frames_written = writer->frames_written();
  return res;
}

}  // namespace tlfea
