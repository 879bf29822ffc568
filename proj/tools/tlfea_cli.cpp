#include "tlfea/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Total-Lagrangian flexible multibody simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario file and write its outputs");
  std::string scenario_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::optional<std::size_t> frames;
  bool verify = false;
  bool quiet = false;
  run->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
  run->add_option("--override", overrides, "Override a scenario field, e.g. solver.h=5e-4")
      ->take_all()
      ->allow_extra_args(false);
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--frames", frames, "Number of output frames to produce");
  run->add_flag("--verify", verify, "Run finite-difference self-checks before stepping");
  run->add_flag("-q,--quiet", quiet, "Suppress progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto scenario = tlfea::load_scenario(scenario_path, overrides);
    tlfea::RunOptions opts;
    opts.out_dir = out_dir;
    opts.frames = frames;
    opts.verify = verify;
    opts.log = quiet ? nullptr : &std::cerr;
    const auto res = tlfea::run_scenario(scenario, opts);
    if (res.exit_code != tlfea::kExitOk) {
      std::cerr << "tlfea: " << res.message << '\n';
    } else if (!quiet) {
      std::cerr << "tlfea: " << res.steps_completed << " steps, " << res.frames_written
                << " frames written to " << out_dir << '\n';
    }
    return res.exit_code;
  } catch (const tlfea::ScenarioError& e) {
    std::cerr << "tlfea: " << e.what() << '\n';
    return tlfea::kExitScenario;
  } catch (const tlfea::Error& e) {
    std::cerr << "tlfea: " << e.what() << '\n';
    return tlfea::kExitScenario;
  }
}
