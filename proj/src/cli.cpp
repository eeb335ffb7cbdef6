#include "sacr2/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "sacr2/config.hpp"
#include "sacr2/expert.hpp"
#include "sacr2/gradcheck.hpp"
#include "sacr2/harness.hpp"

namespace sacr2 {

namespace {

int cmd_gen_demos(int n, std::uint64_t seed, const std::string& out) {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng = Rng::stream(seed, 1);
  const DemoSet demos = generate_demos(n, env, expert, rng);
  save_demos(demos, out);
  std::cout << "wrote " << demos.episode_count() << " demo episodes ("
            << demos.transition_count() << " transitions, N=" << demos.mean_length
            << ") to " << out << '\n';
  return 0;
}

int cmd_run(const std::string& preset_name, const std::string& config_path, int seeds,
            long seed_override, long max_env_steps, const std::string& out, int jobs) {
  ExperimentConfig config =
      config_path.empty() ? preset(preset_name) : load_config(config_path);
  if (seeds > 0) config.n_seeds = seeds;
  if (seed_override >= 0) config.base_seed = std::uint64_t(seed_override);
  if (max_env_steps > 0) config.run.max_env_steps = max_env_steps;
  if (!out.empty()) config.output_dir = out;
  const SuiteResult result = run_suite(config, jobs);
  std::cout << "suite " << (config.preset_name.empty() ? "custom" : config.preset_name)
            << " -> " << result.directory.string() << " ("
            << result.seed_csvs.size() << " seed CSVs, "
            << (result.complete ? "complete" : "INCOMPLETE") << ")\n";
  for (size_t i = 0; i < result.summary.episodes_to_90.size(); ++i)
    std::cout << "  seed " << config.base_seed + i
              << ": episodes_to_90=" << result.summary.episodes_to_90[i]
              << " final_rolling=" << result.summary.final_rolling[i] << '\n';
  return result.complete ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& inputs,
             const std::vector<std::string>& labels, const std::string& out) {
  std::vector<CurveSummary> curves;
  std::vector<std::string> names = labels;
  for (size_t i = 0; i < inputs.size(); ++i) {
    curves.push_back(read_aggregate_csv(inputs[i]));
    if (names.size() <= i)
      names.push_back(std::filesystem::path(inputs[i]).parent_path().filename().string());
  }
  plot_curves(curves, names, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_gradcheck() {
  Scalar worst = 0;
  for (const GradCheckReport& r : run_gradcheck_suites()) {
    std::printf("%-22s max relative error %.3e\n", r.name.c_str(), r.max_rel_error);
    worst = std::max(worst, r.max_rel_error);
  }
  std::printf("overall max relative error %.3e (tolerance %.1e)\n", worst,
              kGradCheckTolerance);
  return worst <= kGradCheckTolerance ? 0 : 1;
}

int cmd_validate(const std::string& path) {
  const ExperimentConfig config = load_config(path);
  config.run.validate();
  std::cout << "config OK"
            << (config.preset_name.empty() ? "" : " (preset " + config.preset_name + ")")
            << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Soft Actor-Critic with reward-relabeled demonstrations: training, "
               "ablation suites and diagnostics"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-demos", "Generate expert demonstrations");
  int gen_n = 200;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of demo episodes");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output demo file")->required();

  auto* run = app.add_subcommand("run", "Run a multi-seed experiment suite");
  std::string run_preset, run_config, run_out;
  int run_seeds = 0;
  long run_seed = -1, run_steps = 0;
  int run_jobs = int(std::max(1u, std::thread::hardware_concurrency()));
  run->add_option("--preset", run_preset,
                  "Preset name (see --list via bad name for the list)");
  run->add_option("--config", run_config, "Experiment config file");
  run->add_option("--seeds", run_seeds, "Number of seeds (override)");
  run->add_option("--seed", run_seed, "Base seed (override)");
  run->add_option("--max-env-steps", run_steps, "Environment step budget (override)");
  run->add_option("--out", run_out, "Output directory (override)");
  run->add_option("--jobs", run_jobs, "Parallel seed workers");

  auto* plot = app.add_subcommand("plot", "Plot aggregate learning curves as SVG");
  std::vector<std::string> plot_inputs, plot_labels;
  std::string plot_out;
  plot->add_option("--inputs", plot_inputs, "aggregate.csv files")->required();
  plot->add_option("--labels", plot_labels, "Curve labels");
  plot->add_option("--out", plot_out, "Output SVG path")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  (void)grad;

  auto* validate = app.add_subcommand("validate-config", "Validate a config file");
  std::string validate_path;
  validate->add_option("--config", validate_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_demos(gen_n, gen_seed, gen_out);
    if (run->parsed()) {
      if (run_preset.empty() == run_config.empty()) {
        std::cerr << "run: exactly one of --preset / --config is required\n";
        return 2;
      }
      return cmd_run(run_preset, run_config, run_seeds, run_seed, run_steps, run_out,
                     run_jobs);
    }
    if (plot->parsed()) return cmd_plot(plot_inputs, plot_labels, plot_out);
    if (grad->parsed()) return cmd_gradcheck();
    if (validate->parsed()) return cmd_validate(validate_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace sacr2
