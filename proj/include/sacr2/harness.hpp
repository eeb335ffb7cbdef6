#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sacr2/config.hpp"
#include "sacr2/sac.hpp"
#include "sacr2/types.hpp"

namespace sacr2 {

/// Cross-seed aggregate of a suite's learning curves, truncated to the
/// shortest seed.
struct CurveSummary {
  std::vector<Scalar> mean_rolling;    // per episode, mean over seeds
  std::vector<Scalar> stderr_rolling;  // standard error over seeds
  std::vector<long> episodes_to_90;    // per seed; -1 when never reached
  std::vector<Scalar> final_rolling;   // per seed
  std::vector<Scalar> mean_demo_fraction;  // per seed
  int n_seeds = 0;
};

struct SuiteResult {
  CurveSummary summary;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> seed_csvs;
  bool complete = true;
};

/// Resolves an output directory against the SACR2_OUTPUT_ROOT environment
/// variable when it is set and the path is relative.
std::filesystem::path resolve_output_dir(const std::string& dir);

void write_metrics_csv(const MetricsLog& log, const std::filesystem::path& path);
std::vector<EpisodeRecord> read_metrics_csv(const std::filesystem::path& path);

void write_run_summary(const RunSummary& summary, const std::filesystem::path& path);
RunSummary read_run_summary(const std::filesystem::path& path);

/// Aggregates per-seed episode records into a CurveSummary; pure function of
/// the CSV contents so results can be recomputed offline.
CurveSummary summarize_curves(const std::vector<std::vector<EpisodeRecord>>& seeds);

void write_aggregate_csv(const CurveSummary& summary, const std::filesystem::path& path);
CurveSummary read_aggregate_csv(const std::filesystem::path& path);

/// Runs n_seeds training runs (seeds base_seed + i) with up to `parallelism`
/// worker threads, writing per-seed CSVs and summaries, an aggregate CSV and
/// a suite summary under the config's output directory. Seeds whose summary
/// file already exists are skipped, so interrupted suites resume. A crashed
/// seed marks the suite incomplete without disturbing the other seeds.
SuiteResult run_suite(const ExperimentConfig& config, int parallelism);

/// Renders aggregate curves (mean with standard-error band) to an SVG file.
void plot_curves(const std::vector<CurveSummary>& curves,
                 const std::vector<std::string>& labels, const std::string& path);

}  // namespace sacr2
