#include "sacr2/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sacr2/svg.hpp"

namespace sacr2 {

namespace fs = std::filesystem;

fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("SACR2_OUTPUT_ROOT")) return fs::path(root) / p;
  }
  return p;
}

void write_metrics_csv(const MetricsLog& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_metrics_csv: cannot open " + path.string());
  out << "episode,env_steps,train_steps,success,length,rolling_success,"
         "critic_loss,actor_loss,demo_batch_fraction\n";
  for (const EpisodeRecord& r : log.episodes) {
    out << r.episode << ',' << r.env_steps << ',' << r.train_steps << ',' << r.success
        << ',' << r.length << ',' << format_double(r.rolling_success) << ','
        << format_double(r.critic_loss) << ',' << format_double(r.actor_loss) << ','
        << format_double(r.demo_batch_fraction) << '\n';
  }
  if (!out) throw IoError("write_metrics_csv: write failed for " + path.string());
}

std::vector<EpisodeRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_metrics_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,", 0) != 0)
    throw IoError("read_metrics_csv: missing header in " + path.string());
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpisodeRecord r;
    char comma;
    if (!(ls >> r.episode >> comma >> r.env_steps >> comma >> r.train_steps >> comma >>
          r.success >> comma >> r.length >> comma >> r.rolling_success >> comma >>
          r.critic_loss >> comma >> r.actor_loss >> comma >> r.demo_batch_fraction))
      throw IoError("read_metrics_csv: malformed row in " + path.string());
    out.push_back(r);
  }
  return out;
}

void write_run_summary(const RunSummary& s, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_run_summary: cannot open " + path.string());
  out << "episodes = " << s.episodes << '\n'
      << "env_steps = " << s.env_steps << '\n'
      << "train_steps = " << s.train_steps << '\n'
      << "episodes_to_90 = " << s.episodes_to_90 << '\n'
      << "final_rolling = " << format_double(s.final_rolling) << '\n'
      << "mean_demo_fraction = " << format_double(s.mean_demo_fraction) << '\n'
      << "demo_mean_length = " << s.demo_mean_length << '\n';
}

RunSummary read_run_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_run_summary: cannot open " + path.string());
  RunSummary s;
  std::string key, eq;
  while (in >> key >> eq) {
    if (eq != "=") throw IoError("read_run_summary: malformed " + path.string());
    if (key == "episodes") in >> s.episodes;
    else if (key == "env_steps") in >> s.env_steps;
    else if (key == "train_steps") in >> s.train_steps;
    else if (key == "episodes_to_90") in >> s.episodes_to_90;
    else if (key == "final_rolling") in >> s.final_rolling;
    else if (key == "mean_demo_fraction") in >> s.mean_demo_fraction;
    else if (key == "demo_mean_length") in >> s.demo_mean_length;
    else throw IoError("read_run_summary: unknown key " + key);
    if (!in) throw IoError("read_run_summary: malformed value in " + path.string());
  }
  return s;
}

CurveSummary summarize_curves(const std::vector<std::vector<EpisodeRecord>>& seeds) {
  if (seeds.empty()) throw ContractViolation("summarize_curves: no seeds");
  CurveSummary cs;
  cs.n_seeds = int(seeds.size());
  size_t n = seeds.front().size();
  for (const auto& s : seeds) n = std::min(n, s.size());
  cs.mean_rolling.resize(n);
  cs.stderr_rolling.resize(n);
  for (size_t i = 0; i < n; ++i) {
    Scalar sum = 0;
    for (const auto& s : seeds) sum += s[i].rolling_success;
    const Scalar mean = sum / Scalar(seeds.size());
    Scalar var = 0;
    for (const auto& s : seeds) {
      const Scalar d = s[i].rolling_success - mean;
      var += d * d;
    }
    cs.mean_rolling[i] = mean;
    cs.stderr_rolling[i] =
        seeds.size() > 1
            ? std::sqrt(var / Scalar(seeds.size() - 1)) / std::sqrt(Scalar(seeds.size()))
            : Scalar(0);
  }
  for (const auto& s : seeds) {
    long to90 = -1;
    for (const EpisodeRecord& r : s)
      if (r.rolling_success >= Scalar(0.9)) {
        to90 = r.episode;
        break;
      }
    cs.episodes_to_90.push_back(to90);
    cs.final_rolling.push_back(s.empty() ? 0 : s.back().rolling_success);
    cs.mean_demo_fraction.push_back(0);  // filled from run summaries by run_suite
  }
  return cs;
}

void write_aggregate_csv(const CurveSummary& cs, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_aggregate_csv: cannot open " + path.string());
  out << "episode,mean_rolling_success,stderr_rolling_success\n";
  for (size_t i = 0; i < cs.mean_rolling.size(); ++i)
    out << i << ',' << format_double(cs.mean_rolling[i]) << ','
        << format_double(cs.stderr_rolling[i]) << '\n';
}

CurveSummary read_aggregate_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_aggregate_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,", 0) != 0)
    throw IoError("read_aggregate_csv: missing header in " + path.string());
  CurveSummary cs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long ep;
    char comma;
    Scalar mean, se;
    if (!(ls >> ep >> comma >> mean >> comma >> se))
      throw IoError("read_aggregate_csv: malformed row in " + path.string());
    cs.mean_rolling.push_back(mean);
    cs.stderr_rolling.push_back(se);
  }
  return cs;
}

SuiteResult run_suite(const ExperimentConfig& config, int parallelism) {
  config.run.validate();
  if (config.n_seeds < 1) throw ContractViolation("run_suite: n_seeds must be >= 1");
  SuiteResult result;
  result.directory = resolve_output_dir(config.output_dir);
  fs::create_directories(result.directory);
  {
    std::ofstream cfg(result.directory / "config.ini");
    cfg << serialize_config(config);
  }

  std::atomic<int> next_seed{0};
  std::atomic<bool> any_failed{false};
  std::mutex io_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next_seed.fetch_add(1);
      if (i >= config.n_seeds) return;
      const std::uint64_t seed = config.base_seed + std::uint64_t(i);
      const fs::path csv = result.directory / ("seed_" + std::to_string(seed) + ".csv");
      const fs::path summary =
          result.directory / ("seed_" + std::to_string(seed) + ".summary");
      if (fs::exists(summary) && fs::exists(csv)) continue;  // resume
      try {
        const MetricsLog log = run_training(config.run, seed);
        write_metrics_csv(log, csv);
        write_run_summary(log.summary, summary);
      } catch (const std::exception& e) {
        any_failed = true;
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cerr << "seed " << seed << " failed: " << e.what() << '\n';
      }
    }
  };
  const int workers = std::max(1, std::min(parallelism, config.n_seeds));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  std::vector<std::vector<EpisodeRecord>> seeds;
  std::vector<RunSummary> summaries;
  for (int i = 0; i < config.n_seeds; ++i) {
    const std::uint64_t seed = config.base_seed + std::uint64_t(i);
    const fs::path csv = result.directory / ("seed_" + std::to_string(seed) + ".csv");
    const fs::path summary =
        result.directory / ("seed_" + std::to_string(seed) + ".summary");
    if (!fs::exists(csv) || !fs::exists(summary)) {
      result.complete = false;
      continue;
    }
    result.seed_csvs.push_back(csv);
    seeds.push_back(read_metrics_csv(csv));
    summaries.push_back(read_run_summary(summary));
  }
  if (any_failed) result.complete = false;
  if (!seeds.empty()) {
    result.summary = summarize_curves(seeds);
    for (size_t i = 0; i < summaries.size(); ++i)
      result.summary.mean_demo_fraction[i] = summaries[i].mean_demo_fraction;
    write_aggregate_csv(result.summary, result.directory / "aggregate.csv");
    std::ofstream out(result.directory / "summary.txt");
    out << "preset = " << (config.preset_name.empty() ? "-" : config.preset_name) << '\n'
        << "complete = " << (result.complete ? "true" : "false") << '\n'
        << "n_seeds = " << result.summary.n_seeds << '\n';
    for (size_t i = 0; i < summaries.size(); ++i) {
      out << "seed_" << config.base_seed + i << "_episodes_to_90 = "
          << result.summary.episodes_to_90[i] << '\n'
          << "seed_" << config.base_seed + i << "_final_rolling = "
          << format_double(result.summary.final_rolling[i]) << '\n'
          << "seed_" << config.base_seed + i << "_mean_demo_fraction = "
          << format_double(result.summary.mean_demo_fraction[i]) << '\n';
    }
  } else {
    result.complete = false;
  }
  return result;
}

void plot_curves(const std::vector<CurveSummary>& curves,
                 const std::vector<std::string>& labels, const std::string& path) {
  if (curves.empty()) throw ContractViolation("plot_curves: empty curve list");
  std::vector<PlotCurve> pcs;
  for (size_t i = 0; i < curves.size(); ++i) {
    PlotCurve pc;
    pc.mean = curves[i].mean_rolling;
    pc.band = curves[i].stderr_rolling;
    pc.label = i < labels.size() ? labels[i] : ("curve " + std::to_string(i));
    pcs.push_back(std::move(pc));
  }
  write_svg_plot(pcs, "episode", "rolling success rate", path);
}

}  // namespace sacr2
