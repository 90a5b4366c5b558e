// Pipeline driver: stage-by-stage runs with config-hash caching.
//
//   sleepdyn all --config run.json
//   sleepdyn embed --config run.json --stage-override diffusion.t=0.5
//   sleepdyn report --config run.json

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "sleepdyn/errors.hpp"
#include "sleepdyn/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void print_reports(const std::vector<sleepdyn::StageReport>& reports) {
  for (const sleepdyn::StageReport& r : reports) {
    std::printf("%-10s %s  wall %.2fs  peak-rss %ld KB\n",
                sleepdyn::stage_name(r.stage).c_str(),
                r.cache_hit ? "cache-hit" : "computed ", r.wall_seconds, r.peak_rss_kb);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sleep staging pipeline: EDF ingestion, scattering features, "
               "diffusion embedding, multiview fusion, SVM evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  long seed = -1;
  int threads = -1;
  app.add_option("--config", config_path, "pipeline config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--stage-override", overrides,
                 "dotted KEY=VALUE config override (repeatable)");
  app.add_option("--seed", seed, "evaluation sampling seed");
  app.add_option("--threads", threads, "worker thread count (0 = all cores)");

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"ingest", "parse EDF recordings and hypnograms into scored epochs"},
      {"features", "scattering features per epoch and channel"},
      {"embed", "per-channel diffusion embeddings"},
      {"fuse", "single/concat/multiview fusion of the embeddings"},
      {"train-eval", "leave-one-subject-out SVM evaluation"},
      {"export", "embedding and hypnogram CSV exports"},
      {"report", "metrics report JSON and confusion tables"},
  };
  for (const auto& [name, description] : stages) {
    app.add_subcommand(name, description);
  }
  CLI::App* all = app.add_subcommand("all", "run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    sleepdyn::PipelineConfig config = sleepdyn::PipelineConfig::from_file(config_path);
    for (const std::string& kv : overrides) config.apply_override(kv);
    if (seed >= 0) config.evaluation.seed = static_cast<std::uint64_t>(seed);
    if (threads >= 0) config.threads = threads;
    config.validate();

    std::vector<sleepdyn::StageReport> reports;
    if (all->parsed()) {
      reports = sleepdyn::run_all(config);
    } else {
      for (const auto& [name, description] : stages) {
        if (app.get_subcommand(name)->parsed()) {
          reports.push_back(
              sleepdyn::run_stage(sleepdyn::stage_from_name(name), config));
        }
      }
    }
    print_reports(reports);
    return 0;
  } catch (const sleepdyn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sleepdyn::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const sleepdyn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
