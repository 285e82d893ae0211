// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

// apisync <stage|all> --config <file> [--seed N] [--resume]

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "apisync/pipeline.hpp"

namespace {

void report(const apisync::StageResult& r) {
  std::string counts;
  for (const auto& [k, v] : r.manifest.counts) {
    if (!counts.empty()) counts += "  ";
    counts += k + "=" + std::to_string(v);
  }
  std::printf("%-11s %-10s %s\n", std::string(apisync::to_string(r.stage)).c_str(),
              r.up_to_date ? "up-to-date" : "done", counts.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"apisync: mine API update pairs and build version-aware benchmarks"};
  std::string stage;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  app.add_option("stage", stage,
                 "extract|diff|plan|fetch|locate|synthesize|build|evaluate|all")
      ->required();
  app.add_option("--config", config_path, "pipeline config (JSON)")->required();
  app.add_option("--seed", seed, "override the configured seed");
  app.add_flag("--resume", resume, "continue an interrupted synthesize stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto cfg = apisync::PipelineConfig::load(config_path);
    apisync::RunOptions opts;
    opts.resume = resume;
    opts.seed = seed;
    if (stage != "all") apisync::stage_from_string(stage);  // reject typos before locking

    apisync::Pipeline pipeline(std::move(cfg), std::move(opts));
    std::vector<apisync::Stage> stages;
    if (stage == "all") {
      stages.assign(apisync::kAllStages.begin(), apisync::kAllStages.end());
    } else {
      stages.push_back(apisync::stage_from_string(stage));
    }
    for (auto s : stages) {
      auto result = pipeline.run_stage(s);
      report(result);
      if (s == apisync::Stage::Evaluate) {
        std::cout << apisync::io::read_file(pipeline.config().stage_dir(s) / "summary.txt");
      }
    }
    return 0;
  } catch (const apisync::Error& e) {
    std::cerr << "apisync: " << e.what() << "\n";
    return apisync::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "apisync: " << e.what() << "\n";
    return 1;
  }
}
