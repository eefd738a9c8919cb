// Command-line front end: decompose, generate, score, evaluate, sweep,
// run (full pipeline), and expand (counterfactual questions).
//
// Exit codes: 0 success, 1 validation error, 2 stage failure,
// 3 oracle-dominance violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mpf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mpf;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string benchmark_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string backend_kind;
};

pipeline::RunManifest effective_manifest(const CommonArgs& args) {
  pipeline::RunManifest manifest;
  if (!args.config_path.empty()) manifest = pipeline::load_manifest(args.config_path);
  if (!args.benchmark_path.empty()) manifest.benchmark_path = args.benchmark_path;
  if (args.seed_set) {
    manifest.rng_seed = args.seed;
    manifest.hyperparams.rng_seed = args.seed;
    manifest.suite.rng_seed = args.seed;
  }
  if (!args.out_dir.empty()) manifest.out_dir = args.out_dir;
  if (args.backend_kind == "mock") {
    manifest.backend.kind = generation::BackendConfig::Kind::mock;
  } else if (args.backend_kind == "http") {
    manifest.backend.kind = generation::BackendConfig::Kind::http;
  }
  if (manifest.benchmark_path.empty()) {
    throw ValidationError("no benchmark file given (use --benchmark or --config)");
  }
  return manifest;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_backend = false) {
  cmd->add_option("--config", args.config_path, "Run manifest supplying defaults");
  cmd->add_option("--benchmark", args.benchmark_path, "Benchmark file");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "RNG seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  if (with_backend) {
    cmd->add_option("--backend", args.backend_kind, "Backend kind: mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
  }
}

std::map<std::string, mitigator::ConceptData> concept_data_for(
    const Benchmark& benchmark, const pipeline::RunManifest& manifest,
    scoring::ScorerConfig& scorer_config) {
  scorer_config = manifest.scorer;
  scorer_config.low = benchmark.score_low();
  scorer_config.high = benchmark.score_high();
  const auto scorer = scoring::make_scorer(scorer_config);
  const auto scored = scoring::score_benchmark(benchmark, *scorer, scorer_config);
  std::map<std::string, mitigator::ConceptData> data;
  for (const auto& [concept_name, sc] : scored) {
    data.emplace(concept_name,
                 mitigator::ConceptData{sc.perspective_histograms, sc.baseline_histogram,
                                        sc.decomposition});
  }
  return data;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << content;
}

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-perspective fusion: decompose baselines into perspective "
               "weights and generate aligned responses"};
  app.require_subcommand(1);

  // --- decompose ------------------------------------------------------------
  auto decompose_args = std::make_shared<CommonArgs>();
  auto oracle_check = std::make_shared<bool>(false);
  auto oracle_step = std::make_shared<double>(0.01);
  auto* decompose = app.add_subcommand("decompose", "Fit per-concept perspective weights");
  add_common(decompose, *decompose_args);
  decompose->add_flag("--oracle-check", *oracle_check,
                      "Also run the exhaustive grid oracle and require dominance");
  decompose->add_option("--oracle-step", *oracle_step, "Oracle lattice step");
  decompose->callback([=] {
    const auto manifest = effective_manifest(*decompose_args);
    const Benchmark benchmark = pipeline::load_benchmark(manifest.benchmark_path);
    scoring::ScorerConfig scorer_config;
    const auto data = concept_data_for(benchmark, manifest, scorer_config);
    HyperParams hp = manifest.hyperparams;
    hp.rng_seed = manifest.rng_seed;
    const auto results = mitigator::decompose_benchmark(benchmark, data, hp);

    fs::create_directories(manifest.out_dir);
    const std::string path = (fs::path(manifest.out_dir) / "weights.json").string();
    pipeline::save_weights_file({hp, benchmark.perspectives().names(), results}, path);

    for (const auto& [concept_name, res] : results) {
      std::printf("%s: objective %.6f (kl %.6f, cal %.6f)%s\n", concept_name.c_str(),
                  res.breakdown.total, res.breakdown.kl, res.breakdown.calibration,
                  res.converged ? "" : " [not converged]");
    }
    if (*oracle_check) {
      for (const auto& [concept_name, res] : results) {
        const auto& d = data.at(concept_name);
        const auto oracle = mitigator::grid_search_oracle(d.components, d.target,
                                                          d.scores, hp, *oracle_step);
        if (res.breakdown.total > oracle.objective + 1e-3) {
          std::ostringstream os;
          os << "concept '" << concept_name << "': optimizer " << res.breakdown.total
             << " exceeds oracle " << oracle.objective << " + 1e-3";
          throw pipeline::OracleViolation(os.str());
        }
      }
      std::printf("oracle check passed for %zu concept(s)\n", results.size());
    }
    std::printf("wrote %s\n", path.c_str());
  });

  // --- generate ---------------------------------------------------------------
  auto generate_args = std::make_shared<CommonArgs>();
  auto weights_path = std::make_shared<std::string>();
  auto fixture_path = std::make_shared<std::string>();
  auto modes_csv = std::make_shared<std::string>();
  auto k_samples = std::make_shared<int>(0);
  auto* generate = app.add_subcommand("generate", "Generate responses with fitted weights");
  add_common(generate, *generate_args, /*with_backend=*/true);
  generate->add_option("--weights", *weights_path, "Weights file from decompose");
  generate->add_option("--fixture", *fixture_path, "Mock backend fixture file");
  generate->add_option("--modes", *modes_csv,
                       "Comma list: sampled,aggregated,normal,perspectives");
  generate->add_option("--k", *k_samples, "Samples per aggregated response");
  generate->callback([=] {
    auto manifest = effective_manifest(*generate_args);
    if (!fixture_path->empty()) manifest.backend.fixture_path = *fixture_path;
    if (*k_samples > 0) manifest.suite.k_samples = *k_samples;
    if (!modes_csv->empty()) {
      manifest.suite.modes.clear();
      std::istringstream in(*modes_csv);
      std::string name;
      while (std::getline(in, name, ',')) {
        if (name == "perspectives") {
          manifest.suite.modes.insert(GenerationMode::single_perspective);
        } else {
          manifest.suite.modes.insert(generation_mode_from_string(name));
        }
      }
    }

    const Benchmark benchmark = pipeline::load_benchmark(manifest.benchmark_path);
    const std::string wpath =
        weights_path->empty() ? (fs::path(manifest.out_dir) / "weights.json").string()
                              : *weights_path;
    const auto weights_file = pipeline::load_weights_file(wpath);
    std::map<std::string, Weights> weights;
    for (const auto& [concept_name, res] : weights_file.results) {
      weights.emplace(concept_name, Weights::simplex(res.weights));
    }

    const auto aggregation =
        manifest.aggregation_template_path.empty()
            ? generation::AggregationPrompt::defaults()
            : generation::AggregationPrompt::from_template_file(
                  manifest.aggregation_template_path);
    auto backend = generation::make_backend(manifest.backend, benchmark, aggregation);
    generation::SuiteOptions options = manifest.suite;
    options.rng_seed = manifest.rng_seed;
    const auto suite =
        generation::generate_suite(benchmark, weights, *backend, aggregation, options);
    for (const auto& f : suite.failures) {
      std::fprintf(stderr, "FAILED [%s] %s: %s\n", f.system.c_str(),
                   f.question_id.c_str(), f.message.c_str());
    }

    fs::create_directories(manifest.out_dir);
    const std::string rpath = (fs::path(manifest.out_dir) / "records.json").string();
    pipeline::save_records_file(suite.records, aggregation.hash_hex(), rpath);
    std::printf("wrote %zu records to %s\n", suite.records.size(), rpath.c_str());
    if (!suite.failures.empty()) {
      throw pipeline::StageError("generate", std::to_string(suite.failures.size()) +
                                                 " generation failure(s)");
    }
  });

  // --- score ------------------------------------------------------------------
  auto score_args = std::make_shared<CommonArgs>();
  auto records_path = std::make_shared<std::string>();
  auto* score = app.add_subcommand("score", "Score generated records and baselines");
  add_common(score, *score_args);
  score->add_option("--records", *records_path, "Records file from generate");
  score->callback([=] {
    const auto manifest = effective_manifest(*score_args);
    const Benchmark benchmark = pipeline::load_benchmark(manifest.benchmark_path);
    scoring::ScorerConfig scorer_config = manifest.scorer;
    scorer_config.low = benchmark.score_low();
    scorer_config.high = benchmark.score_high();
    const auto scorer = scoring::make_scorer(scorer_config);

    const std::string rpath =
        records_path->empty() ? (fs::path(manifest.out_dir) / "records.json").string()
                              : *records_path;
    const auto records = pipeline::load_records_file(rpath);
    const auto table = pipeline::score_records(benchmark, records, *scorer);

    fs::create_directories(manifest.out_dir);
    const std::string spath = (fs::path(manifest.out_dir) / "scores.json").string();
    pipeline::save_scores_file(table, scorer_config, spath);
    std::printf("wrote %zu score rows to %s\n", table.rows.size(), spath.c_str());
  });

  // --- evaluate -----------------------------------------------------------------
  auto eval_out = std::make_shared<std::string>("out");
  auto scores_path = std::make_shared<std::string>();
  auto headline = std::make_shared<std::string>("averaged");
  auto smoothing = std::make_shared<double>(1e-9);
  auto* evaluate = app.add_subcommand("evaluate", "Build the metric report from scores");
  evaluate->add_option("--scores", *scores_path, "Scores file from score");
  evaluate->add_option("--out", *eval_out, "Output directory");
  evaluate->add_option("--headline", *headline, "averaged or pooled")
      ->check(CLI::IsMember({"averaged", "pooled"}));
  evaluate->add_option("--smoothing", *smoothing, "KL smoothing epsilon");
  evaluate->callback([=] {
    const std::string spath =
        scores_path->empty() ? (fs::path(*eval_out) / "scores.json").string()
                             : *scores_path;
    const auto table = pipeline::load_scores_file(spath);
    const auto config = pipeline::load_scores_scorer_config(spath);

    pipeline::ReportFile report;
    report.headline = aggregation_from_string(*headline);
    report.averaged = pipeline::evaluate(table, config, *smoothing, Aggregation::averaged);
    report.pooled = pipeline::evaluate(table, config, *smoothing, Aggregation::pooled);

    fs::create_directories(*eval_out);
    const std::string rpath = (fs::path(*eval_out) / "report.json").string();
    pipeline::save_report_file(report, rpath);

    const auto& cells = report.headline == Aggregation::pooled ? report.pooled.cells
                                                               : report.averaged.cells;
    for (const auto& [key, cell] : cells) {
      std::printf("%-14s %-16s kl %8.4f  calibration %8.4f\n", key.first.c_str(),
                  key.second.c_str(), cell.kl, cell.calibration);
    }
    std::printf("wrote %s\n", rpath.c_str());
  });

  // --- sweep ---------------------------------------------------------------------
  auto sweep_args = std::make_shared<CommonArgs>();
  auto alphas_csv = std::make_shared<std::string>();
  auto betas_csv = std::make_shared<std::string>();
  auto lambdas_csv = std::make_shared<std::string>();
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid-search the objective strengths");
  add_common(sweep_cmd, *sweep_args);
  sweep_cmd->add_option("--alphas", *alphas_csv, "Comma list of alpha values");
  sweep_cmd->add_option("--betas", *betas_csv, "Comma list of beta values");
  sweep_cmd->add_option("--lambdas", *lambdas_csv,
                        "Comma list of kl:cal pairs, e.g. 0.2:0.8,0.5:0.5");
  sweep_cmd->callback([=] {
    const auto manifest = effective_manifest(*sweep_args);
    const Benchmark benchmark = pipeline::load_benchmark(manifest.benchmark_path);
    scoring::ScorerConfig scorer_config;
    const auto data = concept_data_for(benchmark, manifest, scorer_config);

    mitigator::SweepGrid grid = mitigator::SweepGrid::defaults();
    if (!alphas_csv->empty()) grid.alphas = parse_reals(*alphas_csv);
    if (!betas_csv->empty()) grid.betas = parse_reals(*betas_csv);
    if (!lambdas_csv->empty()) {
      grid.lambda_pairs.clear();
      std::istringstream in(*lambdas_csv);
      std::string pair;
      while (std::getline(in, pair, ',')) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) {
          throw ValidationError("lambda pairs must look like kl:cal");
        }
        grid.lambda_pairs.emplace_back(std::stod(pair.substr(0, colon)),
                                       std::stod(pair.substr(colon + 1)));
      }
    }

    HyperParams hp = manifest.hyperparams;
    hp.rng_seed = manifest.rng_seed;
    const auto rows = mitigator::sweep(benchmark, data, grid, hp);

    fs::create_directories(manifest.out_dir);
    const std::string path = (fs::path(manifest.out_dir) / "sweep.tsv").string();
    write_text(path, mitigator::sweep_table(rows, benchmark.perspectives()));
    std::printf("wrote %zu grid rows to %s\n", rows.size(), path.c_str());
  });

  // --- run -------------------------------------------------------------------------
  auto run_args = std::make_shared<CommonArgs>();
  auto* run = app.add_subcommand("run", "Full pipeline: decompose, generate, score, evaluate");
  add_common(run, *run_args, /*with_backend=*/true);
  run->callback([=] {
    if (run_args->config_path.empty()) {
      throw ValidationError("run needs --config <manifest>");
    }
    auto manifest = pipeline::load_manifest(run_args->config_path);
    if (!run_args->benchmark_path.empty()) manifest.benchmark_path = run_args->benchmark_path;
    if (run_args->seed_set) {
      manifest.rng_seed = run_args->seed;
      manifest.hyperparams.rng_seed = run_args->seed;
      manifest.suite.rng_seed = run_args->seed;
    }
    if (run_args->out_dir != "out") manifest.out_dir = run_args->out_dir;
    if (run_args->backend_kind == "mock") {
      manifest.backend.kind = generation::BackendConfig::Kind::mock;
    } else if (run_args->backend_kind == "http") {
      manifest.backend.kind = generation::BackendConfig::Kind::http;
    }

    const auto artifacts = pipeline::run_pipeline(manifest);
    const auto& report = artifacts.report;
    const auto& cells = report.headline == Aggregation::pooled ? report.pooled.cells
                                                               : report.averaged.cells;
    for (const auto& [key, cell] : cells) {
      std::printf("%-14s %-16s kl %8.4f  calibration %8.4f\n", key.first.c_str(),
                  key.second.c_str(), cell.kl, cell.calibration);
    }
    std::printf("artifacts in %s\n", manifest.out_dir.c_str());
  });

  // --- expand ------------------------------------------------------------------------
  auto expand_in = std::make_shared<std::string>();
  auto expand_out = std::make_shared<std::string>();
  auto* expand = app.add_subcommand("expand", "Expand question templates per concept");
  expand->add_option("--benchmark", *expand_in, "Benchmark file with templates")->required();
  expand->add_option("--out-file", *expand_out, "Expanded benchmark path")->required();
  expand->callback([=] {
    const Benchmark benchmark = pipeline::load_benchmark(*expand_in);
    pipeline::save_benchmark(benchmark, *expand_out);
    std::printf("wrote %zu questions to %s\n", benchmark.questions().size(),
                expand_out->c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const pipeline::OracleViolation& e) {
    std::fprintf(stderr, "oracle violation: %s\n", e.what());
    return 3;
  } catch (const pipeline::StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.validation() ? 1 : 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
