#include "mpf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mpf/metrics.hpp"
#include "mpf/rand.hpp"

namespace mpf::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Counterfactual expansion
// ---------------------------------------------------------------------------

std::vector<Question> expand_counterfactual(
    const std::vector<QuestionTemplate>& templates,
    const std::vector<std::string>& concepts, const std::string& placeholder) {
  if (concepts.empty()) throw ValidationError("expansion needs at least one concept");
  if (placeholder.empty()) throw ValidationError("placeholder must be non-empty");

  std::vector<Question> out;
  std::set<std::string> ids;
  for (const auto& t : templates) {
    if (t.text.find(placeholder) == std::string::npos) {
      throw ValidationError("template '" + t.id + "' is missing the placeholder '" +
                            placeholder + "'");
    }
    for (const auto& concept_name : concepts) {
      Question q;
      q.id = t.id + "::" + concept_name;
      q.concept_name = concept_name;
      q.split = t.split;
      q.text = t.text;
      for (std::size_t pos = q.text.find(placeholder); pos != std::string::npos;
           pos = q.text.find(placeholder, pos + concept_name.size())) {
        q.text.replace(pos, placeholder.size(), concept_name);
      }
      if (!ids.insert(q.id).second) {
        throw ValidationError("expansion produced duplicate id '" + q.id + "'");
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring records
// ---------------------------------------------------------------------------

std::string system_for_record(const GenerationRecord& record) {
  switch (record.mode) {
    case GenerationMode::sampled: return "mpf_sampled";
    case GenerationMode::aggregated: return "mpf_aggregated";
    case GenerationMode::normal: return "normal";
    case GenerationMode::single_perspective: return record.chosen_perspectives.at(0);
  }
  throw ValidationError("invalid generation mode");
}

ScoreTable score_records(const Benchmark& benchmark,
                         const std::vector<GenerationRecord>& records,
                         const scoring::FeatureScorer& scorer) {
  ScoreTable table;
  std::set<std::string> baseline_needed;
  for (const auto& record : records) {
    const Question& q = benchmark.question(record.question_id);
    table.rows.push_back({q.id, q.concept_name, q.split, system_for_record(record),
                          scorer.score_text(record.final_text)});
    baseline_needed.insert(q.id);
  }
  for (const auto& qid : baseline_needed) {
    const Question& q = benchmark.question(qid);
    auto it = benchmark.baseline_responses().find(qid);
    if (it == benchmark.baseline_responses().end()) {
      throw ValidationError("missing baseline response for question '" + qid + "'");
    }
    table.rows.push_back(
        {q.id, q.concept_name, q.split, "baseline", scorer.score_text(it->second)});
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.system, a.question_id) < std::tie(b.system, b.question_id);
  });
  return table;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

struct CellInputs {
  std::vector<double> system_scores;
  std::vector<double> baseline_scores;
};

MetricCell cell_metrics(const CellInputs& in, const scoring::ScorerConfig& config,
                        double smoothing_epsilon) {
  const FeatureHistogram system_hist = scoring::build_histogram(in.system_scores, config);
  const FeatureHistogram baseline_hist =
      scoring::build_histogram(in.baseline_scores, config);
  MetricCell cell;
  cell.kl = std::max(0.0, metrics::kl_divergence(system_hist, baseline_hist,
                                                 smoothing_epsilon));
  double total = 0.0;
  for (std::size_t i = 0; i < in.system_scores.size(); ++i) {
    total += std::abs(in.system_scores[i] - in.baseline_scores[i]);
  }
  cell.calibration = total / static_cast<double>(in.system_scores.size());
  return cell;
}

}  // namespace

EvaluationReport evaluate(const ScoreTable& table, const scoring::ScorerConfig& config,
                          double smoothing_epsilon, Aggregation aggregation) {
  // baseline score per question, plus each question's (concept, split)
  std::map<std::string, double> baseline;
  std::map<std::string, std::pair<std::string, Split>> question_info;
  std::set<std::string> systems;
  std::set<Split> splits;
  for (const auto& row : table.rows) {
    question_info[row.question_id] = {row.concept_name, row.split};
    splits.insert(row.split);
    if (row.system == "baseline") {
      baseline[row.question_id] = row.score;
    } else {
      systems.insert(row.system);
    }
  }
  if (systems.empty()) throw ValidationError("score table has no system rows");
  for (Split split : {Split::decomposition, Split::validation}) {
    if (splits.count(split) == 0) {
      throw ValidationError("split '" + std::string(to_string(split)) +
                            "' has zero questions");
    }
  }

  EvaluationReport report;
  report.aggregation_mode = aggregation;

  for (const auto& system : systems) {
    // (split, concept) -> paired system/baseline scores, question-aligned
    std::map<std::pair<Split, std::string>, CellInputs> groups;
    for (const auto& row : table.rows) {
      if (row.system != system) continue;
      auto bit = baseline.find(row.question_id);
      if (bit == baseline.end()) {
        throw ValidationError("missing baseline score for question '" +
                              row.question_id + "'");
      }
      CellInputs& g = groups[{row.split, row.concept_name}];
      g.system_scores.push_back(row.score);
      g.baseline_scores.push_back(bit->second);
    }

    for (Split split : splits) {
      std::vector<MetricCell> per_concept;
      CellInputs pooled;
      for (const auto& [key, inputs] : groups) {
        if (key.first != split) continue;
        per_concept.push_back(cell_metrics(inputs, config, smoothing_epsilon));
        pooled.system_scores.insert(pooled.system_scores.end(),
                                    inputs.system_scores.begin(),
                                    inputs.system_scores.end());
        pooled.baseline_scores.insert(pooled.baseline_scores.end(),
                                      inputs.baseline_scores.begin(),
                                      inputs.baseline_scores.end());
      }
      if (per_concept.empty()) {
        throw ValidationError("system '" + system + "' has no scores for split '" +
                              std::string(to_string(split)) + "'");
      }

      MetricCell cell;
      if (aggregation == Aggregation::pooled) {
        cell = cell_metrics(pooled, config, smoothing_epsilon);
      } else {
        for (const auto& c : per_concept) {
          cell.kl += c.kl;
          cell.calibration += c.calibration;
        }
        cell.kl /= static_cast<double>(per_concept.size());
        cell.calibration /= static_cast<double>(per_concept.size());
      }
      report.cells[{std::string(to_string(split)), system}] = cell;
    }
  }

  report.validate();
  return report;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

template <typename F>
auto stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), /*validation=*/true);
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

PipelineArtifacts run_pipeline(const RunManifest& manifest) {
  PipelineArtifacts artifacts;

  // --- load ---------------------------------------------------------------
  struct Loaded {
    Benchmark benchmark;
    scoring::ScorerConfig scorer_config;
    std::unique_ptr<scoring::FeatureScorer> scorer;
    generation::AggregationPrompt aggregation;
    std::string config_hash;
  };
  Loaded loaded = stage("load", [&]() -> Loaded {
    Benchmark benchmark = load_benchmark(manifest.benchmark_path);
    scoring::ScorerConfig scorer_config = manifest.scorer;
    scorer_config.low = benchmark.score_low();
    scorer_config.high = benchmark.score_high();
    auto scorer = scoring::make_scorer(scorer_config);
    auto aggregation =
        manifest.aggregation_template_path.empty()
            ? generation::AggregationPrompt::defaults()
            : generation::AggregationPrompt::from_template_file(
                  manifest.aggregation_template_path);
    const std::uint64_t h = mix_seed(fnv1a64(manifest_to_json(manifest)),
                                     fnv1a64(file_bytes(manifest.benchmark_path)));
    fs::create_directories(manifest.out_dir);
    return Loaded{std::move(benchmark), scorer_config, std::move(scorer),
                  std::move(aggregation), hash_hex(h)};
  });

  const auto out = [&](const std::string& name) {
    return (fs::path(manifest.out_dir) / name).string();
  };
  artifacts.weights_path = out("weights.json");
  artifacts.records_path = out("records.json");
  artifacts.scores_path = out("scores.json");
  artifacts.report_path = out("report.json");
  artifacts.run_log_path = out("run_log.json");

  // --- decompose ----------------------------------------------------------
  HyperParams hp = manifest.hyperparams;
  hp.rng_seed = manifest.rng_seed;
  const auto decomposition = stage("decompose", [&] {
    const auto scored =
        scoring::score_benchmark(loaded.benchmark, *loaded.scorer, loaded.scorer_config);
    std::map<std::string, mitigator::ConceptData> data;
    for (const auto& [concept_name, sc] : scored) {
      data.emplace(concept_name,
                   mitigator::ConceptData{sc.perspective_histograms,
                                          sc.baseline_histogram, sc.decomposition});
    }
    auto results = mitigator::decompose_benchmark(loaded.benchmark, data, hp);
    WeightsFile file{hp, loaded.benchmark.perspectives().names(), results};
    save_weights_file(file, artifacts.weights_path);
    return results;
  });

  // --- generate -----------------------------------------------------------
  const auto records = stage("generate", [&] {
    std::map<std::string, Weights> weights;
    for (const auto& [concept_name, res] : decomposition) {
      weights.emplace(concept_name, Weights::simplex(res.weights));
    }
    auto backend =
        generation::make_backend(manifest.backend, loaded.benchmark, loaded.aggregation);
    generation::SuiteOptions options = manifest.suite;
    options.rng_seed = manifest.rng_seed;
    auto suite = generation::generate_suite(loaded.benchmark, weights, *backend,
                                            loaded.aggregation, options);
    if (!suite.failures.empty()) {
      std::ostringstream os;
      os << suite.failures.size() << " generation failure(s):";
      for (const auto& f : suite.failures) {
        os << "\n  [" << f.system << "] " << f.question_id << ": " << f.message;
      }
      throw std::runtime_error(os.str());
    }
    save_records_file(suite.records, loaded.aggregation.hash_hex(),
                      artifacts.records_path);
    return suite.records;
  });

  // --- score --------------------------------------------------------------
  const auto table = stage("score", [&] {
    auto t = score_records(loaded.benchmark, records, *loaded.scorer);
    save_scores_file(t, loaded.scorer_config, artifacts.scores_path);
    return t;
  });

  // --- evaluate -----------------------------------------------------------
  artifacts.report = stage("evaluate", [&] {
    ReportFile report;
    report.seed = manifest.rng_seed;
    report.config_hash = loaded.config_hash;
    report.headline = manifest.headline;
    report.averaged = evaluate(table, loaded.scorer_config,
                               hp.smoothing_epsilon, Aggregation::averaged);
    report.pooled = evaluate(table, loaded.scorer_config,
                             hp.smoothing_epsilon, Aggregation::pooled);
    save_report_file(report, artifacts.report_path);
    return report;
  });

  // --- reproducibility log --------------------------------------------------
  stage("finalize", [&] {
    nlohmann::ordered_json log;
    log["schema_version"] = 1;
    log["tool_version"] = std::string(kToolVersion);
    log["seed"] = manifest.rng_seed;
    log["config_hash"] = loaded.config_hash;
    log["benchmark_hash"] =
        hash_hex(fnv1a64(file_bytes(manifest.benchmark_path)));
    log["aggregation_template_hash"] = loaded.aggregation.hash_hex();
    log["stages"] = {"load", "decompose", "generate", "score", "evaluate"};
    log["artifacts"] = {fs::path(artifacts.weights_path).filename().string(),
                        fs::path(artifacts.records_path).filename().string(),
                        fs::path(artifacts.scores_path).filename().string(),
                        fs::path(artifacts.report_path).filename().string()};
    std::ofstream outf(artifacts.run_log_path, std::ios::binary | std::ios::trunc);
    outf << log.dump(2) << "\n";
    if (!outf) throw std::runtime_error("failed writing run log");
    return 0;
  });

  return artifacts;
}

}  // namespace mpf::pipeline
