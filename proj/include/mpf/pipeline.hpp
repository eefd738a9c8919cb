#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpf/core.hpp"
#include "mpf/generation.hpp"
#include "mpf/mitigator.hpp"
#include "mpf/scoring.hpp"

namespace mpf::pipeline {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kDefaultPlaceholder = "X-University";

/// A pipeline stage failed. Carries the stage tag for diagnostics and
/// remembers whether the underlying cause was a validation problem.
class StageError : public std::runtime_error {
public:
  StageError(std::string stage, const std::string& message, bool validation = false)
      : std::runtime_error("[" + stage + "] " + message),
        stage_(std::move(stage)),
        validation_(validation) {}

  const std::string& stage() const { return stage_; }
  bool validation() const { return validation_; }

private:
  std::string stage_;
  bool validation_;
};

/// The optimizer failed to dominate the exhaustive grid oracle.
class OracleViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Counterfactual expansion
// ---------------------------------------------------------------------------

struct QuestionTemplate {
  std::string id;
  std::string text;  // must contain the placeholder at least once
  Split split = Split::decomposition;
};

/**
 * Expands |templates| x |concepts| questions by substituting the placeholder
 * with each concept name at every occurrence. Question ids take the form
 * "<template_id>::<concept>"; splits are inherited from the template.
 */
std::vector<Question> expand_counterfactual(
    const std::vector<QuestionTemplate>& templates,
    const std::vector<std::string>& concepts,
    const std::string& placeholder = std::string(kDefaultPlaceholder));

// ---------------------------------------------------------------------------
// Manifest and artifact files
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string benchmark_path;
  HyperParams hyperparams;
  scoring::ScorerConfig scorer;
  generation::BackendConfig backend;
  std::uint64_t rng_seed = 42;
  std::string out_dir = "out";
  generation::SuiteOptions suite;
  std::string aggregation_template_path;  // optional override
  Aggregation headline = Aggregation::averaged;
};

RunManifest load_manifest(const std::string& path);
std::string manifest_to_json(const RunManifest& manifest);

/// Loads and validates a benchmark file, expanding any question templates
/// against the declared concepts.
Benchmark load_benchmark(const std::string& path);
/// Writes a validated benchmark back out in expanded, canonical form.
void save_benchmark(const Benchmark& benchmark, const std::string& path);

struct WeightsFile {
  HyperParams hyperparams;
  std::vector<std::string> perspective_names;
  std::map<std::string, DecompositionResult> results;
};

void save_weights_file(const WeightsFile& file, const std::string& path);
WeightsFile load_weights_file(const std::string& path);

void save_records_file(const std::vector<GenerationRecord>& records,
                       const std::string& template_hash, const std::string& path);
std::vector<GenerationRecord> load_records_file(const std::string& path);

struct ScoreRow {
  std::string question_id;
  std::string concept_name;
  Split split = Split::decomposition;
  std::string system;  // perspective name, "normal", "mpf_sampled",
                       // "mpf_aggregated", or "baseline"
  double score = 0.0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;
};

void save_scores_file(const ScoreTable& table, const scoring::ScorerConfig& config,
                      const std::string& path);
ScoreTable load_scores_file(const std::string& path);
/// The bins/range block a scores file was built with.
scoring::ScorerConfig load_scores_scorer_config(const std::string& path);

struct ReportFile {
  std::uint64_t seed = 0;
  std::string config_hash;
  Aggregation headline = Aggregation::averaged;
  EvaluationReport averaged;
  EvaluationReport pooled;
};

void save_report_file(const ReportFile& report, const std::string& path);
ReportFile load_report_file(const std::string& path);

// ---------------------------------------------------------------------------
// Scoring records and evaluation
// ---------------------------------------------------------------------------

/// System label a record contributes to ("mpf_sampled", "mpf_aggregated",
/// "normal", or the chosen perspective's name).
std::string system_for_record(const GenerationRecord& record);

/**
 * Scores every record's final text plus the baseline response of every
 * question referenced by at least one record. Rows are ordered by
 * (system, question_id); baseline rows use system = "baseline".
 */
ScoreTable score_records(const Benchmark& benchmark,
                         const std::vector<GenerationRecord>& records,
                         const scoring::FeatureScorer& scorer);

/**
 * Builds the (split x system) metric grid from scored records. For each
 * cell, the system's score histogram is compared to the baseline histogram
 * over the same bins (KL), and calibration is the mean absolute per-question
 * difference between the system score and the baseline score. Per-concept
 * metrics are averaged uniformly (Aggregation::averaged) or all questions
 * are pooled across concepts (Aggregation::pooled).
 */
EvaluationReport evaluate(const ScoreTable& table, const scoring::ScorerConfig& config,
                          double smoothing_epsilon, Aggregation aggregation);

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

struct PipelineArtifacts {
  std::string weights_path;
  std::string records_path;
  std::string scores_path;
  std::string report_path;
  std::string run_log_path;
  ReportFile report;
};

/**
 * decompose -> generate -> score -> evaluate, writing one artifact file per
 * stage plus a reproducibility log into manifest.out_dir. Artifacts from
 * completed stages survive a later stage failure.
 */
PipelineArtifacts run_pipeline(const RunManifest& manifest);

}  // namespace mpf::pipeline
