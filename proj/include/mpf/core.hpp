#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpf {

/// Raised when an input document, vector, or configuration violates a
/// structural invariant. Maps to exit code 1 in the CLI.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Perspectives
// ---------------------------------------------------------------------------

struct Perspective {
  std::string name;
  std::string system_prompt;
};

/**
 * Ordered set of perspectives. Declaration order is authoritative: every
 * weight vector in the system aligns to it by index.
 */
class PerspectiveRegistry {
public:
  explicit PerspectiveRegistry(std::vector<Perspective> perspectives);

  std::size_t size() const { return perspectives_.size(); }
  const Perspective& at(std::size_t i) const { return perspectives_.at(i); }
  const std::vector<Perspective>& all() const { return perspectives_; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

private:
  std::vector<Perspective> perspectives_;
};

/// The five built-in commentator perspectives, in canonical order:
/// optimist, realist, empathetic, cautious, critical.
PerspectiveRegistry default_perspectives();

/// HR-strategist persona used to produce hypothetical baseline responses.
/// It is not part of the fusion registry.
Perspective hr_baseline_persona();

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/**
 * Point on the probability simplex over n >= 2 perspectives.
 * Construction validates membership; use normalized() to project an
 * arbitrary non-negative vector first.
 */
class Weights {
public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates simplex membership: each value in [0,1], sum within 1e-9 of 1.
  static Weights simplex(std::vector<double> values);

  /// Maps any non-negative, non-zero vector onto the simplex. Idempotent.
  static Weights normalized(std::vector<double> values);

  /// Zeroes every entry below nonzero_epsilon and renormalizes.
  Weights floored(double nonzero_epsilon) const;

  std::span<const double> values() const { return values_; }
  const std::vector<double>& vec() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  friend bool operator==(const Weights&, const Weights&) = default;

private:
  explicit Weights(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Histograms and scores
// ---------------------------------------------------------------------------

/**
 * Binned, normalized distribution of feature scores.
 * bin_edges has b+1 strictly ascending entries; masses has b entries
 * summing to 1 within 1e-9.
 */
struct FeatureHistogram {
  std::vector<double> bin_edges;
  std::vector<double> masses;

  static FeatureHistogram create(std::vector<double> bin_edges,
                                 std::vector<double> masses);

  std::size_t bins() const { return masses.size(); }

  friend bool operator==(const FeatureHistogram&, const FeatureHistogram&) = default;
};

/// Edges of `bins` uniform bins over [low, high].
std::vector<double> uniform_bin_edges(double low, double high, int bins);

/**
 * Per-concept score matrix: one row per perspective (registry order), one
 * column per question, plus the per-question baseline scores. All scores
 * must lie inside the configured [low, high] range.
 */
class FeatureScores {
public:
  static FeatureScores create(std::string concept_name,
                              std::vector<std::string> question_ids,
                              std::vector<std::vector<double>> perspective_scores,
                              std::vector<double> baseline_scores,
                              double low = 0.0, double high = 1.0);

  const std::string& concept_name() const { return concept_name_; }
  const std::vector<std::string>& question_ids() const { return question_ids_; }
  std::size_t perspective_count() const { return perspective_scores_.size(); }
  std::size_t question_count() const { return question_ids_.size(); }
  double perspective_score(std::size_t i, std::size_t j) const {
    return perspective_scores_.at(i).at(j);
  }
  const std::vector<std::vector<double>>& matrix() const { return perspective_scores_; }
  const std::vector<double>& baseline() const { return baseline_scores_; }
  double low() const { return low_; }
  double high() const { return high_; }

private:
  std::string concept_name_;
  std::vector<std::string> question_ids_;
  std::vector<std::vector<double>> perspective_scores_;
  std::vector<double> baseline_scores_;
  double low_ = 0.0;
  double high_ = 1.0;
};

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

struct HyperParams {
  double alpha = 0.0;       // strength of the L2 pull toward uniform weights
  double beta = 1.0;        // strength of the sparsity penalty
  double lambda_kl = 0.2;   // weight of the KL term
  double lambda_cal = 0.8;  // weight of the calibration term

  double nonzero_epsilon = 1e-3;   // threshold defining a "nonzero" weight
  double smoothing_epsilon = 1e-9; // additive smoothing before KL

  int restarts = 8;
  int max_iterations = 1000;
  double tolerance = 1e-6;
  std::uint64_t rng_seed = 42;

  /// Throws ValidationError if the objective would be degenerate or the
  /// optimizer controls are out of range.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

enum class Split { decomposition, validation };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct Question {
  std::string id;
  std::string concept_name;
  std::string text;
  Split split = Split::decomposition;
};

/// Parsed but not yet validated benchmark file content.
struct BenchmarkDocument {
  std::vector<Perspective> perspectives;
  std::vector<std::string> concepts;
  std::vector<Question> questions;
  double score_low = 0.0;
  double score_high = 1.0;
  // question_id -> text
  std::map<std::string, std::string> baseline_responses;
  // perspective name -> question_id -> text
  std::map<std::string, std::map<std::string, std::string>> perspective_responses;
};

/**
 * Validated benchmark. Concepts and questions are held in lexicographic
 * order so identical documents always produce identical internal state.
 */
class Benchmark {
public:
  const PerspectiveRegistry& perspectives() const { return registry_; }
  const std::vector<std::string>& concepts() const { return concepts_; }
  const std::vector<Question>& questions() const { return questions_; }
  double score_low() const { return score_low_; }
  double score_high() const { return score_high_; }

  const std::map<std::string, std::string>& baseline_responses() const {
    return baseline_responses_;
  }
  const std::map<std::string, std::map<std::string, std::string>>&
  perspective_responses() const {
    return perspective_responses_;
  }

  const Question& question(std::string_view id) const;
  std::vector<const Question*> questions_for(std::string_view concept_name,
                                             Split split) const;

  friend Benchmark validate_benchmark(const BenchmarkDocument& doc);

private:
  Benchmark(PerspectiveRegistry registry) : registry_(std::move(registry)) {}

  PerspectiveRegistry registry_;
  std::vector<std::string> concepts_;
  std::vector<Question> questions_;
  double score_low_ = 0.0;
  double score_high_ = 1.0;
  std::map<std::string, std::string> baseline_responses_;
  std::map<std::string, std::map<std::string, std::string>> perspective_responses_;
};

/**
 * Checks every benchmark invariant (unique ids, known concept and
 * perspective references, non-empty question set) and normalizes concept
 * and question ordering lexicographically.
 */
Benchmark validate_benchmark(const BenchmarkDocument& doc);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Unscaled values of the four objective terms plus the scaled total.
struct ObjectiveBreakdown {
  double kl = 0.0;
  double calibration = 0.0;
  double l2 = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
};

struct DecompositionResult {
  std::string concept_name;
  std::vector<double> weights;   // simplex, epsilon-floored
  ObjectiveBreakdown breakdown;  // evaluated at `weights`
  bool converged = false;
  int iterations_used = 0;
  int restart_index = -1;  // -1 when a vertex/uniform polish point won

  double objective_value() const { return breakdown.total; }
};

enum class GenerationMode { sampled, aggregated, normal, single_perspective };

std::string_view to_string(GenerationMode m);
GenerationMode generation_mode_from_string(std::string_view s);

struct GenerationRecord {
  std::string question_id;
  GenerationMode mode = GenerationMode::normal;
  std::vector<std::string> chosen_perspectives;
  std::vector<std::string> sample_texts;  // k entries for aggregated, 1 for sampled
  std::string final_text;
  std::uint64_t rng_seed_used = 0;
  std::string template_hash;  // aggregation prompt hash, aggregated mode only

  /// Enforces the per-mode shape rules (sampled: one perspective, one
  /// sample; aggregated: k >= 1 samples plus a final text).
  void validate() const;
};

struct MetricCell {
  double kl = 0.0;
  double calibration = 0.0;
};

enum class Aggregation { averaged, pooled };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

/**
 * One (split x system) metric grid. `system` is a perspective name,
 * "normal", "mpf_sampled", or "mpf_aggregated". aggregation_mode records
 * whether per-concept metrics were averaged or pooled across concepts.
 */
struct EvaluationReport {
  Aggregation aggregation_mode = Aggregation::averaged;
  // (split, system) -> cell
  std::map<std::pair<std::string, std::string>, MetricCell> cells;

  void validate() const;  // all values finite and non-negative
};

}  // namespace mpf
